#pragma once

#include <string>
#include <vector>

#include "mats/expr.hpp"
#include "mats/skeleton.hpp"
#include "mats/tolerances.hpp"

namespace mats {

/// Nondegenerate critical point of some f_ij, a morphism generator.
struct CriticalPoint {
    Vec location;
    int index = 0;  // Morse index: negative Hessian eigenvalues
    std::vector<double> hessian_eigenvalues;  // ascending
    double value = 0.0;
    std::string id;  // stable within one critical set, "c0", "c1", ...
};

class DegeneracyError : public std::runtime_error {
public:
    explicit DegeneracyError(std::string msg) : std::runtime_error(std::move(msg)) {}
};

/// Number of negative eigenvalues of a symmetric matrix. Throws
/// DegeneracyError when an eigenvalue sits within tol_nondegen of zero.
int morse_index(const Mat& hessian, double tol_nondegen);

/// Cohomological degree of a generator: n - mu.
inline int degree(const CriticalPoint& cp, int n) { return n - cp.index; }

struct CriticalPointDiagnostics {
    int newton_runs = 0;
    int converged = 0;
    std::vector<Vec> suspect_cells;  // sign-change cells where Newton failed
    bool complete = true;            // audit verdict
};

/// All critical points of the field over the region interior. Multistart
/// damped Newton over a deterministic grid, deduplicated, sorted by
/// lexicographic location. Completeness audited by a sign-change scan in
/// dimension 1 and a gradient-sign cell scan in dimension 2; best effort
/// above that.
std::vector<CriticalPoint> find_critical_points(const Expr& field, const Domain& region,
                                                const Tolerances& tol,
                                                CriticalPointDiagnostics* diag = nullptr);

/// Sum of (-1)^mu; equals the Euler characteristic on closed regions.
int euler_characteristic_sum(const std::vector<CriticalPoint>& cps);

}  // namespace mats
