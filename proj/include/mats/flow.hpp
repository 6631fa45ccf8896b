#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "mats/expr.hpp"
#include "mats/morse.hpp"
#include "mats/skeleton.hpp"
#include "mats/tolerances.hpp"

namespace mats {

enum class FlowTerminal { ReachedCritical, ExitedRegion, TimeExhausted, StepUnderflow };

struct Trajectory {
    std::vector<double> times;
    std::vector<Vec> points;  // unwrapped (covering space) coordinates
    FlowTerminal terminal = FlowTerminal::TimeExhausted;
    std::string captured_id;  // critical point id when terminal == ReachedCritical
    Vec exit_point;           // boundary point when terminal == ExitedRegion

    const Vec& back() const { return points.back(); }
    double duration() const { return times.empty() ? 0.0 : times.back() - times.front(); }
};

/// Eigenspace chart of the stable or unstable subspace at a critical point.
struct InvariantManifoldChart {
    std::string cp_id;
    bool unstable = true;
    Mat basis;      // columns: orthonormal eigenvectors of matching sign
    Vec eigenvalues;  // matching entries
    double radius = 0.0;  // validity radius of the linearisation
};

struct FlowOptions {
    double t_max = 1e3;
    int max_steps = 200000;
    /// Critical points eligible for capture, with their linearisation radii.
    const std::vector<CriticalPoint>* capture_set = nullptr;
    double capture_radius = 0.0;  // 0 means per-point radius from the chart bound
    bool record_samples = true;
};

/// Integrate dx/dtau = dir * grad f with adaptive Dormand-Prince 4(5).
/// Terminates on capture (|grad f| below tol.capture inside the
/// linearisation radius of a capture-set point), region exit, t_max, or
/// step underflow.
Trajectory integrate_flow(const Expr& field, const Domain& region, const Vec& x0, double dir,
                          const Tolerances& tol, const FlowOptions& opts = {});

/// Flow map x0 -> x(T) together with its derivative dx(T)/dx0 obtained from
/// the variational equation. No capture logic; exact-time endpoint.
struct FlowJet {
    Vec x;
    Mat dx_dx0;
    bool ok = true;  // false on step underflow or domain error
};
FlowJet flow_map_with_jacobian(const Expr& field, const Domain& region, const Vec& x0, double dir,
                               double T, const Tolerances& tol);

/// Eigen-decomposition chart at a critical point. The radius is the largest
/// delta with quadratic remainder below 10% of the linear term.
InvariantManifoldChart invariant_chart(const Expr& field, const CriticalPoint& cp, bool unstable,
                                       const Tolerances& tol);

/// Trajectory leaving cp along the given unstable direction at offset
/// eps_off, flowing forward (dir = +1 relative to the field).
Trajectory shoot_unstable(const Expr& field, const Domain& region, const CriticalPoint& cp,
                          const InvariantManifoldChart& chart, const Vec& direction, double eps_off,
                          const Tolerances& tol, const FlowOptions& opts = {});

/// Radius where the quadratic remainder of grad f is under 10% of the
/// linear term at this critical point.
double linearisation_radius(const Expr& field, const CriticalPoint& cp);

}  // namespace mats
