#pragma once

#include <optional>
#include <string>
#include <vector>

#include "mats/expr.hpp"
#include "mats/tolerances.hpp"

namespace mats {

/// Region carrying a branch or an overlap. Periodic kinds (circle, torus)
/// have no boundary; interval, box and sublevel kinds do.
struct Domain {
    enum class Kind { Interval, Circle, Box, Torus, Sublevel };

    Kind kind = Kind::Interval;
    int dim = 1;
    std::vector<double> lo, hi;    // interval/box bounds
    std::vector<double> periods;   // circle/torus
    Expr level;                    // sublevel cut function
    double level_c = 0.0;          // sublevel threshold: region = {level <= c}

    static Domain interval(double a, double b);
    static Domain circle(double period);
    static Domain box(const std::vector<double>& bounds);  // a1,b1,a2,b2,...
    static Domain torus(const std::vector<double>& periods);
    static Domain sublevel(Expr h, double c, int dim);

    bool periodic() const { return kind == Kind::Circle || kind == Kind::Torus; }
    bool has_boundary() const { return !periodic(); }

    bool contains(const Vec& x, double margin = 0.0) const;
    /// Euclidean distance to the boundary; +inf for periodic kinds.
    double boundary_distance(const Vec& x) const;
    /// Wrap periodic coordinates into the fundamental window [0, period).
    Vec wrap(const Vec& x) const;
    /// Signed shortest difference a-b respecting periodicity.
    Vec diff(const Vec& a, const Vec& b) const;
    /// Deterministic dense grid of interior points, k per axis.
    std::vector<Vec> interior_grid(int k) const;
    /// Deterministic sample of boundary points, k per boundary dimension.
    std::vector<Vec> boundary_grid(int k) const;
    /// Outward normal direction at a boundary point (unnormalised gradient of
    /// the active constraint). Zero vector for periodic kinds.
    Vec outward_normal(const Vec& x) const;

    std::string describe() const;
};

struct Branch {
    std::string name;
    Domain domain;
    Expr f;
    std::string f_source;
};

enum class OverlapSide { All, Neg, Pos };

struct Overlap {
    std::string branch_i, branch_j;
    Domain region;
    Expr h;
    std::string h_source;
    OverlapSide side = OverlapSide::All;
};

struct Query {
    std::vector<std::string> objects;  // f0, f1, ..., fN
};

struct SkeletonSpec {
    int dim = 1;
    std::vector<Branch> branches;
    std::vector<Overlap> overlaps;
    std::vector<Query> queries;
    std::string source_text;

    const Branch& branch(const std::string& name) const;
    int branch_index(const std::string& name) const;
    /// Overlap record for the unordered pair, if declared.
    const Overlap* find_overlap(const std::string& a, const std::string& b) const;
};

class ConfigError : public std::runtime_error {
public:
    ConfigError(std::string msg, int line)
        : std::runtime_error("line " + std::to_string(line) + ": " + msg), line_(line) {}
    int line() const { return line_; }

private:
    int line_;
};

/// Parse the line-oriented config format. Throws ConfigError on malformed
/// input, dangling branch references or dimension mismatches.
SkeletonSpec load_spec(const std::string& config_text);
SkeletonSpec load_spec_file(const std::string& path);

/// Canonical text form; load_spec(serialize(spec)) reproduces the spec.
std::string serialize(const SkeletonSpec& spec);

/// f_j - f_i on the overlap region of (i, j). Throws if the overlap is
/// missing or i == j.
Expr field_fij(const SkeletonSpec& spec, const std::string& i, const std::string& j);

struct GenericityIssue {
    std::string check;   // nondegenerate | interior | boundary | collision | domain
    std::string pair;    // "Li/Lj"
    std::string detail;
    Vec witness;
};

struct GenericityReport {
    bool pass = true;
    int pairs_checked = 0;
    int critical_points_seen = 0;
    std::vector<GenericityIssue> issues;
};

/// Check the Morse and boundary-transversality conditions for every ordered
/// overlap pair. Returns a failing report rather than throwing, except for
/// evaluation domain errors.
GenericityReport validate_genericity(const SkeletonSpec& spec, const Tolerances& tol);

}  // namespace mats
