#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mats/flow.hpp"
#include "mats/morse.hpp"
#include "mats/ribbon.hpp"
#include "mats/skeleton.hpp"

namespace mats {

/// Object tuple f_0..f_N with generators x_0..x_N. Entry k < N is a critical
/// point of f_{k,k+1}; the last entry is a critical point of f_{0N}. Cyclic
/// bookkeeping treats marked point k with the field g_k = f_{k+1 mod M} - f_k,
/// so the output's effective index is n - mu.
struct BoundaryData {
    std::vector<std::string> objects;       // N+1 names
    std::vector<CriticalPoint> generators;  // N+1 points, indices as stored per pair
    std::vector<int> mu_effective;          // cyclic indices, length N+1

    int marked_points() const { return static_cast<int>(generators.size()); }
    int inputs() const { return marked_points() - 1; }
};

/// Ind = sum(mu) - (M-1) n + (M-3) over the cyclic index list.
int compute_index(const std::vector<int>& mu_cyclic, int n);
int compute_index(const BoundaryData& bd, int n);

/// Assemble boundary data from generator ids ("c0", "c1", ...) per pair.
/// Critical sets are recomputed per ordered pair; ids match hom_basis order.
BoundaryData make_boundary_data(const SkeletonSpec& spec, const std::vector<std::string>& objects,
                                const std::vector<std::string>& input_ids,
                                const std::string& output_id, const Tolerances& tol);

struct SolvedSegment {
    std::string from_branch, to_branch;  // field = f(to) - f(from)
    Expr field;
    const Overlap* overlap = nullptr;
    double time = 0.0;
    Vec start, end;
    int original_leg = -1;
    bool forward = true;  // traversal sense of the original leg
};

struct SolvedChain {
    int endpoint_a = -1, endpoint_b = -1;    // original vertex ids
    std::vector<int> pin_labels;             // 1-based marked labels at junctions
    std::vector<SolvedSegment> segments;
};

struct GradientTree {
    std::string bracketing;
    int marked = 0;
    std::vector<int> exceptional_labels;     // 1-based
    std::vector<SolvedChain> chains;
    std::map<int, Vec> vertex_positions;     // surviving internal vertex id -> position
    std::map<int, double> leg_lengths;       // original internal leg id -> flow length
    std::vector<int> shoot_signs;            // discrete direction choices, solver order
    double residual = 0.0;
};

struct RigidityCertificate {
    int index = 0;
    double smallest_singular = 0.0;
    double isolation_radius = 0.0;
    bool certified = false;
};

struct SolveResult {
    std::vector<GradientTree> trees;
    std::vector<RigidityCertificate> certificates;
    std::vector<std::string> diagnostics;
    long count() const { return static_cast<long>(trees.size()); }
};

/// Find all rigid gradient trees for the boundary data. Requires Ind = 0.
/// Marked points with effective index 0 collapse to pass-through junctions
/// (their external legs are single points); the reduced matching system is
/// solved by damped Newton from a deterministic multistart stream.
SolveResult solve_rigid_trees(const SkeletonSpec& spec, const BoundaryData& bd,
                              const Tolerances& tol, std::uint64_t seed = 1);

/// Exact 1d count by interval combinatorics: monotone arcs between critical
/// points assigned to chain segments, junctions pinned at the exceptional
/// generators. Independent of the Newton path.
long brute_force_count_1d(const SkeletonSpec& spec, const BoundaryData& bd, const Tolerances& tol,
                          std::vector<std::string>* descriptions = nullptr);

struct VerifyReport {
    bool pass = false;
    double max_vertex_mismatch = 0.0;
    double max_flow_residual = 0.0;
    double max_endpoint_distance = 0.0;
    std::vector<std::string> notes;
};

/// Re-integrate every segment at a tightened tolerance and measure station
/// mismatches, monotonicity and endpoint convergence.
VerifyReport verify_tree(const SkeletonSpec& spec, const GradientTree& tree, double tol_check,
                         const Tolerances& tol);

}  // namespace mats
