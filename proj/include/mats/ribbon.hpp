#pragma once

#include <string>
#include <vector>

namespace mats {

/// Planar tree with cyclically ordered external vertices P_1..P_N and
/// 3-valent internal vertices. Vertex ids: 0..N-1 external (id k is
/// P_{k+1}), then N..2N-3 internal. Disk regions are labelled 1..N with
/// D_i between P_{i-1} and P_i.
struct RibbonTree {
    int n_external = 0;
    int n_internal = 0;

    struct Leg {
        int a = -1, b = -1;
        // Region label on the right of the directed traversals a->b and b->a.
        int right_ab = 0, right_ba = 0;
    };
    std::vector<Leg> legs;
    std::vector<std::vector<int>> rotation;  // ccw incident leg ids per vertex
    std::string bracketing;                  // canonical form rooted at P_1

    int vertex_count() const { return n_external + n_internal; }
    bool is_external(int v) const { return v < n_external; }
    /// {right_ab, right_ba} as an unordered label set.
    std::vector<int> leg_labels(int leg) const { return {legs[leg].right_ab, legs[leg].right_ba}; }
    std::vector<int> vertex_labels(int v) const;
    /// Leg incident to external vertex P_label (1-based).
    int external_leg(int label) const;
};

/// All 3-valent ribbon trees with N cyclic external labels. Complete and
/// duplicate-free; |result| = Catalan(N-2). Requires 2 <= N <= 10.
std::vector<RibbonTree> enumerate_ribbon_trees(int n_external);

/// RibbonTree plus interior leg lengths (external legs are infinite).
struct MetricRibbonTree {
    RibbonTree tree;
    std::vector<double> internal_lengths;  // parallel to internal leg order
    std::vector<int> internal_leg_ids;
};

/// Tree after collapsing exceptional external legs. Surviving structure is a
/// set of chains between surviving endpoints; every chain records the ordered
/// junction labels (pins) and the original legs it concatenates.
struct ReducedTree {
    RibbonTree original;
    std::vector<int> exceptional;  // external labels, 1-based

    struct Chain {
        int a = -1, b = -1;               // endpoint vertex ids in the original tree
        std::vector<int> pin_labels;      // exceptional labels at junctions, ordered a->b
        std::vector<int> segment_legs;    // original leg ids, ordered a->b
        std::vector<bool> segment_forward;  // segment k traversed a->b sense of the original leg
    };
    std::vector<Chain> chains;
    std::vector<int> surviving_internal;  // original internal vertex ids still present
    bool feasible = true;  // false when two exceptional legs shared a vertex

    bool identity() const { return exceptional.empty(); }
};

/// Collapse the named exceptional external legs, merging each attachment
/// vertex into a junction on the concatenated chain.
ReducedTree reduce_exceptional(const RibbonTree& tree, const std::vector<int>& exceptional_labels);

}  // namespace mats
