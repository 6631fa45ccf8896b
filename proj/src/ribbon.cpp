#include "mats/ribbon.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <stdexcept>

namespace mats {

std::vector<int> RibbonTree::vertex_labels(int v) const {
    std::set<int> s;
    for (std::size_t e = 0; e < legs.size(); ++e) {
        if (legs[e].a == v || legs[e].b == v) {
            s.insert(legs[e].right_ab);
            s.insert(legs[e].right_ba);
        }
    }
    return std::vector<int>(s.begin(), s.end());
}

int RibbonTree::external_leg(int label) const {
    int v = label - 1;
    for (std::size_t e = 0; e < legs.size(); ++e)
        if (legs[e].a == v || legs[e].b == v) return static_cast<int>(e);
    throw std::logic_error("external vertex has no leg");
}

namespace {

// Binary-subtree shapes over the ordered leaf range [lo, hi] (1-based
// external labels). Nodes are either a leaf label or an internal node with
// two children.
struct Shape {
    int leaf = -1;
    int left = -1, right = -1;  // indices into the shape pool
};

void build_shapes(int lo, int hi, std::vector<Shape>& pool, std::vector<int>& roots) {
    roots.clear();
    if (lo == hi) {
        pool.push_back({lo, -1, -1});
        roots.push_back(static_cast<int>(pool.size()) - 1);
        return;
    }
    for (int split = lo; split < hi; ++split) {
        std::vector<int> lroots, rroots;
        build_shapes(lo, split, pool, lroots);
        build_shapes(split + 1, hi, pool, rroots);
        for (int l : lroots)
            for (int r : rroots) {
                pool.push_back({-1, l, r});
                roots.push_back(static_cast<int>(pool.size()) - 1);
            }
    }
}

std::string shape_string(const std::vector<Shape>& pool, int node) {
    const Shape& s = pool[node];
    if (s.leaf >= 0) return std::to_string(s.leaf);
    return "(" + shape_string(pool, s.left) + "," + shape_string(pool, s.right) + ")";
}

// Realize one shape as a ribbon tree with rotations, then run the contour
// walk to attach region labels.
RibbonTree realize(const std::vector<Shape>& pool, int root, int n) {
    RibbonTree t;
    t.n_external = n;
    t.n_internal = std::max(0, n - 2);
    t.rotation.assign(t.vertex_count(), {});

    int next_internal = n;
    // Returns the vertex id representing the subtree top and wires children.
    // The parent leg is added by the caller.
    auto build = [&](auto&& self, int node) -> int {
        const Shape& s = pool[node];
        if (s.leaf >= 0) return s.leaf - 1;  // external vertex id
        int v = next_internal++;
        int lv = self(self, s.left);
        int rv = self(self, s.right);
        int el = static_cast<int>(t.legs.size());
        t.legs.push_back({v, lv, 0, 0});
        int er = static_cast<int>(t.legs.size());
        t.legs.push_back({v, rv, 0, 0});
        // Rotation at v is completed by the caller adding the parent leg in
        // front: [parent, left, right] counterclockwise.
        t.rotation[v] = {-1, el, er};
        if (t.rotation[lv].empty())
            t.rotation[lv] = {el};
        else
            t.rotation[lv][0] = el;
        if (t.rotation[rv].empty())
            t.rotation[rv] = {er};
        else
            t.rotation[rv][0] = er;
        return v;
    };

    int top = build(build, root);
    int root_leg = static_cast<int>(t.legs.size());
    t.legs.push_back({0, top, 0, 0});
    t.rotation[0] = {root_leg};
    if (t.rotation[top].empty())
        t.rotation[top] = {root_leg};
    else
        t.rotation[top][0] = root_leg;

    // Contour walk. Arriving at an internal vertex via leg e, continue with
    // the next leg counterclockwise; at an external vertex bounce back and
    // advance the region label.
    auto other = [&](int leg, int v) { return t.legs[leg].a == v ? t.legs[leg].b : t.legs[leg].a; };
    int region = 2;  // segment P1 -> P2 bounds D_2
    int cur_leg = root_leg;
    int cur_from = 0;
    int steps = 0;
    const int total_half_edges = 2 * static_cast<int>(t.legs.size());
    do {
        if (++steps > total_half_edges + 1) throw std::logic_error("contour walk did not close");
        int to = other(cur_leg, cur_from);
        // Record the region to the right of this directed traversal.
        if (t.legs[cur_leg].a == cur_from)
            t.legs[cur_leg].right_ab = region;
        else
            t.legs[cur_leg].right_ba = region;
        if (t.is_external(to)) {
            region = (region % n) + 1;
            cur_from = to;  // bounce: traverse the same leg back
        } else {
            const auto& rot = t.rotation[to];
            int pos = 0;
            for (std::size_t k = 0; k < rot.size(); ++k)
                if (rot[k] == cur_leg) pos = static_cast<int>(k);
            cur_leg = rot[(pos + 1) % rot.size()];
            cur_from = to;
        }
    } while (!(cur_leg == root_leg && cur_from == 0));
    // The walk covers every half-edge exactly once.

    t.bracketing = shape_string(pool, root);
    return t;
}

}  // namespace

std::vector<RibbonTree> enumerate_ribbon_trees(int n_external) {
    if (n_external < 2 || n_external > 10)
        throw std::invalid_argument("ribbon tree enumeration supports 2 <= N <= 10");
    std::vector<RibbonTree> out;
    if (n_external == 2) {
        RibbonTree t;
        t.n_external = 2;
        t.n_internal = 0;
        t.legs.push_back({0, 1, 2, 1});  // toward P2 the right region is D_2
        t.rotation = {{0}, {0}};
        t.bracketing = "2";
        out.push_back(std::move(t));
        return out;
    }
    std::vector<Shape> pool;
    std::vector<int> roots;
    build_shapes(2, n_external, pool, roots);
    std::set<std::string> seen;
    for (int r : roots) {
        RibbonTree t = realize(pool, r, n_external);
        if (seen.insert(t.bracketing).second) out.push_back(std::move(t));
    }
    return out;
}

ReducedTree reduce_exceptional(const RibbonTree& tree, const std::vector<int>& exceptional_labels) {
    ReducedTree red;
    red.original = tree;
    red.exceptional = exceptional_labels;
    for (int lbl : exceptional_labels)
        if (lbl < 1 || lbl > tree.n_external)
            throw std::invalid_argument("exceptional label out of range");

    // Chains start as the original legs.
    std::vector<ReducedTree::Chain> chains;
    for (std::size_t e = 0; e < tree.legs.size(); ++e) {
        ReducedTree::Chain c;
        c.a = tree.legs[e].a;
        c.b = tree.legs[e].b;
        c.segment_legs = {static_cast<int>(e)};
        c.segment_forward = {true};
        chains.push_back(std::move(c));
    }
    std::vector<bool> alive(chains.size(), true);
    std::set<int> removed_vertices;

    auto flip = [](ReducedTree::Chain& c) {
        std::swap(c.a, c.b);
        std::reverse(c.pin_labels.begin(), c.pin_labels.end());
        std::reverse(c.segment_legs.begin(), c.segment_legs.end());
        std::reverse(c.segment_forward.begin(), c.segment_forward.end());
        for (std::size_t k = 0; k < c.segment_forward.size(); ++k)
            c.segment_forward[k] = !c.segment_forward[k];
    };

    for (int lbl : exceptional_labels) {
        int pv = lbl - 1;  // external vertex id
        int ext_chain = -1;
        for (std::size_t c = 0; c < chains.size(); ++c)
            if (alive[c] && (chains[c].a == pv || chains[c].b == pv)) ext_chain = static_cast<int>(c);
        if (ext_chain < 0) {
            red.feasible = false;
            return red;
        }
        ReducedTree::Chain& ec = chains[ext_chain];
        int v = (ec.a == pv) ? ec.b : ec.a;
        if (tree.is_external(v) || removed_vertices.count(v)) {
            // The attachment vertex is gone or never existed; two exceptional
            // legs would have to map to the same point.
            red.feasible = false;
            return red;
        }
        // Exceptional legs carry no junctions of their own.
        if (!ec.pin_labels.empty()) {
            red.feasible = false;
            return red;
        }
        alive[ext_chain] = false;
        int c1 = -1, c2 = -1;
        for (std::size_t c = 0; c < chains.size(); ++c) {
            if (!alive[c] || static_cast<int>(c) == ext_chain) continue;
            if (chains[c].a == v || chains[c].b == v) {
                if (c1 < 0)
                    c1 = static_cast<int>(c);
                else
                    c2 = static_cast<int>(c);
            }
        }
        if (c1 < 0 || c2 < 0) {
            red.feasible = false;
            return red;
        }
        // Orient c1 into v and c2 out of v, then concatenate through the pin.
        if (chains[c1].b != v) flip(chains[c1]);
        if (chains[c2].a != v) flip(chains[c2]);
        ReducedTree::Chain merged;
        merged.a = chains[c1].a;
        merged.b = chains[c2].b;
        merged.pin_labels = chains[c1].pin_labels;
        merged.pin_labels.push_back(lbl);
        merged.pin_labels.insert(merged.pin_labels.end(), chains[c2].pin_labels.begin(),
                                 chains[c2].pin_labels.end());
        merged.segment_legs = chains[c1].segment_legs;
        merged.segment_legs.insert(merged.segment_legs.end(), chains[c2].segment_legs.begin(),
                                   chains[c2].segment_legs.end());
        merged.segment_forward = chains[c1].segment_forward;
        merged.segment_forward.insert(merged.segment_forward.end(),
                                      chains[c2].segment_forward.begin(),
                                      chains[c2].segment_forward.end());
        alive[c1] = false;
        alive[c2] = false;
        removed_vertices.insert(v);
        chains.push_back(std::move(merged));
        alive.push_back(true);
    }

    for (std::size_t c = 0; c < chains.size(); ++c)
        if (alive[c]) red.chains.push_back(chains[c]);
    for (int v = tree.n_external; v < tree.vertex_count(); ++v)
        if (!removed_vertices.count(v)) red.surviving_internal.push_back(v);
    return red;
}

}  // namespace mats
