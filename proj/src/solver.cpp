#include "mats/solver.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>
#include <Eigen/SVD>

#include "mats/util.hpp"

namespace mats {

namespace {
constexpr double kShootOffset = 1e-6;
}

int compute_index(const std::vector<int>& mu_cyclic, int n) {
    int m = static_cast<int>(mu_cyclic.size());
    int s = 0;
    for (int mu : mu_cyclic) s += mu;
    return s - (m - 1) * n + (m - 3);
}

int compute_index(const BoundaryData& bd, int n) { return compute_index(bd.mu_effective, n); }

BoundaryData make_boundary_data(const SkeletonSpec& spec, const std::vector<std::string>& objects,
                                const std::vector<std::string>& input_ids,
                                const std::string& output_id, const Tolerances& tol) {
    if (objects.size() < 2) throw std::invalid_argument("need at least two objects");
    const int N = static_cast<int>(objects.size()) - 1;
    if (static_cast<int>(input_ids.size()) != N)
        throw std::invalid_argument("need one input generator per consecutive pair");
    BoundaryData bd;
    bd.objects = objects;
    const int n = spec.dim;

    auto pick = [&](const std::string& a, const std::string& b, const std::string& id) {
        const Overlap* ov = spec.find_overlap(a, b);
        if (!ov) throw std::invalid_argument("no overlap declared for " + a + "/" + b);
        Expr f = field_fij(spec, a, b);
        auto cps = find_critical_points(f, ov->region, tol);
        for (const auto& cp : cps)
            if (cp.id == id) return cp;
        throw std::invalid_argument("no generator '" + id + "' in Crit(f_" + a + "," + b + ")");
    };

    for (int k = 0; k < N; ++k) {
        CriticalPoint cp = pick(objects[k], objects[k + 1], input_ids[k]);
        bd.mu_effective.push_back(cp.index);
        bd.generators.push_back(std::move(cp));
    }
    CriticalPoint out = pick(objects[0], objects[N], output_id);
    bd.mu_effective.push_back(n - out.index);
    bd.generators.push_back(std::move(out));
    return bd;
}

namespace {

// ---------------------------------------------------------------------------
// Shared geometry helpers
// ---------------------------------------------------------------------------

// Field and overlap for a directed traversal of one tree leg: the region on
// the right carries f_R, the left f_L, and motion follows +grad(f_L - f_R).
struct LegField {
    Expr field;
    const Overlap* overlap = nullptr;
    int right_obj = 0, left_obj = 0;  // 0-based object indices
};

LegField leg_field(const SkeletonSpec& spec, const BoundaryData& bd, const RibbonTree& tree,
                   int leg_id, bool forward) {
    const auto& leg = tree.legs[leg_id];
    int right = forward ? leg.right_ab : leg.right_ba;
    int left = forward ? leg.right_ba : leg.right_ab;
    LegField lf;
    lf.right_obj = right - 1;
    lf.left_obj = left - 1;
    const std::string& a = bd.objects[lf.right_obj];
    const std::string& b = bd.objects[lf.left_obj];
    lf.overlap = spec.find_overlap(a, b);
    if (!lf.overlap)
        throw std::invalid_argument("no overlap declared for " + a + "/" + b +
                                    " (needed by a tree leg)");
    lf.field = Expr::difference(spec.branch(b).f, spec.branch(a).f);
    return lf;
}

// Spherical parametrisation of the unit sphere in R^mu with mu-1 angles.
Vec sphere_dir(const std::vector<double>& angles, int mu, double sign) {
    Vec d = Vec::Zero(mu);
    if (mu == 1) {
        d[0] = sign;
        return d;
    }
    double r = 1.0;
    for (int k = 0; k < mu - 1; ++k) {
        d[k] = r * std::cos(angles[k]);
        r *= std::sin(angles[k]);
    }
    d[mu - 1] = r;
    return d;
}

Mat sphere_dir_jacobian(const std::vector<double>& angles, int mu) {
    Mat J = Mat::Zero(mu, mu - 1);
    if (mu == 1) return J;
    const double h = 1e-7;
    for (int a = 0; a < mu - 1; ++a) {
        std::vector<double> ap = angles, am = angles;
        ap[a] += h;
        am[a] -= h;
        J.col(a) = (sphere_dir(ap, mu, 1.0) - sphere_dir(am, mu, 1.0)) / (2 * h);
    }
    return J;
}

// Convergent chart of the toward-field at a marked point: the span of the
// negative eigenvalue directions of the toward-field Hessian.
struct MarkedChart {
    Expr toward_field;          // g_k = f_{k+1} - f_k
    const Overlap* overlap = nullptr;
    Vec location;
    Mat basis;                  // n x mu
    Vec eigenvalues;
    int mu = 0;
};

MarkedChart marked_chart(const SkeletonSpec& spec, const BoundaryData& bd, int k,
                         const Tolerances& tol) {
    const int M = bd.marked_points();
    MarkedChart mc;
    const std::string& a = bd.objects[k];
    const std::string& b = bd.objects[(k + 1) % M];
    mc.overlap = spec.find_overlap(a, b);
    if (!mc.overlap) throw std::invalid_argument("no overlap for " + a + "/" + b);
    mc.toward_field = Expr::difference(spec.branch(b).f, spec.branch(a).f);
    mc.location = bd.generators[k].location;
    Mat H = mc.toward_field.eval_jet2(mc.location).hessian;
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    std::vector<int> cols;
    for (int i = 0; i < H.rows(); ++i) {
        if (std::abs(es.eigenvalues()[i]) < tol.nondegen)
            throw DegeneracyError("degenerate generator in boundary data");
        if (es.eigenvalues()[i] < 0) cols.push_back(i);
    }
    mc.mu = static_cast<int>(cols.size());
    mc.basis.resize(H.rows(), mc.mu);
    mc.eigenvalues.resize(mc.mu);
    for (std::size_t i = 0; i < cols.size(); ++i) {
        mc.basis.col(static_cast<int>(i)) = es.eigenvectors().col(cols[i]);
        mc.eigenvalues[static_cast<int>(i)] = es.eigenvalues()[cols[i]];
    }
    return mc;
}

// ---------------------------------------------------------------------------
// The matching problem for one (tree, reduction, sign combo)
// ---------------------------------------------------------------------------

struct Station {
    enum Kind { ExternalEnd, Pin, Vertex } kind;
    int marked = -1;   // ExternalEnd / Pin: 0-based marked point
    int vertex = -1;   // Vertex: original internal vertex id
};

struct SegmentSlot {
    LegField lf;
    int original_leg = -1;
    bool forward = true;
    int time_index = -1;  // slot in the unknown vector
};

struct ChainProblem {
    std::vector<Station> stations;      // segments.size() + 1 entries
    std::vector<SegmentSlot> segments;
};

struct MatchingProblem {
    const SkeletonSpec* spec;
    const BoundaryData* bd;
    const Tolerances* tol;
    int n = 0;

    std::vector<ChainProblem> chains;
    std::vector<int> vertex_ids;             // surviving internal vertices, ascending
    std::map<int, int> vertex_slot;          // vertex id -> base slot
    std::vector<int> angle_slot;             // per marked point, -1 if none
    std::vector<int> angle_count;            // mu_k - 1 for kept external ends
    std::vector<MarkedChart> charts;         // per marked point (kept ones populated)
    std::vector<int> kept_external;          // marked points that stay external
    std::vector<double> signs;               // per marked point, +-1 (used when mu == 1)
    int n_unknowns = 0;
    int n_equations = 0;

    Vec vertex_pos(const Vec& xi, int vertex_id) const {
        int s = vertex_slot.at(vertex_id);
        return xi.segment(s, n);
    }

    Vec shoot_point(const Vec& xi, int k) const {
        const MarkedChart& mc = charts[k];
        std::vector<double> angles(std::max(0, mc.mu - 1));
        if (mc.mu >= 2)
            for (int a = 0; a < mc.mu - 1; ++a) angles[a] = xi[angle_slot[k] + a];
        Vec dir = sphere_dir(angles, mc.mu, signs[k]);
        return mc.location + kShootOffset * (mc.basis * dir);
    }

    // d(shoot point)/d(angle block), n x (mu-1)
    Mat shoot_point_jac(const Vec& xi, int k) const {
        const MarkedChart& mc = charts[k];
        std::vector<double> angles(std::max(0, mc.mu - 1));
        if (mc.mu >= 2)
            for (int a = 0; a < mc.mu - 1; ++a) angles[a] = xi[angle_slot[k] + a];
        return kShootOffset * mc.basis * sphere_dir_jacobian(angles, mc.mu);
    }
};

// Builds the matching problem; returns false with a note when the reduction
// is infeasible or a pin leaves its segment's overlap region.
bool build_problem(const SkeletonSpec& spec, const BoundaryData& bd, const RibbonTree& tree,
                   const ReducedTree& red, const Tolerances& tol, MatchingProblem& mp,
                   std::string& note) {
    mp.spec = &spec;
    mp.bd = &bd;
    mp.tol = &tol;
    mp.n = spec.dim;
    const int M = bd.marked_points();

    mp.charts.resize(M);
    mp.angle_slot.assign(M, -1);
    mp.signs.assign(M, 1.0);

    // Unknown layout: vertex blocks, then angle blocks, then times.
    int slot = 0;
    mp.vertex_ids = red.surviving_internal;
    for (int v : mp.vertex_ids) {
        mp.vertex_slot[v] = slot;
        slot += mp.n;
    }

    std::set<int> exceptional(red.exceptional.begin(), red.exceptional.end());
    for (int k = 0; k < M; ++k) {
        if (exceptional.count(k + 1)) continue;
        mp.kept_external.push_back(k);
        mp.charts[k] = marked_chart(spec, bd, k, tol);
        if (mp.charts[k].mu == 0) {
            note = "marked point " + std::to_string(k) + " has no convergent directions";
            return false;
        }
        if (mp.charts[k].mu >= 2) {
            mp.angle_slot[k] = slot;
            slot += mp.charts[k].mu - 1;
        }
    }

    int eq = 0;
    for (const auto& ch : red.chains) {
        ChainProblem cp;
        // Stations: endpoints are external or vertex; junctions are pins.
        auto endpoint_station = [&](int vid) {
            Station s;
            if (tree.is_external(vid)) {
                s.kind = Station::ExternalEnd;
                s.marked = vid;
            } else {
                s.kind = Station::Vertex;
                s.vertex = vid;
            }
            return s;
        };
        cp.stations.push_back(endpoint_station(ch.a));
        for (int lbl : ch.pin_labels) {
            Station s;
            s.kind = Station::Pin;
            s.marked = lbl - 1;
            cp.stations.push_back(s);
        }
        cp.stations.push_back(endpoint_station(ch.b));

        for (std::size_t j = 0; j < ch.segment_legs.size(); ++j) {
            SegmentSlot seg;
            seg.original_leg = ch.segment_legs[j];
            seg.forward = ch.segment_forward[j];
            seg.lf = leg_field(spec, bd, tree, seg.original_leg, seg.forward);
            seg.time_index = slot++;
            cp.segments.push_back(std::move(seg));
            eq += mp.n;
        }
        if (cp.segments.size() + 1 != cp.stations.size()) {
            note = "chain bookkeeping mismatch";
            return false;
        }
        // Pins must sit inside the overlap regions of both incident segments.
        for (std::size_t j = 0; j + 1 < cp.stations.size(); ++j) {
            for (const Station* st : {&cp.stations[j], &cp.stations[j + 1]}) {
                if (st->kind != Station::Pin) continue;
                const Vec& p = bd.generators[st->marked].location;
                if (!cp.segments[j].lf.overlap->region.contains(p)) {
                    note = "pass-through generator leaves the overlap region of a through-leg";
                    return false;
                }
            }
        }
        mp.chains.push_back(std::move(cp));
    }
    mp.n_unknowns = slot;
    mp.n_equations = eq;
    return true;
}

// Station target position (known stations) or unknown-backed position.
Vec station_pos(const MatchingProblem& mp, const Vec& xi, const Station& st) {
    switch (st.kind) {
        case Station::Pin: return mp.bd->generators[st.marked].location;
        case Station::Vertex: return mp.vertex_pos(xi, st.vertex);
        case Station::ExternalEnd: return mp.shoot_point(xi, st.marked);
    }
    throw std::logic_error("unreachable");
}

struct Residual {
    Vec F;
    Mat J;
    bool ok = true;
};

Residual evaluate(const MatchingProblem& mp, const Vec& xi, bool with_jacobian,
                  const Tolerances* tol_override = nullptr) {
    const Tolerances& tol = tol_override ? *tol_override : *mp.tol;
    Residual r;
    r.F = Vec::Zero(mp.n_equations);
    if (with_jacobian) r.J = Mat::Zero(mp.n_equations, mp.n_unknowns);
    const int n = mp.n;
    int row = 0;
    for (const auto& ch : mp.chains) {
        for (std::size_t j = 0; j < ch.segments.size(); ++j) {
            const SegmentSlot& seg = ch.segments[j];
            const Station& sa = ch.stations[j];
            const Station& sb = ch.stations[j + 1];
            Vec p = station_pos(mp, xi, sa);
            double tau = xi[seg.time_index];
            if (!std::isfinite(tau) || std::abs(tau) > 300.0) {
                r.ok = false;
                return r;
            }
            FlowJet fj = flow_map_with_jacobian(seg.lf.field, seg.lf.overlap->region, p, +1.0, tau,
                                                tol);
            if (!fj.ok) {
                r.ok = false;
                return r;
            }
            Vec target = station_pos(mp, xi, sb);
            Vec diff = seg.lf.overlap->region.diff(fj.x, target);
            r.F.segment(row, n) = diff;
            if (with_jacobian) {
                // d/d tau
                Vec vel;
                try {
                    vel = seg.lf.field.eval_jet2(seg.lf.overlap->region.wrap(fj.x)).gradient;
                } catch (const DomainError&) {
                    r.ok = false;
                    return r;
                }
                r.J.block(row, seg.time_index, n, 1) = vel;
                // d/d start unknowns
                if (sa.kind == Station::Vertex) {
                    r.J.block(row, mp.vertex_slot.at(sa.vertex), n, n) = fj.dx_dx0;
                } else if (sa.kind == Station::ExternalEnd && mp.angle_slot[sa.marked] >= 0) {
                    Mat dp = mp.shoot_point_jac(xi, sa.marked);
                    r.J.block(row, mp.angle_slot[sa.marked], n, dp.cols()) = fj.dx_dx0 * dp;
                }
                // d/d target unknowns
                if (sb.kind == Station::Vertex) {
                    r.J.block(row, mp.vertex_slot.at(sb.vertex), n, n) -= Mat::Identity(n, n);
                } else if (sb.kind == Station::ExternalEnd && mp.angle_slot[sb.marked] >= 0) {
                    Mat dp = mp.shoot_point_jac(xi, sb.marked);
                    r.J.block(row, mp.angle_slot[sb.marked], n, dp.cols()) -= dp;
                }
            }
            row += n;
        }
    }
    return r;
}

bool newton_solve(const MatchingProblem& mp, Vec& xi, const Tolerances& tol) {
    // Coarse phase at a loose integration tolerance, then polish tight.
    Tolerances loose = tol;
    loose.ode = std::max(tol.ode, 1e-7);
    for (int phase = 0; phase < 2; ++phase) {
        const Tolerances& ptol = phase == 0 ? loose : tol;
        double target = phase == 0 ? 1e-5 : tol.match;
        double best = std::numeric_limits<double>::infinity();
        int stagnant = 0;
        for (int it = 0; it < (phase == 0 ? 40 : 25); ++it) {
            Residual r = evaluate(mp, xi, true, &ptol);
            if (!r.ok) return false;
            double f0 = r.F.norm();
            if (f0 < 0.7 * best) {
                best = f0;
                stagnant = 0;
            } else if (++stagnant >= 5) {
                if (phase == 0) break;
                return false;
            }
            if (r.F.lpNorm<Eigen::Infinity>() < target) break;
            Vec step = r.J.fullPivLu().solve(-r.F);
            if (!step.allFinite()) return false;
            // Cap wild steps; times and positions live on unit-ish scales.
            double cap = 20.0;
            if (step.norm() > cap) step *= cap / step.norm();
            double lambda = 1.0;
            bool accepted = false;
            for (int bt = 0; bt < 25; ++bt) {
                Vec cand = xi + lambda * step;
                Residual rc = evaluate(mp, cand, false, &ptol);
                if (rc.ok && rc.F.norm() < f0) {
                    xi = cand;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if (!accepted) {
                if (phase == 0) break;  // let the tight phase try from here
                return false;
            }
        }
        if (phase == 0) {
            Residual probe = evaluate(mp, xi, false, &loose);
            if (!probe.ok || probe.F.lpNorm<Eigen::Infinity>() > 0.5) return false;
        }
    }
    Residual r = evaluate(mp, xi, false);
    return r.ok && r.F.lpNorm<Eigen::Infinity>() < tol.match;
}

// Closest-approach time estimate used to seed segment times. A loose
// integration tolerance is plenty for a Newton starting point. Also reports
// the closest distance reached, which gates infeasible sign combos when the
// stations carry no free parameters.
double estimate_time(const LegField& lf, const Vec& from, const Vec& to, const Tolerances& tol,
                     double* closest = nullptr) {
    Tolerances loose = tol;
    loose.ode = 1e-6;
    FlowOptions opts;
    opts.t_max = 60;
    opts.max_steps = 20000;
    opts.record_samples = true;
    Trajectory tr = integrate_flow(lf.field, lf.overlap->region, from, +1.0, loose, opts);
    double best_t = 1.0, best_d = std::numeric_limits<double>::infinity();
    for (std::size_t k = 0; k < tr.points.size(); ++k) {
        // Distance from the target to the sample polyline, not just samples;
        // accepted steps can be long in smooth regions.
        Vec rel = lf.overlap->region.diff(tr.points[k], to);
        double d = rel.norm();
        double t_at = tr.times[k];
        if (k + 1 < tr.points.size()) {
            Vec rel2 = lf.overlap->region.diff(tr.points[k + 1], to);
            Vec seg = rel2 - rel;
            double len2 = seg.squaredNorm();
            if (len2 > 0) {
                double s = std::clamp(-rel.dot(seg) / len2, 0.0, 1.0);
                double dseg = (rel + s * seg).norm();
                if (dseg < d) {
                    d = dseg;
                    t_at = tr.times[k] + s * (tr.times[k + 1] - tr.times[k]);
                }
            }
        }
        if (d < best_d) {
            best_d = d;
            best_t = std::max(t_at, 1e-3);
        }
    }
    if (closest) *closest = best_d;
    return best_t;
}

struct CandidateSolution {
    Vec xi;
    double sigma_min = 0.0;
};

// Validity: nonnegative times, region containment, toward-field ascent.
bool validate_solution(const MatchingProblem& mp, const Vec& xi, std::string& why) {
    for (const auto& ch : mp.chains)
        for (std::size_t j = 0; j < ch.segments.size(); ++j) {
            const SegmentSlot& seg = ch.segments[j];
            double tau = xi[seg.time_index];
            if (tau < 1e-9) {
                why = "nonpositive segment time";
                return false;
            }
            Vec p = station_pos(mp, xi, ch.stations[j]);
            FlowOptions opts;
            opts.t_max = tau;
            Trajectory tr =
                integrate_flow(seg.lf.field, seg.lf.overlap->region, p, +1.0, *mp.tol, opts);
            if (tr.terminal == FlowTerminal::ExitedRegion) {
                why = "segment leaves its overlap region";
                return false;
            }
            if (tr.terminal == FlowTerminal::StepUnderflow) {
                why = "stiff segment";
                return false;
            }
            const Domain& reg = seg.lf.overlap->region;
            double prev = -std::numeric_limits<double>::infinity();
            for (const Vec& q : tr.points) {
                if (!reg.contains(reg.wrap(q))) {
                    why = "segment sample leaves the overlap region";
                    return false;
                }
                double v = seg.lf.field.eval(reg.wrap(q));
                if (v < prev - 1e2 * mp.tol->ode) {
                    why = "field fails to increase along a leg";
                    return false;
                }
                prev = v;
            }
        }
    return true;
}

GradientTree extract_tree(const MatchingProblem& mp, const RibbonTree& tree, const ReducedTree& red,
                          const Vec& xi, const std::vector<int>& shoot_signs) {
    GradientTree gt;
    gt.bracketing = tree.bracketing;
    gt.marked = mp.bd->marked_points();
    gt.exceptional_labels = red.exceptional;
    gt.shoot_signs = shoot_signs;
    for (int v : mp.vertex_ids) gt.vertex_positions[v] = mp.vertex_pos(xi, v);

    for (std::size_t ci = 0; ci < mp.chains.size(); ++ci) {
        const auto& ch = mp.chains[ci];
        SolvedChain sc;
        sc.pin_labels.reserve(ch.stations.size());
        for (const auto& st : ch.stations)
            if (st.kind == Station::Pin) sc.pin_labels.push_back(st.marked + 1);
        sc.endpoint_a = red.chains[ci].a;
        sc.endpoint_b = red.chains[ci].b;
        for (std::size_t j = 0; j < ch.segments.size(); ++j) {
            const SegmentSlot& seg = ch.segments[j];
            SolvedSegment ss;
            ss.from_branch = mp.bd->objects[seg.lf.right_obj];
            ss.to_branch = mp.bd->objects[seg.lf.left_obj];
            ss.field = seg.lf.field;
            ss.overlap = seg.lf.overlap;
            ss.time = xi[seg.time_index];
            ss.start = station_pos(mp, xi, ch.stations[j]);
            ss.end = station_pos(mp, xi, ch.stations[j + 1]);
            ss.original_leg = seg.original_leg;
            ss.forward = seg.forward;
            sc.segments.push_back(std::move(ss));
            // Metric data for internal legs of the original tree.
            const auto& leg = tree.legs[seg.original_leg];
            if (!tree.is_external(leg.a) && !tree.is_external(leg.b))
                gt.leg_lengths[seg.original_leg] = xi[seg.time_index];
        }
        gt.chains.push_back(std::move(sc));
    }
    Residual r = evaluate(mp, xi, false);
    gt.residual = r.ok ? r.F.lpNorm<Eigen::Infinity>() : std::numeric_limits<double>::infinity();
    return gt;
}

bool same_solution(const MatchingProblem& mp, const GradientTree& a, const GradientTree& b,
                   double tol_collision) {
    if (a.bracketing != b.bracketing) return false;
    if (a.shoot_signs != b.shoot_signs) return false;
    for (const auto& [v, pos] : a.vertex_positions) {
        auto it = b.vertex_positions.find(v);
        if (it == b.vertex_positions.end()) return false;
        if (mp.chains.empty()) return false;
        if (mp.chains[0].segments[0].lf.overlap->region.diff(pos, it->second).norm() >
            tol_collision)
            return false;
    }
    // Segment endpoints pin everything else down.
    for (std::size_t c = 0; c < a.chains.size(); ++c)
        for (std::size_t s = 0; s < a.chains[c].segments.size(); ++s) {
            const auto& sa = a.chains[c].segments[s];
            const auto& sb = b.chains[c].segments[s];
            if (sa.overlap->region.diff(sa.start, sb.start).norm() > tol_collision) return false;
            if (sa.overlap->region.diff(sa.end, sb.end).norm() > tol_collision) return false;
        }
    return true;
}

}  // namespace

SolveResult solve_rigid_trees(const SkeletonSpec& spec, const BoundaryData& bd,
                              const Tolerances& tol, std::uint64_t seed) {
    const int n = spec.dim;
    const int M = bd.marked_points();
    if (compute_index(bd, n) != 0)
        throw std::invalid_argument("boundary data has nonzero virtual index");

    SolveResult result;

    // Forced reduction: effective index 0 means the external leg is a point.
    std::vector<int> exceptional;
    for (int k = 0; k < M; ++k)
        if (bd.mu_effective[k] == 0) exceptional.push_back(k + 1);
    if (!exceptional.empty() && bd.mu_effective[M - 1] == 0)
        result.diagnostics.push_back(
            "output generator has mu = n; collapsed by the cyclic pass-through rule");

    auto trees = enumerate_ribbon_trees(M);
    for (std::size_t ti = 0; ti < trees.size(); ++ti) {
        const RibbonTree& tree = trees[ti];
        ReducedTree red = reduce_exceptional(tree, exceptional);
        if (!red.feasible) {
            result.diagnostics.push_back("tree " + tree.bracketing +
                                         ": exceptional legs collide, no solutions");
            continue;
        }
        MatchingProblem mp;
        std::string note;
        if (!build_problem(spec, bd, tree, red, tol, mp, note)) {
            result.diagnostics.push_back("tree " + tree.bracketing + ": " + note);
            continue;
        }
        if (mp.n_equations != mp.n_unknowns) {
            // Square exactly when Ind = 0; anything else is a logic error.
            throw std::logic_error("matching system is not square at Ind = 0");
        }

        // Discrete sign choices: one per kept external with a 1-dim chart.
        std::vector<int> sign_marked;
        for (int k : mp.kept_external)
            if (mp.charts[k].mu == 1) sign_marked.push_back(k);
        const int combo_count = 1 << sign_marked.size();

        for (int combo = 0; combo < combo_count; ++combo) {
            std::vector<int> shoot_signs;
            for (std::size_t s = 0; s < sign_marked.size(); ++s) {
                double sgn = (combo >> s) & 1 ? -1.0 : 1.0;
                mp.signs[sign_marked[s]] = sgn;
                shoot_signs.push_back(static_cast<int>(sgn));
            }

            // Deterministic seed stream.
            SplitMix64 rng(seed ^ (0x9e37ULL * (ti + 1)) ^ (0x79b9ULL * (combo + 1)));

            // Vertex seed candidates from a coarse grid filtered by the
            // incident overlap regions.
            std::vector<Vec> vertex_candidates;
            if (!mp.vertex_ids.empty()) {
                const Domain& base = mp.chains[0].segments[0].lf.overlap->region;
                for (const Vec& x : base.interior_grid(n == 1 ? 16 : 6)) vertex_candidates.push_back(x);
            }

            bool has_angles = false;
            for (int k : mp.kept_external)
                if (mp.angle_slot[k] >= 0) has_angles = true;
            const bool fixed_stations = mp.vertex_ids.empty() && !has_angles;
            const int attempts = fixed_stations ? 3 : (mp.vertex_ids.empty() ? 32 : 200);

            // With fixed stations the closest-approach seed is attempt
            // independent; compute once. A station orbit that never comes
            // near its target rules the combo out entirely.
            std::vector<double> base_times;
            bool combo_feasible = true;
            if (fixed_stations) {
                Vec xi0 = Vec::Zero(mp.n_unknowns);
                for (const auto& ch : mp.chains)
                    for (std::size_t j = 0; j < ch.segments.size() && combo_feasible; ++j) {
                        Vec p = station_pos(mp, xi0, ch.stations[j]);
                        Vec q = station_pos(mp, xi0, ch.stations[j + 1]);
                        double closest = 0;
                        base_times.push_back(
                            estimate_time(ch.segments[j].lf, p, q, tol, &closest));
                        if (closest > 0.35) combo_feasible = false;
                    }
                if (!combo_feasible) continue;
            }

            for (int attempt = 0; attempt < attempts; ++attempt) {
                Vec xi = Vec::Zero(mp.n_unknowns);
                // Vertices
                for (int v : mp.vertex_ids) {
                    const Vec& cand =
                        vertex_candidates[rng.next() % vertex_candidates.size()];
                    xi.segment(mp.vertex_slot[v], n) = cand;
                }
                // Angles
                for (int k : mp.kept_external)
                    if (mp.angle_slot[k] >= 0)
                        for (int a = 0; a < mp.charts[k].mu - 1; ++a)
                            xi[mp.angle_slot[k] + a] = rng.uniform(0.0, 2 * 3.141592653589793);
                // Times by closest approach from the current station guesses.
                int seg_counter = 0;
                for (const auto& ch : mp.chains)
                    for (std::size_t j = 0; j < ch.segments.size(); ++j) {
                        double t0;
                        if (fixed_stations) {
                            t0 = base_times[seg_counter++];
                        } else {
                            Vec p = station_pos(mp, xi, ch.stations[j]);
                            Vec q = station_pos(mp, xi, ch.stations[j + 1]);
                            t0 = estimate_time(ch.segments[j].lf, p, q, tol);
                        }
                        if (attempt % 3 == 1) t0 *= 0.5 + rng.uniform();
                        if (attempt % 3 == 2) t0 *= 1.5 + rng.uniform();
                        xi[ch.segments[j].time_index] = t0;
                    }

                if (!newton_solve(mp, xi, tol)) continue;
                std::string why;
                if (!validate_solution(mp, xi, why)) continue;

                GradientTree gt = extract_tree(mp, tree, red, xi, shoot_signs);
                bool dup = false;
                for (const auto& prev : result.trees)
                    if (same_solution(mp, prev, gt, tol.collision)) {
                        dup = true;
                        break;
                    }
                if (dup) continue;

                // Rigidity certificate from the column-equilibrated Jacobian;
                // equilibration removes the exponentially small arrival-time
                // columns from the scale of the singular values.
                Residual r = evaluate(mp, xi, true);
                Mat Jn = r.J;
                for (int c = 0; c < Jn.cols(); ++c) {
                    double nrm = Jn.col(c).norm();
                    if (nrm > 1e-300) Jn.col(c) /= nrm;
                }
                Eigen::JacobiSVD<Mat> svd(Jn);
                double sigma = svd.singularValues().minCoeff();
                RigidityCertificate cert;
                cert.index = 0;
                cert.smallest_singular = sigma;
                cert.isolation_radius = 10 * tol.match / std::max(sigma, 1e-12);
                cert.certified = sigma > tol.rigid;
                if (!cert.certified)
                    result.diagnostics.push_back("tree " + tree.bracketing +
                                                 ": near-singular matching Jacobian (genericity)");
                result.trees.push_back(std::move(gt));
                result.certificates.push_back(cert);
            }
        }
    }

    // Canonical output order: by bracketing, then signs, then geometry.
    std::vector<std::size_t> order(result.trees.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        const auto &ta = result.trees[a], &tb = result.trees[b];
        if (ta.bracketing != tb.bracketing) return ta.bracketing < tb.bracketing;
        if (ta.shoot_signs != tb.shoot_signs) return ta.shoot_signs < tb.shoot_signs;
        std::ostringstream oa, ob;
        for (const auto& ch : ta.chains)
            for (const auto& s : ch.segments) oa << s.start.transpose() << ";";
        for (const auto& ch : tb.chains)
            for (const auto& s : ch.segments) ob << s.start.transpose() << ";";
        return oa.str() < ob.str();
    });
    SolveResult sorted;
    sorted.diagnostics = result.diagnostics;
    for (std::size_t k : order) {
        sorted.trees.push_back(std::move(result.trees[k]));
        sorted.certificates.push_back(result.certificates[k]);
    }
    return sorted;
}

// ---------------------------------------------------------------------------
// 1d oracle
// ---------------------------------------------------------------------------

namespace {

// Critical positions of a 1d field by scan and bisection on the derivative.
std::vector<double> crit_positions_1d(const Expr& field, const Domain& region) {
    std::vector<double> roots;
    const int m = 2048;
    double a, b;
    bool per = region.periodic();
    if (per) {
        a = 0;
        b = region.periods[0];
    } else {
        a = region.lo[0];
        b = region.hi[0];
    }
    auto dfn = [&](double x) {
        Vec p = Vec::Constant(1, x);
        return field.eval_jet2(p).gradient[0];
    };
    double prev_x = a, prev_g = dfn(a);
    for (int i = 1; i <= m; ++i) {
        double x = a + (b - a) * i / m;
        double g = dfn(x);
        if (prev_g == 0.0) {
            roots.push_back(prev_x);
        } else if ((prev_g < 0) != (g < 0)) {
            double lo = prev_x, hi = x, glo = prev_g;
            for (int it = 0; it < 80; ++it) {
                double mid = 0.5 * (lo + hi), gm = dfn(mid);
                if ((glo < 0) == (gm < 0)) {
                    lo = mid;
                    glo = gm;
                } else {
                    hi = mid;
                }
            }
            roots.push_back(0.5 * (lo + hi));
        }
        prev_x = x;
        prev_g = g;
    }
    return roots;
}

struct Arc1d {
    double from, to;
    int dir;  // +1 rightward, -1 leftward (wrapped on circles)
};

// Monotone ascent arcs of the field from p to q avoiding interior critical
// points; at most two on a circle, at most one on an interval.
std::vector<Arc1d> valid_arcs(const Expr& field, const Domain& region, double p, double q,
                              const std::vector<double>& crits) {
    std::vector<Arc1d> arcs;
    const bool per = region.periodic();
    const double P = per ? region.periods[0] : 0.0;
    auto wrap_len = [&](double d) {
        if (!per) return d;
        double r = std::fmod(d, P);
        if (r < 0) r += P;
        return r;
    };
    auto dfn = [&](double x) {
        Vec v = Vec::Constant(1, per ? std::fmod(std::fmod(x, P) + P, P) : x);
        return field.eval_jet2(v).gradient[0];
    };
    auto in_region = [&](double x) {
        Vec v = Vec::Constant(1, x);
        return per || region.contains(v);
    };

    std::vector<int> dirs = per ? std::vector<int>{+1, -1}
                                : std::vector<int>{q > p ? +1 : -1};
    for (int d : dirs) {
        double len = per ? (d > 0 ? wrap_len(q - p) : wrap_len(p - q)) : std::abs(q - p);
        if (len < 1e-9) continue;
        // Interior critical points kill the arc.
        bool blocked = false;
        for (double c : crits) {
            double s = per ? (d > 0 ? wrap_len(c - p) : wrap_len(p - c)) : (c - p) * d;
            if (s > 1e-7 && s < len - 1e-7) {
                blocked = true;
                break;
            }
        }
        if (blocked) continue;
        // Strict ascent and region membership along the arc.
        bool ok = true;
        for (int t = 1; t < 32 && ok; ++t) {
            double x = p + d * len * t / 32.0;
            if (!in_region(per ? std::fmod(std::fmod(x, P) + P, P) : x)) ok = false;
            if (ok && dfn(x) * d <= 0) ok = false;
        }
        if (ok) arcs.push_back({p, q, d});
    }
    return arcs;
}

}  // namespace

long brute_force_count_1d(const SkeletonSpec& spec, const BoundaryData& bd, const Tolerances& tol,
                          std::vector<std::string>* descriptions) {
    if (spec.dim != 1) throw std::invalid_argument("the brute-force oracle is 1d only");
    const int M = bd.marked_points();

    int mu_sum = 0;
    for (int mu : bd.mu_effective) mu_sum += mu;
    if (mu_sum != 2) return 0;  // Ind != 0 has no rigid trees in 1d

    std::vector<int> exceptional;
    for (int k = 0; k < M; ++k)
        if (bd.mu_effective[k] == 0) exceptional.push_back(k + 1);

    long total = 0;
    for (const RibbonTree& tree : enumerate_ribbon_trees(M)) {
        ReducedTree red = reduce_exceptional(tree, exceptional);
        if (!red.feasible) continue;
        if (red.chains.size() != 1 || !red.surviving_internal.empty()) continue;
        const auto& ch = red.chains[0];

        // Stations along the chain.
        struct Sta {
            double x;
            bool pin;
            int marked;
        };
        std::vector<Sta> stations;
        auto endpoint = [&](int vid) {
            return Sta{bd.generators[vid].location[0], false, vid};
        };
        stations.push_back(endpoint(ch.a));
        for (int lbl : ch.pin_labels)
            stations.push_back({bd.generators[lbl - 1].location[0], true, lbl - 1});
        stations.push_back(endpoint(ch.b));

        long combos = 1;
        std::vector<std::string> arcdesc;
        for (std::size_t j = 0; j < ch.segment_legs.size() && combos > 0; ++j) {
            LegField lf = leg_field(spec, bd, tree, ch.segment_legs[j], ch.segment_forward[j]);
            // Pins must sit inside the overlap region of the through-leg.
            for (const Sta* st : {&stations[j], &stations[j + 1]})
                if (st->pin && !lf.overlap->region.contains(Vec::Constant(1, st->x))) combos = 0;
            if (combos == 0) break;
            auto crits = crit_positions_1d(lf.field, lf.overlap->region);
            auto arcs = valid_arcs(lf.field, lf.overlap->region, stations[j].x, stations[j + 1].x,
                                   crits);
            combos *= static_cast<long>(arcs.size());
            if (!arcs.empty()) {
                std::ostringstream os;
                os << "seg" << j << ":" << arcs.size() << " arc(s)";
                arcdesc.push_back(os.str());
            }
        }
        if (combos > 0 && descriptions) {
            std::ostringstream os;
            os << tree.bracketing << " x" << combos;
            for (const auto& s : arcdesc) os << " " << s;
            descriptions->push_back(os.str());
        }
        total += combos;
    }
    return total;
}

// ---------------------------------------------------------------------------
// Verification
// ---------------------------------------------------------------------------

VerifyReport verify_tree(const SkeletonSpec& spec, const GradientTree& tree, double tol_check,
                         const Tolerances& tol) {
    VerifyReport rep;
    Tolerances tight = tol;
    tight.ode = tol.ode / 10;
    (void)spec;
    const int M = tree.marked;

    for (const auto& ch : tree.chains) {
        for (std::size_t j = 0; j < ch.segments.size(); ++j) {
            const auto& seg = ch.segments[j];
            const Domain& reg = seg.overlap->region;
            // Shooting from within the linearisation zone of a generator is
            // exponentially expanding, so such segments are re-run backward
            // from their far end; everything else runs forward.
            bool starts_external = (j == 0 && ch.endpoint_a >= 0 && ch.endpoint_a < M);
            FlowOptions opts;
            opts.t_max = seg.time;
            Vec from = starts_external ? seg.end : seg.start;
            Vec to = starts_external ? seg.start : seg.end;
            double dir = starts_external ? -1.0 : +1.0;
            Trajectory tr = integrate_flow(seg.field, reg, from, dir, tight, opts);
            if (tr.terminal != FlowTerminal::TimeExhausted) {
                rep.notes.push_back("segment did not run its full length");
                rep.max_flow_residual = std::numeric_limits<double>::infinity();
                continue;
            }
            double mismatch = reg.diff(tr.back(), to).norm();
            rep.max_vertex_mismatch = std::max(rep.max_vertex_mismatch, mismatch);
            rep.max_flow_residual = std::max(rep.max_flow_residual, mismatch);

            // Monotone ascent of the leg field along the traversal direction.
            double prev = dir > 0 ? -std::numeric_limits<double>::infinity()
                                  : std::numeric_limits<double>::infinity();
            for (const Vec& q : tr.points) {
                double v = seg.field.eval(reg.wrap(q));
                if (dir > 0 ? v < prev - 1e2 * tight.ode : v > prev + 1e2 * tight.ode)
                    rep.notes.push_back("field decreases along a leg");
                prev = v;
            }

            // External ends converge: flowing past the offset point must keep
            // contracting toward the generator rather than wander off.
            bool ends_external =
                (j + 1 == ch.segments.size() && ch.endpoint_b >= 0 && ch.endpoint_b < M);
            if (ends_external) {
                FlowOptions extra;
                extra.t_max = 5.0;
                Trajectory tail = integrate_flow(seg.field, reg, seg.end, +1.0, tight, extra);
                double drift = reg.diff(tail.back(), seg.end).norm();
                rep.max_endpoint_distance = std::max(rep.max_endpoint_distance, drift);
                if (drift > 2 * kShootOffset)
                    rep.notes.push_back("terminal point does not converge at its generator");
            }
        }
    }
    rep.pass = rep.max_vertex_mismatch < tol_check && rep.max_flow_residual < tol_check &&
               rep.max_endpoint_distance <= 2 * kShootOffset && rep.notes.empty();
    return rep;
}

}  // namespace mats
