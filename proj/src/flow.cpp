#include "mats/flow.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace mats {

namespace {

// Dormand-Prince 5(4) tableau.
constexpr double c2 = 1.0 / 5, c3 = 3.0 / 10, c4 = 4.0 / 5, c5 = 8.0 / 9;
constexpr double a21 = 1.0 / 5;
constexpr double a31 = 3.0 / 40, a32 = 9.0 / 40;
constexpr double a41 = 44.0 / 45, a42 = -56.0 / 15, a43 = 32.0 / 9;
constexpr double a51 = 19372.0 / 6561, a52 = -25360.0 / 2187, a53 = 64448.0 / 6561,
                 a54 = -212.0 / 729;
constexpr double a61 = 9017.0 / 3168, a62 = -355.0 / 33, a63 = 46732.0 / 5247, a64 = 49.0 / 176,
                 a65 = -5103.0 / 18656;
constexpr double b1 = 35.0 / 384, b3 = 500.0 / 1113, b4 = 125.0 / 192, b5 = -2187.0 / 6784,
                 b6 = 11.0 / 84;
constexpr double e1 = 71.0 / 57600, e3 = -71.0 / 16695, e4 = 71.0 / 1920, e5 = -17253.0 / 339200,
                 e6 = 22.0 / 525, e7 = -1.0 / 40;

struct StepResult {
    Vec x_new;
    double err;
    bool domain_ok;
};

template <typename RHS>
StepResult dopri_step(const RHS& rhs, const Vec& x, double h, Vec& k1, bool have_k1) {
    StepResult r;
    r.domain_ok = true;
    try {
        if (!have_k1) k1 = rhs(x);
        Vec k2 = rhs(x + h * (a21 * k1));
        Vec k3 = rhs(x + h * (a31 * k1 + a32 * k2));
        Vec k4 = rhs(x + h * (a41 * k1 + a42 * k2 + a43 * k3));
        Vec k5 = rhs(x + h * (a51 * k1 + a52 * k2 + a53 * k3 + a54 * k4));
        Vec k6 = rhs(x + h * (a61 * k1 + a62 * k2 + a63 * k3 + a64 * k4 + a65 * k5));
        r.x_new = x + h * (b1 * k1 + b3 * k3 + b4 * k4 + b5 * k5 + b6 * k6);
        Vec k7 = rhs(r.x_new);
        Vec errv = h * (e1 * k1 + e3 * k3 + e4 * k4 + e5 * k5 + e6 * k6 + e7 * k7);
        r.err = errv.norm();
        k1 = k7;  // FSAL
    } catch (const DomainError&) {
        r.domain_ok = false;
        r.err = 0;
    }
    return r;
}

double unconstrained_chart_radius(const Expr& field, const Vec& location, const Mat& hessian) {
    // Largest delta where the quadratic remainder of grad f stays below 10%
    // of the linear term, probed along eigen-directions at doubling radii.
    Eigen::SelfAdjointEigenSolver<Mat> es(hessian);
    double lam_min = es.eigenvalues().cwiseAbs().minCoeff();
    if (lam_min <= 0) return 0.0;
    double best = 0.0;
    for (double delta = 1e-4; delta <= 1.0; delta *= 2.0) {
        double worst = 0.0;
        for (int k = 0; k < hessian.rows(); ++k) {
            for (double s : {-1.0, 1.0}) {
                Vec dx = s * delta * es.eigenvectors().col(k);
                Vec g;
                try {
                    g = field.eval_jet2(location + dx).gradient;
                } catch (const DomainError&) {
                    return best;
                }
                Vec lin = hessian * dx;
                worst = std::max(worst, (g - lin).norm() / std::max(lin.norm(), 1e-300));
            }
        }
        if (worst > 0.10) break;
        best = delta;
    }
    return best;
}

}  // namespace

Trajectory integrate_flow(const Expr& field, const Domain& region, const Vec& x0, double dir,
                          const Tolerances& tol, const FlowOptions& opts) {
    Trajectory tr;
    auto rhs = [&](const Vec& x) -> Vec { return dir * field.eval_jet2(region.wrap(x)).gradient; };

    Vec x = x0;
    double t = 0.0;
    if (opts.record_samples) {
        tr.times.push_back(t);
        tr.points.push_back(x);
    }

    // Immediate capture: already inside a linearisation zone.
    auto check_capture = [&](const Vec& p) -> const CriticalPoint* {
        if (!opts.capture_set) return nullptr;
        double g = field.eval_jet2(region.wrap(p)).gradient.norm();
        if (g >= tol.capture) return nullptr;
        for (const auto& cp : *opts.capture_set) {
            double r = opts.capture_radius;
            if (r <= 0) r = 0.05;
            if (region.diff(region.wrap(p), cp.location).norm() < r) return &cp;
        }
        return nullptr;
    };
    if (const CriticalPoint* cp = check_capture(x)) {
        tr.terminal = FlowTerminal::ReachedCritical;
        tr.captured_id = cp->id;
        if (tr.points.empty()) {
            tr.times.push_back(t);
            tr.points.push_back(x);
        }
        return tr;
    }

    double h = 1e-3;
    Vec k1;
    bool have_k1 = false;
    for (int step = 0; step < opts.max_steps; ++step) {
        if (t >= opts.t_max) {
            tr.terminal = FlowTerminal::TimeExhausted;
            return tr;
        }
        h = std::min(h, opts.t_max - t);
        StepResult sr = dopri_step(rhs, x, h, k1, have_k1);
        if (!sr.domain_ok) {
            h *= 0.5;
            have_k1 = false;
            if (h < 1e-14) {
                tr.terminal = FlowTerminal::StepUnderflow;
                return tr;
            }
            continue;
        }
        double scale = tol.ode;
        if (sr.err > scale) {
            h *= std::max(0.2, 0.9 * std::pow(scale / sr.err, 0.2));
            have_k1 = false;
            if (h < 1e-14) {
                tr.terminal = FlowTerminal::StepUnderflow;
                return tr;
            }
            continue;
        }

        // Region exit: bisect to the boundary along the step.
        if (region.has_boundary() && !region.contains(sr.x_new)) {
            Vec inside = x, outside = sr.x_new;
            for (int it = 0; it < 80; ++it) {
                Vec mid = 0.5 * (inside + outside);
                (region.contains(mid) ? inside : outside) = mid;
            }
            tr.terminal = FlowTerminal::ExitedRegion;
            tr.exit_point = 0.5 * (inside + outside);
            tr.times.push_back(t + h);
            tr.points.push_back(tr.exit_point);
            return tr;
        }

        x = sr.x_new;
        t += h;
        have_k1 = true;
        if (opts.record_samples) {
            tr.times.push_back(t);
            tr.points.push_back(x);
        }
        if (const CriticalPoint* cp = check_capture(x)) {
            tr.terminal = FlowTerminal::ReachedCritical;
            tr.captured_id = cp->id;
            return tr;
        }
        if (sr.err > 0)
            h *= std::min(5.0, 0.9 * std::pow(scale / std::max(sr.err, 1e-300), 0.2));
        else
            h *= 2.0;
    }
    tr.terminal = FlowTerminal::TimeExhausted;
    return tr;
}

FlowJet flow_map_with_jacobian(const Expr& field, const Domain& region, const Vec& x0, double dir,
                               double T, const Tolerances& tol) {
    const int n = static_cast<int>(x0.size());
    FlowJet out;
    if (T < 0) {
        out = flow_map_with_jacobian(field, region, x0, -dir, -T, tol);
        return out;
    }

    // Augmented state: x followed by the variational matrix, column major.
    auto rhs = [&](const Vec& z) -> Vec {
        Vec x = z.head(n);
        Jet2 j = field.eval_jet2(region.wrap(x));
        Vec dz(n + n * n);
        dz.head(n) = dir * j.gradient;
        Eigen::Map<const Mat> V(z.data() + n, n, n);
        Eigen::Map<Mat> dV(dz.data() + n, n, n);
        dV = dir * j.hessian * V;
        return dz;
    };

    Vec z(n + n * n);
    z.head(n) = x0;
    Eigen::Map<Mat>(z.data() + n, n, n) = Mat::Identity(n, n);

    double t = 0.0, h = std::min(1e-3, T > 0 ? T : 1e-3);
    Vec k1;
    bool have_k1 = false;
    int guard = 0;
    while (t < T) {
        if (++guard > 400000) {
            out.ok = false;
            break;
        }
        h = std::min(h, T - t);
        StepResult sr = dopri_step(rhs, z, h, k1, have_k1);
        if (!sr.domain_ok) {
            h *= 0.5;
            have_k1 = false;
            if (h < 1e-14) {
                out.ok = false;
                break;
            }
            continue;
        }
        // Relative control: the variational block grows exponentially along
        // expanding legs and only needs relative accuracy.
        double scale = tol.ode * std::max(1.0, z.norm());
        if (sr.err > scale) {
            h *= std::max(0.2, 0.9 * std::pow(scale / sr.err, 0.2));
            have_k1 = false;
            if (h < 1e-14) {
                out.ok = false;
                break;
            }
            continue;
        }
        z = sr.x_new;
        t += h;
        have_k1 = true;
        h *= std::min(5.0, 0.9 * std::pow(scale / std::max(sr.err, 1e-300), 0.2));
    }
    out.x = z.head(n);
    out.dx_dx0 = Eigen::Map<const Mat>(z.data() + n, n, n);
    return out;
}

InvariantManifoldChart invariant_chart(const Expr& field, const CriticalPoint& cp, bool unstable,
                                       const Tolerances& tol) {
    Mat H = field.eval_jet2(cp.location).hessian;
    Eigen::SelfAdjointEigenSolver<Mat> es(H);
    const int n = static_cast<int>(cp.location.size());

    InvariantManifoldChart chart;
    chart.cp_id = cp.id;
    chart.unstable = unstable;
    std::vector<int> cols;
    for (int k = 0; k < n; ++k) {
        double ev = es.eigenvalues()[k];
        if (std::abs(ev) < tol.nondegen) throw DegeneracyError("degenerate critical point");
        // Forward flow of +grad f converges along negative eigen-directions;
        // the unstable chart of the descending convention is exactly that span.
        if ((unstable && ev < 0) || (!unstable && ev > 0)) cols.push_back(k);
    }
    chart.basis.resize(n, static_cast<int>(cols.size()));
    chart.eigenvalues.resize(static_cast<int>(cols.size()));
    for (std::size_t k = 0; k < cols.size(); ++k) {
        chart.basis.col(static_cast<int>(k)) = es.eigenvectors().col(cols[k]);
        chart.eigenvalues[static_cast<int>(k)] = es.eigenvalues()[cols[k]];
    }
    chart.radius = unconstrained_chart_radius(field, cp.location, H);
    return chart;
}

Trajectory shoot_unstable(const Expr& field, const Domain& region, const CriticalPoint& cp,
                          const InvariantManifoldChart& chart, const Vec& direction, double eps_off,
                          const Tolerances& tol, const FlowOptions& opts) {
    if (chart.basis.cols() == 0)
        throw std::invalid_argument("critical point has no unstable directions");
    if (direction.size() != chart.basis.cols())
        throw std::invalid_argument("direction must live in the chart");
    Vec dir_n = direction.normalized();
    Vec x0 = cp.location + eps_off * (chart.basis * dir_n);
    // Descending flow leaves the critical point along the unstable subspace.
    return integrate_flow(field, region, x0, -1.0, tol, opts);
}

double linearisation_radius(const Expr& field, const CriticalPoint& cp) {
    Mat H = field.eval_jet2(cp.location).hessian;
    return unconstrained_chart_radius(field, cp.location, H);
}

}  // namespace mats
