#include "mats/morse.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

namespace mats {

int morse_index(const Mat& hessian, double tol_nondegen) {
    Eigen::SelfAdjointEigenSolver<Mat> es(hessian);
    int mu = 0;
    for (int k = 0; k < hessian.rows(); ++k) {
        double ev = es.eigenvalues()[k];
        if (std::abs(ev) < tol_nondegen)
            throw DegeneracyError("Hessian eigenvalue within nondegeneracy tolerance of zero");
        if (ev < 0) ++mu;
    }
    return mu;
}

namespace {

// Damped Newton on grad f = 0. Returns true on residual convergence.
bool newton_to_critical(const Expr& f, const Domain& region, Vec& x, const Tolerances& tol) {
    const int max_iter = 60;
    for (int it = 0; it < max_iter; ++it) {
        Jet2 j;
        try {
            j = f.eval_jet2(x);
        } catch (const DomainError&) {
            return false;
        }
        double res = j.gradient.norm();
        if (res < tol.residual) return true;
        Eigen::FullPivLU<Mat> lu(j.hessian);
        if (!lu.isInvertible()) {
            // Degenerate Hessian along the way; nudge with a gradient step.
            x -= 1e-3 * j.gradient;
            continue;
        }
        Vec step = lu.solve(j.gradient);
        // Backtracking on the gradient norm.
        double lambda = 1.0;
        bool accepted = false;
        for (int bt = 0; bt < 30; ++bt) {
            Vec cand = x - lambda * step;
            cand = region.wrap(cand);
            try {
                double cres = f.eval_jet2(cand).gradient.norm();
                if (cres < res) {
                    x = cand;
                    accepted = true;
                    break;
                }
            } catch (const DomainError&) {
            }
            lambda *= 0.5;
        }
        if (!accepted) {
            x = region.wrap(x - lambda * step);
        }
    }
    try {
        return f.eval_jet2(x).gradient.norm() < tol.residual;
    } catch (const DomainError&) {
        return false;
    }
}

bool lex_less(const Vec& a, const Vec& b) {
    for (int k = 0; k < a.size(); ++k) {
        if (a[k] < b[k] - 1e-12) return true;
        if (a[k] > b[k] + 1e-12) return false;
    }
    return false;
}

}  // namespace

std::vector<CriticalPoint> find_critical_points(const Expr& field, const Domain& region,
                                                const Tolerances& tol,
                                                CriticalPointDiagnostics* diag) {
    const int n = region.dim;
    std::vector<Vec> seeds = region.interior_grid(tol.grid_multistart);
    std::vector<Vec> found;

    CriticalPointDiagnostics local;
    CriticalPointDiagnostics& d = diag ? *diag : local;

    for (const Vec& seed : seeds) {
        Vec x = seed;
        ++d.newton_runs;
        if (!newton_to_critical(field, region, x, tol)) continue;
        ++d.converged;
        x = region.wrap(x);
        // Reject points that left the region or sit on its boundary.
        if (!region.contains(x) ) continue;
        bool dup = false;
        for (const Vec& y : found)
            if (region.diff(x, y).norm() < tol.collision) {
                dup = true;
                break;
            }
        if (!dup) found.push_back(x);
    }

    std::sort(found.begin(), found.end(), lex_less);

    std::vector<CriticalPoint> cps;
    for (std::size_t k = 0; k < found.size(); ++k) {
        Jet2 j = field.eval_jet2(found[k]);
        CriticalPoint cp;
        cp.location = found[k];
        cp.value = j.value;
        Eigen::SelfAdjointEigenSolver<Mat> es(j.hessian);
        cp.hessian_eigenvalues.assign(es.eigenvalues().data(), es.eigenvalues().data() + n);
        cp.index = morse_index(j.hessian, tol.nondegen);
        cp.id = "c" + std::to_string(k);
        cps.push_back(std::move(cp));
    }

    // Completeness audit. In 1d scan gradient sign changes along the grid;
    // each sign change must bracket a found point. In 2d flag cells whose
    // corner gradients exhaust all sign patterns without a nearby point.
    if (n == 1) {
        const int m = 4 * tol.grid_multistart;
        std::vector<double> xs;
        double a, b;
        bool per = region.periodic();
        if (per) {
            a = 0.0;
            b = region.periods[0];
        } else {
            a = region.lo[0];
            b = region.hi[0];
        }
        for (int i = 0; i <= m; ++i) xs.push_back(a + (b - a) * i / m);
        for (int i = 0; i + 1 < static_cast<int>(xs.size()); ++i) {
            Vec p0 = Vec::Constant(1, xs[i]), p1 = Vec::Constant(1, xs[i + 1]);
            if (region.kind == Domain::Kind::Sublevel && (!region.contains(p0) || !region.contains(p1)))
                continue;
            double g0, g1;
            try {
                g0 = field.eval_jet2(p0).gradient[0];
                g1 = field.eval_jet2(p1).gradient[0];
            } catch (const DomainError&) {
                continue;
            }
            if (g0 == 0.0 || g1 == 0.0) continue;
            if ((g0 < 0) != (g1 < 0)) {
                bool covered = false;
                for (const auto& cp : cps) {
                    double dx = region.diff(cp.location, p0)[0];
                    if (dx >= -1e-9 && dx <= (b - a) / m + 1e-9) {
                        covered = true;
                        break;
                    }
                }
                if (!covered) {
                    d.complete = false;
                    d.suspect_cells.push_back(p0);
                }
            }
        }
    } else if (n == 2) {
        const int m = 2 * tol.grid_multistart;
        auto corner = [&](int i, int jj) {
            Vec x(2);
            if (region.periodic()) {
                x[0] = region.periods[0] * i / m;
                x[1] = region.periods[1] * jj / m;
            } else {
                x[0] = region.lo[0] + (region.hi[0] - region.lo[0]) * i / m;
                x[1] = region.lo[1] + (region.hi[1] - region.lo[1]) * jj / m;
            }
            return x;
        };
        for (int i = 0; i < m; ++i)
            for (int jj = 0; jj < m; ++jj) {
                int patt = 0;
                bool usable = true;
                Vec c0 = corner(i, jj);
                for (int s = 0; s < 4 && usable; ++s) {
                    Vec x = corner(i + (s & 1), jj + (s >> 1));
                    if (region.kind == Domain::Kind::Sublevel && !region.contains(x)) {
                        usable = false;
                        break;
                    }
                    try {
                        Vec g = field.eval_jet2(x).gradient;
                        patt |= 1 << ((g[0] >= 0 ? 1 : 0) + 2 * (g[1] >= 0 ? 1 : 0));
                    } catch (const DomainError&) {
                        usable = false;
                    }
                }
                if (!usable || patt != 0b1111) continue;
                // All four sign quadrants present: expect a point in/near the cell.
                bool covered = false;
                double cell = (region.periodic() ? region.periods[0] : region.hi[0] - region.lo[0]) /
                              static_cast<double>(m);
                for (const auto& cp : cps)
                    if (region.diff(cp.location, c0).norm() < 2.5 * cell) {
                        covered = true;
                        break;
                    }
                if (!covered) {
                    d.complete = false;
                    d.suspect_cells.push_back(c0);
                }
            }
    }

    return cps;
}

int euler_characteristic_sum(const std::vector<CriticalPoint>& cps) {
    int chi = 0;
    for (const auto& cp : cps) chi += (cp.index % 2 == 0) ? 1 : -1;
    return chi;
}

}  // namespace mats
