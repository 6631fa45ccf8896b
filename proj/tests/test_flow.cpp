#include <doctest.h>

#include <cmath>

#include "mats/flow.hpp"

using namespace mats;

namespace {
constexpr double kTau = 6.283185307179586;
constexpr double kPi = 3.141592653589793;
}

TEST_CASE("linear decay toward the origin") {
    // Field x1^2/2 has grad = x1; dir=-1 gives x' = -x.
    Tolerances tol;
    Expr f = Expr::parse("x1^2/2", 1);
    Domain dom = Domain::interval(-2, 2);
    auto cps = find_critical_points(f, dom, tol);
    REQUIRE(cps.size() == 1);

    FlowOptions opts;
    opts.capture_set = &cps;
    opts.capture_radius = 0.5;
    opts.t_max = 100;
    Trajectory tr = integrate_flow(f, dom, Vec::Constant(1, 1.0), -1.0, tol, opts);
    CHECK(tr.terminal == FlowTerminal::ReachedCritical);
    CHECK(tr.captured_id == cps[0].id);
    // x(t) = e^{-t}: strictly decreasing toward 0.
    for (std::size_t k = 1; k < tr.points.size(); ++k) CHECK(tr.points[k][0] < tr.points[k - 1][0]);
}

TEST_CASE("circle flow of cos runs toward the minimum at pi") {
    // grad cos = -sin; from pi/2 with dir=+1, x' = -sin x < 0 on (0, pi)?
    // No: at pi/2 the gradient is -1 so the ascending flow moves toward 0...
    // the phase line of x' = -sin(x) from pi/2 decreases toward 0 where cos
    // peaks. Flowing with dir = +1 ascends f = cos. The stated target of the
    // descending direction is pi. Both checked.
    Tolerances tol;
    Expr f = Expr::parse("cos(x1)", 1);
    Domain dom = Domain::circle(kTau);
    auto cps = find_critical_points(f, dom, tol);
    REQUIRE(cps.size() == 2);
    const CriticalPoint& top = cps[0];  // theta = 0, index 1
    const CriticalPoint& bot = cps[1];  // theta = pi, index 0

    FlowOptions opts;
    opts.capture_set = &cps;
    opts.capture_radius = 0.3;
    opts.t_max = 200;

    Trajectory up = integrate_flow(f, dom, Vec::Constant(1, kPi / 2), +1.0, tol, opts);
    CHECK(up.terminal == FlowTerminal::ReachedCritical);
    CHECK(up.captured_id == top.id);

    Trajectory down = integrate_flow(f, dom, Vec::Constant(1, kPi / 2), -1.0, tol, opts);
    CHECK(down.terminal == FlowTerminal::ReachedCritical);
    CHECK(down.captured_id == bot.id);

    // f strictly increases along dir=+1 trajectories.
    for (std::size_t k = 1; k < up.points.size(); ++k)
        CHECK(f.eval(dom.wrap(up.points[k])) > f.eval(dom.wrap(up.points[k - 1])) - tol.ode);

    SUBCASE("start inside the capture zone returns immediately") {
        Trajectory still = integrate_flow(f, dom, bot.location, +1.0, tol, opts);
        CHECK(still.terminal == FlowTerminal::ReachedCritical);
        CHECK(still.captured_id == bot.id);
        CHECK(still.duration() == 0.0);
    }
}

TEST_CASE("invariant charts split by eigenvalue sign") {
    Tolerances tol;
    SUBCASE("1d maximum: full unstable line, empty stable") {
        Expr f = Expr::parse("cos(x1)", 1);
        Domain dom = Domain::circle(kTau);
        auto cps = find_critical_points(f, dom, tol);
        const CriticalPoint& top = cps[0];
        auto un = invariant_chart(f, top, true, tol);
        auto st = invariant_chart(f, top, false, tol);
        CHECK(un.basis.cols() == 1);
        CHECK(st.basis.cols() == 0);
        CHECK(un.radius > 0.01);
    }
    SUBCASE("diag(-1,2) type splitting") {
        Expr f = Expr::parse("0 - x1^2/2 + x2^2", 2);
        Domain dom = Domain::box({-1, 1, -1, 1});
        auto cps = find_critical_points(f, dom, tol);
        REQUIRE(cps.size() == 1);
        auto un = invariant_chart(f, cps[0], true, tol);
        auto st = invariant_chart(f, cps[0], false, tol);
        REQUIRE(un.basis.cols() == 1);
        REQUIRE(st.basis.cols() == 1);
        CHECK(std::abs(un.basis(0, 0)) == doctest::Approx(1.0));
        CHECK(std::abs(st.basis(1, 0)) == doctest::Approx(1.0));
    }
    SUBCASE("minimum has no unstable directions") {
        Expr f = Expr::parse("x1^2", 1);
        Domain dom = Domain::interval(-1, 1);
        auto cps = find_critical_points(f, dom, tol);
        auto un = invariant_chart(f, cps[0], true, tol);
        CHECK(un.basis.cols() == 0);
        CHECK_THROWS(shoot_unstable(f, dom, cps[0], un, Vec(), 1e-6, tol));
    }
}

TEST_CASE("shooting from the 1d maximum reaches pi from both sides") {
    Tolerances tol;
    Expr f = Expr::parse("cos(x1)", 1);
    Domain dom = Domain::circle(kTau);
    auto cps = find_critical_points(f, dom, tol);
    const CriticalPoint& top = cps[0];
    const CriticalPoint& bot = cps[1];
    auto chart = invariant_chart(f, top, true, tol);

    FlowOptions opts;
    opts.capture_set = &cps;
    opts.capture_radius = 0.3;
    opts.t_max = 400;

    for (double s : {+1.0, -1.0}) {
        Trajectory tr = shoot_unstable(f, dom, top, chart, Vec::Constant(1, s), 1e-6, tol, opts);
        CHECK(tr.terminal == FlowTerminal::ReachedCritical);
        CHECK(tr.captured_id == bot.id);
        double endx = dom.wrap(tr.back())[0];
        CHECK(endx == doctest::Approx(kPi).epsilon(0.1));
        // The two directions approach pi from opposite sides (one wraps).
        double last_step = tr.back()[0] - tr.points[tr.points.size() - 2][0];
        if (s > 0)
            CHECK(last_step > 0);
        else
            CHECK(last_step < 0);
    }
}

TEST_CASE("flow map jacobian matches the linearisation on a quadratic field") {
    // grad(x^2/2) = x; backward time T: x(T) = x0 e^{-T}, d/dx0 = e^{-T}.
    Tolerances tol;
    Expr f = Expr::parse("x1^2/2", 1);
    Domain dom = Domain::interval(-4, 4);
    FlowJet fj = flow_map_with_jacobian(f, dom, Vec::Constant(1, 1.0), -1.0, 2.0, tol);
    REQUIRE(fj.ok);
    CHECK(fj.x[0] == doctest::Approx(std::exp(-2.0)).epsilon(1e-8));
    CHECK(fj.dx_dx0(0, 0) == doctest::Approx(std::exp(-2.0)).epsilon(1e-7));
}

TEST_CASE("reversal symmetry and tolerance convergence") {
    Tolerances tol;
    Expr f = Expr::parse("cos(x1) + 0.2*sin(2*x1)", 1);
    Expr fneg = Expr::negate(f);
    Domain dom = Domain::circle(kTau);
    Vec x0 = Vec::Constant(1, 1.1);

    FlowOptions opts;
    opts.t_max = 3.0;
    Trajectory a = integrate_flow(f, dom, x0, +1.0, tol, opts);
    Trajectory b = integrate_flow(fneg, dom, x0, -1.0, tol, opts);
    REQUIRE(a.terminal == FlowTerminal::TimeExhausted);
    REQUIRE(b.terminal == FlowTerminal::TimeExhausted);
    CHECK(dom.diff(a.back(), b.back()).norm() < 10 * tol.ode);

    Tolerances tight = tol;
    tight.ode = tol.ode / 2;
    Trajectory c = integrate_flow(f, dom, x0, +1.0, tight, opts);
    CHECK(dom.diff(a.back(), c.back()).norm() < 10 * tol.ode);
}

TEST_CASE("region exit is flagged with a boundary point") {
    Tolerances tol;
    Expr f = Expr::parse("x1", 1);
    Domain dom = Domain::interval(0, 1);
    FlowOptions opts;
    opts.t_max = 10;
    Trajectory tr = integrate_flow(f, dom, Vec::Constant(1, 0.5), +1.0, tol, opts);
    CHECK(tr.terminal == FlowTerminal::ExitedRegion);
    CHECK(tr.exit_point[0] == doctest::Approx(1.0).epsilon(1e-9));
}
