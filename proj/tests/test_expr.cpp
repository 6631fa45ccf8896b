#include <doctest.h>

#include <cmath>

#include "mats/expr.hpp"
#include "mats/util.hpp"

using namespace mats;

namespace {

Vec pt(std::initializer_list<double> v) {
    Vec x(static_cast<int>(v.size()));
    int k = 0;
    for (double c : v) x[k++] = c;
    return x;
}

// Central finite differences of the plain value evaluation; the independent
// cross-check route for the jet evaluation.
Vec fd_gradient(const Expr& e, const Vec& x, double h = 1e-5) {
    Vec g(x.size());
    for (int k = 0; k < x.size(); ++k) {
        Vec xp = x, xm = x;
        xp[k] += h;
        xm[k] -= h;
        g[k] = (e.eval(xp) - e.eval(xm)) / (2 * h);
    }
    return g;
}

Mat fd_hessian(const Expr& e, const Vec& x, double h = 1e-4) {
    Mat H(x.size(), x.size());
    for (int i = 0; i < x.size(); ++i)
        for (int j = 0; j < x.size(); ++j) {
            Vec xpp = x, xpm = x, xmp = x, xmm = x;
            xpp[i] += h; xpp[j] += h;
            xpm[i] += h; xpm[j] -= h;
            xmp[i] -= h; xmp[j] += h;
            xmm[i] -= h; xmm[j] -= h;
            H(i, j) = (e.eval(xpp) - e.eval(xpm) - e.eval(xmp) + e.eval(xmm)) / (4 * h * h);
        }
    return H;
}

}  // namespace

TEST_CASE("parse basics and diagnostics") {
    CHECK_NOTHROW(Expr::parse("x1^2 + sin(x2)", 2));

    CHECK_THROWS_AS(Expr::parse("x1*(", 1), ExprError);
    try {
        Expr::parse("x1*(", 1);
    } catch (const ExprError& e) {
        CHECK(e.offset() == 4);
    }

    CHECK_THROWS_AS(Expr::parse("x3", 2), ExprError);
    CHECK_THROWS_AS(Expr::parse("foo(x1)", 1), ExprError);
    CHECK_THROWS_AS(Expr::parse("x1 + ", 1), ExprError);
    CHECK_THROWS_AS(Expr::parse("x1^x1", 1), ExprError);  // variable exponent
    CHECK_NOTHROW(Expr::parse("x1^(1+2)", 1));            // constant exponent expression
    CHECK_NOTHROW(Expr::parse("2.5e-3 * x1", 1));
}

TEST_CASE("jet values on closed forms") {
    SUBCASE("bilinear") {
        Expr e = Expr::parse("x1*x2", 2);
        Jet2 j = e.eval_jet2(pt({2, 3}));
        CHECK(j.value == doctest::Approx(6));
        CHECK(j.gradient[0] == doctest::Approx(3));
        CHECK(j.gradient[1] == doctest::Approx(2));
        CHECK(j.hessian(0, 0) == doctest::Approx(0));
        CHECK(j.hessian(0, 1) == doctest::Approx(1));
        CHECK(j.hessian(1, 0) == doctest::Approx(1));
        CHECK(j.hessian(1, 1) == doctest::Approx(0));
    }
    SUBCASE("square at origin") {
        Expr e = Expr::parse("x1^2", 1);
        Jet2 j = e.eval_jet2(pt({0}));
        CHECK(j.value == 0);
        CHECK(j.gradient[0] == 0);
        CHECK(j.hessian(0, 0) == doctest::Approx(2));
    }
    SUBCASE("sine at origin") {
        Expr e = Expr::parse("sin(x1)", 1);
        Jet2 j = e.eval_jet2(pt({0}));
        CHECK(j.value == 0);
        CHECK(j.gradient[0] == doctest::Approx(1));
        CHECK(j.hessian(0, 0) == doctest::Approx(0));
    }
}

TEST_CASE("domain errors") {
    CHECK_THROWS_AS(Expr::parse("log(x1)", 1).eval_jet2(pt({-1})), DomainError);
    CHECK_THROWS_AS(Expr::parse("1/x1", 1).eval_jet2(pt({0})), DomainError);
    CHECK_THROWS_AS(Expr::parse("x1^0.5", 1).eval_jet2(pt({-2})), DomainError);
}

TEST_CASE("difference field is exact componentwise") {
    Expr f = Expr::parse("sin(x1)", 1);
    Expr g = Expr::parse("cos(x1)", 1);
    Expr d = Expr::difference(f, g);
    for (double x = -3; x <= 3; x += 0.37) {
        Jet2 jf = f.eval_jet2(pt({x})), jg = g.eval_jet2(pt({x})), jd = d.eval_jet2(pt({x}));
        CHECK(jd.value == doctest::Approx(jf.value - jg.value).epsilon(1e-12));
        CHECK(jd.gradient[0] == doctest::Approx(jf.gradient[0] - jg.gradient[0]).epsilon(1e-12));
        CHECK(jd.hessian(0, 0) ==
              doctest::Approx(jf.hessian(0, 0) - jg.hessian(0, 0)).epsilon(1e-12));
    }
    Expr zero = Expr::difference(f, f);
    CHECK(zero.eval_jet2(pt({0.3})).value == 0.0);

    CHECK(Expr::difference(Expr::parse("cos(x1)", 1), Expr::parse("0", 1)).eval(pt({0.2})) ==
          doctest::Approx(std::cos(0.2)));
}

TEST_CASE("jets agree with finite differences on random samples") {
    const char* exprs[] = {
        "x1^2 + sin(x2)",
        "exp(x1*x2) - tanh(x2)",
        "sqrt(x1^2 + x2^2 + 1)",
        "log(2 + cos(x1)) * x2",
        "x1/x2 + x2^3",
        "(x1 - x2)^2 * cos(x1)",
        "sin(x1)*cos(x2) + 0.5*x1^4",
    };
    SplitMix64 rng(12345);
    int samples = 0;
    for (const char* src : exprs) {
        Expr e = Expr::parse(src, 2);
        for (int rep = 0; rep < 150; ++rep) {
            Vec x = pt({rng.uniform(0.2, 1.8), rng.uniform(0.2, 1.8)});
            Jet2 j = e.eval_jet2(x);
            Vec gfd = fd_gradient(e, x);
            Mat hfd = fd_hessian(e, x);
            double gscale = std::max(1.0, j.gradient.norm());
            double hscale = std::max(1.0, j.hessian.norm());
            CHECK((j.gradient - gfd).norm() / gscale < 1e-6);
            CHECK((j.hessian - hfd).norm() / hscale < 1e-4);
            // Hessian symmetry to machine precision.
            CHECK((j.hessian - j.hessian.transpose()).norm() < 1e-14 * hscale);
            ++samples;
        }
    }
    CHECK(samples >= 1000);
}

TEST_CASE("print/parse round trip is structurally stable") {
    const char* sources[] = {
        "x1^2 + sin(x2)", "-x1*(x2 - 3)/(x2 + 4)", "exp(x1)^2 - 1e-3", "sqrt(x1+1)*tanh(x2)",
        "1 - 2 - 3",      "2/(x1/x2)",             "-(x1+x2)^3",       "cos(x1)-sin(x1)",
    };
    for (const char* src : sources) {
        Expr a = Expr::parse(src, 2);
        std::string printed = a.print();
        Expr b = Expr::parse(printed, 2);
        CHECK_MESSAGE(a.same_tree(b), "source: ", src, " printed: ", printed);
        CHECK(b.print() == printed);
    }
}
