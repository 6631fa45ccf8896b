#include <doctest.h>

#include <cmath>

#include "mats/morse.hpp"
#include "mats/skeleton.hpp"

using namespace mats;

namespace {

const char* kCircleDemo = R"cfg(
dimension = 1
[branch.L0]   domain = circle(6.283185307179586)   f = "0"
[branch.L1]   domain = circle(6.283185307179586)   f = "cos(x1)"
[overlap.L0.L1]  region = circle(6.283185307179586)  h = "0"  side = all
[query]  objects = L0, L1
)cfg";

}  // namespace

TEST_CASE("load_spec on minimal and demo configs") {
    SUBCASE("single branch") {
        auto spec = load_spec("dimension = 1\n[branch.A]\ndomain = interval(0, 1)\nf = \"0\"\n");
        CHECK(spec.branches.size() == 1);
        CHECK(spec.overlaps.empty());
    }
    SUBCASE("two-branch circle demo") {
        auto spec = load_spec(kCircleDemo);
        CHECK(spec.dim == 1);
        CHECK(spec.branches.size() == 2);
        REQUIRE(spec.overlaps.size() == 1);
        CHECK(spec.overlaps[0].side == OverlapSide::All);
        REQUIRE(spec.queries.size() == 1);
        CHECK(spec.queries[0].objects == std::vector<std::string>{"L0", "L1"});
    }
    SUBCASE("dangling reference") {
        CHECK_THROWS_AS(load_spec("dimension = 1\n[branch.A]\ndomain = interval(0,1)\nf = \"0\"\n"
                                  "[overlap.A.L9]\nregion = interval(0,1)\n"),
                        ConfigError);
    }
    SUBCASE("malformed lines carry location") {
        try {
            load_spec("dimension = 1\n[branch.A]\ndomain = interval(0,1)\nf = \"x1*(\"\n");
            CHECK(false);
        } catch (const ConfigError& e) {
            CHECK(e.line() == 4);
        }
    }
    SUBCASE("missing dimension") {
        CHECK_THROWS_AS(load_spec("[branch.A]\ndomain = interval(0,1)\nf = \"0\"\n"), ConfigError);
    }
}

TEST_CASE("serialize round trip") {
    auto spec = load_spec(kCircleDemo);
    std::string text = serialize(spec);
    auto spec2 = load_spec(text);
    CHECK(serialize(spec2) == text);
    CHECK(spec2.dim == spec.dim);
    CHECK(spec2.branches.size() == spec.branches.size());
    CHECK(spec2.overlaps.size() == spec.overlaps.size());
    CHECK(spec2.queries.size() == spec.queries.size());
}

TEST_CASE("field_fij and antisymmetry") {
    auto spec = load_spec(kCircleDemo);
    Expr f01 = field_fij(spec, "L0", "L1");
    Expr f10 = field_fij(spec, "L1", "L0");
    for (double x = 0; x < 6.28; x += 0.17) {
        Vec p = Vec::Constant(1, x);
        CHECK(f01.eval(p) == doctest::Approx(std::cos(x)));
        CHECK(f01.eval(p) + f10.eval(p) == doctest::Approx(0.0).epsilon(1e-15));
    }
    CHECK_THROWS(field_fij(spec, "L0", "L0"));
    CHECK_THROWS(field_fij(spec, "L0", "missing"));
}

TEST_CASE("genericity validation") {
    Tolerances tol;
    SUBCASE("cos on the circle passes with two nondegenerate points") {
        auto spec = load_spec(kCircleDemo);
        auto rep = validate_genericity(spec, tol);
        CHECK(rep.pass);
        CHECK(rep.critical_points_seen == 2);
    }
    SUBCASE("cubic on an interval fails on degeneracy") {
        auto spec = load_spec(
            "dimension = 1\n[branch.A]\ndomain = interval(-1,1)\nf = \"0\"\n"
            "[branch.B]\ndomain = interval(-1,1)\nf = \"x1^3\"\n"
            "[overlap.A.B]\nregion = interval(-1,1)\nh = \"x1^2-1\"\nside = neg\n");
        auto rep = validate_genericity(spec, tol);
        CHECK_FALSE(rep.pass);
        bool nondegen_issue = false;
        for (const auto& iss : rep.issues)
            if (iss.check == "nondegenerate" || iss.check == "boundary") nondegen_issue = true;
        CHECK(nondegen_issue);
    }
    SUBCASE("boundary transversality failure carries a witness") {
        // f_AB = x1 on [0,1] has no critical point; at x=0 the gradient points
        // outward while the region wants it inward there.
        auto spec = load_spec(
            "dimension = 1\n[branch.A]\ndomain = interval(0,1)\nf = \"0\"\n"
            "[branch.B]\ndomain = interval(0,1)\nf = \"x1\"\n"
            "[overlap.A.B]\nregion = interval(0,1)\nh = \"(x1-0.5)^2-0.25\"\nside = neg\n");
        auto rep = validate_genericity(spec, tol);
        CHECK_FALSE(rep.pass);
        bool boundary_issue = false;
        for (const auto& iss : rep.issues)
            if (iss.check == "boundary" && iss.witness.size() == 1) boundary_issue = true;
        CHECK(boundary_issue);
    }
    SUBCASE("strictly convex difference on a disk passes") {
        auto spec = load_spec(
            "dimension = 2\n"
            "[branch.A]\ndomain = box(-3,3,-3,3)\nf = \"0\"\n"
            "[branch.B]\ndomain = box(-3,3,-3,3)\nf = \"x1^2 + x2^2\"\n"
            "[overlap.A.B]\nregion = sublevel(\"x1^2+x2^2\", 4, -3,3,-3,3)\n"
            "h = \"x1^2+x2^2-4\"\nside = neg\n");
        auto rep = validate_genericity(spec, tol);
        CHECK(rep.pass);
        CHECK(rep.critical_points_seen == 1);
    }
}

TEST_CASE("determinism of validation") {
    Tolerances tol;
    auto spec = load_spec(kCircleDemo);
    auto r1 = validate_genericity(spec, tol);
    auto r2 = validate_genericity(spec, tol);
    CHECK(r1.pass == r2.pass);
    CHECK(r1.issues.size() == r2.issues.size());
    CHECK(r1.critical_points_seen == r2.critical_points_seen);
}
