#include <doctest.h>

#include <cmath>

#include "mats/ainfty.hpp"
#include "mats/solver.hpp"

using namespace mats;

namespace {

const char* kCircleDemo = R"cfg(
dimension = 1
[branch.L0]   domain = circle(6.283185307179586)   f = "0"
[branch.L1]   domain = circle(6.283185307179586)   f = "cos(x1)"
[overlap.L0.L1]  region = circle(6.283185307179586)  h = "0"  side = all
)cfg";

// Three branches on the circle with trigonometric polynomials; used for
// m_2 products. Chosen to pass genericity.
const char* kThreeBranch = R"cfg(
dimension = 1
[branch.L0]   domain = circle(6.283185307179586)   f = "0"
[branch.L1]   domain = circle(6.283185307179586)   f = "cos(x1)"
[branch.L2]   domain = circle(6.283185307179586)   f = "2.2*sin(x1) + 0.4*cos(2*x1)"
[overlap.L0.L1]  region = circle(6.283185307179586)  h = "0"  side = all
[overlap.L1.L2]  region = circle(6.283185307179586)  h = "0"  side = all
[overlap.L0.L2]  region = circle(6.283185307179586)  h = "0"  side = all
)cfg";

}  // namespace

TEST_CASE("compute_index on the worked examples") {
    // Cyclic data (mu list, n) -> Ind.
    CHECK(compute_index({1, 1}, 1) == 0);              // 1+1 - 1*1 + (2-3)
    CHECK(compute_index({1, 1, 0}, 1) == 0);           // 2 - 2 + 0
    CHECK(compute_index({2, 1, 1}, 2) == 0);           // 4 - 4 + 0
    CHECK(compute_index({1, 0, 1}, 1) == 0);
    CHECK(compute_index({1, 1, 1}, 1) == 1);
}

TEST_CASE("m_1 boundary data on the circle demo") {
    Tolerances tol;
    auto spec = load_spec(kCircleDemo);
    auto basis = hom_basis(spec, "L0", "L1", tol);
    REQUIRE(basis.size() == 2);
    // Generator degrees 0 and 1; the max of cos has mu = 1 hence degree 0.
    CHECK(basis[0].mu == 1);
    CHECK(basis[0].degree == 0);
    CHECK(basis[1].mu == 0);
    CHECK(basis[1].degree == 1);

    // Morse differential data: input the degree-0 generator, output the
    // degree-1 one. mu_eff = (1, 1-0) = (1,1): Ind = 0.
    BoundaryData bd = make_boundary_data(spec, {"L0", "L1"}, {basis[0].id}, basis[1].id, tol);
    CHECK(bd.mu_effective == std::vector<int>{1, 1});
    CHECK(compute_index(bd, 1) == 0);

    SUBCASE("oracle counts the two half-circle flow lines") {
        std::vector<std::string> desc;
        CHECK(brute_force_count_1d(spec, bd, tol, &desc) == 2);
    }
    SUBCASE("newton solver finds the same two trees") {
        SolveResult res = solve_rigid_trees(spec, bd, tol, 7);
        CHECK(res.count() == 2);
        for (const auto& cert : res.certificates) CHECK(cert.certified);
        for (const auto& gt : res.trees) {
            VerifyReport vr = verify_tree(spec, gt, 1e-6, tol);
            CHECK(vr.pass);
        }
    }
    SUBCASE("nonzero index input is a precondition violation") {
        BoundaryData bad = make_boundary_data(spec, {"L0", "L1"}, {basis[1].id}, basis[0].id, tol);
        CHECK(compute_index(bad, 1) != 0);
        CHECK_THROWS_AS(solve_rigid_trees(spec, bad, tol, 1), std::invalid_argument);
    }
}

TEST_CASE("m_1 product on the circle is zero mod 2") {
    Tolerances tol;
    auto spec = load_spec(kCircleDemo);
    auto basis = hom_basis(spec, "L0", "L1", tol);
    std::vector<ProductDetail> details;
    AInftyChain chain = m_product(spec, {"L0", "L1"}, {basis[0].id}, tol, 7, &details);
    CHECK(chain.zero());
    bool saw_two = false;
    for (const auto& d : details)
        if (d.output_id == basis[1].id) {
            CHECK(d.index_zero);
            CHECK(d.tree_count == 2);
            saw_two = true;
        }
    CHECK(saw_two);
}

TEST_CASE("m_2 on three circle branches: solver equals oracle per output") {
    Tolerances tol;
    auto spec = load_spec(kThreeBranch);
    auto rep = validate_genericity(spec, tol);
    REQUIRE(rep.pass);

    auto b01 = hom_basis(spec, "L0", "L1", tol);
    auto b12 = hom_basis(spec, "L1", "L2", tol);
    auto b02 = hom_basis(spec, "L0", "L2", tol);
    REQUIRE(b01.size() == 2);
    REQUIRE(b12.size() >= 2);
    REQUIRE(b02.size() >= 2);

    int nonzero_outputs = 0;
    for (const auto& g0 : b01)
        for (const auto& g1 : b12) {
            for (const auto& out : b02) {
                BoundaryData bd =
                    make_boundary_data(spec, {"L0", "L1", "L2"}, {g0.id, g1.id}, out.id, tol);
                if (compute_index(bd, 1) != 0) continue;
                long oracle = brute_force_count_1d(spec, bd, tol);
                SolveResult res = solve_rigid_trees(spec, bd, tol, 11);
                CHECK_MESSAGE(res.count() == oracle, "inputs ", g0.id, ",", g1.id, " output ",
                              out.id, ": newton ", res.count(), " oracle ", oracle);
                if (oracle % 2) ++nonzero_outputs;
                for (const auto& gt : res.trees) {
                    VerifyReport vr = verify_tree(spec, gt, 1e-6, tol);
                    CHECK_MESSAGE(vr.pass, "tree failed verification");
                }
            }
        }
    // The suite should exercise at least one nonzero coefficient.
    CHECK(nonzero_outputs > 0);
}

TEST_CASE("degree rule holds for computed products") {
    Tolerances tol;
    auto spec = load_spec(kThreeBranch);
    auto b01 = hom_basis(spec, "L0", "L1", tol);
    auto b12 = hom_basis(spec, "L1", "L2", tol);
    for (const auto& g0 : b01)
        for (const auto& g1 : b12) {
            AInftyChain chain = m_product(spec, {"L0", "L1", "L2"}, {g0.id, g1.id}, tol, 3);
            DegreeVerdict dv = check_degree(spec, {"L0", "L1", "L2"}, {g0.id, g1.id}, chain, tol);
            CHECK(dv.pass);
        }
}

TEST_CASE("verify_tree flags an injected defect") {
    Tolerances tol;
    auto spec = load_spec(kCircleDemo);
    auto basis = hom_basis(spec, "L0", "L1", tol);
    BoundaryData bd = make_boundary_data(spec, {"L0", "L1"}, {basis[0].id}, basis[1].id, tol);
    SolveResult res = solve_rigid_trees(spec, bd, tol, 7);
    REQUIRE(res.count() == 2);
    GradientTree broken = res.trees[0];
    broken.chains[0].segments[0].end[0] += 1e-3;
    VerifyReport vr = verify_tree(spec, broken, 1e-6, tol);
    CHECK_FALSE(vr.pass);
    CHECK(vr.max_vertex_mismatch == doctest::Approx(1e-3).epsilon(0.2));
}

TEST_CASE("isolation: perturbed solutions reconverge") {
    Tolerances tol;
    auto spec = load_spec(kCircleDemo);
    auto basis = hom_basis(spec, "L0", "L1", tol);
    BoundaryData bd = make_boundary_data(spec, {"L0", "L1"}, {basis[0].id}, basis[1].id, tol);
    SolveResult a = solve_rigid_trees(spec, bd, tol, 7);
    SolveResult b = solve_rigid_trees(spec, bd, tol, 12345);  // different seed stream
    REQUIRE(a.count() == b.count());
    for (long k = 0; k < a.count(); ++k) {
        CHECK(a.trees[k].bracketing == b.trees[k].bracketing);
        CHECK(a.trees[k].shoot_signs == b.trees[k].shoot_signs);
    }
}
