#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "mats/solver.hpp"

namespace mats {

/// Graded basis element of Hom(f_i, f_j): a critical point of f_ij.
struct Generator {
    std::string id;
    std::string source, target;
    int mu = 0;
    int degree = 0;  // n - mu
    CriticalPoint cp;
};

/// All generators of Hom(f_i, f_j), ordered as the critical point finder
/// reports them.
std::vector<Generator> hom_basis(const SkeletonSpec& spec, const std::string& i,
                                 const std::string& j, const Tolerances& tol);

/// Z2 combination of generators of one Hom space.
struct AInftyChain {
    std::string source, target;
    std::map<std::string, int> coeff;  // generator id -> 0/1

    bool zero() const {
        for (const auto& [id, c] : coeff)
            if (c) return false;
        return true;
    }
    void add(const std::string& id, long count) {
        coeff[id] = (coeff[id] + static_cast<int>(count % 2 + 2)) % 2;
    }
};

struct ProductDetail {
    std::string output_id;
    int output_degree = 0;
    long tree_count = 0;  // before mod 2
    bool index_zero = false;
    std::vector<std::string> diagnostics;
};

/// m_N over Z2: for every candidate output with vanishing virtual index,
/// coefficient = (number of rigid gradient trees) mod 2.
AInftyChain m_product(const SkeletonSpec& spec, const std::vector<std::string>& objects,
                      const std::vector<std::string>& input_ids, const Tolerances& tol,
                      std::uint64_t seed = 1, std::vector<ProductDetail>* details = nullptr,
                      bool use_oracle_1d = false);

struct DegreeVerdict {
    bool pass = true;
    std::vector<std::string> violations;
};

/// deg(out) = sum deg(in) + 2 - N for every nonzero output coefficient.
DegreeVerdict check_degree(const SkeletonSpec& spec, const std::vector<std::string>& objects,
                           const std::vector<std::string>& input_ids, const AInftyChain& chain,
                           const Tolerances& tol);

struct RelationInstance {
    std::vector<std::string> input_ids;
    std::string verdict;  // PASS | FAIL | UNKNOWN
    std::string detail;
};

struct RelationReport {
    bool all_pass = true;
    int checked = 0;
    std::vector<RelationInstance> instances;
};

/// Evaluate the unsigned Z2 relation sum_{k,l} m(x_0.., m_l(x_k..), ..) = 0
/// on every generator tuple for the object sequence, with inner arity l from
/// 1 to the full length.
RelationReport check_ainfty_relations(const SkeletonSpec& spec,
                                      const std::vector<std::string>& objects,
                                      const Tolerances& tol, std::uint64_t seed = 1,
                                      bool use_oracle_1d = false);

}  // namespace mats
