#include "mats/ainfty.hpp"

#include <sstream>

namespace mats {

std::vector<Generator> hom_basis(const SkeletonSpec& spec, const std::string& i,
                                 const std::string& j, const Tolerances& tol) {
    const Overlap* ov = spec.find_overlap(i, j);
    if (!ov) throw std::invalid_argument("no overlap declared for " + i + "/" + j);
    Expr f = field_fij(spec, i, j);
    std::vector<Generator> out;
    for (auto& cp : find_critical_points(f, ov->region, tol)) {
        Generator g;
        g.id = cp.id;
        g.source = i;
        g.target = j;
        g.mu = cp.index;
        g.degree = spec.dim - cp.index;
        g.cp = std::move(cp);
        out.push_back(std::move(g));
    }
    return out;
}

AInftyChain m_product(const SkeletonSpec& spec, const std::vector<std::string>& objects,
                      const std::vector<std::string>& input_ids, const Tolerances& tol,
                      std::uint64_t seed, std::vector<ProductDetail>* details,
                      bool use_oracle_1d) {
    const int N = static_cast<int>(objects.size()) - 1;
    if (N < 1) throw std::invalid_argument("m_N needs at least two objects");
    if (static_cast<int>(input_ids.size()) != N)
        throw std::invalid_argument("m_N needs exactly N input generators");

    AInftyChain chain;
    chain.source = objects.front();
    chain.target = objects.back();

    auto outputs = hom_basis(spec, objects.front(), objects.back(), tol);
    if (outputs.empty() && details) {
        ProductDetail d;
        d.diagnostics.push_back("empty output hom space");
        details->push_back(d);
    }

    for (const auto& out : outputs) {
        BoundaryData bd = make_boundary_data(spec, objects, input_ids, out.id, tol);
        ProductDetail det;
        det.output_id = out.id;
        det.output_degree = out.degree;
        det.index_zero = compute_index(bd, spec.dim) == 0;
        if (det.index_zero) {
            if (use_oracle_1d && spec.dim == 1) {
                det.tree_count = brute_force_count_1d(spec, bd, tol);
            } else {
                SolveResult res = solve_rigid_trees(spec, bd, tol, seed);
                det.tree_count = res.count();
                det.diagnostics = res.diagnostics;
            }
            chain.add(out.id, det.tree_count);
        } else {
            chain.coeff[out.id] = 0;
        }
        if (details) details->push_back(std::move(det));
    }
    return chain;
}

DegreeVerdict check_degree(const SkeletonSpec& spec, const std::vector<std::string>& objects,
                           const std::vector<std::string>& input_ids, const AInftyChain& chain,
                           const Tolerances& tol) {
    DegreeVerdict verdict;
    const int N = static_cast<int>(objects.size()) - 1;
    int deg_in = 0;
    for (int k = 0; k < N; ++k) {
        auto basis = hom_basis(spec, objects[k], objects[k + 1], tol);
        bool found = false;
        for (const auto& g : basis)
            if (g.id == input_ids[k]) {
                deg_in += g.degree;
                found = true;
            }
        if (!found) {
            verdict.pass = false;
            verdict.violations.push_back("missing input generator " + input_ids[k]);
            return verdict;
        }
    }
    auto outs = hom_basis(spec, objects.front(), objects.back(), tol);
    for (const auto& [id, c] : chain.coeff) {
        if (!c) continue;
        for (const auto& g : outs)
            if (g.id == id && g.degree != deg_in + 2 - N) {
                verdict.pass = false;
                std::ostringstream os;
                os << "output " << id << " has degree " << g.degree << ", expected "
                   << deg_in + 2 - N;
                verdict.violations.push_back(os.str());
            }
    }
    return verdict;
}

RelationReport check_ainfty_relations(const SkeletonSpec& spec,
                                      const std::vector<std::string>& objects,
                                      const Tolerances& tol, std::uint64_t seed,
                                      bool use_oracle_1d) {
    RelationReport report;
    const int N = static_cast<int>(objects.size()) - 1;
    if (N < 1) return report;

    // Bases per consecutive pair.
    std::vector<std::vector<Generator>> bases;
    for (int k = 0; k < N; ++k) bases.push_back(hom_basis(spec, objects[k], objects[k + 1], tol));
    for (const auto& b : bases)
        if (b.empty()) return report;  // vacuous

    // Products recur across relation instances; memoise them.
    std::map<std::string, AInftyChain> memo;
    auto product = [&](const std::vector<std::string>& obj,
                       const std::vector<std::string>& in_ids) {
        std::string key;
        for (const auto& s : obj) key += s + "|";
        key += "#";
        for (const auto& s : in_ids) key += s + "|";
        auto it = memo.find(key);
        if (it != memo.end()) return it->second;
        AInftyChain c = m_product(spec, obj, in_ids, tol, seed, nullptr, use_oracle_1d);
        memo.emplace(key, c);
        return c;
    };

    // Every input tuple.
    std::vector<std::size_t> idx(N, 0);
    while (true) {
        std::vector<std::string> ids(N);
        for (int k = 0; k < N; ++k) ids[k] = bases[k][idx[k]].id;

        RelationInstance inst;
        inst.input_ids = ids;
        // Accumulate sum_{k,l} m_{N-l+1}(x_0..,m_l(x_k..x_{k+l-1}),..) in the
        // output hom space of (objects[0], objects[N]).
        std::map<std::string, int> total;
        bool unknown = false;
        std::string detail;
        for (int l = 1; l <= N && !unknown; ++l) {
            for (int k = 0; k + l <= N && !unknown; ++k) {
                std::vector<std::string> inner_obj(objects.begin() + k,
                                                   objects.begin() + k + l + 1);
                std::vector<std::string> inner_ids(ids.begin() + k, ids.begin() + k + l);
                AInftyChain inner;
                try {
                    inner = product(inner_obj, inner_ids);
                } catch (const std::exception& e) {
                    unknown = true;
                    detail = std::string("inner product failed: ") + e.what();
                    break;
                }
                for (const auto& [mid_id, mid_coef] : inner.coeff) {
                    if (!mid_coef) continue;
                    // Outer arity is N - l + 1; for l == N that is m_1.
                    std::vector<std::string> outer_obj;
                    std::vector<std::string> outer_ids;
                    for (int t = 0; t <= k; ++t) outer_obj.push_back(objects[t]);
                    for (int t = k + l; t <= N; ++t) outer_obj.push_back(objects[t]);
                    for (int t = 0; t < k; ++t) outer_ids.push_back(ids[t]);
                    outer_ids.push_back(mid_id);
                    for (int t = k + l; t < N; ++t) outer_ids.push_back(ids[t]);
                    AInftyChain outer;
                    try {
                        outer = product(outer_obj, outer_ids);
                    } catch (const std::exception& e) {
                        unknown = true;
                        detail = std::string("outer product failed: ") + e.what();
                        break;
                    }
                    for (const auto& [out_id, out_coef] : outer.coeff)
                        if (out_coef) total[out_id] = (total[out_id] + 1) % 2;
                }
            }
        }
        if (unknown) {
            inst.verdict = "UNKNOWN";
            inst.detail = detail;
            report.all_pass = false;
        } else {
            bool zero = true;
            for (const auto& [id, c] : total)
                if (c) zero = false;
            inst.verdict = zero ? "PASS" : "FAIL";
            if (!zero) {
                std::ostringstream os;
                os << "nonzero relation sum:";
                for (const auto& [id, c] : total)
                    if (c) os << " " << id;
                inst.detail = os.str();
                report.all_pass = false;
            }
        }
        report.instances.push_back(std::move(inst));
        ++report.checked;

        int k = N - 1;
        for (; k >= 0; --k) {
            if (++idx[k] < bases[k].size()) break;
            idx[k] = 0;
        }
        if (k < 0) break;
    }
    return report;
}

}  // namespace mats
