#include "mats/skeleton.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <fstream>
#include <limits>
#include <sstream>

#include "mats/morse.hpp"
#include "mats/util.hpp"

namespace mats {

// ---------------------------------------------------------------------------
// Domain
// ---------------------------------------------------------------------------

namespace {
constexpr double kSublevelWindow = 8.0;  // fallback sampling window for sublevel kinds
}

Domain Domain::interval(double a, double b) {
    if (!(a < b)) throw std::invalid_argument("interval requires a < b");
    Domain d;
    d.kind = Kind::Interval;
    d.dim = 1;
    d.lo = {a};
    d.hi = {b};
    return d;
}

Domain Domain::circle(double period) {
    if (!(period > 0)) throw std::invalid_argument("circle requires period > 0");
    Domain d;
    d.kind = Kind::Circle;
    d.dim = 1;
    d.periods = {period};
    return d;
}

Domain Domain::box(const std::vector<double>& bounds) {
    if (bounds.empty() || bounds.size() % 2 != 0)
        throw std::invalid_argument("box requires a1,b1,...,an,bn");
    Domain d;
    d.kind = Kind::Box;
    d.dim = static_cast<int>(bounds.size() / 2);
    for (std::size_t k = 0; k < bounds.size(); k += 2) {
        if (!(bounds[k] < bounds[k + 1])) throw std::invalid_argument("box requires a < b per axis");
        d.lo.push_back(bounds[k]);
        d.hi.push_back(bounds[k + 1]);
    }
    return d;
}

Domain Domain::torus(const std::vector<double>& periods) {
    if (periods.empty()) throw std::invalid_argument("torus requires at least one period");
    Domain d;
    d.kind = Kind::Torus;
    d.dim = static_cast<int>(periods.size());
    for (double p : periods)
        if (!(p > 0)) throw std::invalid_argument("torus periods must be positive");
    d.periods = periods;
    return d;
}

Domain Domain::sublevel(Expr h, double c, int dim) {
    Domain d;
    d.kind = Kind::Sublevel;
    d.dim = dim;
    d.level = std::move(h);
    d.level_c = c;
    d.lo.assign(dim, -kSublevelWindow);
    d.hi.assign(dim, kSublevelWindow);
    return d;
}

bool Domain::contains(const Vec& x, double margin) const {
    switch (kind) {
        case Kind::Circle:
        case Kind::Torus: return true;
        case Kind::Interval:
        case Kind::Box:
            for (int k = 0; k < dim; ++k)
                if (x[k] < lo[k] + margin || x[k] > hi[k] - margin) return false;
            return true;
        case Kind::Sublevel: {
            if (level.empty()) return false;
            if (margin == 0.0) return level.eval(x) <= level_c;
            return level.eval(x) <= level_c && boundary_distance(x) >= margin;
        }
    }
    return false;
}

double Domain::boundary_distance(const Vec& x) const {
    switch (kind) {
        case Kind::Circle:
        case Kind::Torus: return std::numeric_limits<double>::infinity();
        case Kind::Interval:
        case Kind::Box: {
            double d = std::numeric_limits<double>::infinity();
            for (int k = 0; k < dim; ++k) d = std::min({d, x[k] - lo[k], hi[k] - x[k]});
            return d;
        }
        case Kind::Sublevel: {
            // First-order estimate from the level function.
            Jet2 j = level.eval_jet2(x);
            double g = j.gradient.norm();
            if (g < 1e-14) return std::numeric_limits<double>::infinity();
            return std::max(0.0, (level_c - j.value) / g);
        }
    }
    return 0.0;
}

Vec Domain::wrap(const Vec& x) const {
    if (!periodic()) return x;
    Vec y = x;
    for (int k = 0; k < dim; ++k) {
        double p = periods[k];
        y[k] = std::fmod(y[k], p);
        if (y[k] < 0) y[k] += p;
    }
    return y;
}

Vec Domain::diff(const Vec& a, const Vec& b) const {
    Vec d = a - b;
    if (!periodic()) return d;
    for (int k = 0; k < dim; ++k) {
        double p = periods[k];
        d[k] = std::remainder(d[k], p);
    }
    return d;
}

std::vector<Vec> Domain::interior_grid(int k) const {
    std::vector<Vec> pts;
    std::vector<int> idx(dim, 0);
    auto axis_point = [&](int axis, int i) -> double {
        switch (kind) {
            case Kind::Circle:
            case Kind::Torus: return periods[axis] * (static_cast<double>(i) / k);
            default: return lo[axis] + (hi[axis] - lo[axis]) * ((i + 0.5) / k);
        }
    };
    while (true) {
        Vec x(dim);
        for (int a = 0; a < dim; ++a) x[a] = axis_point(a, idx[a]);
        if (kind != Kind::Sublevel || (!level.empty() && level.eval(x) <= level_c)) pts.push_back(x);
        int a = 0;
        for (; a < dim; ++a) {
            if (++idx[a] < k) break;
            idx[a] = 0;
        }
        if (a == dim) break;
    }
    return pts;
}

std::vector<Vec> Domain::boundary_grid(int k) const {
    std::vector<Vec> pts;
    switch (kind) {
        case Kind::Circle:
        case Kind::Torus: return pts;
        case Kind::Interval: {
            pts.push_back(Vec::Constant(1, lo[0]));
            pts.push_back(Vec::Constant(1, hi[0]));
            return pts;
        }
        case Kind::Box: {
            if (dim == 1) {
                pts.push_back(Vec::Constant(1, lo[0]));
                pts.push_back(Vec::Constant(1, hi[0]));
                return pts;
            }
            // Sample each face with k points per tangential axis.
            for (int axis = 0; axis < dim; ++axis) {
                for (int s = 0; s < 2; ++s) {
                    std::vector<int> idx(dim, 0);
                    while (true) {
                        Vec x(dim);
                        for (int a = 0; a < dim; ++a) {
                            if (a == axis)
                                x[a] = s == 0 ? lo[a] : hi[a];
                            else
                                x[a] = lo[a] + (hi[a] - lo[a]) * ((idx[a] + 0.5) / k);
                        }
                        pts.push_back(x);
                        int a = 0;
                        for (; a < dim; ++a) {
                            if (a == axis) continue;
                            if (++idx[a] < k) break;
                            idx[a] = 0;
                        }
                        if (a == dim) break;
                    }
                }
            }
            return pts;
        }
        case Kind::Sublevel: {
            // March grid rays and bisect the level crossing.
            int m = std::max(k, 8);
            std::vector<int> idx(dim, 0);
            while (true) {
                Vec a(dim), b(dim);
                bool found = false;
                for (int ax = 0; ax < dim; ++ax)
                    a[ax] = lo[ax] + (hi[ax] - lo[ax]) * ((idx[ax] + 0.5) / m);
                if (level.eval(a) <= level_c) {
                    // Walk along each axis until the level is crossed.
                    for (int ax = 0; ax < dim && !found; ++ax) {
                        for (int s : {-1, 1}) {
                            b = a;
                            double step = (hi[ax] - lo[ax]) / m;
                            Vec prev = a;
                            for (int t = 1; t <= m; ++t) {
                                b[ax] = a[ax] + s * t * step;
                                if (b[ax] < lo[ax] || b[ax] > hi[ax]) break;
                                if (level.eval(b) > level_c) {
                                    Vec u = prev, v = b;
                                    for (int it = 0; it < 60; ++it) {
                                        Vec mid = 0.5 * (u + v);
                                        (level.eval(mid) <= level_c ? u : v) = mid;
                                    }
                                    pts.push_back(0.5 * (u + v));
                                    found = true;
                                    break;
                                }
                                prev = b;
                            }
                            if (found) break;
                        }
                    }
                }
                int ax = 0;
                for (; ax < dim; ++ax) {
                    if (++idx[ax] < m) break;
                    idx[ax] = 0;
                }
                if (ax == dim) break;
            }
            return pts;
        }
    }
    return pts;
}

Vec Domain::outward_normal(const Vec& x) const {
    Vec nrm = Vec::Zero(dim);
    switch (kind) {
        case Kind::Circle:
        case Kind::Torus: return nrm;
        case Kind::Interval:
        case Kind::Box: {
            int best = 0, bs = 0;
            double d = std::numeric_limits<double>::infinity();
            for (int k = 0; k < dim; ++k) {
                if (x[k] - lo[k] < d) {
                    d = x[k] - lo[k];
                    best = k;
                    bs = -1;
                }
                if (hi[k] - x[k] < d) {
                    d = hi[k] - x[k];
                    best = k;
                    bs = 1;
                }
            }
            nrm[best] = bs;
            return nrm;
        }
        case Kind::Sublevel: return level.eval_jet2(x).gradient;
    }
    return nrm;
}

std::string Domain::describe() const {
    std::ostringstream os;
    switch (kind) {
        case Kind::Interval: os << "interval(" << fmt_double(lo[0]) << "," << fmt_double(hi[0]) << ")"; break;
        case Kind::Circle: os << "circle(" << fmt_double(periods[0]) << ")"; break;
        case Kind::Box: {
            os << "box(";
            for (int k = 0; k < dim; ++k) {
                if (k) os << ",";
                os << fmt_double(lo[k]) << "," << fmt_double(hi[k]);
            }
            os << ")";
            break;
        }
        case Kind::Torus: {
            os << "torus(";
            for (int k = 0; k < dim; ++k) {
                if (k) os << ",";
                os << fmt_double(periods[k]);
            }
            os << ")";
            break;
        }
        case Kind::Sublevel:
            os << "sublevel(\"" << level.print() << "\"," << fmt_double(level_c) << ")";
            break;
    }
    return os.str();
}

// ---------------------------------------------------------------------------
// SkeletonSpec lookups
// ---------------------------------------------------------------------------

const Branch& SkeletonSpec::branch(const std::string& name) const {
    for (const auto& b : branches)
        if (b.name == name) return b;
    throw std::invalid_argument("unknown branch '" + name + "'");
}

int SkeletonSpec::branch_index(const std::string& name) const {
    for (std::size_t k = 0; k < branches.size(); ++k)
        if (branches[k].name == name) return static_cast<int>(k);
    return -1;
}

const Overlap* SkeletonSpec::find_overlap(const std::string& a, const std::string& b) const {
    for (const auto& o : overlaps)
        if ((o.branch_i == a && o.branch_j == b) || (o.branch_i == b && o.branch_j == a)) return &o;
    return nullptr;
}

// ---------------------------------------------------------------------------
// Config parsing
// ---------------------------------------------------------------------------

namespace {

struct Tok {
    enum Kind { Ident, Number, String, Punct, End } kind;
    std::string text;
    double num = 0.0;
    int line = 0;
};

struct Scanner {
    std::string text;
    std::size_t pos = 0;
    int line = 1;

    explicit Scanner(std::string t) : text(std::move(t)) {}

    void skip() {
        while (pos < text.size()) {
            char c = text[pos];
            if (c == '\n') {
                ++line;
                ++pos;
            } else if (std::isspace(static_cast<unsigned char>(c))) {
                ++pos;
            } else if (c == '#') {
                while (pos < text.size() && text[pos] != '\n') ++pos;
            } else {
                break;
            }
        }
    }

    Tok next() {
        skip();
        if (pos >= text.size()) return {Tok::End, "", 0.0, line};
        char c = text[pos];
        int ln = line;
        if (c == '"') {
            std::size_t start = ++pos;
            while (pos < text.size() && text[pos] != '"') {
                if (text[pos] == '\n') throw ConfigError("unterminated string", ln);
                ++pos;
            }
            if (pos >= text.size()) throw ConfigError("unterminated string", ln);
            std::string s = text.substr(start, pos - start);
            ++pos;
            return {Tok::String, s, 0.0, ln};
        }
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
            std::size_t start = pos;
            while (pos < text.size() &&
                   (std::isalnum(static_cast<unsigned char>(text[pos])) || text[pos] == '_'))
                ++pos;
            return {Tok::Ident, text.substr(start, pos - start), 0.0, ln};
        }
        auto digit_at = [&](std::size_t p) {
            return p < text.size() && std::isdigit(static_cast<unsigned char>(text[p]));
        };
        bool starts_number = std::isdigit(static_cast<unsigned char>(c)) ||
                             ((c == '-' || c == '+') && (digit_at(pos + 1) ||
                                                         (pos + 1 < text.size() &&
                                                          text[pos + 1] == '.' && digit_at(pos + 2)))) ||
                             (c == '.' && digit_at(pos + 1));
        if (starts_number) {
            std::size_t start = pos;
            if (c == '-' || c == '+') ++pos;
            bool any = false;
            while (pos < text.size() &&
                   (std::isdigit(static_cast<unsigned char>(text[pos])) || text[pos] == '.')) {
                if (std::isdigit(static_cast<unsigned char>(text[pos]))) any = true;
                ++pos;
            }
            if (pos < text.size() && (text[pos] == 'e' || text[pos] == 'E')) {
                ++pos;
                if (pos < text.size() && (text[pos] == '+' || text[pos] == '-')) ++pos;
                while (pos < text.size() && std::isdigit(static_cast<unsigned char>(text[pos]))) ++pos;
            }
            if (!any) throw ConfigError("malformed number", ln);
            std::string s = text.substr(start, pos - start);
            return {Tok::Number, s, std::stod(s), ln};
        }
        ++pos;
        return {Tok::Punct, std::string(1, c), 0.0, ln};
    }

    Tok peeked;
    bool has_peek = false;
    Tok peek() {
        if (!has_peek) {
            peeked = next();
            has_peek = true;
        }
        return peeked;
    }
    Tok take() {
        if (has_peek) {
            has_peek = false;
            return peeked;
        }
        return next();
    }
};

Domain parse_domain_value(Scanner& sc, int dim, int ln) {
    Tok name = sc.take();
    if (name.kind != Tok::Ident) throw ConfigError("expected domain kind", ln);
    Tok open = sc.take();
    if (!(open.kind == Tok::Punct && open.text == "(")) throw ConfigError("expected '('", ln);
    std::vector<double> nums;
    std::string expr_src;
    bool have_expr = false;
    while (true) {
        Tok t = sc.take();
        if (t.kind == Tok::Punct && t.text == ")") break;
        if (t.kind == Tok::Punct && t.text == ",") continue;
        if (t.kind == Tok::Number)
            nums.push_back(t.num);
        else if (t.kind == Tok::String && !have_expr) {
            expr_src = t.text;
            have_expr = true;
        } else
            throw ConfigError("unexpected token in domain arguments", t.line);
    }
    if (name.text == "interval") {
        if (nums.size() != 2) throw ConfigError("interval(a,b) takes two numbers", ln);
        return Domain::interval(nums[0], nums[1]);
    }
    if (name.text == "circle") {
        if (nums.size() != 1) throw ConfigError("circle(period) takes one number", ln);
        return Domain::circle(nums[0]);
    }
    if (name.text == "box") return Domain::box(nums);
    if (name.text == "torus") return Domain::torus(nums);
    if (name.text == "sublevel") {
        if (!have_expr || nums.empty())
            throw ConfigError("sublevel(\"h\", c [, lo1,hi1,...]) takes a field and a level", ln);
        Expr h;
        try {
            h = Expr::parse(expr_src, dim);
        } catch (const ExprError& e) {
            throw ConfigError(std::string("in sublevel field: ") + e.what(), ln);
        }
        Domain d = Domain::sublevel(h, nums[0], dim);
        if (nums.size() > 1) {
            if (nums.size() != static_cast<std::size_t>(1 + 2 * dim))
                throw ConfigError("sublevel window takes lo,hi per axis", ln);
            for (int k = 0; k < dim; ++k) {
                d.lo[k] = nums[1 + 2 * k];
                d.hi[k] = nums[2 + 2 * k];
            }
        }
        return d;
    }
    throw ConfigError("unknown domain kind '" + name.text + "'", ln);
}

}  // namespace

SkeletonSpec load_spec(const std::string& config_text) {
    Scanner sc(config_text);
    SkeletonSpec spec;
    spec.source_text = config_text;
    spec.dim = 0;

    enum class Section { None, Branch, Overlap, Query };
    Section section = Section::None;
    Branch* cur_branch = nullptr;
    Overlap* cur_overlap = nullptr;
    Query* cur_query = nullptr;

    auto need_dim = [&](int ln) {
        if (spec.dim <= 0) throw ConfigError("dimension must be declared before sections", ln);
    };

    while (true) {
        Tok t = sc.peek();
        if (t.kind == Tok::End) break;
        if (t.kind == Tok::Punct && t.text == "[") {
            sc.take();
            Tok kind = sc.take();
            if (kind.kind != Tok::Ident) throw ConfigError("expected section name", kind.line);
            std::vector<std::string> parts;
            while (true) {
                Tok p = sc.take();
                if (p.kind == Tok::Punct && p.text == "]") break;
                if (p.kind == Tok::Punct && p.text == ".") continue;
                if (p.kind != Tok::Ident && p.kind != Tok::Number)
                    throw ConfigError("expected name in section header", p.line);
                parts.push_back(p.text);
            }
            if (kind.text == "branch") {
                if (parts.size() != 1) throw ConfigError("branch section needs one name", kind.line);
                need_dim(kind.line);
                spec.branches.push_back(Branch{parts[0], Domain{}, Expr{}, ""});
                cur_branch = &spec.branches.back();
                section = Section::Branch;
            } else if (kind.text == "overlap") {
                if (parts.size() != 2) throw ConfigError("overlap section needs two names", kind.line);
                need_dim(kind.line);
                spec.overlaps.push_back(Overlap{parts[0], parts[1], Domain{}, Expr{}, "", OverlapSide::All});
                cur_overlap = &spec.overlaps.back();
                section = Section::Overlap;
            } else if (kind.text == "query") {
                if (!parts.empty()) throw ConfigError("query section takes no name", kind.line);
                need_dim(kind.line);
                spec.queries.push_back(Query{});
                cur_query = &spec.queries.back();
                section = Section::Query;
            } else {
                throw ConfigError("unknown section '" + kind.text + "'", kind.line);
            }
            continue;
        }
        if (t.kind != Tok::Ident) throw ConfigError("expected key or section", t.line);
        Tok key = sc.take();
        Tok eq = sc.take();
        if (!(eq.kind == Tok::Punct && eq.text == "="))
            throw ConfigError("expected '=' after '" + key.text + "'", key.line);

        if (section == Section::None) {
            if (key.text == "dimension") {
                Tok v = sc.take();
                if (v.kind != Tok::Number || v.num != std::floor(v.num) || v.num < 1)
                    throw ConfigError("dimension must be a positive integer", v.line);
                spec.dim = static_cast<int>(v.num);
            } else {
                throw ConfigError("unknown top-level key '" + key.text + "'", key.line);
            }
            continue;
        }
        if (section == Section::Branch) {
            if (key.text == "domain") {
                cur_branch->domain = parse_domain_value(sc, spec.dim, key.line);
            } else if (key.text == "f") {
                Tok v = sc.take();
                if (v.kind != Tok::String) throw ConfigError("f must be a quoted expression", v.line);
                try {
                    cur_branch->f = Expr::parse(v.text, spec.dim);
                } catch (const ExprError& e) {
                    throw ConfigError("in f of branch " + cur_branch->name + " at offset " +
                                          std::to_string(e.offset()) + ": " + e.what(),
                                      v.line);
                }
                cur_branch->f_source = v.text;
            } else {
                throw ConfigError("unknown branch key '" + key.text + "'", key.line);
            }
            continue;
        }
        if (section == Section::Overlap) {
            if (key.text == "region") {
                cur_overlap->region = parse_domain_value(sc, spec.dim, key.line);
            } else if (key.text == "h") {
                Tok v = sc.take();
                if (v.kind != Tok::String) throw ConfigError("h must be a quoted expression", v.line);
                try {
                    cur_overlap->h = Expr::parse(v.text, spec.dim);
                } catch (const ExprError& e) {
                    throw ConfigError("in h of overlap at offset " + std::to_string(e.offset()) +
                                          ": " + e.what(),
                                      v.line);
                }
                cur_overlap->h_source = v.text;
            } else if (key.text == "side") {
                Tok v = sc.take();
                if (v.kind != Tok::Ident) throw ConfigError("side must be all, neg or pos", v.line);
                if (v.text == "all")
                    cur_overlap->side = OverlapSide::All;
                else if (v.text == "neg")
                    cur_overlap->side = OverlapSide::Neg;
                else if (v.text == "pos")
                    cur_overlap->side = OverlapSide::Pos;
                else
                    throw ConfigError("side must be all, neg or pos", v.line);
            } else {
                throw ConfigError("unknown overlap key '" + key.text + "'", key.line);
            }
            continue;
        }
        // Query section.
        if (key.text == "objects") {
            while (true) {
                Tok v = sc.peek();
                if (v.kind == Tok::Ident) {
                    // Lookahead: a following '=' means this ident is the next key.
                    Tok ident = sc.take();
                    Tok after = sc.peek();
                    if (after.kind == Tok::Punct && after.text == "=") {
                        throw ConfigError("objects list interrupted by key '" + ident.text + "'",
                                          ident.line);
                    }
                    cur_query->objects.push_back(ident.text);
                    Tok comma = sc.peek();
                    if (comma.kind == Tok::Punct && comma.text == ",") {
                        sc.take();
                        continue;
                    }
                }
                break;
            }
            if (cur_query->objects.size() < 2)
                throw ConfigError("query needs at least two objects", key.line);
        } else {
            throw ConfigError("unknown query key '" + key.text + "'", key.line);
        }
    }

    if (spec.dim <= 0) throw ConfigError("missing dimension declaration", 1);

    // Structural checks.
    for (const auto& b : spec.branches) {
        if (b.f.empty()) throw ConfigError("branch " + b.name + " missing f", 1);
        if (b.domain.dim != spec.dim)
            throw ConfigError("branch " + b.name + " domain dimension mismatch", 1);
        int count = 0;
        for (const auto& ob : spec.branches)
            if (ob.name == b.name) ++count;
        if (count > 1) throw ConfigError("duplicate branch name " + b.name, 1);
    }
    for (auto& o : spec.overlaps) {
        if (spec.branch_index(o.branch_i) < 0)
            throw ConfigError("overlap references undeclared branch " + o.branch_i, 1);
        if (spec.branch_index(o.branch_j) < 0)
            throw ConfigError("overlap references undeclared branch " + o.branch_j, 1);
        if (o.branch_i == o.branch_j)
            throw ConfigError("overlap of a branch with itself is not allowed", 1);
        if (o.region.dim != spec.dim) throw ConfigError("overlap region dimension mismatch", 1);
        if (o.h.empty()) {
            o.h = Expr::constant(0.0, spec.dim);
            o.h_source = "0";
        }
        // Region must sit inside both branch domains (coarse grid check).
        const Branch& bi = spec.branch(o.branch_i);
        const Branch& bj = spec.branch(o.branch_j);
        for (const Vec& x : o.region.interior_grid(8)) {
            if (!bi.domain.contains(x) || !bj.domain.contains(x))
                throw ConfigError("overlap region exits branch domains of " + o.branch_i + "/" +
                                      o.branch_j,
                                  1);
        }
    }
    for (std::size_t a = 0; a < spec.overlaps.size(); ++a)
        for (std::size_t b = a + 1; b < spec.overlaps.size(); ++b) {
            const auto &oa = spec.overlaps[a], &ob = spec.overlaps[b];
            bool same = (oa.branch_i == ob.branch_i && oa.branch_j == ob.branch_j) ||
                        (oa.branch_i == ob.branch_j && oa.branch_j == ob.branch_i);
            if (same)
                throw ConfigError("overlap " + oa.branch_i + "/" + oa.branch_j + " declared twice", 1);
        }
    for (const auto& q : spec.queries) {
        for (const auto& name : q.objects)
            if (spec.branch_index(name) < 0)
                throw ConfigError("query references undeclared branch " + name, 1);
        for (std::size_t k = 0; k + 1 < q.objects.size(); ++k)
            if (q.objects[k] == q.objects[k + 1])
                throw ConfigError("query repeats branch " + q.objects[k] + " consecutively", 1);
    }
    return spec;
}

SkeletonSpec load_spec_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open config file: " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return load_spec(ss.str());
}

std::string serialize(const SkeletonSpec& spec) {
    std::ostringstream os;
    os << "dimension = " << spec.dim << "\n";
    for (const auto& b : spec.branches) {
        os << "[branch." << b.name << "]\n";
        os << "domain = " << b.domain.describe() << "\n";
        os << "f = \"" << b.f.print() << "\"\n";
    }
    for (const auto& o : spec.overlaps) {
        os << "[overlap." << o.branch_i << "." << o.branch_j << "]\n";
        os << "region = " << o.region.describe() << "\n";
        os << "h = \"" << o.h.print() << "\"\n";
        os << "side = "
           << (o.side == OverlapSide::All ? "all" : o.side == OverlapSide::Neg ? "neg" : "pos")
           << "\n";
    }
    for (const auto& q : spec.queries) {
        os << "[query]\n";
        os << "objects = ";
        for (std::size_t k = 0; k < q.objects.size(); ++k) {
            if (k) os << ", ";
            os << q.objects[k];
        }
        os << "\n";
    }
    return os.str();
}

Expr field_fij(const SkeletonSpec& spec, const std::string& i, const std::string& j) {
    if (i == j) throw std::invalid_argument("f_ii is degenerate; morphism spaces need i != j");
    if (!spec.find_overlap(i, j))
        throw std::invalid_argument("no overlap declared for " + i + "/" + j);
    return Expr::difference(spec.branch(j).f, spec.branch(i).f);
}

// ---------------------------------------------------------------------------
// Genericity validation
// ---------------------------------------------------------------------------

GenericityReport validate_genericity(const SkeletonSpec& spec, const Tolerances& tol) {
    GenericityReport rep;
    struct Found {
        std::string pair;
        Vec location;
        const Domain* region;
    };
    std::vector<Found> all_points;

    for (const auto& o : spec.overlaps) {
        // The two orientations share critical points (the Hessian flips sign),
        // so the numeric work runs once per unordered pair.
        std::array<std::pair<std::string, std::string>, 2> dirs = {
            std::make_pair(o.branch_i, o.branch_j), std::make_pair(o.branch_j, o.branch_i)};
        rep.pairs_checked += 2;
        Expr fij = field_fij(spec, o.branch_i, o.branch_j);
        std::vector<CriticalPoint> cps;
        try {
            cps = find_critical_points(fij, o.region, tol);
        } catch (const DomainError& e) {
            throw;  // evaluation domain errors abort validation
        } catch (const std::exception& e) {
            rep.pass = false;
            rep.issues.push_back(
                {"nondegenerate", o.branch_i + "/" + o.branch_j, e.what(), Vec::Zero(spec.dim)});
            continue;
        }
        rep.critical_points_seen += static_cast<int>(cps.size());

        for (const auto& cp : cps) {
            // (a) nondegeneracy
            double det = 1.0;
            for (double ev : cp.hessian_eigenvalues) det *= ev;
            if (std::abs(det) <= tol.nondegen) {
                rep.pass = false;
                rep.issues.push_back({"nondegenerate", o.branch_i + "/" + o.branch_j,
                                      "critical point with |det H| <= nondegen tolerance",
                                      cp.location});
            }
            // (b) interior location
            if (o.region.has_boundary() && o.region.boundary_distance(cp.location) <= tol.interior) {
                rep.pass = false;
                rep.issues.push_back({"interior", o.branch_i + "/" + o.branch_j,
                                      "critical point within interior tolerance of the boundary",
                                      cp.location});
            }
            all_points.push_back({o.branch_i + "/" + o.branch_j, cp.location, &o.region});
        }

        // (c) boundary transversality: grad f_ij nonzero and aligned with grad h.
        if (o.region.has_boundary()) {
            for (const Vec& x : o.region.boundary_grid(tol.grid_boundary)) {
                Jet2 jf = fij.eval_jet2(x);
                if (jf.gradient.norm() < tol.residual) {
                    rep.pass = false;
                    rep.issues.push_back({"boundary", o.branch_i + "/" + o.branch_j,
                                          "grad f_ij vanishes on the boundary sample grid", x});
                    continue;
                }
                Vec grad_h;
                if (o.side == OverlapSide::All) {
                    // No separation data; fall back to the geometric outward normal.
                    grad_h = o.region.outward_normal(x);
                } else {
                    grad_h = o.h.eval_jet2(x).gradient;
                    if (o.side == OverlapSide::Pos) grad_h = -grad_h;
                    // With region = {h <= 0} (after the side flip) the gradient of h
                    // points outward, so a single sign test covers both conventions.
                }
                if (grad_h.norm() < 1e-14) {
                    rep.pass = false;
                    rep.issues.push_back({"boundary", o.branch_i + "/" + o.branch_j,
                                          "separation function has vanishing gradient on the boundary",
                                          x});
                    continue;
                }
                if (jf.gradient.dot(grad_h) <= 0.0) {
                    rep.pass = false;
                    rep.issues.push_back({"boundary", o.branch_i + "/" + o.branch_j,
                                          "grad f_ij fails the outward/inward sign condition", x});
                }
            }
        }
        (void)dirs;
    }

    // (d) collisions across all pairs.
    for (std::size_t a = 0; a < all_points.size(); ++a)
        for (std::size_t b = a + 1; b < all_points.size(); ++b) {
            if (all_points[a].pair == all_points[b].pair) continue;
            if (all_points[a].region->diff(all_points[a].location, all_points[b].location).norm() <
                tol.collision) {
                rep.pass = false;
                rep.issues.push_back({"collision", all_points[a].pair + " vs " + all_points[b].pair,
                                      "critical points of distinct pairs coincide",
                                      all_points[a].location});
            }
        }
    return rep;
}

}  // namespace mats
