#include "mats/expr.hpp"

#include <cctype>
#include <cmath>
#include <cstdio>
#include <optional>

namespace mats {
namespace detail {

enum class Op {
    Const,
    Var,
    Add,
    Sub,
    Mul,
    Div,
    Pow,  // exponent folded to a constant
    Neg,
    Sin,
    Cos,
    Exp,
    Log,
    Sqrt,
    Tanh,
};

struct Node {
    Op op;
    double literal = 0.0;  // Const value, Pow exponent
    int var = 0;           // Var index, 1-based
    NodePtr a, b;
};

namespace {

NodePtr make(Op op, NodePtr a = nullptr, NodePtr b = nullptr) {
    auto n = std::make_shared<Node>();
    n->op = op;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

NodePtr make_const(double c) {
    auto n = std::make_shared<Node>();
    n->op = Op::Const;
    n->literal = c;
    return n;
}

NodePtr make_var(int idx) {
    auto n = std::make_shared<Node>();
    n->op = Op::Var;
    n->var = idx;
    return n;
}

bool is_constant_tree(const NodePtr& n) {
    if (!n) return true;
    if (n->op == Op::Var) return false;
    return is_constant_tree(n->a) && is_constant_tree(n->b);
}

double eval_value(const Node& n, const Vec& x);

double fold_constant(const NodePtr& n) {
    Vec dummy;
    return eval_value(*n, dummy);
}

double eval_value(const Node& n, const Vec& x) {
    switch (n.op) {
        case Op::Const: return n.literal;
        case Op::Var: return x[n.var - 1];
        case Op::Add: return eval_value(*n.a, x) + eval_value(*n.b, x);
        case Op::Sub: return eval_value(*n.a, x) - eval_value(*n.b, x);
        case Op::Mul: return eval_value(*n.a, x) * eval_value(*n.b, x);
        case Op::Div: {
            double d = eval_value(*n.b, x);
            if (d == 0.0) throw DomainError("division by zero");
            return eval_value(*n.a, x) / d;
        }
        case Op::Pow: {
            double b = eval_value(*n.a, x);
            double c = n.literal;
            if (c == std::floor(c)) return std::pow(b, c);
            if (b <= 0.0) throw DomainError("fractional power of non-positive base");
            return std::pow(b, c);
        }
        case Op::Neg: return -eval_value(*n.a, x);
        case Op::Sin: return std::sin(eval_value(*n.a, x));
        case Op::Cos: return std::cos(eval_value(*n.a, x));
        case Op::Exp: return std::exp(eval_value(*n.a, x));
        case Op::Log: {
            double v = eval_value(*n.a, x);
            if (v <= 0.0) throw DomainError("log of non-positive argument");
            return std::log(v);
        }
        case Op::Sqrt: {
            double v = eval_value(*n.a, x);
            if (v < 0.0) throw DomainError("sqrt of negative argument");
            return std::sqrt(v);
        }
        case Op::Tanh: return std::tanh(eval_value(*n.a, x));
    }
    throw std::logic_error("unreachable");
}

// Second-order forward mode: propagate (value, gradient, hessian) bottom-up.
Jet2 eval_jet(const Node& n, const Vec& x) {
    const int dim = static_cast<int>(x.size());
    auto chain = [dim](const Jet2& u, double f, double df, double ddf) {
        Jet2 r(dim);
        r.value = f;
        r.gradient = df * u.gradient;
        r.hessian = df * u.hessian + ddf * (u.gradient * u.gradient.transpose());
        return r;
    };
    switch (n.op) {
        case Op::Const: {
            Jet2 r(dim);
            r.value = n.literal;
            return r;
        }
        case Op::Var: {
            Jet2 r(dim);
            r.value = x[n.var - 1];
            r.gradient[n.var - 1] = 1.0;
            return r;
        }
        case Op::Add: {
            Jet2 ja = eval_jet(*n.a, x), jb = eval_jet(*n.b, x);
            ja.value += jb.value;
            ja.gradient += jb.gradient;
            ja.hessian += jb.hessian;
            return ja;
        }
        case Op::Sub: {
            Jet2 ja = eval_jet(*n.a, x), jb = eval_jet(*n.b, x);
            ja.value -= jb.value;
            ja.gradient -= jb.gradient;
            ja.hessian -= jb.hessian;
            return ja;
        }
        case Op::Mul: {
            Jet2 ja = eval_jet(*n.a, x), jb = eval_jet(*n.b, x);
            Jet2 r(dim);
            r.value = ja.value * jb.value;
            r.gradient = ja.value * jb.gradient + jb.value * ja.gradient;
            r.hessian = ja.value * jb.hessian + jb.value * ja.hessian +
                        ja.gradient * jb.gradient.transpose() +
                        jb.gradient * ja.gradient.transpose();
            return r;
        }
        case Op::Div: {
            Jet2 ja = eval_jet(*n.a, x), jb = eval_jet(*n.b, x);
            if (jb.value == 0.0) throw DomainError("division by zero");
            // a/b = a * r with r = 1/b.
            Jet2 rec = chain(jb, 1.0 / jb.value, -1.0 / (jb.value * jb.value),
                             2.0 / (jb.value * jb.value * jb.value));
            Jet2 r(dim);
            r.value = ja.value * rec.value;
            r.gradient = ja.value * rec.gradient + rec.value * ja.gradient;
            r.hessian = ja.value * rec.hessian + rec.value * ja.hessian +
                        ja.gradient * rec.gradient.transpose() +
                        rec.gradient * ja.gradient.transpose();
            return r;
        }
        case Op::Pow: {
            Jet2 ja = eval_jet(*n.a, x);
            double c = n.literal;
            double v = ja.value;
            if (c == std::floor(c)) {
                double f = std::pow(v, c);
                double df = (c == 0.0) ? 0.0 : c * std::pow(v, c - 1.0);
                double ddf = (c == 0.0 || c == 1.0) ? 0.0 : c * (c - 1.0) * std::pow(v, c - 2.0);
                return chain(ja, f, df, ddf);
            }
            if (v <= 0.0) throw DomainError("fractional power of non-positive base");
            double f = std::pow(v, c);
            return chain(ja, f, c * f / v, c * (c - 1.0) * f / (v * v));
        }
        case Op::Neg: {
            Jet2 ja = eval_jet(*n.a, x);
            ja.value = -ja.value;
            ja.gradient = -ja.gradient;
            ja.hessian = -ja.hessian;
            return ja;
        }
        case Op::Sin: {
            Jet2 ja = eval_jet(*n.a, x);
            return chain(ja, std::sin(ja.value), std::cos(ja.value), -std::sin(ja.value));
        }
        case Op::Cos: {
            Jet2 ja = eval_jet(*n.a, x);
            return chain(ja, std::cos(ja.value), -std::sin(ja.value), -std::cos(ja.value));
        }
        case Op::Exp: {
            Jet2 ja = eval_jet(*n.a, x);
            double e = std::exp(ja.value);
            return chain(ja, e, e, e);
        }
        case Op::Log: {
            Jet2 ja = eval_jet(*n.a, x);
            if (ja.value <= 0.0) throw DomainError("log of non-positive argument");
            return chain(ja, std::log(ja.value), 1.0 / ja.value, -1.0 / (ja.value * ja.value));
        }
        case Op::Sqrt: {
            Jet2 ja = eval_jet(*n.a, x);
            if (ja.value <= 0.0) throw DomainError("sqrt of non-positive argument");
            double s = std::sqrt(ja.value);
            return chain(ja, s, 0.5 / s, -0.25 / (s * ja.value));
        }
        case Op::Tanh: {
            Jet2 ja = eval_jet(*n.a, x);
            double t = std::tanh(ja.value);
            double sech2 = 1.0 - t * t;
            return chain(ja, t, sech2, -2.0 * t * sech2);
        }
    }
    throw std::logic_error("unreachable");
}

// ---------------------------------------------------------------------------
// Parser (recursive descent over the grammar in the header docs)
// ---------------------------------------------------------------------------

struct Parser {
    const std::string& src;
    std::size_t pos = 0;
    int dim;

    explicit Parser(const std::string& s, int n) : src(s), dim(n) {}

    void skip_ws() {
        while (pos < src.size() && std::isspace(static_cast<unsigned char>(src[pos]))) ++pos;
    }

    bool eat(char c) {
        skip_ws();
        if (pos < src.size() && src[pos] == c) {
            ++pos;
            return true;
        }
        return false;
    }

    char peek() {
        skip_ws();
        return pos < src.size() ? src[pos] : '\0';
    }

    [[noreturn]] void fail(const std::string& msg) { throw ExprError(msg, pos); }

    NodePtr parse_expr() {
        NodePtr lhs = parse_term();
        while (true) {
            skip_ws();
            if (eat('+'))
                lhs = make(Op::Add, lhs, parse_term());
            else if (eat('-'))
                lhs = make(Op::Sub, lhs, parse_term());
            else
                return lhs;
        }
    }

    NodePtr parse_term() {
        NodePtr lhs = parse_factor();
        while (true) {
            skip_ws();
            if (eat('*'))
                lhs = make(Op::Mul, lhs, parse_factor());
            else if (eat('/'))
                lhs = make(Op::Div, lhs, parse_factor());
            else
                return lhs;
        }
    }

    NodePtr parse_factor() {
        NodePtr base = parse_unary();
        skip_ws();
        if (eat('^')) {
            std::size_t at = pos;
            NodePtr expo = parse_unary();
            if (!is_constant_tree(expo)) {
                pos = at;
                fail("exponent must be a constant expression");
            }
            auto p = make(Op::Pow, base);
            const_cast<Node&>(*p).literal = fold_constant(expo);
            return p;
        }
        return base;
    }

    NodePtr parse_unary() {
        if (eat('-')) return make(Op::Neg, parse_atom());
        return parse_atom();
    }

    NodePtr parse_atom() {
        skip_ws();
        if (pos >= src.size()) fail("unexpected end of input");
        char c = src[pos];
        if (c == '(') {
            ++pos;
            NodePtr e = parse_expr();
            if (!eat(')')) fail("expected ')'");
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
        fail(std::string("unexpected character '") + c + "'");
    }

    NodePtr parse_number() {
        std::size_t start = pos;
        while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) ++pos;
        if (pos < src.size() && src[pos] == '.') {
            ++pos;
            while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) ++pos;
        }
        if (pos < src.size() && (src[pos] == 'e' || src[pos] == 'E')) {
            std::size_t mark = pos;
            ++pos;
            if (pos < src.size() && (src[pos] == '+' || src[pos] == '-')) ++pos;
            if (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) {
                while (pos < src.size() && std::isdigit(static_cast<unsigned char>(src[pos]))) ++pos;
            } else {
                pos = mark;  // 'e' belongs to something else
            }
        }
        if (pos == start || (pos == start + 1 && src[start] == '.')) {
            pos = start;
            fail("malformed number");
        }
        return make_const(std::stod(src.substr(start, pos - start)));
    }

    NodePtr parse_ident() {
        std::size_t start = pos;
        while (pos < src.size() &&
               (std::isalnum(static_cast<unsigned char>(src[pos])) || src[pos] == '_'))
            ++pos;
        std::string id = src.substr(start, pos - start);
        if (id.size() >= 2 && id[0] == 'x' && std::isdigit(static_cast<unsigned char>(id[1]))) {
            if (id[1] == '0') {
                pos = start;
                fail("variable indices start at x1");
            }
            for (std::size_t k = 1; k < id.size(); ++k)
                if (!std::isdigit(static_cast<unsigned char>(id[k]))) {
                    pos = start;
                    fail("unknown identifier '" + id + "'");
                }
            int idx = std::stoi(id.substr(1));
            if (idx > dim) {
                pos = start;
                fail("variable x" + std::to_string(idx) + " exceeds dimension " +
                     std::to_string(dim));
            }
            return make_var(idx);
        }
        Op op;
        if (id == "sin")
            op = Op::Sin;
        else if (id == "cos")
            op = Op::Cos;
        else if (id == "exp")
            op = Op::Exp;
        else if (id == "log")
            op = Op::Log;
        else if (id == "sqrt")
            op = Op::Sqrt;
        else if (id == "tanh")
            op = Op::Tanh;
        else {
            pos = start;
            fail("unknown identifier '" + id + "'");
        }
        if (!eat('(')) fail("expected '(' after function name");
        NodePtr arg = parse_expr();
        if (!eat(')')) fail("expected ')'");
        return make(op, arg);
    }
};

// ---------------------------------------------------------------------------
// Printer. Precedence levels: 1 add, 2 mul, 3 pow operand (unary/atom).
// ---------------------------------------------------------------------------

int precedence(Op op) {
    switch (op) {
        case Op::Add:
        case Op::Sub: return 1;
        case Op::Mul:
        case Op::Div: return 2;
        case Op::Pow: return 3;
        case Op::Neg: return 3;
        default: return 4;
    }
}

std::string fmt_double(double v) {
    char buf[40];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    // Trim to the shortest representation that round-trips.
    for (int prec = 1; prec <= 17; ++prec) {
        char t[40];
        std::snprintf(t, sizeof(t), "%.*g", prec, v);
        if (std::stod(t) == v) return t;
    }
    return buf;
}

void print_node(const Node& n, int parent_prec, std::string& out) {
    int prec = precedence(n.op);
    switch (n.op) {
        case Op::Const: {
            if (n.literal < 0.0) {
                // Negative literal prints as unary minus to stay in-grammar.
                if (parent_prec >= 3) out += '(';
                out += '-';
                out += fmt_double(-n.literal);
                if (parent_prec >= 3) out += ')';
            } else {
                out += fmt_double(n.literal);
            }
            return;
        }
        case Op::Var:
            out += 'x';
            out += std::to_string(n.var);
            return;
        case Op::Neg: {
            bool need = parent_prec > 3;
            if (need) out += '(';
            out += '-';
            print_node(*n.a, 4, out);
            if (need) out += ')';
            return;
        }
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div: {
            bool need = prec < parent_prec;
            if (need) out += '(';
            print_node(*n.a, prec, out);
            out += (n.op == Op::Add) ? '+' : (n.op == Op::Sub) ? '-' : (n.op == Op::Mul) ? '*' : '/';
            print_node(*n.b, prec + 1, out);
            if (need) out += ')';
            return;
        }
        case Op::Pow: {
            bool need = prec < parent_prec;
            if (need) out += '(';
            print_node(*n.a, 4, out);
            out += '^';
            if (n.literal < 0.0) {
                out += '-';
                out += fmt_double(-n.literal);
            } else {
                out += fmt_double(n.literal);
            }
            if (need) out += ')';
            return;
        }
        case Op::Sin: out += "sin("; break;
        case Op::Cos: out += "cos("; break;
        case Op::Exp: out += "exp("; break;
        case Op::Log: out += "log("; break;
        case Op::Sqrt: out += "sqrt("; break;
        case Op::Tanh: out += "tanh("; break;
    }
    print_node(*n.a, 0, out);
    out += ')';
}

bool same_node(const Node& a, const Node& b) {
    if (a.op != b.op || a.var != b.var) return false;
    if (a.op == Op::Const || a.op == Op::Pow) {
        if (!(a.literal == b.literal)) return false;
    }
    if (static_cast<bool>(a.a) != static_cast<bool>(b.a)) return false;
    if (static_cast<bool>(a.b) != static_cast<bool>(b.b)) return false;
    if (a.a && !same_node(*a.a, *b.a)) return false;
    if (a.b && !same_node(*a.b, *b.b)) return false;
    return true;
}

}  // namespace
}  // namespace detail

Expr Expr::parse(const std::string& source, int dimension) {
    detail::Parser p(source, dimension);
    detail::NodePtr root = p.parse_expr();
    p.skip_ws();
    if (p.pos != source.size()) p.fail("trailing input");
    return Expr(std::move(root), dimension);
}

Expr Expr::constant(double c, int dimension) {
    return Expr(detail::make_const(c), dimension);
}

Expr Expr::variable(int index, int dimension) {
    if (index < 1 || index > dimension) throw std::invalid_argument("variable index out of range");
    return Expr(detail::make_var(index), dimension);
}

double Expr::eval(const Vec& x) const {
    if (!root_) throw std::logic_error("empty expression");
    return detail::eval_value(*root_, x);
}

Jet2 Expr::eval_jet2(const Vec& x) const {
    if (!root_) throw std::logic_error("empty expression");
    if (static_cast<int>(x.size()) != dim_) throw std::invalid_argument("point dimension mismatch");
    return detail::eval_jet(*root_, x);
}

Expr Expr::difference(const Expr& f, const Expr& g) {
    if (f.dim_ != g.dim_) throw std::invalid_argument("dimension mismatch in difference");
    return Expr(detail::make(detail::Op::Sub, f.root_, g.root_), f.dim_);
}

Expr Expr::sum(const Expr& f, const Expr& g) {
    if (f.dim_ != g.dim_) throw std::invalid_argument("dimension mismatch in sum");
    return Expr(detail::make(detail::Op::Add, f.root_, g.root_), f.dim_);
}

Expr Expr::negate(const Expr& f) {
    return Expr(detail::make(detail::Op::Neg, f.root_), f.dim_);
}

std::string Expr::print() const {
    if (!root_) return "";
    std::string out;
    detail::print_node(*root_, 0, out);
    return out;
}

bool Expr::same_tree(const Expr& other) const {
    if (!root_ || !other.root_) return root_ == other.root_;
    return detail::same_node(*root_, *other.root_);
}

}  // namespace mats
