#pragma once

#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace mats {

using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;

/// Value, gradient and symmetric Hessian of a scalar field at a point.
struct Jet2 {
    double value = 0.0;
    Vec gradient;
    Mat hessian;

    explicit Jet2(int n) : gradient(Vec::Zero(n)), hessian(Mat::Zero(n, n)) {}
    Jet2() = default;
};

class ExprError : public std::runtime_error {
public:
    ExprError(std::string msg, std::size_t offset)
        : std::runtime_error(std::move(msg)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

private:
    std::size_t offset_;
};

/// Raised when evaluation leaves the real domain (log of non-positive,
/// division by zero, fractional power of non-positive base).
class DomainError : public std::runtime_error {
public:
    explicit DomainError(std::string msg) : std::runtime_error(std::move(msg)) {}
};

namespace detail {
struct Node;
using NodePtr = std::shared_ptr<const Node>;
}  // namespace detail

/// Immutable scalar field over variables x1..xn. Evaluation returns exact
/// first and second derivatives via nested forward-mode jets.
class Expr {
public:
    Expr() = default;

    static Expr parse(const std::string& source, int dimension);
    static Expr constant(double c, int dimension);
    static Expr variable(int index, int dimension);  // index in [1, n]

    int dimension() const { return dim_; }
    bool empty() const { return !root_; }

    double eval(const Vec& x) const;
    Jet2 eval_jet2(const Vec& x) const;

    Vec gradient(const Vec& x) const { return eval_jet2(x).gradient; }
    Mat hessian(const Vec& x) const { return eval_jet2(x).hessian; }

    /// f - g as a new tree; both operands keep their structure.
    static Expr difference(const Expr& f, const Expr& g);
    static Expr sum(const Expr& f, const Expr& g);
    static Expr negate(const Expr& f);

    std::string print() const;

    /// Structural equality (same tree shape, same literals).
    bool same_tree(const Expr& other) const;

private:
    Expr(detail::NodePtr root, int dim) : root_(std::move(root)), dim_(dim) {}

    detail::NodePtr root_;
    int dim_ = 0;
};

}  // namespace mats
