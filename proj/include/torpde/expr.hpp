#pragma once

#include <cctype>
#include <cmath>
#include <cstdlib>
#include <memory>
#include <stdexcept>
#include <string>

#include "torpde/io.hpp"

namespace torpde {

/// Syntax error with the byte offset where parsing failed.
class ParseError : public std::runtime_error {
  public:
    ParseError(const std::string& msg, std::size_t offset)
        : std::runtime_error(msg + " at offset " + std::to_string(offset)), offset_(offset) {}
    std::size_t offset() const { return offset_; }

  private:
    std::size_t offset_;
};

/// Evaluation error (division by zero, domain error, non-finite result).
class EvalError : public std::runtime_error {
  public:
    explicit EvalError(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {

enum class NodeKind {
    number,
    variable,  // var 0 = x1, 1 = x2, 2 = lam
    add,
    sub,
    mul,
    div,
    neg,
    sin,
    cos,
    exp,
    sqrt,
    pow,  // integer exponent
};

struct ExprNode;
using NodePtr = std::shared_ptr<const ExprNode>;

struct ExprNode {
    NodeKind kind;
    double number = 0.0;
    int var = 0;
    int exponent = 0;
    NodePtr a, b;
};

constexpr int var_lam = 2;

inline NodePtr make_num(double v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = NodeKind::number;
    n->number = v;
    return n;
}

inline NodePtr make_var(int v) {
    auto n = std::make_shared<ExprNode>();
    n->kind = NodeKind::variable;
    n->var = v;
    return n;
}

inline bool is_num(const NodePtr& e, double v) {
    return e->kind == NodeKind::number && e->number == v;
}

inline NodePtr make_binary(NodeKind k, NodePtr a, NodePtr b) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->a = std::move(a);
    n->b = std::move(b);
    return n;
}

inline NodePtr make_unary(NodeKind k, NodePtr a) {
    auto n = std::make_shared<ExprNode>();
    n->kind = k;
    n->a = std::move(a);
    return n;
}

// Smart constructors fold constants and drop arithmetic identities, which
// keeps derivative trees small. Division is only folded for a nonzero
// constant divisor so that division-by-zero still surfaces at eval time.
inline NodePtr add(NodePtr a, NodePtr b) {
    if (a->kind == NodeKind::number && b->kind == NodeKind::number) return make_num(a->number + b->number);
    if (is_num(a, 0.0)) return b;
    if (is_num(b, 0.0)) return a;
    return make_binary(NodeKind::add, std::move(a), std::move(b));
}

inline NodePtr neg(NodePtr a) {
    if (a->kind == NodeKind::number) return make_num(-a->number);
    if (a->kind == NodeKind::neg) return a->a;
    return make_unary(NodeKind::neg, std::move(a));
}

inline NodePtr sub(NodePtr a, NodePtr b) {
    if (a->kind == NodeKind::number && b->kind == NodeKind::number) return make_num(a->number - b->number);
    if (is_num(b, 0.0)) return a;
    if (is_num(a, 0.0)) return neg(std::move(b));
    return make_binary(NodeKind::sub, std::move(a), std::move(b));
}

inline NodePtr mul(NodePtr a, NodePtr b) {
    if (a->kind == NodeKind::number && b->kind == NodeKind::number) return make_num(a->number * b->number);
    if (is_num(a, 0.0) || is_num(b, 0.0)) return make_num(0.0);
    if (is_num(a, 1.0)) return b;
    if (is_num(b, 1.0)) return a;
    if (is_num(a, -1.0)) return neg(std::move(b));
    if (is_num(b, -1.0)) return neg(std::move(a));
    return make_binary(NodeKind::mul, std::move(a), std::move(b));
}

inline NodePtr divide(NodePtr a, NodePtr b) {
    if (b->kind == NodeKind::number && b->number != 0.0) {
        if (a->kind == NodeKind::number) return make_num(a->number / b->number);
        if (b->number == 1.0) return a;
    }
    return make_binary(NodeKind::div, std::move(a), std::move(b));
}

inline NodePtr pow_int(NodePtr a, int k) {
    if (k == 0) return make_num(1.0);
    if (k == 1) return a;
    if (a->kind == NodeKind::number) {
        double base = a->number;
        double r = 1.0;
        int m = k < 0 ? -k : k;
        for (int i = 0; i < m; ++i) r *= base;
        if (k < 0) {
            if (r == 0.0) {
                // keep the node; eval reports the division by zero
            } else {
                return make_num(1.0 / r);
            }
        } else {
            return make_num(r);
        }
    }
    auto n = std::make_shared<ExprNode>();
    n->kind = NodeKind::pow;
    n->a = std::move(a);
    n->exponent = k;
    return n;
}

inline NodePtr apply_fn(NodeKind k, NodePtr a) {
    if (a->kind == NodeKind::number) {
        double v = a->number;
        switch (k) {
            case NodeKind::sin: return make_num(std::sin(v));
            case NodeKind::cos: return make_num(std::cos(v));
            case NodeKind::exp: {
                double r = std::exp(v);
                if (std::isfinite(r)) return make_num(r);
                break;  // overflow surfaces at eval
            }
            case NodeKind::sqrt:
                if (v >= 0.0) return make_num(std::sqrt(v));
                break;  // domain error surfaces at eval
            default: break;
        }
    }
    return make_unary(k, std::move(a));
}

inline bool depends_on(const NodePtr& e, int var) {
    switch (e->kind) {
        case NodeKind::number: return false;
        case NodeKind::variable: return e->var == var;
        default:
            if (e->a && depends_on(e->a, var)) return true;
            if (e->b && depends_on(e->b, var)) return true;
            return false;
    }
}

inline double eval_node(const ExprNode& e, const double* x, double lam) {
    double r;
    switch (e.kind) {
        case NodeKind::number: return e.number;
        case NodeKind::variable: return e.var == var_lam ? lam : x[e.var];
        case NodeKind::add: r = eval_node(*e.a, x, lam) + eval_node(*e.b, x, lam); break;
        case NodeKind::sub: r = eval_node(*e.a, x, lam) - eval_node(*e.b, x, lam); break;
        case NodeKind::mul: r = eval_node(*e.a, x, lam) * eval_node(*e.b, x, lam); break;
        case NodeKind::div: {
            double den = eval_node(*e.b, x, lam);
            if (den == 0.0) throw EvalError("division by zero");
            r = eval_node(*e.a, x, lam) / den;
            break;
        }
        case NodeKind::neg: r = -eval_node(*e.a, x, lam); break;
        case NodeKind::sin: r = std::sin(eval_node(*e.a, x, lam)); break;
        case NodeKind::cos: r = std::cos(eval_node(*e.a, x, lam)); break;
        case NodeKind::exp: r = std::exp(eval_node(*e.a, x, lam)); break;
        case NodeKind::sqrt: {
            double v = eval_node(*e.a, x, lam);
            if (v < 0.0) throw EvalError("sqrt of negative value");
            r = std::sqrt(v);
            break;
        }
        case NodeKind::pow: {
            double base = eval_node(*e.a, x, lam);
            double p = 1.0;
            int m = e.exponent < 0 ? -e.exponent : e.exponent;
            for (int i = 0; i < m; ++i) p *= base;
            if (e.exponent < 0) {
                if (p == 0.0) throw EvalError("division by zero");
                p = 1.0 / p;
            }
            r = p;
            break;
        }
        default: throw EvalError("corrupt expression tree");
    }
    if (!std::isfinite(r)) throw EvalError("non-finite value in evaluation");
    return r;
}

// print precedence levels: sum 1, product 2, unary 3, power 4, atom 5
inline int precedence(const ExprNode& e) {
    switch (e.kind) {
        case NodeKind::add:
        case NodeKind::sub: return 1;
        case NodeKind::mul:
        case NodeKind::div: return 2;
        case NodeKind::neg: return 3;
        case NodeKind::pow: return 4;
        default: return 5;
    }
}

inline void print_node(const ExprNode& e, std::string& out, int parent_level) {
    int level = precedence(e);
    bool paren = level < parent_level;
    if (paren) out.push_back('(');
    switch (e.kind) {
        case NodeKind::number:
            if (e.number < 0.0 || (e.number == 0.0 && std::signbit(e.number))) {
                out.push_back('-');
                out += num_shortest(-e.number);
            } else {
                out += num_shortest(e.number);
            }
            break;
        case NodeKind::variable:
            out += e.var == var_lam ? "lam" : (e.var == 0 ? "x1" : "x2");
            break;
        case NodeKind::add:
            print_node(*e.a, out, 1);
            out += " + ";
            print_node(*e.b, out, 2);
            break;
        case NodeKind::sub:
            print_node(*e.a, out, 1);
            out += " - ";
            print_node(*e.b, out, 2);
            break;
        case NodeKind::mul:
            print_node(*e.a, out, 2);
            out += "*";
            print_node(*e.b, out, 3);
            break;
        case NodeKind::div:
            print_node(*e.a, out, 2);
            out += "/";
            print_node(*e.b, out, 3);
            break;
        case NodeKind::neg:
            out.push_back('-');
            print_node(*e.a, out, 3);
            break;
        case NodeKind::sin:
        case NodeKind::cos:
        case NodeKind::exp:
        case NodeKind::sqrt:
            out += e.kind == NodeKind::sin   ? "sin"
                   : e.kind == NodeKind::cos ? "cos"
                   : e.kind == NodeKind::exp ? "exp"
                                             : "sqrt";
            out.push_back('(');
            print_node(*e.a, out, 0);
            out.push_back(')');
            break;
        case NodeKind::pow:
            print_node(*e.a, out, 5);
            out.push_back('^');
            if (e.exponent < 0) {
                out.push_back('-');
                out += std::to_string(-e.exponent);
            } else {
                out += std::to_string(e.exponent);
            }
            break;
    }
    if (paren) out.push_back(')');
}

}  // namespace detail

/// A parsed scalar expression in the variables x1[, x2] and lam.
/// Immutable after parse; evaluation is pure.
class FieldExpr {
  public:
    FieldExpr() = default;
    FieldExpr(detail::NodePtr root, int dim) : root_(std::move(root)), dim_(dim) {
        depends_on_lambda_ = detail::depends_on(root_, detail::var_lam);
    }

    int dimension() const { return dim_; }
    bool depends_on_lambda() const { return depends_on_lambda_; }
    bool depends_on_var(int var) const { return detail::depends_on(root_, var); }

    /// x points at dimension() coordinates.
    double eval(const double* x, double lam = 0.0) const { return detail::eval_node(*root_, x, lam); }
    double eval1(double x1, double lam = 0.0) const { return eval(&x1, lam); }

    std::string str() const {
        std::string out;
        detail::print_node(*root_, out, 0);
        return out;
    }

    const detail::NodePtr& root() const { return root_; }

  private:
    detail::NodePtr root_;
    int dim_ = 1;
    bool depends_on_lambda_ = false;
};

namespace detail {

class Parser {
  public:
    Parser(std::string_view src, int dim) : src_(src), dim_(dim) {}

    NodePtr parse() {
        NodePtr e = parse_sum();
        skip_ws();
        if (pos_ != src_.size()) throw ParseError("unexpected trailing input", pos_);
        return e;
    }

  private:
    std::string_view src_;
    int dim_;
    std::size_t pos_ = 0;

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool consume(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    NodePtr parse_sum() {
        NodePtr e = parse_product();
        for (;;) {
            if (consume('+')) {
                e = make_binary(NodeKind::add, e, parse_product());
            } else if (consume('-')) {
                e = make_binary(NodeKind::sub, e, parse_product());
            } else {
                return e;
            }
        }
    }

    NodePtr parse_product() {
        NodePtr e = parse_unary();
        for (;;) {
            if (consume('*')) {
                e = make_binary(NodeKind::mul, e, parse_unary());
            } else if (consume('/')) {
                e = make_binary(NodeKind::div, e, parse_unary());
            } else {
                return e;
            }
        }
    }

    NodePtr parse_unary() {
        if (consume('-')) return make_unary(NodeKind::neg, parse_unary());
        return parse_power();
    }

    NodePtr parse_power() {
        NodePtr base = parse_atom();
        if (consume('^')) {
            skip_ws();
            bool negative = false;
            if (pos_ < src_.size() && src_[pos_] == '-') {
                negative = true;
                ++pos_;
            }
            std::size_t start = pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            if (pos_ == start) throw ParseError("expected integer exponent", pos_);
            int k = std::atoi(std::string(src_.substr(start, pos_ - start)).c_str());
            auto n = std::make_shared<ExprNode>();
            n->kind = NodeKind::pow;
            n->a = base;
            n->exponent = negative ? -k : k;
            return n;
        }
        return base;
    }

    NodePtr parse_atom() {
        skip_ws();
        if (pos_ >= src_.size()) throw ParseError("unexpected end of input", pos_);
        char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr e = parse_sum();
            if (!consume(')')) throw ParseError("expected ')'", pos_);
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return parse_number();
        if (std::isalpha(static_cast<unsigned char>(c))) return parse_ident();
        throw ParseError(std::string("unexpected character '") + c + "'", pos_);
    }

    NodePtr parse_number() {
        std::size_t start = pos_;
        while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        if (pos_ < src_.size() && src_[pos_] == '.') {
            ++pos_;
            while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
        }
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t mark = pos_;
            ++pos_;
            if (pos_ < src_.size() && (src_[pos_] == '+' || src_[pos_] == '-')) ++pos_;
            if (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) {
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            } else {
                pos_ = mark;  // "2e" is "2" followed by an identifier: reject later
            }
        }
        std::string text(src_.substr(start, pos_ - start));
        char* end = nullptr;
        double v = std::strtod(text.c_str(), &end);
        if (end != text.c_str() + text.size()) throw ParseError("malformed number", start);
        return make_num(v);
    }

    NodePtr parse_ident() {
        std::size_t start = pos_;
        while (pos_ < src_.size() &&
               (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
            ++pos_;
        std::string name(src_.substr(start, pos_ - start));
        if (name == "sin" || name == "cos" || name == "exp" || name == "sqrt") {
            if (!consume('(')) throw ParseError("expected '(' after function name", pos_);
            NodePtr arg = parse_sum();
            if (!consume(')')) throw ParseError("expected ')'", pos_);
            NodeKind k = name == "sin"   ? NodeKind::sin
                         : name == "cos" ? NodeKind::cos
                         : name == "exp" ? NodeKind::exp
                                         : NodeKind::sqrt;
            return make_unary(k, arg);
        }
        if (name == "lam") return make_var(var_lam);
        if (name == "x1") return make_var(0);
        if (name == "x2") {
            if (dim_ < 2) throw ParseError("variable 'x2' not declared for dimension 1", start);
            return make_var(1);
        }
        throw ParseError("reference to undeclared variable '" + name + "'", start);
    }
};

inline NodePtr fold(const NodePtr& e) {
    switch (e->kind) {
        case NodeKind::number:
        case NodeKind::variable: return e;
        case NodeKind::add: return add(fold(e->a), fold(e->b));
        case NodeKind::sub: return sub(fold(e->a), fold(e->b));
        case NodeKind::mul: return mul(fold(e->a), fold(e->b));
        case NodeKind::div: return divide(fold(e->a), fold(e->b));
        case NodeKind::neg: return neg(fold(e->a));
        case NodeKind::pow: return pow_int(fold(e->a), e->exponent);
        default: return apply_fn(e->kind, fold(e->a));
    }
}

inline NodePtr derivative(const NodePtr& e, int var) {
    using detail::add;
    using detail::divide;
    using detail::mul;
    using detail::neg;
    using detail::sub;
    switch (e->kind) {
        case NodeKind::number: return make_num(0.0);
        case NodeKind::variable: return make_num(e->var == var ? 1.0 : 0.0);
        case NodeKind::add: return add(derivative(e->a, var), derivative(e->b, var));
        case NodeKind::sub: return sub(derivative(e->a, var), derivative(e->b, var));
        case NodeKind::mul:
            return add(mul(derivative(e->a, var), e->b), mul(e->a, derivative(e->b, var)));
        case NodeKind::div:
            return divide(sub(mul(derivative(e->a, var), e->b), mul(e->a, derivative(e->b, var))),
                          pow_int(e->b, 2));
        case NodeKind::neg: return neg(derivative(e->a, var));
        case NodeKind::sin: return mul(apply_fn(NodeKind::cos, e->a), derivative(e->a, var));
        case NodeKind::cos: return neg(mul(apply_fn(NodeKind::sin, e->a), derivative(e->a, var)));
        case NodeKind::exp: return mul(apply_fn(NodeKind::exp, e->a), derivative(e->a, var));
        case NodeKind::sqrt:
            return divide(derivative(e->a, var),
                          mul(make_num(2.0), apply_fn(NodeKind::sqrt, e->a)));
        case NodeKind::pow:
            return mul(mul(make_num(static_cast<double>(e->exponent)), pow_int(e->a, e->exponent - 1)),
                       derivative(e->a, var));
        default: throw EvalError("corrupt expression tree");
    }
}

inline int var_index_of(const std::string& name, int dim) {
    if (name == "x1") return 0;
    if (name == "x2" && dim >= 2) return 1;
    if (name == "lam") return var_lam;
    throw std::invalid_argument("unknown variable name: " + name);
}

}  // namespace detail

/// Parse `source` as an expression in x1..x<dimension> and lam.
inline FieldExpr parse_field_expr(std::string_view source, int dimension) {
    if (dimension != 1 && dimension != 2)
        throw std::invalid_argument("dimension must be 1 or 2");
    detail::Parser p(source, dimension);
    return FieldExpr(detail::fold(p.parse()), dimension);
}

/// Exact symbolic derivative with respect to "x1", "x2" or "lam".
inline FieldExpr differentiate(const FieldExpr& e, const std::string& var) {
    int v = detail::var_index_of(var, e.dimension());
    return FieldExpr(detail::fold(detail::derivative(e.root(), v)), e.dimension());
}

/// Build expressions programmatically (used by the experiment drivers).
inline FieldExpr expr_const(double v, int dim) { return FieldExpr(detail::make_num(v), dim); }
inline FieldExpr expr_add(const FieldExpr& a, const FieldExpr& b) {
    return FieldExpr(detail::add(a.root(), b.root()), a.dimension());
}
inline FieldExpr expr_sub(const FieldExpr& a, const FieldExpr& b) {
    return FieldExpr(detail::sub(a.root(), b.root()), a.dimension());
}
inline FieldExpr expr_mul(const FieldExpr& a, const FieldExpr& b) {
    return FieldExpr(detail::mul(a.root(), b.root()), a.dimension());
}
inline FieldExpr expr_div(const FieldExpr& a, const FieldExpr& b) {
    return FieldExpr(detail::divide(a.root(), b.root()), a.dimension());
}

}  // namespace torpde
