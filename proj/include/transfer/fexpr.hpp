#pragma once

// Complex expression language for F(s, z1, ..., zk).
//
// Grammar (lowest to highest precedence):
//   sum     := product (('+' | '-') product)*
//   product := power (('*' | '/') power)*
//   power   := unary ('^' power)?            right associative
//   unary   := '-' unary | primary
//   primary := number ['i'] | 'i' | 's' | 'z'<index> | func '(' sum ')' | '(' sum ')'
//   func    := exp | log | sin | cos
//
// Unary minus binds tighter than '^', so "-x^2" is (-x)^2.

#include <cctype>
#include <charconv>
#include <cmath>
#include <complex>
#include <cstdio>
#include <memory>
#include <span>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

#include "transfer/core.hpp"

namespace transfer::fexpr {

struct ParseError : Error {
    ParseError(std::size_t pos, const std::string& msg)
        : Error(Kind::Parse, msg + " (at offset " + std::to_string(pos) + ")"), position(pos), message(msg)
    {}
    std::size_t position;
    std::string message;
};

struct EvalError : Error {
    explicit EvalError(const std::string& what) : Error(Kind::Eval, what) {}
};

enum class Op { Const, VarS, VarZ, Add, Sub, Mul, Div, Neg, Pow, Exp, Log, Sin, Cos };

struct Node;
using NodePtr = std::shared_ptr<const Node>;

struct Node {
    Op op = Op::Const;
    Complex value{};      // Const
    int index = 0;        // VarZ (1-based)
    bool int_exponent = false;
    long exponent = 0;    // Pow with integer exponent
    NodePtr lhs;          // unary operand / left operand / base
    NodePtr rhs;          // right operand / expression exponent
};

inline bool structurally_equal(const NodePtr& a, const NodePtr& b)
{
    if (a == b)
        return true;
    if (!a || !b || a->op != b->op)
        return false;
    switch (a->op) {
    case Op::Const: return a->value == b->value;
    case Op::VarS: return true;
    case Op::VarZ: return a->index == b->index;
    case Op::Pow:
        if (a->int_exponent != b->int_exponent)
            return false;
        if (a->int_exponent)
            return a->exponent == b->exponent && structurally_equal(a->lhs, b->lhs);
        return structurally_equal(a->lhs, b->lhs) && structurally_equal(a->rhs, b->rhs);
    default:
        return structurally_equal(a->lhs, b->lhs) && structurally_equal(a->rhs, b->rhs);
    }
}

// Tree builders.
inline NodePtr make_node(Node n) { return std::make_shared<const Node>(std::move(n)); }
inline NodePtr constant(Complex c)
{
    Node n;
    n.value = c;
    return make_node(std::move(n));
}
inline NodePtr var_s()
{
    Node n;
    n.op = Op::VarS;
    return make_node(std::move(n));
}
inline NodePtr var_z(int i)
{
    Node n;
    n.op = Op::VarZ;
    n.index = i;
    return make_node(std::move(n));
}
inline NodePtr unary(Op op, NodePtr a)
{
    Node n;
    n.op = op;
    n.lhs = std::move(a);
    return make_node(std::move(n));
}
inline NodePtr binary(Op op, NodePtr a, NodePtr b)
{
    Node n;
    n.op = op;
    n.lhs = std::move(a);
    n.rhs = std::move(b);
    return make_node(std::move(n));
}
inline NodePtr add(NodePtr a, NodePtr b) { return binary(Op::Add, std::move(a), std::move(b)); }
inline NodePtr sub(NodePtr a, NodePtr b) { return binary(Op::Sub, std::move(a), std::move(b)); }
inline NodePtr mul(NodePtr a, NodePtr b) { return binary(Op::Mul, std::move(a), std::move(b)); }
inline NodePtr div(NodePtr a, NodePtr b) { return binary(Op::Div, std::move(a), std::move(b)); }
inline NodePtr neg(NodePtr a) { return unary(Op::Neg, std::move(a)); }
inline NodePtr exp(NodePtr a) { return unary(Op::Exp, std::move(a)); }
inline NodePtr log(NodePtr a) { return unary(Op::Log, std::move(a)); }
inline NodePtr sin(NodePtr a) { return unary(Op::Sin, std::move(a)); }
inline NodePtr cos(NodePtr a) { return unary(Op::Cos, std::move(a)); }
inline NodePtr pow(NodePtr base, long n)
{
    Node node;
    node.op = Op::Pow;
    node.lhs = std::move(base);
    node.int_exponent = true;
    node.exponent = n;
    return make_node(std::move(node));
}
inline NodePtr pow(NodePtr base, NodePtr exponent) { return binary(Op::Pow, std::move(base), std::move(exponent)); }

/// A parsed expression in s and z1..zk. Immutable; cheap to copy.
class Expr {
public:
    Expr(NodePtr root, int order) : root_(std::move(root)), order_(order)
    {
        if (order_ < 1)
            throw InvalidArgument("expression order must be at least 1");
        check(root_);
    }

    const NodePtr& root() const noexcept { return root_; }
    int order() const noexcept { return order_; }

    friend bool operator==(const Expr& a, const Expr& b)
    {
        return a.order_ == b.order_ && structurally_equal(a.root_, b.root_);
    }

private:
    void check(const NodePtr& n) const
    {
        if (!n)
            throw InvalidArgument("expression tree has a missing operand");
        switch (n->op) {
        case Op::Const:
        case Op::VarS: return;
        case Op::VarZ:
            if (n->index < 1 || n->index > order_)
                throw InvalidArgument("variable z" + std::to_string(n->index) + " outside 1..k");
            return;
        case Op::Add:
        case Op::Sub:
        case Op::Mul:
        case Op::Div:
            check(n->lhs);
            check(n->rhs);
            return;
        case Op::Pow:
            check(n->lhs);
            if (!n->int_exponent)
                check(n->rhs);
            return;
        default: check(n->lhs); return;
        }
    }

    NodePtr root_;
    int order_;
};

// ---------------------------------------------------------------------------
// Parsing
// ---------------------------------------------------------------------------

namespace detail {

class Parser {
public:
    Parser(std::string_view text, int order) : text_(text), order_(order) {}

    NodePtr run()
    {
        skip_ws();
        if (pos_ >= text_.size())
            throw ParseError(0, "empty expression");
        NodePtr e = sum();
        skip_ws();
        if (pos_ != text_.size())
            throw ParseError(pos_, std::string("unexpected '") + text_[pos_] + "'");
        return e;
    }

private:
    void skip_ws()
    {
        while (pos_ < text_.size() && std::isspace(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
    }

    bool accept(char c)
    {
        skip_ws();
        if (pos_ < text_.size() && text_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c)
    {
        if (!accept(c)) {
            const std::size_t at = std::min(pos_, text_.size());
            throw ParseError(at, std::string("expected '") + c + "'");
        }
    }

    NodePtr sum()
    {
        NodePtr lhs = product();
        for (;;) {
            if (accept('+'))
                lhs = add(lhs, product());
            else if (accept('-'))
                lhs = sub(lhs, product());
            else
                return lhs;
        }
    }

    NodePtr product()
    {
        NodePtr lhs = power();
        for (;;) {
            if (accept('*'))
                lhs = mul(lhs, power());
            else if (accept('/'))
                lhs = div(lhs, power());
            else
                return lhs;
        }
    }

    NodePtr power()
    {
        NodePtr base = unary_minus();
        if (!accept('^'))
            return base;
        skip_ws();
        const std::size_t start = pos_;
        NodePtr exponent = power();
        // A bare non-negative integer literal becomes an integer exponent.
        if (exponent->op == Op::Const && exponent->value.imag() == 0.0 && literal_is_integer(start)) {
            const double v = exponent->value.real();
            if (v <= 1e9)
                return transfer::fexpr::pow(base, static_cast<long>(v));
        }
        return transfer::fexpr::pow(base, exponent);
    }

    bool literal_is_integer(std::size_t start) const
    {
        std::size_t p = start;
        while (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p])))
            ++p;
        if (p == start)
            return false;
        std::size_t q = p;
        while (q < text_.size() && std::isspace(static_cast<unsigned char>(text_[q])))
            ++q;
        return q == pos_ || p == pos_;
    }

    NodePtr unary_minus()
    {
        if (accept('-'))
            return neg(unary_minus());
        return primary();
    }

    NodePtr primary()
    {
        skip_ws();
        if (pos_ >= text_.size())
            throw ParseError(pos_, "unexpected end of expression");
        const char c = text_[pos_];
        if (c == '(') {
            ++pos_;
            NodePtr inner = sum();
            expect(')');
            return inner;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.')
            return number();
        if (std::isalpha(static_cast<unsigned char>(c)))
            return identifier();
        throw ParseError(pos_, std::string("unexpected '") + c + "'");
    }

    NodePtr number()
    {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        if (pos_ < text_.size() && text_[pos_] == '.') {
            ++pos_;
            while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                ++pos_;
        }
        if (pos_ < text_.size() && (text_[pos_] == 'e' || text_[pos_] == 'E')) {
            std::size_t p = pos_ + 1;
            if (p < text_.size() && (text_[p] == '+' || text_[p] == '-'))
                ++p;
            if (p < text_.size() && std::isdigit(static_cast<unsigned char>(text_[p]))) {
                pos_ = p;
                while (pos_ < text_.size() && std::isdigit(static_cast<unsigned char>(text_[pos_])))
                    ++pos_;
            }
        }
        const std::string lexeme(text_.substr(start, pos_ - start));
        if (lexeme == ".")
            throw ParseError(start, "malformed number");
        double v = 0.0;
        const auto [ptr, ec] = std::from_chars(lexeme.data(), lexeme.data() + lexeme.size(), v);
        if (ec != std::errc() || ptr != lexeme.data() + lexeme.size() || !std::isfinite(v))
            throw ParseError(start, "malformed number '" + lexeme + "'");
        // Imaginary suffix: "2i", "0.5i". Must not swallow an identifier like "2in".
        if (pos_ < text_.size() && text_[pos_] == 'i' &&
            (pos_ + 1 >= text_.size() || !std::isalnum(static_cast<unsigned char>(text_[pos_ + 1])))) {
            ++pos_;
            return constant(Complex(0.0, v));
        }
        return constant(Complex(v, 0.0));
    }

    NodePtr identifier()
    {
        const std::size_t start = pos_;
        while (pos_ < text_.size() && std::isalnum(static_cast<unsigned char>(text_[pos_])))
            ++pos_;
        const std::string_view name = text_.substr(start, pos_ - start);
        if (name == "s")
            return var_s();
        if (name == "i")
            return constant(Complex(0.0, 1.0));
        if (name.size() >= 2 && name[0] == 'z') {
            int idx = 0;
            const auto [ptr, ec] = std::from_chars(name.data() + 1, name.data() + name.size(), idx);
            if (ec == std::errc() && ptr == name.data() + name.size()) {
                if (idx < 1 || idx > order_)
                    throw ParseError(start, "variable " + std::string(name) + " outside z1..z" +
                                                std::to_string(order_));
                return var_z(idx);
            }
        }
        Op fn;
        if (name == "exp")
            fn = Op::Exp;
        else if (name == "log")
            fn = Op::Log;
        else if (name == "sin")
            fn = Op::Sin;
        else if (name == "cos")
            fn = Op::Cos;
        else
            throw ParseError(start, "unknown identifier '" + std::string(name) + "'");
        expect('(');
        NodePtr arg = sum();
        expect(')');
        return unary(fn, arg);
    }

    std::string_view text_;
    int order_;
    std::size_t pos_ = 0;
};

} // namespace detail

inline Expr parse(std::string_view text, int order)
{
    if (order < 1)
        throw InvalidArgument("order must be at least 1");
    return Expr(detail::Parser(text, order).run(), order);
}

// ---------------------------------------------------------------------------
// Printing
// ---------------------------------------------------------------------------

namespace detail {

inline std::string format_real(double v)
{
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

inline void print(const NodePtr& n, std::string& out)
{
    switch (n->op) {
    case Op::Const: {
        const Complex c = n->value;
        if (c.imag() == 0.0 && !std::signbit(c.real()))
            out += format_real(c.real());
        else if (c.real() == 0.0 && !std::signbit(c.real()) && c.imag() > 0.0)
            out += format_real(c.imag()) + "i";
        else
            out += "(" + format_real(c.real()) + (c.imag() < 0 ? "-" : "+") + format_real(std::abs(c.imag())) + "i)";
        return;
    }
    case Op::VarS: out += "s"; return;
    case Op::VarZ: out += "z" + std::to_string(n->index); return;
    case Op::Neg:
        out += "-(";
        print(n->lhs, out);
        out += ")";
        return;
    case Op::Exp:
    case Op::Log:
    case Op::Sin:
    case Op::Cos: {
        static constexpr const char* names[] = {"exp", "log", "sin", "cos"};
        out += names[static_cast<int>(n->op) - static_cast<int>(Op::Exp)];
        out += "(";
        print(n->lhs, out);
        out += ")";
        return;
    }
    case Op::Pow:
        out += "(";
        print(n->lhs, out);
        out += ")^";
        if (n->int_exponent) {
            if (n->exponent >= 0)
                out += std::to_string(n->exponent);
            else
                out += "(-(" + std::to_string(-n->exponent) + "))";
        } else {
            out += "(";
            print(n->rhs, out);
            out += ")";
        }
        return;
    default: {
        const char sym = n->op == Op::Add ? '+' : n->op == Op::Sub ? '-' : n->op == Op::Mul ? '*' : '/';
        out += "(";
        print(n->lhs, out);
        out += ' ';
        out += sym;
        out += ' ';
        print(n->rhs, out);
        out += ")";
        return;
    }
    }
}

} // namespace detail

/// Prints in a fully parenthesised form that parses back to the same tree.
inline std::string to_string(const Expr& e)
{
    std::string out;
    detail::print(e.root(), out);
    return out;
}

// ---------------------------------------------------------------------------
// Evaluation
// ---------------------------------------------------------------------------

namespace detail {

inline Complex checked(Complex v, const char* what)
{
    if (!is_finite(v))
        throw EvalError(std::string("non-finite result in ") + what);
    return v;
}

inline Complex int_power(Complex base, long n)
{
    if (n < 0) {
        if (base == Complex(0.0))
            throw EvalError("zero raised to a negative power");
        return 1.0 / int_power(base, -n);
    }
    Complex result(1.0), b = base;
    while (n > 0) {
        if (n & 1)
            result *= b;
        b *= b;
        n >>= 1;
    }
    return result;
}

inline Complex eval(const Node& n, Complex s, std::span<const Complex> z)
{
    switch (n.op) {
    case Op::Const: return n.value;
    case Op::VarS: return s;
    case Op::VarZ: return z[static_cast<std::size_t>(n.index - 1)];
    case Op::Add: return checked(eval(*n.lhs, s, z) + eval(*n.rhs, s, z), "addition");
    case Op::Sub: return checked(eval(*n.lhs, s, z) - eval(*n.rhs, s, z), "subtraction");
    case Op::Mul: return checked(eval(*n.lhs, s, z) * eval(*n.rhs, s, z), "multiplication");
    case Op::Div: {
        const Complex num = eval(*n.lhs, s, z);
        const Complex den = eval(*n.rhs, s, z);
        if (den == Complex(0.0))
            throw EvalError("division by zero");
        return checked(num / den, "division");
    }
    case Op::Neg: return Complex(0.0) - eval(*n.lhs, s, z);
    case Op::Pow: {
        const Complex base = eval(*n.lhs, s, z);
        if (n.int_exponent)
            return checked(int_power(base, n.exponent), "power");
        const Complex e = eval(*n.rhs, s, z);
        if (base == Complex(0.0)) {
            if (e.real() > 0.0)
                return Complex(0.0);
            throw EvalError("zero raised to a power with non-positive real part");
        }
        return checked(std::exp(e * std::log(base)), "power");
    }
    case Op::Exp: return checked(std::exp(eval(*n.lhs, s, z)), "exp");
    case Op::Log: {
        const Complex a = eval(*n.lhs, s, z);
        if (a == Complex(0.0))
            throw EvalError("log of zero");
        return checked(std::log(a), "log");
    }
    case Op::Sin: return checked(std::sin(eval(*n.lhs, s, z)), "sin");
    case Op::Cos: return checked(std::cos(eval(*n.lhs, s, z)), "cos");
    }
    throw EvalError("corrupt expression node");
}

} // namespace detail

/// Evaluates F(s, z1..zk) with principal branches for log and non-integer powers.
inline Complex eval(const Expr& e, Complex s, std::span<const Complex> z)
{
    if (static_cast<int>(z.size()) != e.order())
        throw InvalidArgument("eval: expected " + std::to_string(e.order()) + " z arguments, got " +
                              std::to_string(z.size()));
    return detail::eval(*e.root(), s, z);
}

inline constexpr double kDefaultStep = 1e-6;

/// Central-difference estimate of dF/dz_i (i is 1-based).
inline Complex partial(const Expr& e, int i, Complex s, std::span<const Complex> z, double h = kDefaultStep)
{
    if (i < 1 || i > e.order())
        throw InvalidArgument("partial: index outside 1..k");
    if (!(h > 0.0))
        throw InvalidArgument("partial: step must be positive");
    std::vector<Complex> shifted(z.begin(), z.end());
    const auto idx = static_cast<std::size_t>(i - 1);
    shifted[idx] = z[idx] + h;
    const Complex up = eval(e, s, shifted);
    shifted[idx] = z[idx] - h;
    const Complex down = eval(e, s, shifted);
    return (up - down) / (2.0 * h);
}

/// True when the tree contains no z variable.
inline bool is_constant_in_z(const NodePtr& n)
{
    if (!n)
        return true;
    if (n->op == Op::VarZ)
        return false;
    return is_constant_in_z(n->lhs) && is_constant_in_z(n->rhs);
}

} // namespace transfer::fexpr
