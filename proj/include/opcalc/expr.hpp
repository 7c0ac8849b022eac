#pragma once

// Closed arithmetic expression language for initial data and forcing:
//
//   expr    := term (('+' | '-') term)*
//   term    := factor (('*' | '/') factor)*
//   factor  := unary ('^' exponent)?          exponent is a constant integer
//   unary   := '-' unary | primary
//   primary := number | ident | func '(' expr ')' | '(' expr ')'
//   func    := sin | cos | exp | sinh | cosh | sqrt | abs
//
// Identifiers: x1..xn, t (when allowed), pi, i. A number may carry an
// imaginary suffix: "2.5i". '^' is right associative, so 2^3^2 = 2^9.

#include "opcalc/core.hpp"

#include <cctype>
#include <charconv>
#include <cmath>
#include <memory>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <variant>
#include <vector>

namespace opcalc {

enum class UnaryOp { Neg, Sin, Cos, Exp, Sinh, Cosh, Sqrt, Abs };
enum class BinaryOp { Add, Sub, Mul, Div, Pow };

class Expr {
public:
    struct Constant {
        cplx value;
    };
    struct Variable {
        int axis; ///< 0..n-1 for x1..xn, -1 for t
    };
    struct Unary {
        UnaryOp op;
        std::shared_ptr<const Expr> arg;
    };
    struct Binary {
        BinaryOp op;
        std::shared_ptr<const Expr> lhs, rhs;
    };
    using Node = std::variant<Constant, Variable, Unary, Binary>;

    explicit Expr(Node n) : node_(std::move(n)) {}

    const Node& node() const { return node_; }

    static Expr constant(cplx v) { return Expr(Constant{v}); }
    static Expr variable(int axis) { return Expr(Variable{axis}); }
    static Expr unary(UnaryOp op, Expr a) { return Expr(Unary{op, std::make_shared<const Expr>(std::move(a))}); }
    static Expr binary(BinaryOp op, Expr a, Expr b) {
        return Expr(Binary{op, std::make_shared<const Expr>(std::move(a)), std::make_shared<const Expr>(std::move(b))});
    }

    cplx eval(std::span<const double> x, double t = 0.0) const {
        return std::visit(
            [&](const auto& n) -> cplx {
                using N = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<N, Constant>) {
                    return n.value;
                } else if constexpr (std::is_same_v<N, Variable>) {
                    return n.axis < 0 ? cplx(t) : cplx(x[static_cast<std::size_t>(n.axis)]);
                } else if constexpr (std::is_same_v<N, Unary>) {
                    const cplx a = n.arg->eval(x, t);
                    switch (n.op) {
                    case UnaryOp::Neg: return -a;
                    case UnaryOp::Sin: return std::sin(a);
                    case UnaryOp::Cos: return std::cos(a);
                    case UnaryOp::Exp: return std::exp(a);
                    case UnaryOp::Sinh: return std::sinh(a);
                    case UnaryOp::Cosh: return std::cosh(a);
                    case UnaryOp::Sqrt: return std::sqrt(a.imag() == 0.0 ? cplx(a.real(), 0.0) : a);
                    case UnaryOp::Abs: return std::abs(a);
                    }
                    return a;
                } else {
                    const cplx a = n.lhs->eval(x, t);
                    if (n.op == BinaryOp::Pow) return integer_power(a, exponent_of(*n.rhs));
                    const cplx b = n.rhs->eval(x, t);
                    switch (n.op) {
                    case BinaryOp::Add: return a + b;
                    case BinaryOp::Sub: return a - b;
                    case BinaryOp::Mul: return a * b;
                    case BinaryOp::Div: return a / b;
                    case BinaryOp::Pow: break;
                    }
                    return a;
                }
            },
            node_);
    }

    /// Fully parenthesized rendering; parsing it back yields the same tree.
    std::string to_string() const {
        std::ostringstream out;
        out.precision(17);
        print(out);
        return out.str();
    }

    /// True when the tree references no variables.
    bool is_constant() const {
        return std::visit(
            [](const auto& n) {
                using N = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<N, Constant>) return true;
                else if constexpr (std::is_same_v<N, Variable>) return false;
                else if constexpr (std::is_same_v<N, Unary>) return n.arg->is_constant();
                else return n.lhs->is_constant() && n.rhs->is_constant();
            },
            node_);
    }

    static long exponent_of(const Expr& e) {
        const cplx v = e.eval({}, 0.0);
        return std::lround(v.real());
    }

private:
    static cplx integer_power(cplx base, long n) {
        if (n < 0) return 1.0 / integer_power(base, -n);
        cplx r = 1.0;
        while (n > 0) {
            if (n & 1) r *= base;
            base *= base;
            n >>= 1;
        }
        return r;
    }

    void print(std::ostream& out) const {
        std::visit(
            [&](const auto& n) {
                using N = std::decay_t<decltype(n)>;
                if constexpr (std::is_same_v<N, Constant>) {
                    const double re = n.value.real(), im = n.value.imag();
                    // Literals are nonnegative; signs come from explicit negation.
                    if (im == 0.0) print_real(out, re);
                    else if (re == 0.0) print_imag(out, im);
                    else {
                        out << '(';
                        print_real(out, re);
                        out << (im < 0 ? " - " : " + ") << std::abs(im) << "i)";
                    }
                } else if constexpr (std::is_same_v<N, Variable>) {
                    if (n.axis < 0) out << 't';
                    else out << 'x' << (n.axis + 1);
                } else if constexpr (std::is_same_v<N, Unary>) {
                    if (n.op == UnaryOp::Neg) {
                        out << "(-";
                        n.arg->print(out);
                        out << ')';
                    } else {
                        out << name(n.op) << '(';
                        n.arg->print(out);
                        out << ')';
                    }
                } else {
                    out << '(';
                    n.lhs->print(out);
                    out << ' ' << symbol(n.op) << ' ';
                    n.rhs->print(out);
                    out << ')';
                }
            },
            node_);
    }

    static void print_real(std::ostream& out, double v) {
        if (v < 0) out << "(-" << -v << ')';
        else out << v;
    }
    static void print_imag(std::ostream& out, double v) {
        if (v < 0) out << "(-" << -v << "i)";
        else out << v << 'i';
    }

public:
    static std::string_view name(UnaryOp op) {
        switch (op) {
        case UnaryOp::Neg: return "-";
        case UnaryOp::Sin: return "sin";
        case UnaryOp::Cos: return "cos";
        case UnaryOp::Exp: return "exp";
        case UnaryOp::Sinh: return "sinh";
        case UnaryOp::Cosh: return "cosh";
        case UnaryOp::Sqrt: return "sqrt";
        case UnaryOp::Abs: return "abs";
        }
        return "?";
    }
    static char symbol(BinaryOp op) {
        switch (op) {
        case BinaryOp::Add: return '+';
        case BinaryOp::Sub: return '-';
        case BinaryOp::Mul: return '*';
        case BinaryOp::Div: return '/';
        case BinaryOp::Pow: return '^';
        }
        return '?';
    }

private:
    Node node_;
};

namespace detail {

class ExprParser {
public:
    ExprParser(std::string_view src, int dim, bool allow_t) : src_(src), dim_(dim), allow_t_(allow_t) {}

    Expr parse() {
        Expr e = expr();
        skip_ws();
        if (pos_ != src_.size()) fail("unexpected '" + std::string(1, src_[pos_]) + "'");
        return e;
    }

private:
    [[noreturn]] void fail(const std::string& msg, Errc code = Errc::SyntaxError) const {
        throw Error(code, msg + " at byte " + std::to_string(pos_));
    }

    void skip_ws() {
        while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) ++pos_;
    }

    bool accept(char c) {
        skip_ws();
        if (pos_ < src_.size() && src_[pos_] == c) {
            ++pos_;
            return true;
        }
        return false;
    }

    void expect(char c) {
        if (!accept(c)) fail(std::string("expected '") + c + "'");
    }

    Expr expr() {
        Expr lhs = term();
        for (;;) {
            if (accept('+')) lhs = Expr::binary(BinaryOp::Add, std::move(lhs), term());
            else if (accept('-')) lhs = Expr::binary(BinaryOp::Sub, std::move(lhs), term());
            else return lhs;
        }
    }

    Expr term() {
        Expr lhs = factor();
        for (;;) {
            if (accept('*')) lhs = Expr::binary(BinaryOp::Mul, std::move(lhs), factor());
            else if (accept('/')) lhs = Expr::binary(BinaryOp::Div, std::move(lhs), factor());
            else return lhs;
        }
    }

    Expr factor() {
        Expr base = unary();
        if (!accept('^')) return base;
        const std::size_t at = pos_;
        Expr exponent = factor(); // right associative
        if (!exponent.is_constant()) {
            pos_ = at;
            fail("exponent must be a constant integer", Errc::NonIntegerExponent);
        }
        const cplx v = exponent.eval({}, 0.0);
        if (v.imag() != 0.0 || v.real() != std::round(v.real()) || std::abs(v.real()) > 1e6) {
            pos_ = at;
            fail("exponent must be a constant integer", Errc::NonIntegerExponent);
        }
        // Fold to a single integer literal so printing round-trips.
        const double n = v.real();
        Expr lit = n < 0 ? Expr::unary(UnaryOp::Neg, Expr::constant(-n)) : Expr::constant(n);
        return Expr::binary(BinaryOp::Pow, std::move(base), std::move(lit));
    }

    Expr unary() {
        if (accept('-')) return Expr::unary(UnaryOp::Neg, unary());
        return primary();
    }

    Expr primary() {
        skip_ws();
        if (pos_ >= src_.size()) fail("unexpected end of input");
        const char c = src_[pos_];
        if (c == '(') {
            ++pos_;
            Expr e = expr();
            expect(')');
            return e;
        }
        if (std::isdigit(static_cast<unsigned char>(c)) || c == '.') return number();
        if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') return identifier();
        fail("unexpected '" + std::string(1, c) + "'");
    }

    Expr number() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isdigit(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '.')) ++pos_;
        if (pos_ < src_.size() && (src_[pos_] == 'e' || src_[pos_] == 'E')) {
            std::size_t look = pos_ + 1;
            if (look < src_.size() && (src_[look] == '+' || src_[look] == '-')) ++look;
            if (look < src_.size() && std::isdigit(static_cast<unsigned char>(src_[look]))) {
                pos_ = look;
                while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) ++pos_;
            }
        }
        const std::string text(src_.substr(start, pos_ - start));
        double v = 0.0;
        std::size_t used = 0;
        try {
            v = std::stod(text, &used);
        } catch (const std::exception&) {
            pos_ = start;
            fail("malformed number '" + text + "'");
        }
        if (used != text.size()) {
            pos_ = start;
            fail("malformed number '" + text + "'");
        }
        if (pos_ < src_.size() && src_[pos_] == 'i' &&
            (pos_ + 1 >= src_.size() || !std::isalnum(static_cast<unsigned char>(src_[pos_ + 1])))) {
            ++pos_;
            return Expr::constant({0.0, v});
        }
        return Expr::constant(v);
    }

    Expr identifier() {
        const std::size_t start = pos_;
        while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_')) ++pos_;
        const std::string_view id = src_.substr(start, pos_ - start);
        static constexpr std::pair<std::string_view, UnaryOp> funcs[] = {
            {"sin", UnaryOp::Sin},   {"cos", UnaryOp::Cos},   {"exp", UnaryOp::Exp}, {"sinh", UnaryOp::Sinh},
            {"cosh", UnaryOp::Cosh}, {"sqrt", UnaryOp::Sqrt}, {"abs", UnaryOp::Abs},
        };
        for (const auto& [fname, op] : funcs) {
            if (id == fname) {
                expect('(');
                Expr arg = expr();
                expect(')');
                return Expr::unary(op, std::move(arg));
            }
        }
        if (id == "pi") return Expr::constant(kPi);
        if (id == "i") return Expr::constant({0.0, 1.0});
        if (id == "t") {
            if (!allow_t_) {
                pos_ = start;
                fail("variable 't' is not allowed here", Errc::UnknownVariable);
            }
            return Expr::variable(-1);
        }
        if (id.size() >= 2 && id[0] == 'x') {
            int axis = 0;
            const auto [ptr, ec] = std::from_chars(id.data() + 1, id.data() + id.size(), axis);
            if (ec == std::errc() && ptr == id.data() + id.size() && axis >= 1) {
                if (axis > dim_) {
                    pos_ = start;
                    fail("unknown variable '" + std::string(id) + "' for dimension " + std::to_string(dim_), Errc::UnknownVariable);
                }
                return Expr::variable(axis - 1);
            }
        }
        pos_ = start;
        fail("unknown identifier '" + std::string(id) + "'", Errc::UnknownVariable);
    }

    std::string_view src_;
    std::size_t pos_ = 0;
    int dim_;
    bool allow_t_;
};

} // namespace detail

/// Parses src; variables x1..x{dim} and, if allow_t, t.
inline Expr parse(std::string_view src, int dim, bool allow_t) { return detail::ExprParser(src, dim, allow_t).parse(); }

/// Evaluates e at point x and time t.
inline cplx eval(const Expr& e, std::span<const double> x, double t = 0.0) { return e.eval(x, t); }

} // namespace opcalc
