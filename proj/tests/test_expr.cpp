#include "opcalc/expr.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace opcalc;

namespace {

Errc code_of(std::string_view src, int dim, bool allow_t) {
    try {
        parse(src, dim, allow_t);
    } catch (const Error& e) {
        return e.code();
    }
    FAIL("expected a parse error for " << src);
    return Errc::Validation;
}

Expr random_tree(std::mt19937_64& rng, int depth) {
    std::uniform_int_distribution<int> pick(0, 9);
    std::uniform_real_distribution<double> val(0.0, 3.0);
    const int choice = depth <= 0 ? pick(rng) % 3 : pick(rng);
    switch (choice) {
    case 0: return Expr::constant(val(rng));
    case 1: return Expr::variable(static_cast<int>(rng() % 2));
    case 2: return Expr::variable(-1);
    case 3: return Expr::unary(UnaryOp::Neg, random_tree(rng, depth - 1));
    case 4: return Expr::unary(static_cast<UnaryOp>(1 + rng() % 7), random_tree(rng, depth - 1));
    case 5: return Expr::binary(BinaryOp::Pow, random_tree(rng, depth - 1), Expr::constant(static_cast<double>(rng() % 4)));
    default: return Expr::binary(static_cast<BinaryOp>(rng() % 4), random_tree(rng, depth - 1), random_tree(rng, depth - 1));
    }
}

} // namespace

TEST_CASE("parse accepts valid expressions") {
    CHECK_NOTHROW(parse("sin(x1)*exp(-t)", 1, true));
    CHECK_NOTHROW(parse("  2.5e-3 * x2 + 3i ", 2, false));
}

TEST_CASE("parse errors") {
    CHECK(code_of("x3", 2, false) == Errc::UnknownVariable);
    CHECK(code_of("2^x1", 1, false) == Errc::NonIntegerExponent);
    CHECK(code_of("2^1.5", 1, false) == Errc::NonIntegerExponent);
    CHECK(code_of("t + 1", 1, false) == Errc::UnknownVariable);
    CHECK(code_of("foo(1)", 1, false) == Errc::UnknownVariable);
    CHECK(code_of("1 +", 1, false) == Errc::SyntaxError);
    CHECK(code_of("(1 + 2", 1, false) == Errc::SyntaxError);
    CHECK(code_of("1 2", 1, false) == Errc::SyntaxError);
    CHECK(code_of("sin 1", 1, false) == Errc::SyntaxError);
    CHECK(code_of("1..2", 1, false) == Errc::SyntaxError);
    try {
        parse("1 + * 2", 1, false);
    } catch (const Error& e) {
        CHECK(std::string(e.what()).find("at byte 4") != std::string::npos);
    }
}

TEST_CASE("eval table") {
    struct Row {
        const char* src;
        std::vector<double> x;
        double t;
        cplx want;
    };
    const double e = std::exp(1.0);
    const std::vector<Row> rows{
        {"1+2*3", {0, 0}, 0, 7.0},
        {"cos(x1)", {0, 0}, 0, 1.0},
        {"exp(t)*sin(x1)", {kPi / 2, 0}, 1, e},
        {"2^3^2", {0, 0}, 0, 512.0},
        {"-2^2", {0, 0}, 0, 4.0},
        {"-(2^2)", {0, 0}, 0, -4.0},
        {"8/4/2", {0, 0}, 0, 1.0},
        {"10-4-3", {0, 0}, 0, 3.0},
        {"2^-1", {0, 0}, 0, 0.5},
        {"x1^2 + x2^2", {3, 4}, 0, 25.0},
        {"sqrt(x1)", {16, 0}, 0, 4.0},
        {"sqrt(-4)", {0, 0}, 0, cplx(0, 2)},
        {"abs(-3 + 4i)", {0, 0}, 0, 5.0},
        {"i*i", {0, 0}, 0, -1.0},
        {"1 + 2i", {0, 0}, 0, cplx(1, 2)},
        {"exp(i*pi)", {0, 0}, 0, -1.0},
        {"sinh(x1) / cosh(x1)", {0.5, 0}, 0, std::tanh(0.5)},
        {"cosh(x1)^2 - sinh(x1)^2", {1.3, 0}, 0, 1.0},
        {"sin(x1 + x2) - (sin(x1)*cos(x2) + cos(x1)*sin(x2))", {0.7, 1.9}, 0, 0.0},
        {"t*x2 - 1.5e1", {0, 2}, 3, -9.0},
    };
    REQUIRE(rows.size() == 20);
    for (const auto& r : rows) {
        INFO(r.src);
        const auto ex = parse(r.src, 2, true);
        CHECK(std::abs(eval(ex, r.x, r.t) - r.want) < 1e-12);
    }
}

TEST_CASE("pretty-print round trip on random trees") {
    std::mt19937_64 rng(17);
    const std::vector<double> x{0.3, 0.8};
    for (int i = 0; i < 300; ++i) {
        const Expr tree = random_tree(rng, 4);
        const auto text = tree.to_string();
        INFO(text);
        const Expr once = parse(text, 2, true);
        CHECK(once.to_string() == text);
        CHECK(parse(once.to_string(), 2, true).to_string() == text);
        const cplx a = tree.eval(x, 0.4), b = once.eval(x, 0.4);
        if (std::isfinite(std::abs(a))) CHECK(a == b);
    }
}

TEST_CASE("parsed expressions keep precedence when printed") {
    CHECK(parse("1 + 2 * x1", 1, false).to_string() == "(1 + (2 * x1))");
    CHECK(parse("-x1^2", 1, false).to_string() == "((-x1) ^ 2)");
    CHECK(parse("2^3^2", 1, false).to_string() == "(2 ^ 9)");
}
