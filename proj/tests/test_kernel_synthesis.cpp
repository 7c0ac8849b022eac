#include "opcalc/kernel_synthesis.hpp"
#include "opcalc/oracle.hpp"

#include <catch_amalgamated.hpp>

#include <random>

using namespace opcalc;

namespace {

const auto kHeat = CharacteristicSpec::first_order({1.0, 2.0});
const auto kWave = CharacteristicSpec::even_order({1.0, 2.0});

cplx oracle(const CharacteristicSpec& spec, cplx p, std::vector<cplx> phi, std::function<cplx(double)> f, double t) {
    return mode_ode_solve(spec, p, phi, f, t);
}

std::vector<cplx> zeros(int n) { return std::vector<cplx>(static_cast<std::size_t>(n), 0.0); }

// Impulse response: zero data except the top derivative, which is 1/lead.
cplx impulse(const CharacteristicSpec& spec, cplx p, double t) {
    auto phi = zeros(spec.order());
    phi.back() = 1.0 / spec.lead();
    return oracle(spec, p, phi, {}, t);
}

} // namespace

TEST_CASE("gm_first") {
    CHECK(gm_first(kHeat, -1.0, 0.0) == cplx(0.0));
    CHECK(std::abs(gm_first(kHeat, -1.0, 1.0) - (std::exp(-1.0) - std::exp(-2.0))) < 1e-14);

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-1.5, 1.5);
    for (int i = 0; i < 10; ++i) {
        const auto spec = CharacteristicSpec::first_order({cplx(u(rng), u(rng)), cplx(u(rng), u(rng)) + 3.5, cplx(u(rng), u(rng)) - 3.5});
        const cplx p(u(rng), u(rng));
        const double t = 0.3 + 0.2 * i;
        CHECK(std::abs(gm_first(spec, p, t) - impulse(spec, p, t)) < 1e-8);
    }
}

TEST_CASE("gm_even") {
    CHECK(gm_even(kWave, -1.0, 0.0) == cplx(0.0));
    CHECK(std::abs(gm_even(kWave, -1.0, 1.0) - impulse(kWave, -1.0, 1.0)) < 1e-8);
    for (int m = 2; m <= 4; ++m) {
        std::vector<cplx> roots;
        for (int j = 1; j <= m; ++j) roots.push_back(0.5 * j);
        const auto spec = CharacteristicSpec::even_order(roots);
        const double t = 0.8;
        CHECK(std::abs(gm_even(spec, 0.0, t) - std::pow(t, 2 * m - 1) / factorial(2 * m - 1)) < 1e-14);
    }
}

TEST_CASE("gm_repeated needs a resolved measure") {
    const auto spec = CharacteristicSpec::repeated_root(2);
    CHECK_THROWS_AS(gm_repeated(spec, -1.0, 1.0, RepeatedMeasure::Unresolved), Error);
    // m = 2, p -> 0: 1/s^4 has inverse transform t^3/6.
    CHECK(std::abs(gm_repeated(spec, 0.0, 1.0, RepeatedMeasure::TauPrime) - 1.0 / 6.0) < 1e-14);
    CHECK(std::abs(gm_repeated(spec, -0.7, 0.9, RepeatedMeasure::TauPrime) - impulse(spec, -0.7, 0.9)) < 1e-10);
}

TEST_CASE("inhomogeneous_mode") {
    CHECK(inhomogeneous_mode(kHeat, -1.0, [](double) { return 0.0; }, 1.0) == cplx(0.0));
    const auto& rule = gauss_legendre(64);
    const cplx conv = rule.integrate([](double tau) { return gm_first(kHeat, -1.0, 1.0 - tau); }, 0.0, 1.0);
    CHECK(std::abs(inhomogeneous_mode(kHeat, -1.0, [](double) { return 1.0; }, 1.0) - conv) < 1e-9);

    auto f = [](double tau) { return cplx(std::cos(tau)); };
    const cplx want = oracle(kWave, -1.0, zeros(4), f, 1.0);
    CHECK(std::abs(inhomogeneous_mode(kWave, -1.0, f, 1.0) - want) < 1e-6);

    QuadConfig q;
    CHECK_THROWS_AS(inhomogeneous_mode(CharacteristicSpec::repeated_root(2), -1.0, f, 1.0, q), Error);
    q.repeated_measure = RepeatedMeasure::TauPrime;
    const auto rr = CharacteristicSpec::repeated_root(2);
    CHECK(std::abs(inhomogeneous_mode(rr, -1.0, f, 1.0, q) - oracle(rr, -1.0, zeros(4), f, 1.0)) < 1e-10);
}

TEST_CASE("zero-data assembly equals the literal product formulas") {
    auto f = [](double tau) { return cplx(std::cos(3 * tau), tau); };
    for (const auto& spec : {kHeat, kWave, CharacteristicSpec::first_order({1.0, cplx(0, 1), -0.5})}) {
        const cplx a = inhomogeneous_mode(spec, cplx(-1.2, 0.4), f, 0.9);
        const cplx b = zero_data_product_formula(spec, cplx(-1.2, 0.4), f, 0.9);
        CHECK(std::abs(a - b) < 1e-12 * std::max(1.0, std::abs(b)));
        CHECK(homogeneous_mode(spec, cplx(-1.2, 0.4), zeros(spec.order()), 0.9) == cplx(0.0));
    }
}

TEST_CASE("derivative_reduce basics") {
    TermList one;
    one.integrals.push_back({1.0, 0, 0, 0});
    const auto same = derivative_reduce(one, 0);
    REQUIRE(same.integrals.size() == 1);
    CHECK(same.boundary.empty());
    const auto d1 = derivative_reduce(one, 1);
    CHECK(d1.integrals.empty());
    REQUIRE(d1.boundary.size() == 1);
    CHECK(d1.boundary[0].kernel_order == 0);
    CHECK(d1.boundary[0].t_power == 0);
    CHECK(d1.boundary[0].coeff == cplx(1.0));
    CHECK_THROWS_AS(derivative_reduce(one, -1), Error);
}

TEST_CASE("derivative_reduce agrees with finite differences") {
    std::mt19937_64 rng(9);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    const auto specs = {CharacteristicSpec::first_order({1.0, cplx(0.3, 1.0), -0.8}), CharacteristicSpec::even_order({1.0, cplx(0.5, 0.5)}),
                        CharacteristicSpec::repeated_root(3)};
    for (const auto& spec : specs) {
        const auto base = propagator_terms(spec);
        const auto& rule = gauss_legendre(64);
        for (int trial = 0; trial < 3; ++trial) {
            const cplx p(u(rng), u(rng));
            const double t = 0.6 + 0.3 * u(rng);
            with_kernel(spec, p, [&](const auto& kernel) {
                auto g = [&](double s) { return evaluate_terms(base, kernel, s, rule); };
                const double h = 1e-3;
                const cplx fd = (-g(t + 2 * h) + 16.0 * g(t + h) - 30.0 * g(t) + 16.0 * g(t - h) - g(t - 2 * h)) / (12 * h * h);
                const cplx exact = evaluate_terms(derivative_reduce(base, 2), kernel, t, rule);
                CHECK(std::abs(fd - exact) < 1e-6 * std::max(1.0, std::abs(exact)));
                return 0;
            });
        }
    }
}

TEST_CASE("homogeneous_mode closed forms") {
    const std::vector<cplx> phi{1.0, 0.0};
    for (double t : {0.0, 0.3, 1.0, 2.0})
        CHECK(std::abs(homogeneous_mode(kHeat, -1.0, phi, t) - (2 * std::exp(-t) - std::exp(-2 * t))) < 1e-12);
    const std::vector<cplx> phi4{1.0, 0.0, 0.0, 0.0};
    for (double t : {0.0, 0.5, 1.0, 3.0}) {
        const cplx got = homogeneous_mode(kWave, -1.0, phi4, t);
        CHECK(std::abs(got - (4.0 / 3.0 * std::cos(t) - 1.0 / 3.0 * std::cos(2 * t))) < 1e-10);
        CHECK(std::abs(got - oracle(kWave, -1.0, phi4, {}, t)) < 1e-7);
    }
}

TEST_CASE("homogeneous_mode handles m = 1 and non-monic leads") {
    const auto one = CharacteristicSpec::first_order({2.0});
    const std::vector<cplx> phi{1.5};
    CHECK(std::abs(homogeneous_mode(one, cplx(-1, 1), phi, 0.7) - 1.5 * std::exp(2.0 * cplx(-1, 1) * 0.7)) < 1e-14);

    const auto scaled = CharacteristicSpec::first_order_from_coeffs({6.0, -9.0, 3.0});
    const std::vector<cplx> data{1.0, 0.5};
    auto f = [](double tau) { return cplx(1.0 + tau); };
    const cplx got = homogeneous_mode(scaled, -1.0, data, 0.8) + inhomogeneous_mode(scaled, -1.0, f, 0.8);
    CHECK(std::abs(got - oracle(scaled, -1.0, data, f, 0.8)) < 1e-12);
}

TEST_CASE("homogeneous evolution is a semigroup") {
    // Restarting from the state (u, u', ..) at s reproduces the run to s + t.
    const auto spec = CharacteristicSpec::even_order({1.0, cplx(0.4, 0.3)});
    const cplx p(-0.8, 0.2);
    const std::vector<cplx> phi{1.0, 0.2, -0.4, 0.1};
    const double s = 0.4, t = 0.7;
    const auto base = propagator_terms(spec);
    const auto weights = derivative_weights(spec, p, phi);
    std::vector<cplx> state(4, 0.0);
    with_kernel(spec, p, [&](const auto& kernel) {
        for (int d = 0; d < 4; ++d)
            for (std::size_t q = 0; q < weights.size(); ++q)
                state[static_cast<std::size_t>(d)] +=
                    weights[q] * evaluate_terms(derivative_reduce(base, static_cast<int>(q) + d), kernel, s, gauss_legendre(64));
        return 0;
    });
    CHECK(std::abs(homogeneous_mode(spec, p, state, t) - homogeneous_mode(spec, p, phi, s + t)) < 1e-11);
}

TEST_CASE("quadrature refinement from 32 to 64 nodes") {
    auto f = [](double tau) { return cplx(std::cos(tau)); };
    const std::vector<cplx> phi2{1.0, 0.3}, phi4{1.0, 0.0, 0.5, 0.0};
    QuadConfig q32{32}, q64{64};
    CHECK(std::abs(mode_solution(kHeat, -1.0, phi2, f, 1.0, q32) - mode_solution(kHeat, -1.0, phi2, f, 1.0, q64)) < 1e-8);
    CHECK(std::abs(mode_solution(kWave, -1.0, phi4, f, 1.0, q32) - mode_solution(kWave, -1.0, phi4, f, 1.0, q64)) < 1e-8);
}

TEST_CASE("solve on the heat-product problem") {
    CauchyProblem prob;
    prob.spec = kHeat;
    prob.P = SymbolPolynomial::laplacian(1);
    prob.grid = Grid({32}, {2 * kPi});
    prob.phi = {Field::sample(prob.grid, [](auto x) { return std::sin(x[0]); }), Field::zeros(prob.grid)};
    prob.t_points = {0.0, 0.5, 1.0};
    const auto res = solve(prob);
    REQUIRE(res.snapshots.size() == 3);
    for (const auto& snap : res.snapshots) {
        const double amp = 2 * std::exp(-snap.t) - std::exp(-2 * snap.t);
        const auto want = Field::sample(prob.grid, [&](auto x) { return amp * std::sin(x[0]); });
        double err = 0.0;
        for (std::size_t i = 0; i < want.data.size(); ++i) err = std::max(err, std::abs(snap.u.data[i] - want.data[i]));
        CHECK(err < 1e-8);
    }
    CHECK_FALSE(res.report.any_overflow());
}

TEST_CASE("solve with zero data is identically zero") {
    CauchyProblem prob;
    prob.spec = kWave;
    prob.P = SymbolPolynomial::laplacian(2);
    prob.grid = Grid({8, 8}, {2 * kPi, 2 * kPi});
    for (int r = 0; r < 4; ++r) prob.phi.push_back(Field::zeros(prob.grid));
    prob.t_points = {0.5, 1.0};
    for (const auto& snap : solve(prob).snapshots)
        for (const cplx z : snap.u.data) CHECK(z == cplx(0.0));
}

TEST_CASE("solve validation and overflow reporting") {
    CauchyProblem prob;
    prob.spec = kHeat;
    prob.P = SymbolPolynomial::laplacian(1);
    prob.grid = Grid({16}, {2 * kPi});
    prob.phi = {Field::zeros(prob.grid)};
    prob.t_points = {1.0};
    CHECK_THROWS_AS(solve(prob), Error);
    prob.phi.push_back(Field::zeros(prob.grid));
    prob.t_points = {1.0, 0.5};
    CHECK_THROWS_AS(solve(prob), Error);

    // Backward heat: (d/dt + Lap) grows like e^{k^2 t}.
    prob.spec = CharacteristicSpec::first_order({-1.0, -2.0});
    prob.phi[0] = Field::sample(prob.grid, [](auto x) { return std::cos(7 * x[0]); });
    prob.t_points = {10.0};
    const auto res = solve(prob);
    CHECK(res.report.any_overflow());
    for (const cplx z : res.snapshots[0].u.data) CHECK(std::isfinite(z.real()));
}
