#include "opcalc/oracle.hpp"

#include <catch_amalgamated.hpp>

#include <filesystem>
#include <random>

using namespace opcalc;

namespace {

const auto kHeat = CharacteristicSpec::first_order({1.0, 2.0});

CauchyProblem heat_problem() {
    CauchyProblem prob;
    prob.spec = CharacteristicSpec::first_order({1.0});
    prob.P = SymbolPolynomial::laplacian(1);
    prob.grid = Grid({32}, {2 * kPi});
    prob.phi = {Field::sample(prob.grid, [](auto x) { return std::sin(x[0]); })};
    return prob;
}

std::vector<Snapshot> heat_snapshots(const CauchyProblem& prob, int count, double h) {
    std::vector<Snapshot> out;
    for (int i = 0; i < count; ++i) {
        const double t = i * h;
        out.push_back({t, Field::sample(prob.grid, [&](auto x) { return std::exp(-t) * std::sin(x[0]); })});
    }
    return out;
}

} // namespace

TEST_CASE("mode equation coefficients") {
    const auto b = mode_equation_coefficients(kHeat, -1.0);
    REQUIRE(b.size() == 3);
    CHECK(std::abs(b[0] - 2.0) < 1e-15);
    CHECK(std::abs(b[1] - 3.0) < 1e-15);
    CHECK(std::abs(b[2] - 1.0) < 1e-15);
    const auto r = mode_equation_coefficients(CharacteristicSpec::repeated_root(2), 2.0);
    // (s^2 - 2)^2 = s^4 - 4 s^2 + 4
    CHECK(std::abs(r[0] - 4.0) < 1e-15);
    CHECK(std::abs(r[2] + 4.0) < 1e-15);
    CHECK(std::abs(r[4] - 1.0) < 1e-15);
}

TEST_CASE("mode_ode_solve closed forms") {
    const std::vector<cplx> zero{0.0, 0.0}, phi{1.0, 0.0};
    CHECK(mode_ode_solve(kHeat, -1.0, zero, {}, 1.0) == cplx(0.0));
    CHECK(std::abs(mode_ode_solve(kHeat, -1.0, phi, {}, 1.0) - (2 * std::exp(-1.0) - std::exp(-2.0))) < 1e-13);
    CHECK(std::abs(mode_ode_solve(kHeat, -1.0, phi, {}, 1.0) - 0.600423) < 1e-6);
}

TEST_CASE("eigendecomposition and integrator paths agree") {
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    OracleOptions forced;
    forced.force_integrator = true;
    for (int trial = 0; trial < 6; ++trial) {
        const auto spec = trial % 2 ? CharacteristicSpec::even_order({1.0, cplx(0.5, 0.4), 1.7})
                                    : CharacteristicSpec::first_order({1.0, cplx(0.2, 1.1), -1.3});
        const cplx p(u(rng) - 1.0, u(rng));
        std::vector<cplx> phi;
        for (int r = 0; r < spec.order(); ++r) phi.push_back(cplx(u(rng), u(rng)));
        auto f = [](double s) { return cplx(std::cos(2 * s), std::sin(s)); };
        const auto a = mode_ode_solve_detailed(spec, p, phi, f, 0.9);
        const auto b = mode_ode_solve_detailed(spec, p, phi, f, 0.9, forced);
        CHECK(a.path == OraclePath::Eigendecomposition);
        CHECK(b.path == OraclePath::Integrator);
        CHECK(std::abs(a.value - b.value) < 1e-9 * std::max(1.0, std::abs(a.value)));
    }
}

TEST_CASE("colliding eigenvalues fall back to the integrator") {
    // p = 0 makes every root of the mode equation zero: u''' = 0 for this spec.
    const auto spec = CharacteristicSpec::first_order({1.0, 2.0, 3.0});
    const std::vector<cplx> phi{1.0, 2.0, 4.0};
    const auto r = mode_ode_solve_detailed(spec, 0.0, phi, {}, 0.5);
    CHECK(r.path == OraclePath::Integrator);
    CHECK(std::abs(r.value - (1.0 + 2.0 * 0.5 + 2.0 * 0.25)) < 1e-11);

    const auto rr = CharacteristicSpec::repeated_root(2);
    const std::vector<cplx> data{1.0, 0.0, 0.0, 0.0};
    const auto s = mode_ode_solve_detailed(rr, -1.0, data, {}, 1.0);
    CHECK(s.path == OraclePath::Integrator);
    // (s^2 + 1)^2: u = cos t + t sin t / 2
    CHECK(std::abs(s.value - (std::cos(1.0) + 0.5 * std::sin(1.0))) < 1e-11);
}

TEST_CASE("Fornberg weights") {
    const std::vector<double> nodes{-1.0, 0.0, 1.0};
    const auto w = fd_weights(0.0, nodes, 2);
    CHECK(w[1][0] == Catch::Approx(-0.5));
    CHECK(w[1][2] == Catch::Approx(0.5));
    CHECK(w[2][0] == Catch::Approx(1.0));
    CHECK(w[2][1] == Catch::Approx(-2.0));
    std::vector<double> pts;
    for (int i = 0; i < 7; ++i) pts.push_back(0.1 * i);
    const auto v = fd_weights(0.0, pts, 3);
    // exact on polynomials of degree <= 6
    double d3 = 0.0;
    for (std::size_t i = 0; i < pts.size(); ++i) d3 += v[3][i] * (std::pow(pts[i], 5) - 2 * std::pow(pts[i], 3));
    CHECK(d3 == Catch::Approx(-12.0).epsilon(1e-9));
}

TEST_CASE("residual_check on an exact heat solution") {
    auto prob = heat_problem();
    const auto snaps = heat_snapshots(prob, 21, 0.05);
    const auto rep = residual_check(snaps, prob);
    CHECK(rep.max_residual < 1e-6);
    REQUIRE(rep.ic_errors.size() == 1);
    CHECK(rep.ic_errors[0] < 1e-12);
}

TEST_CASE("residual_check detects perturbations") {
    auto prob = heat_problem();
    auto snaps = heat_snapshots(prob, 21, 0.05);
    std::mt19937_64 rng(2);
    std::normal_distribution<double> n(0.0, 1e-2);
    for (auto& s : snaps)
        for (auto& z : s.u.data) z += n(rng);
    CHECK(residual_check(snaps, prob).max_residual > 1e-3);
}

TEST_CASE("residual_check preconditions") {
    auto prob = heat_problem();
    auto snaps = heat_snapshots(prob, 3, 0.05);
    try {
        residual_check(snaps, prob);
        FAIL("expected InsufficientSnapshots");
    } catch (const Error& e) {
        CHECK(e.code() == Errc::InsufficientSnapshots);
    }
    snaps = heat_snapshots(prob, 9, 0.05);
    snaps[4].t += 0.01;
    CHECK_THROWS_AS(residual_check(snaps, prob), Error);
}

TEST_CASE("kernel discrepancy probe is decisive") {
    for (int m : {2, 3}) {
        const auto r = kernel_discrepancy_probe(m, 6, 3);
        CHECK(r.conclusive());
        CHECK(r.verdict == RepeatedMeasure::TauPrime);
        CHECK(r.min_dominance >= kProbeDominance);
        CHECK(r.samples.size() == 6);
    }
    CHECK_THROWS_AS(kernel_discrepancy_probe(1, 4), Error);
}

TEST_CASE("verdict file round trip") {
    const auto dir = std::filesystem::temp_directory_path() / "opcalc_verdict_test";
    std::filesystem::create_directories(dir);
    const auto path = (dir / "verdict.txt").string();
    std::vector<ProbeResult> runs{kernel_discrepancy_probe(2, 3, 1)};
    write_verdict(path, runs, 1);
    const auto v = read_verdict(path);
    REQUIRE(v.has_value());
    CHECK(*v == RepeatedMeasure::TauPrime);
    write_probe_evidence((dir / "evidence.csv").string(), runs);
    CHECK(std::filesystem::file_size(dir / "evidence.csv") > 0);
    CHECK_FALSE(read_verdict((dir / "missing.txt").string()).has_value());
    std::filesystem::remove_all(dir);
}

TEST_CASE("oracle is linear in data and forcing") {
    const auto spec = CharacteristicSpec::even_order({1.0, cplx(0.6, 0.2)});
    const cplx p(-1.1, 0.3);
    const std::vector<cplx> a{1.0, 0.5, -0.2, 0.1}, b{-0.3, 0.2, 0.7, 0.0};
    std::vector<cplx> sum(4);
    for (std::size_t i = 0; i < 4; ++i) sum[i] = a[i] + b[i];
    auto f = [](double s) { return cplx(std::cos(s)); };
    auto g = [](double s) { return cplx(s, 1.0); };
    auto fg = [&](double s) { return f(s) + g(s); };
    const cplx lhs = mode_ode_solve(spec, p, sum, fg, 0.8);
    const cplx rhs = mode_ode_solve(spec, p, a, f, 0.8) + mode_ode_solve(spec, p, b, g, 0.8);
    CHECK(std::abs(lhs - rhs) < 1e-12);
}

TEST_CASE("residual_check accepts oracle-built space-time data") {
    CauchyProblem prob;
    prob.spec = CharacteristicSpec::first_order({1.0, cplx(0.5, 1.0)});
    prob.P = SymbolPolynomial::laplacian(1);
    prob.grid = Grid({16}, {2 * kPi});
    prob.phi = {Field::sample(prob.grid, [](auto x) { return std::cos(x[0]); }),
                Field::sample(prob.grid, [](auto x) { return std::sin(2 * x[0]); })};
    prob.forcing = [](std::span<const double> x, double t) { return std::exp(-t) * std::cos(x[0]); };
    const auto symbols = symbol_table(prob.P, prob.grid);
    std::vector<SpectralField> phi_hat{forward(prob.phi[0]), forward(prob.phi[1])};
    std::vector<Snapshot> snaps;
    for (int s = 0; s < 21; ++s) {
        const double t = 0.02 * s;
        SpectralField u{prob.grid, std::vector<cplx>(16, 0.0)};
        for (std::size_t k = 0; k < 16; ++k) {
            const std::vector<cplx> data{phi_hat[0].data[k], phi_hat[1].data[k]};
            std::function<cplx(double)> fh;
            if (k == 1 || k == 15) fh = [](double tau) { return 0.5 * std::exp(-tau); };
            u.data[k] = mode_ode_solve(prob.spec, symbols[k], data, fh, t);
        }
        snaps.push_back({t, inverse(u)});
    }
    const auto rep = residual_check(snaps, prob);
    CHECK(rep.max_residual <= 1e-5);
    CHECK(rep.max_ic_error() <= 1e-5);
}
