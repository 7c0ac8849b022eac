#pragma once

// Independent ground truth for single Fourier modes. Nothing here calls
// into the multiplier or kernel-synthesis evaluation paths: the mode ODE is
// rebuilt from the characteristic coefficients and solved directly.

#include "opcalc/core.hpp"
#include "opcalc/kernel_synthesis.hpp"
#include "opcalc/multiplier.hpp"
#include "opcalc/quadrature.hpp"
#include "opcalc/symbol_poly.hpp"

#include <Eigen/Dense>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <array>
#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <optional>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <vector>

namespace opcalc {

/// Coefficients beta_0..beta_q of the mode equation
///   sum_k beta_k u^{(k)} = f
/// exactly as the PDE reads (not normalized).
inline std::vector<cplx> mode_equation_coefficients(const CharacteristicSpec& spec, cplx p) {
    const int m = spec.m;
    auto ppow = [p](int n) {
        cplx r = 1.0;
        for (int i = 0; i < n; ++i) r *= p;
        return r;
    };
    std::vector<cplx> beta(static_cast<std::size_t>(spec.order() + 1), 0.0);
    switch (spec.kind) {
    case EquationKind::FirstOrderProduct:
        for (int k = 0; k <= m; ++k) beta[static_cast<std::size_t>(k)] = spec.b[static_cast<std::size_t>(k)] * ppow(m - k);
        break;
    case EquationKind::EvenOrderProduct:
        for (int k = 0; k <= m; ++k) beta[static_cast<std::size_t>(2 * k)] = spec.b[static_cast<std::size_t>(k)] * ppow(m - k);
        break;
    case EquationKind::RepeatedRoot:
        // (s^2 - p)^m = sum_k C(m,k) (-p)^k s^{2(m-k)}
        for (int k = 0; k <= m; ++k)
            beta[static_cast<std::size_t>(2 * (m - k))] = binomial(m, k) * (k % 2 ? -1.0 : 1.0) * ppow(k);
        break;
    }
    return beta;
}

/// First-order system y' = A y + e_last f / lead for the mode equation.
struct CompanionSystem {
    int order = 0;
    cplx lead = 1.0;
    Eigen::MatrixXcd A;
    Eigen::VectorXcd eigenvalues;
    Eigen::MatrixXcd V;
    Eigen::MatrixXcd V_inv;
    bool diagonalizable = false; ///< eigenvalues separated and eigenbasis well conditioned

    /// Eigenvalue collision threshold: min gap < 1e-6 (1 + max |lambda|).
    static constexpr double kCollisionTol = 1e-6;
    /// Eigenbasis condition number above which the decomposition is not trusted.
    static constexpr double kMaxCondition = 1e8;

    CompanionSystem(const CharacteristicSpec& spec, cplx p) {
        const auto beta = mode_equation_coefficients(spec, p);
        order = spec.order();
        lead = beta.back();
        if (lead == cplx{0.0}) throw Error(Errc::NonmonicZero, "mode equation has zero leading coefficient");
        const Eigen::Index q = order;
        A = Eigen::MatrixXcd::Zero(q, q);
        for (Eigen::Index i = 0; i + 1 < q; ++i) A(i, i + 1) = 1.0;
        for (Eigen::Index k = 0; k < q; ++k) A(q - 1, k) = -beta[static_cast<std::size_t>(k)] / lead;

        Eigen::ComplexEigenSolver<Eigen::MatrixXcd> solver(A, true);
        eigenvalues = solver.eigenvalues();
        V = solver.eigenvectors();
        double scale = 0.0, gap = std::numeric_limits<double>::infinity();
        for (Eigen::Index i = 0; i < q; ++i) {
            scale = std::max(scale, std::abs(eigenvalues(i)));
            for (Eigen::Index j = i + 1; j < q; ++j) gap = std::min(gap, std::abs(eigenvalues(i) - eigenvalues(j)));
        }
        if (solver.info() != Eigen::Success || gap < kCollisionTol * (1.0 + scale)) return;
        Eigen::FullPivLU<Eigen::MatrixXcd> lu(V);
        if (!lu.isInvertible()) return;
        V_inv = lu.inverse();
        const double cond = V.norm() * V_inv.norm();
        diagonalizable = std::isfinite(cond) && cond < kMaxCondition;
    }
};

struct OracleOptions {
    int duhamel_panels = 16;
    int panel_nodes = 24;
    double ode_rtol = 1e-13;
    bool force_integrator = false;
};

namespace detail {

/// Adaptive Gragg-Bulirsch-Stoer integration of y' = A y + e_last g(t),
/// extrapolated to eighth order (midpoint substeps 2, 4, 6, 8).
inline Eigen::VectorXcd gbs_integrate(const Eigen::MatrixXcd& A, Eigen::VectorXcd y, const std::function<cplx(double)>& g,
                                      double t_end, double rtol) {
    const Eigen::Index q = y.size();
    auto rhs = [&](double t, const Eigen::VectorXcd& v) {
        Eigen::VectorXcd d = A * v;
        if (g) d(q - 1) += g(t);
        return d;
    };
    constexpr std::array<int, 4> steps{2, 4, 6, 8};
    double t = 0.0;
    double H = std::min(t_end, 0.5 / (1.0 + A.cwiseAbs().rowwise().sum().maxCoeff()));
    if (H <= 0.0) return y;
    while (t < t_end) {
        H = std::min(H, t_end - t);
        std::array<std::array<Eigen::VectorXcd, 4>, 4> T;
        for (std::size_t j = 0; j < steps.size(); ++j) {
            const int n = steps[j];
            const double h = H / n;
            Eigen::VectorXcd z0 = y;
            Eigen::VectorXcd z1 = y + h * rhs(t, y);
            for (int k = 1; k < n; ++k) {
                Eigen::VectorXcd z2 = z0 + 2.0 * h * rhs(t + k * h, z1);
                z0 = std::move(z1);
                z1 = std::move(z2);
            }
            T[j][0] = 0.5 * (z1 + z0 + h * rhs(t + H, z1));
            for (std::size_t k = 1; k <= j; ++k) {
                const double ratio = double(steps[j]) / double(steps[j - k]);
                T[j][k] = T[j][k - 1] + (T[j][k - 1] - T[j - 1][k - 1]) / (ratio * ratio - 1.0);
            }
        }
        const double err = (T[3][3] - T[3][2]).norm();
        const double tol = rtol * (1.0 + T[3][3].norm());
        if (err <= tol || H < 1e-12 * t_end) {
            t += H;
            y = T[3][3];
        }
        const double factor = err > 0.0 ? 0.9 * std::pow(tol / err, 1.0 / 7.0) : 4.0;
        H *= std::clamp(factor, 0.2, 4.0);
    }
    return y;
}

} // namespace detail

enum class OraclePath { Eigendecomposition, Integrator };

struct OracleResult {
    cplx value;
    OraclePath path;
};

/// Solves sum_k beta_k(p) u^{(k)} = f with u^{(r)}(0) = phi_r.
inline OracleResult mode_ode_solve_detailed(const CharacteristicSpec& spec, cplx p, std::span<const cplx> phi,
                                            const std::function<cplx(double)>& fhat, double t,
                                            const OracleOptions& opts = {}) {
    if (t < 0.0) throw Error(Errc::InvalidArgument, "t must be nonnegative");
    const CompanionSystem sys(spec, p);
    const Eigen::Index q = sys.order;
    if (static_cast<Eigen::Index>(phi.size()) != q)
        throw Error(Errc::InvalidArgument, "expected " + std::to_string(q) + " initial values");
    Eigen::VectorXcd y0(q);
    for (Eigen::Index i = 0; i < q; ++i) y0(i) = phi[static_cast<std::size_t>(i)];

    if (sys.diagonalizable && !opts.force_integrator) {
        const Eigen::VectorXcd c = sys.V_inv * y0;
        const Eigen::VectorXcd g = sys.V_inv.col(q - 1) / sys.lead;
        cplx u = 0.0;
        for (Eigen::Index j = 0; j < q; ++j) {
            const cplx lambda = sys.eigenvalues(j);
            cplx amp = c(j) * std::exp(lambda * t);
            if (fhat && t > 0.0) {
                // Composite Gauss-Legendre Duhamel convolution.
                const auto& rule = gauss_legendre(opts.panel_nodes);
                const double width = t / opts.duhamel_panels;
                cplx conv = 0.0;
                for (int k = 0; k < opts.duhamel_panels; ++k)
                    conv += rule.integrate([&](double s) { return std::exp(lambda * (t - s)) * fhat(s); }, k * width,
                                           (k + 1) * width);
                amp += g(j) * conv;
            }
            u += sys.V(0, j) * amp;
        }
        return {u, OraclePath::Eigendecomposition};
    }

    std::function<cplx(double)> forcing;
    if (fhat) forcing = [&](double s) { return fhat(s) / sys.lead; };
    const auto y = detail::gbs_integrate(sys.A, y0, forcing, t, opts.ode_rtol);
    return {y(0), OraclePath::Integrator};
}

inline cplx mode_ode_solve(const CharacteristicSpec& spec, cplx p, std::span<const cplx> phi,
                           const std::function<cplx(double)>& fhat, double t, const OracleOptions& opts = {}) {
    return mode_ode_solve_detailed(spec, p, phi, fhat, t, opts).value;
}

// ---------------------------------------------------------------------------
// Finite differences.

/// Fornberg's weights: w[d][j] approximates the d-th derivative at x0 from
/// samples at nodes[j], for d = 0..max_order.
inline std::vector<std::vector<double>> fd_weights(double x0, std::span<const double> nodes, int max_order) {
    const std::size_t n = nodes.size();
    const auto M = static_cast<std::size_t>(max_order);
    std::vector<std::vector<double>> c(M + 1, std::vector<double>(n, 0.0));
    double c1 = 1.0, c4 = nodes[0] - x0;
    c[0][0] = 1.0;
    for (std::size_t i = 1; i < n; ++i) {
        const std::size_t mn = std::min(i, M);
        double c2 = 1.0;
        const double c5 = c4;
        c4 = nodes[i] - x0;
        for (std::size_t j = 0; j < i; ++j) {
            const double c3 = nodes[i] - nodes[j];
            c2 *= c3;
            if (j == i - 1) {
                for (std::size_t k = mn; k >= 1; --k) c[k][i] = c1 * (double(k) * c[k - 1][i - 1] - c5 * c[k][i - 1]) / c2;
                c[0][i] = -c1 * c5 * c[0][i - 1] / c2;
            }
            for (std::size_t k = mn; k >= 1; --k) c[k][j] = (c4 * c[k][j] - double(k) * c[k - 1][j]) / c3;
            c[0][j] = c4 * c[0][j] / c3;
        }
        c1 = c2;
    }
    return c;
}

struct ResidualReport {
    double max_residual = 0.0;        ///< max over interior snapshots of the relative L2 residual
    std::vector<double> times;        ///< snapshot times at which the residual was evaluated
    std::vector<double> residuals;    ///< relative L2 residual per evaluated time
    std::vector<double> ic_errors;    ///< per r: max |d^r u(0) - phi_r| / max(1, max |phi_r|); empty if t_0 != 0
    double max_ic_error() const { return ic_errors.empty() ? 0.0 : *std::max_element(ic_errors.begin(), ic_errors.end()); }
};

/// Accuracy order of the time differencing used by residual_check.
inline constexpr int kResidualAccuracy = 6;

/// Substitutes uniformly spaced snapshots into the PDE: P spectrally in x,
/// central differences in t at interior snapshots, one-sided at t = 0.
inline ResidualReport residual_check(std::span<const Snapshot> snapshots, const CauchyProblem& problem) {
    problem.validate();
    const int q = problem.spec.order();
    const int half = (q + 1) / 2 + kResidualAccuracy / 2 - 1;
    const std::size_t needed = std::max<std::size_t>(7, static_cast<std::size_t>(2 * half + 1));
    if (snapshots.size() < needed)
        throw Error(Errc::InsufficientSnapshots,
                    "need at least " + std::to_string(needed) + " snapshots, got " + std::to_string(snapshots.size()));
    const double h = snapshots[1].t - snapshots[0].t;
    for (std::size_t i = 1; i < snapshots.size(); ++i)
        if (std::abs(snapshots[i].t - snapshots[i - 1].t - h) > 1e-9 * std::max(1.0, std::abs(h)))
            throw Error(Errc::InvalidArgument, "snapshots must be uniformly spaced");
    if (!(h > 0.0)) throw Error(Errc::InvalidArgument, "snapshots must be increasing in time");

    const auto& grid = problem.grid;
    const auto symbols = symbol_table(problem.P, grid);
    std::vector<SpectralField> spectra;
    for (const auto& s : snapshots) spectra.push_back(forward(s.u));
    std::vector<std::vector<cplx>> beta;
    for (const cplx p : symbols) beta.push_back(mode_equation_coefficients(problem.spec, p));

    ResidualReport rep;
    std::vector<double> offsets;
    for (int j = -half; j <= half; ++j) offsets.push_back(j * h);
    const auto w = fd_weights(0.0, offsets, q);
    const std::size_t n = grid.size();
    for (std::size_t i = static_cast<std::size_t>(half); i + static_cast<std::size_t>(half) < snapshots.size(); ++i) {
        std::vector<double> term_norm(static_cast<std::size_t>(q + 1), 0.0);
        double res_norm = 0.0, f_norm = 0.0;
        std::vector<cplx> f_hat(n, 0.0);
        if (problem.forcing) {
            const double t = snapshots[i].t;
            f_hat = forward(Field::sample(grid, [&](std::span<const double> x) { return problem.forcing(x, t); })).data;
        }
        for (std::size_t k = 0; k < n; ++k) {
            cplx r = -f_hat[k];
            for (int d = 0; d <= q; ++d) {
                cplx deriv = 0.0;
                for (std::size_t j = 0; j < offsets.size(); ++j)
                    deriv += w[static_cast<std::size_t>(d)][j] * spectra[i - static_cast<std::size_t>(half) + j].data[k];
                const cplx term = beta[k][static_cast<std::size_t>(d)] * deriv;
                term_norm[static_cast<std::size_t>(d)] += std::norm(term);
                r += term;
            }
            res_norm += std::norm(r);
            f_norm += std::norm(f_hat[k]);
        }
        double scale = f_norm;
        for (double tn : term_norm) scale = std::max(scale, tn);
        const double rel = scale > 0.0 ? std::sqrt(res_norm / scale) : std::sqrt(res_norm);
        rep.times.push_back(snapshots[i].t);
        rep.residuals.push_back(rel);
        rep.max_residual = std::max(rep.max_residual, rel);
    }

    if (std::abs(snapshots[0].t) <= 1e-14) {
        for (int r = 0; r < q; ++r) {
            const std::size_t count = std::min(snapshots.size(), static_cast<std::size_t>(r + kResidualAccuracy));
            std::vector<double> pts;
            for (std::size_t j = 0; j < count; ++j) pts.push_back(j * h);
            const auto wf = fd_weights(0.0, pts, r);
            const auto& phi = problem.phi[static_cast<std::size_t>(r)].data;
            double err = 0.0, ref = 1.0;
            for (std::size_t k = 0; k < n; ++k) {
                cplx d = 0.0;
                for (std::size_t j = 0; j < count; ++j) d += wf[static_cast<std::size_t>(r)][j] * snapshots[j].u.data[k];
                err = std::max(err, std::abs(d - phi[k]));
                ref = std::max(ref, std::abs(phi[k]));
            }
            rep.ic_errors.push_back(err / ref);
        }
    }
    return rep;
}

// ---------------------------------------------------------------------------
// Repeated-root kernel discrepancy probe.

struct ProbeSample {
    int m = 0;
    cplx p;
    double t = 0.0;
    std::array<cplx, 3> forcing{}; ///< f(tau) = c0 + c1 cos(omega tau) + c2 tau
    double omega = 1.0;
    cplx oracle;
    double err_plain = 0.0;
    double err_tau_prime = 0.0;
};

struct ProbeResult {
    RepeatedMeasure verdict = RepeatedMeasure::Unresolved; ///< Unresolved means inconclusive
    double min_dominance = 0.0; ///< min over samples of loser error / winner error
    std::vector<ProbeSample> samples;
    bool conclusive() const { return verdict != RepeatedMeasure::Unresolved; }
};

/// Factor by which the winning measure must beat the loser on every sample.
inline constexpr double kProbeDominance = 1e3;

/// Evaluates both candidate inner measures of the forced repeated-root
/// solution against the oracle on random (p, t, f) and picks the one that
/// wins by kProbeDominance on every sample.
inline ProbeResult kernel_discrepancy_probe(int m, int samples, std::uint64_t seed = 1, int nodes = 64) {
    if (m < 2) throw Error(Errc::InvalidArgument, "probe needs m >= 2");
    if (samples < 1) throw Error(Errc::InvalidArgument, "probe needs at least one sample");
    const auto spec = CharacteristicSpec::repeated_root(m);
    std::mt19937_64 rng(seed + static_cast<std::uint64_t>(m) * 7919u);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    auto coeff = [&] { return cplx(2.0 * unit(rng) - 1.0, 2.0 * unit(rng) - 1.0); };

    ProbeResult out;
    const std::vector<cplx> zeros(static_cast<std::size_t>(spec.order()), 0.0);
    bool plain_wins = true, tau_wins = true;
    double dom_plain = std::numeric_limits<double>::infinity(), dom_tau = dom_plain;
    for (int s = 0; s < samples; ++s) {
        ProbeSample row;
        row.m = m;
        // Left half-disk |p| <= 4, Re p <= 0.
        const double radius = 4.0 * std::sqrt(unit(rng));
        const double angle = kPi / 2.0 + kPi * unit(rng);
        row.p = std::polar(radius, angle);
        row.t = 0.25 + 0.75 * unit(rng);
        row.forcing = {coeff(), coeff(), coeff()};
        row.omega = 0.5 + 2.5 * unit(rng);
        const auto fc = row.forcing;
        const double om = row.omega;
        auto f = [fc, om](double tau) { return fc[0] + fc[1] * std::cos(om * tau) + fc[2] * tau; };
        row.oracle = mode_ode_solve(spec, row.p, zeros, f, row.t);
        const double scale = 1.0 + std::abs(row.oracle);
        const cplx plain = inhomogeneous_mode(spec, row.p, f, row.t, {nodes, RepeatedMeasure::Plain});
        const cplx tau = inhomogeneous_mode(spec, row.p, f, row.t, {nodes, RepeatedMeasure::TauPrime});
        row.err_plain = std::abs(plain - row.oracle) / scale;
        row.err_tau_prime = std::abs(tau - row.oracle) / scale;
        constexpr double floor = 1e-300;
        const double r_tau = row.err_plain / std::max(row.err_tau_prime, floor);
        const double r_plain = row.err_tau_prime / std::max(row.err_plain, floor);
        tau_wins = tau_wins && r_tau >= kProbeDominance;
        plain_wins = plain_wins && r_plain >= kProbeDominance;
        dom_tau = std::min(dom_tau, r_tau);
        dom_plain = std::min(dom_plain, r_plain);
        out.samples.push_back(row);
    }
    if (tau_wins && !plain_wins) {
        out.verdict = RepeatedMeasure::TauPrime;
        out.min_dominance = dom_tau;
    } else if (plain_wins && !tau_wins) {
        out.verdict = RepeatedMeasure::Plain;
        out.min_dominance = dom_plain;
    } else {
        out.min_dominance = std::max(dom_tau, dom_plain);
    }
    return out;
}

/// Combined verdict across several probe runs; Unresolved unless all agree.
inline RepeatedMeasure combined_verdict(std::span<const ProbeResult> runs) {
    if (runs.empty()) return RepeatedMeasure::Unresolved;
    const auto v = runs.front().verdict;
    for (const auto& r : runs)
        if (r.verdict != v) return RepeatedMeasure::Unresolved;
    return v;
}

/// Verdict file: "key = value" lines, '#' comments. Keys: verdict
/// (PlainMeasure | TauPrimeMeasure | Inconclusive), m, samples, seed,
/// min_dominance (comma lists, one entry per probed m).
inline void write_verdict(const std::string& path, std::span<const ProbeResult> runs, std::uint64_t seed) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::Io, "cannot write verdict file " + path);
    const auto v = combined_verdict(runs);
    out << "# repeated-root forcing kernel verdict\n";
    out << "verdict = " << (v == RepeatedMeasure::Unresolved ? std::string("Inconclusive") : std::string(to_string(v))) << "\n";
    auto join = [&](auto&& get) {
        std::ostringstream s;
        for (std::size_t i = 0; i < runs.size(); ++i) s << (i ? "," : "") << get(runs[i]);
        return s.str();
    };
    out << "m = " << join([](const ProbeResult& r) { return r.samples.empty() ? 0 : r.samples.front().m; }) << "\n";
    out << "samples = " << join([](const ProbeResult& r) { return r.samples.size(); }) << "\n";
    out << "seed = " << seed << "\n";
    out.precision(6);
    out << "min_dominance = " << join([](const ProbeResult& r) { return r.min_dominance; }) << "\n";
}

/// Evidence table, one CSV row per sample.
inline void write_probe_evidence(const std::string& path, std::span<const ProbeResult> runs) {
    std::ofstream out(path);
    if (!out) throw Error(Errc::Io, "cannot write evidence file " + path);
    out.precision(17);
    out << "m,p_re,p_im,t,omega,oracle_re,oracle_im,err_plain,err_tau_prime\n";
    for (const auto& run : runs)
        for (const auto& s : run.samples)
            out << s.m << ',' << s.p.real() << ',' << s.p.imag() << ',' << s.t << ',' << s.omega << ',' << s.oracle.real()
                << ',' << s.oracle.imag() << ',' << s.err_plain << ',' << s.err_tau_prime << '\n';
}

/// Reads the verdict; nullopt when the file is missing or inconclusive.
inline std::optional<RepeatedMeasure> read_verdict(const std::string& path) {
    std::ifstream in(path);
    if (!in) return std::nullopt;
    std::string line;
    while (std::getline(in, line)) {
        if (line.empty() || line[0] == '#') continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos) continue;
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t\r");
            const auto e = s.find_last_not_of(" \t\r");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        if (trim(line.substr(0, eq)) != "verdict") continue;
        const auto value = trim(line.substr(eq + 1));
        if (value == "TauPrimeMeasure") return RepeatedMeasure::TauPrime;
        if (value == "PlainMeasure") return RepeatedMeasure::Plain;
        return std::nullopt;
    }
    return std::nullopt;
}

} // namespace opcalc
