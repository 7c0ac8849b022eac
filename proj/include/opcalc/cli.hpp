#pragma once

#include "opcalc/core.hpp"
#include "opcalc/kernel_synthesis.hpp"
#include "opcalc/oracle.hpp"
#include "opcalc/problem_io.hpp"
#include "opcalc/spherical_means.hpp"

#include <filesystem>
#include <iostream>
#include <map>
#include <ostream>
#include <string>
#include <vector>

namespace opcalc {

enum class RunMode { Solve, Verify, Probe, Convergence, CompareSpherical };

enum ExitCode : int { kExitOk = 0, kExitValidation = 2, kExitNumerical = 3, kExitInconclusive = 4 };

struct RunConfig {
    RunMode mode = RunMode::Solve;
    std::filesystem::path problem;
    std::filesystem::path out_dir = ".";
    std::filesystem::path verdict = "kernel_verdict.txt";
    int quad_nodes = 64;
    int sphere_order = 29;
    std::uint64_t seed = 1;
    int probe_samples = 16;
    bool csv = true;
    bool binary = true;
    bool permissive_overflow = false;
    double verify_step = 0.01;
};

inline RunMode parse_mode(const std::string& s) {
    static const std::map<std::string, RunMode> modes{{"solve", RunMode::Solve},
                                                      {"verify", RunMode::Verify},
                                                      {"probe", RunMode::Probe},
                                                      {"convergence", RunMode::Convergence},
                                                      {"compare-spherical", RunMode::CompareSpherical}};
    const auto it = modes.find(s);
    if (it == modes.end()) throw Error(Errc::Validation, "unknown mode '" + s + "'");
    return it->second;
}

/// Residual and initial-condition thresholds used by verify mode.
inline constexpr double kVerifyResidualTol = 1e-4;
inline constexpr double kVerifyInitialTol = 1e-5;
inline constexpr double kSphericalTol = 1e-3;

namespace detail {

/// Fixes the repeated-root forcing measure from the problem file or the
/// verdict file; refuses to guess.
inline QuadConfig resolve_quad(const LoadedProblem& lp, const RunConfig& cfg, std::ostream& log) {
    QuadConfig quad;
    quad.nodes = cfg.quad_nodes;
    if (lp.problem.spec.kind != EquationKind::RepeatedRoot || !lp.problem.forcing) return quad;
    if (lp.measure_override) {
        quad.repeated_measure = *lp.measure_override;
        log << "repeated-root forcing measure from problem file: " << to_string(quad.repeated_measure) << "\n";
        return quad;
    }
    const auto v = read_verdict(cfg.verdict.string());
    if (!v)
        throw Error(Errc::UnresolvedKernel, "repeated-root forcing needs a resolved kernel measure: run --mode probe first (verdict file " +
                                                cfg.verdict.string() + ") or set 'measure' in [equation]");
    quad.repeated_measure = *v;
    log << "repeated-root forcing measure from " << cfg.verdict.string() << ": " << to_string(*v) << "\n";
    return quad;
}

inline void write_outputs(const RunConfig& cfg, std::span<const Snapshot> snaps, std::ostream& log) {
    std::filesystem::create_directories(cfg.out_dir);
    if (cfg.csv) {
        for (std::size_t i = 0; i < snaps.size(); ++i) write_csv(cfg.out_dir / ("u_" + std::to_string(i) + ".csv"), snaps[i].u);
        log << "wrote " << snaps.size() << " CSV snapshot(s) to " << cfg.out_dir.string() << "\n";
    }
    if (cfg.binary) {
        write_dump(cfg.out_dir / "solution.opc", snaps);
        log << "wrote " << (cfg.out_dir / "solution.opc").string() << "\n";
    }
}

inline int overflow_exit(const StabilityReport& rep, const RunConfig& cfg, std::ostream& log) {
    if (!rep.any_overflow()) return kExitOk;
    log << "warning: " << rep.overflowed.size() << " mode(s) exceed the overflow threshold\n";
    return cfg.permissive_overflow ? kExitOk : kExitNumerical;
}

/// Oracle field at time t, mode by mode. Forcing spectra are memoized per
/// sample time so modes sharing a quadrature reuse one transform.
inline Field oracle_field(const CauchyProblem& prob, double t) {
    const auto& g = prob.grid;
    const auto symbols = symbol_table(prob.P, g);
    std::vector<SpectralField> phi_hat;
    for (const auto& f : prob.phi) phi_hat.push_back(forward(f));
    std::map<double, SpectralField> cache;
    auto f_hat_at = [&](double s) -> const SpectralField& {
        auto it = cache.find(s);
        if (it == cache.end())
            it = cache.emplace(s, forward(Field::sample(g, [&](std::span<const double> x) { return prob.forcing(x, s); }))).first;
        return it->second;
    };
    SpectralField out{g, std::vector<cplx>(g.size(), 0.0)};
    std::vector<cplx> phi(phi_hat.size());
    for (std::size_t i = 0; i < g.size(); ++i) {
        for (std::size_t r = 0; r < phi.size(); ++r) phi[r] = phi_hat[r].data[i];
        std::function<cplx(double)> fh;
        if (prob.forcing) fh = [&](double s) { return f_hat_at(s).data[i]; };
        out.data[i] = mode_ode_solve(prob.spec, symbols[i], phi, fh, t);
    }
    return inverse(out);
}

inline int run_solve(const RunConfig& cfg, std::ostream& log) {
    const auto lp = load_problem(cfg.problem);
    const auto quad = resolve_quad(lp, cfg, log);
    const auto res = solve(lp.problem, quad);
    write_outputs(cfg, res.snapshots, log);
    write_stability(cfg.out_dir / "stability.txt", res.report);
    return overflow_exit(res.report, cfg, log);
}

inline int run_verify(const RunConfig& cfg, std::ostream& log) {
    auto lp = load_problem(cfg.problem);
    const auto quad = resolve_quad(lp, cfg, log);
    auto prob = lp.problem;
    const int q = prob.spec.order();
    const int half = (q + 1) / 2 + kResidualAccuracy / 2 - 1;
    const std::size_t needed = std::max<std::size_t>(7, static_cast<std::size_t>(2 * half + 1));
    const double t_end = prob.t_points.empty() ? 0.0 : prob.t_points.back();
    const double h = cfg.verify_step;
    const auto count = std::max(needed, static_cast<std::size_t>(std::ceil(t_end / h - 1e-9)) + 1);
    prob.t_points.clear();
    for (std::size_t i = 0; i < count; ++i) prob.t_points.push_back(static_cast<double>(i) * h);
    const auto res = solve(prob, quad);
    const auto rep = residual_check(res.snapshots, prob);

    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir / "residual.csv");
    out.precision(10);
    out << "t,relative_residual\n";
    for (std::size_t i = 0; i < rep.times.size(); ++i) out << rep.times[i] << ',' << rep.residuals[i] << '\n';
    {
        std::ofstream txt(cfg.out_dir / "residual.txt");
        txt.precision(10);
        txt << "# residual report\nsnapshots = " << count << "\nstep = " << h << "\nmax_residual = " << rep.max_residual
            << "\nic_errors =";
        for (std::size_t r = 0; r < rep.ic_errors.size(); ++r) txt << (r ? ", " : " ") << rep.ic_errors[r];
        txt << "\nresidual_tolerance = " << kVerifyResidualTol << "\nic_tolerance = " << kVerifyInitialTol << "\n";
    }
    log.precision(4);
    log << "snapshots: " << count << " (h = " << h << ")\n";
    log << "max relative residual: " << rep.max_residual << " (tolerance " << kVerifyResidualTol << ")\n";
    log << "max initial-condition error: " << rep.max_ic_error() << " (tolerance " << kVerifyInitialTol << ")\n";
    const bool ok = rep.max_residual <= kVerifyResidualTol && rep.max_ic_error() <= kVerifyInitialTol;
    log << (ok ? "verify: PASS\n" : "verify: FAIL\n");
    if (!ok) return kExitNumerical;
    return overflow_exit(res.report, cfg, log);
}

inline int run_probe(const RunConfig& cfg, std::ostream& log) {
    std::vector<ProbeResult> runs;
    for (int m : {2, 3}) runs.push_back(kernel_discrepancy_probe(m, cfg.probe_samples, cfg.seed, cfg.quad_nodes));
    write_verdict(cfg.verdict.string(), runs, cfg.seed);
    std::filesystem::create_directories(cfg.out_dir);
    write_probe_evidence((cfg.out_dir / "probe_evidence.csv").string(), runs);
    const auto v = combined_verdict(runs);
    log.precision(4);
    for (const auto& r : runs)
        log << "m = " << r.samples.front().m << ": " << (r.conclusive() ? std::string(to_string(r.verdict)) : "Inconclusive")
            << " (min dominance " << r.min_dominance << ")\n";
    log << "verdict: " << (v == RepeatedMeasure::Unresolved ? std::string("Inconclusive") : std::string(to_string(v)))
        << " -> " << cfg.verdict.string() << "\n";
    return v == RepeatedMeasure::Unresolved ? kExitInconclusive : kExitOk;
}

inline int run_convergence(const RunConfig& cfg, std::ostream& log) {
    const auto lp = load_problem(cfg.problem);
    const auto base = resolve_quad(lp, cfg, log);
    const auto& prob = lp.problem;
    std::vector<Field> ref;
    for (double t : prob.t_points) ref.push_back(oracle_field(prob, t));
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir / "convergence.csv");
    out.precision(6);
    out << "nodes,max_error\n";
    log.precision(4);
    for (int nodes : {4, 8, 12, 16, 24, 32, 48, 64, 96}) {
        auto quad = base;
        quad.nodes = nodes;
        const auto res = solve(prob, quad);
        double err = 0.0;
        for (std::size_t i = 0; i < ref.size(); ++i) {
            double scale = 1.0;
            for (const cplx z : ref[i].data) scale = std::max(scale, std::abs(z));
            for (std::size_t k = 0; k < ref[i].data.size(); ++k)
                err = std::max(err, std::abs(res.snapshots[i].u.data[k] - ref[i].data[k]) / scale);
        }
        out << nodes << ',' << err << '\n';
        log << "nodes " << nodes << ": max error " << err << "\n";
    }
    return kExitOk;
}

inline int run_compare_spherical(const RunConfig& cfg, std::ostream& log) {
    const auto lp = load_problem(cfg.problem);
    const auto& prob = lp.problem;
    if (prob.grid.dim() != 3) throw Error(Errc::Validation, "compare-spherical needs a 3-D problem");
    if (prob.spec.kind != EquationKind::EvenOrderProduct) throw Error(Errc::Validation, "compare-spherical needs even_order_product roots");
    const SphereQuadrature q(cfg.sphere_order);
    const auto& u = prob.phi.front();
    std::filesystem::create_directories(cfg.out_dir);
    std::ofstream out(cfg.out_dir / "compare_spherical.csv");
    out.precision(6);
    out << "a,t,relative_l2\n";
    log.precision(4);
    bool ok = true;
    for (const cplx a : prob.spec.roots) {
        if (a.imag() != 0.0 || !(a.real() > 0.0)) {
            log << "skipping root " << a << ": spherical means need a real positive root\n";
            continue;
        }
        for (double t : prob.t_points) {
            const auto sph = sinhc_spherical(u, a.real(), t, q);
            const auto spec = apply_multiplier(
                u, [&](cplx p) { return t * sinhc_sqrt(cplx(t * t) * a * a * p); }, prob.P);
            const double err = relative_l2(sph.data, spec.field.data);
            ok = ok && err <= kSphericalTol;
            out << a.real() << ',' << t << ',' << err << '\n';
            log << "a = " << a.real() << ", t = " << t << ": relative L2 " << err << "\n";
        }
    }
    log << (ok ? "compare-spherical: PASS\n" : "compare-spherical: FAIL\n");
    return ok ? kExitOk : kExitNumerical;
}

} // namespace detail

/// Runs one CLI mode; returns the process exit code. Errors are reported on log.
inline int run(const RunConfig& cfg, std::ostream& log = std::cerr) {
    try {
        switch (cfg.mode) {
        case RunMode::Solve: return detail::run_solve(cfg, log);
        case RunMode::Verify: return detail::run_verify(cfg, log);
        case RunMode::Probe: return detail::run_probe(cfg, log);
        case RunMode::Convergence: return detail::run_convergence(cfg, log);
        case RunMode::CompareSpherical: return detail::run_compare_spherical(cfg, log);
        }
    } catch (const Error& e) {
        log << "error: " << e.what() << "\n";
        switch (e.code()) {
        case Errc::Inconclusive: return kExitInconclusive;
        case Errc::InsufficientSnapshots: return kExitNumerical;
        default: return kExitValidation;
        }
    } catch (const std::exception& e) {
        log << "error: " << e.what() << "\n";
        return kExitValidation;
    }
    return kExitValidation;
}

} // namespace opcalc
