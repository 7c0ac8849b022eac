#include "opcalc/cli.hpp"

#include <CLI11.hpp>

#include <iostream>

int main(int argc, char** argv) {
    CLI::App app{"Spectral solver for product-type operator Cauchy problems"};
    opcalc::RunConfig cfg;
    std::string mode = "solve";
    std::string format = "both";
    app.add_option("--mode", mode, "solve | verify | probe | convergence | compare-spherical")
        ->check(CLI::IsMember({"solve", "verify", "probe", "convergence", "compare-spherical"}));
    app.add_option("--problem", cfg.problem, "problem file");
    app.add_option("--out", cfg.out_dir, "output directory")->capture_default_str();
    app.add_option("--quad-nodes", cfg.quad_nodes, "Gauss-Legendre nodes per time integral")
        ->capture_default_str()
        ->check(CLI::Range(1, 4096));
    app.add_option("--sphere-order", cfg.sphere_order, "sphere quadrature degree")->capture_default_str()->check(CLI::Range(1, 400));
    app.add_option("--seed", cfg.seed, "probe RNG seed")->capture_default_str();
    app.add_option("--probe-samples", cfg.probe_samples, "probe samples per m")->capture_default_str()->check(CLI::Range(1, 100000));
    app.add_option("--verdict", cfg.verdict, "kernel verdict file")->capture_default_str();
    app.add_option("--format", format, "csv | binary | both")->check(CLI::IsMember({"csv", "binary", "both"}))->capture_default_str();
    app.add_option("--verify-step", cfg.verify_step, "snapshot spacing in verify mode")
        ->capture_default_str()
        ->check(CLI::PositiveNumber);
    app.add_flag("--permissive-overflow", cfg.permissive_overflow, "exit 0 even if modes saturate");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int rc = app.exit(e);
        return rc == 0 ? 0 : opcalc::kExitValidation;
    }
    cfg.mode = opcalc::parse_mode(mode);
    cfg.csv = format != "binary";
    cfg.binary = format != "csv";
    if (cfg.mode != opcalc::RunMode::Probe && cfg.problem.empty()) {
        std::cerr << "error: --problem is required for mode " << mode << "\n";
        return opcalc::kExitValidation;
    }
    return opcalc::run(cfg, std::cerr);
}
