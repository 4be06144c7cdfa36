// Batch front-end: loads a model configuration, runs the analysis, PDE and
// Monte Carlo pipelines, and emits comparison reports.
//
// Exit codes: 0 ok, 1 check failed, 2 config/model error, 3 critical-point
// search error, 4 grid/PDE error, 5 pipeline error.

#include <CLI11.hpp>

#include <filesystem>
#include <iostream>

#include "metacap/pipeline.hpp"

using namespace metacap;

namespace {

struct CommonArgs {
    std::string config_path;
    std::string out;
    std::uint64_t seed = 0;
    bool has_seed = false;
    double grid_h = 0.0;
    bool has_grid_h = false;
    bool quiet = false;
};

void add_common(CLI::App* cmd, CommonArgs& args, bool config_required = true) {
    auto* c = cmd->add_option("--config", args.config_path, "JSON run configuration");
    if (config_required)
        c->required();
    cmd->add_option("--out", args.out, "output directory");
    cmd->add_option("--seed", args.seed, "override the Monte Carlo seed")
        ->each([&](const std::string&) { args.has_seed = true; });
    cmd->add_option("--grid-h", args.grid_h, "override the grid spacing")
        ->each([&](const std::string&) { args.has_grid_h = true; });
    cmd->add_flag("--quiet", args.quiet, "suppress progress output");
}

RunConfig load_with_overrides(const CommonArgs& args) {
    RunConfig cfg = load_run_config(args.config_path);
    if (args.has_seed)
        cfg.mc.seed = args.seed;
    if (args.has_grid_h) {
        if (args.grid_h <= 0.0)
            throw ConfigError("--grid-h must be positive");
        cfg.grid.h = args.grid_h;
    }
    if (!args.out.empty())
        cfg.outputs = args.out;
    return cfg;
}

std::string ensure_outdir(const RunConfig& cfg) {
    if (cfg.outputs.empty())
        throw ConfigError("no output directory: set /outputs or pass --out");
    std::filesystem::create_directories(cfg.outputs);
    return cfg.outputs;
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"capacity and mean-transition-time toolkit for drift-diffusion "
                 "models in divergence form"};
    app.require_subcommand(1);

    CommonArgs check_args, analyze_args, pde_args, mc_args, compare_args;
    auto* cmd_check = app.add_subcommand("check", "validate the model hypotheses");
    add_common(cmd_check, check_args);
    auto* cmd_analyze =
        app.add_subcommand("analyze", "saddle analysis and sharp predictions");
    add_common(cmd_analyze, analyze_args);
    auto* cmd_pde = app.add_subcommand("pde", "grid capacities and bounds");
    add_common(cmd_pde, pde_args);
    auto* cmd_mc = app.add_subcommand("mc", "first-passage Monte Carlo");
    add_common(cmd_mc, mc_args);
    auto* cmd_compare =
        app.add_subcommand("compare", "merge analyze/pde/mc reports");
    add_common(cmd_compare, compare_args, false);

    CLI11_PARSE(app, argc, argv);

    try {
        if (cmd_check->parsed()) {
            RunConfig cfg = load_with_overrides(check_args);
            CheckOutcome out = run_check(cfg);
            if (!cfg.outputs.empty()) {
                std::string dir = ensure_outdir(cfg);
                write_check_outputs(out, cfg, dir);
                write_manifest(cfg, "check", dir);
            }
            if (!check_args.quiet) {
                std::cout << (out.pass ? "PASS" : "FAIL")
                          << " ellipticity_margin=" << out.report.ellipticity_margin
                          << " divfree_residual=" << out.report.divfree_residual
                          << " confining_margin=" << out.report.confining_margin
                          << "\n";
                if (out.report.divfree_residual > out.divfree_tol)
                    std::cout << "worst divergence probe: "
                              << out.report.divfree_worst_probe.transpose() << "\n";
            }
            return out.pass ? 0 : 1;
        }
        if (cmd_analyze->parsed()) {
            RunConfig cfg = load_with_overrides(analyze_args);
            AnalyzeOutcome out = run_analyze(cfg);
            std::string dir = ensure_outdir(cfg);
            write_analyze_outputs(out, cfg, dir);
            write_manifest(cfg, "analyze", dir);
            if (!analyze_args.quiet)
                for (const auto& r : out.rows)
                    std::cout << "eps=" << r.epsilon << " mu=" << r.mu
                              << " capacity=" << r.sharp_capacity
                              << " mean_time=" << r.ek_mean_time << "\n";
            return 0;
        }
        if (cmd_pde->parsed()) {
            RunConfig cfg = load_with_overrides(pde_args);
            std::string dir = ensure_outdir(cfg);
            PdeOutcome out = run_pde(cfg, dir, pde_args.quiet);
            write_pde_outputs(out, cfg, dir);
            write_manifest(cfg, "pde", dir);
            if (!pde_args.quiet)
                for (const auto& r : out.rows)
                    std::cout << "eps=" << r.epsilon
                              << " cap_dirichlet=" << r.cap_dirichlet
                              << " cap_over_sharp=" << r.cap_over_sharp << "\n";
            return 0;
        }
        if (cmd_mc->parsed()) {
            RunConfig cfg = load_with_overrides(mc_args);
            std::string dir = ensure_outdir(cfg);
            McOutcome out = run_mc(cfg, dir, mc_args.quiet);
            write_mc_outputs(out, cfg, dir);
            write_manifest(cfg, "mc", dir);
            if (!mc_args.quiet)
                for (const auto& r : out.rows)
                    std::cout << "eps=" << r.epsilon << " mean=" << r.stats.mean
                              << " ci=[" << r.stats.ci_lo << "," << r.stats.ci_hi
                              << "]\n";
            return 0;
        }
        if (cmd_compare->parsed()) {
            std::string dir = compare_args.out;
            if (dir.empty() && !compare_args.config_path.empty()) {
                RunConfig cfg = load_with_overrides(compare_args);
                dir = cfg.outputs;
            }
            if (dir.empty())
                throw ConfigError("compare needs --out (or a config with /outputs)");
            CompareOutcome out = run_compare(dir);
            write_compare_outputs(out, dir);
            if (!compare_args.quiet)
                for (const auto& r : out.rows)
                    std::cout << "eps=" << r.epsilon << " mc/ek=" << r.mc_over_ek
                              << " w/ek=" << r.w_over_ek
                              << (r.pass_mc_ek && r.pass_w_ek ? " PASS" : " FAIL")
                              << "\n";
            return 0;
        }
    } catch (const ConfigError& e) {
        std::cerr << "config error: " << e.what() << "\n";
        return 2;
    } catch (const ModelError& e) {
        std::cerr << "model error: " << e.what() << "\n";
        return 2;
    } catch (const LandscapeError& e) {
        std::cerr << "landscape error: " << e.what() << "\n";
        return 3;
    } catch (const PdeError& e) {
        std::cerr << "pde error: " << e.what() << "\n";
        return 4;
    } catch (const PipelineError& e) {
        std::cerr << "pipeline error: " << e.what() << "\n";
        return 5;
    }
    return 0;
}
