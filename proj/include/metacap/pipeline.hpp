#pragma once

#include <iosfwd>
#include <map>

#include "metacap/fd_solver.hpp"
#include "metacap/functional.hpp"
#include "metacap/geometry.hpp"
#include "metacap/mc.hpp"
#include "metacap/saddle.hpp"

namespace metacap {

struct GridConfig {
    double h = 0.0;          // 0: sqrt(eps)/8 per epsilon
    double level_mult = 10.0;
    std::optional<Box> manual_box;
};

struct PdeConfig {
    double K = 0.0;           // 0: auto (largest valid K below 5)
    double eta = 0.0;         // 0: auto max(eps^2, 2h)
    double well_radius = 0.0; // 0: eps
    bool refine = true;       // also solve at h/2 for the Richardson estimate
};

struct McRunConfig {
    long n_paths = 2000;
    double dt = 0.0;     // 0: auto
    double t_max = 0.0;  // 0: 100 x the EK prediction
    std::uint64_t seed = 1;
    std::optional<VectorXd> start;          // default m1
    std::optional<VectorXd> target_center;  // default m0
    double target_radius = 0.1;
    int workers = 0;
};

struct RunConfig {
    nlohmann::json model_spec;
    std::shared_ptr<DiffusionModel> model;
    std::vector<double> epsilons;
    GridConfig grid;
    PdeConfig pde;
    McRunConfig mc;
    Box search_box;  // critical point search region
    std::string outputs;
    bool write_csv = true;
    bool write_json = true;
    std::string raw_text;  // hashed into the manifest
};

RunConfig parse_run_config(const nlohmann::json& j, std::string raw_text);
RunConfig load_run_config(const std::string& path);

struct CliOverrides {
    std::optional<std::string> out;
    std::optional<std::uint64_t> seed;
    std::optional<double> grid_h;
    bool quiet = false;
};

/// Two-well context shared by the commands.
struct WellContext {
    TwoWellSystem wells;
    SaddleAnalysis analysis;
};
WellContext resolve_wells(const RunConfig& cfg);

/// Partition function on a box generous enough that the boundary weight
/// check passes at every configured epsilon.
GibbsMeasure make_measure(const RunConfig& cfg, const WellContext& ctx,
                          double epsilon);

struct CheckOutcome {
    ValidationReport report;
    double divfree_tol = 1e-6;
    bool pass = false;
};
CheckOutcome run_check(const RunConfig& cfg);

struct AnalyzeRow {
    double epsilon, mu, beta, omega0, Z, laplace_Z, A_eps, sharp_capacity,
        ek_mean_time;
};
struct AnalyzeOutcome {
    WellContext ctx;
    std::vector<AnalyzeRow> rows;
};
AnalyzeOutcome run_analyze(const RunConfig& cfg);

struct PdeRow {
    double epsilon = 0, grid_h = 0, K = 0, eta = 0;
    double cap_dirichlet = 0, cap_flux = 0;
    double cap_adjoint_dirichlet = 0, cap_adjoint_flux = 0;
    double J_trivial = 0, J_poisson = 0, J_minimizer = 0;
    double sharp_formula = 0, richardson_error = 0, cap_over_sharp = 0;
    double w_m1 = 0;
};
struct PdeOutcome {
    WellContext ctx;
    std::vector<PdeRow> rows;  // finest grid per epsilon
    std::vector<PdeRow> coarse_rows;
};
/// Full capacity table per epsilon; writes field dumps under outdir when
/// non-empty.
PdeOutcome run_pde(const RunConfig& cfg, const std::string& outdir = {},
                   bool quiet = true);

struct McRow {
    double epsilon = 0;
    HittingTimeStats stats;
    double ek_time = 0;
};
struct McOutcome {
    WellContext ctx;
    std::vector<McRow> rows;
};
McOutcome run_mc(const RunConfig& cfg, const std::string& outdir = {},
                 bool quiet = true);

struct CompareRow {
    double epsilon = 0, ek_time = 0, w_m1_pde = 0;
    double mc_mean = 0, mc_ci_lo = 0, mc_ci_hi = 0;
    double mc_over_ek = 0, w_over_ek = 0;
    bool pass_mc_ek = false, pass_w_ek = false;
};
struct CompareOutcome {
    std::vector<CompareRow> rows;
    bool all_pass = false;
};
/// Joins analyze/pde/mc tables previously written to outdir; missing inputs
/// raise PipelineError.
CompareOutcome run_compare(const std::string& outdir);

// Report writers (atomic; %.17g floats; stable headers).
void write_check_outputs(const CheckOutcome&, const RunConfig&, const std::string& outdir);
void write_analyze_outputs(const AnalyzeOutcome&, const RunConfig&, const std::string& outdir);
void write_pde_outputs(const PdeOutcome&, const RunConfig&, const std::string& outdir);
void write_mc_outputs(const McOutcome&, const RunConfig&, const std::string& outdir);
void write_compare_outputs(const CompareOutcome&, const std::string& outdir);
void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::string& outdir);

constexpr const char* kToolVersion = "0.1.0";

} // namespace metacap
