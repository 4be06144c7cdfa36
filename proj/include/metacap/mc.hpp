#pragma once

#include <cstdint>
#include <optional>

#include "metacap/model.hpp"

namespace metacap {

enum class SdeScheme { euler_maruyama };
enum class McModelKind { overdamped_elliptic, underdamped_demo };

struct SimConfig {
    double epsilon = 0.1;
    double dt = 0.0;        // <= 0 selects min(eps/10, 0.01/max-drift)
    double t_max = 0.0;     // per-path cap; <= 0 requires ek_time_hint
    VectorXd start;
    VectorXd target_center;
    double target_radius = 0.1;
    long n_paths = 1000;
    std::uint64_t seed = 1;
    SdeScheme scheme = SdeScheme::euler_maruyama;
    McModelKind model_kind = McModelKind::overdamped_elliptic;
    double ek_time_hint = 0.0;  // sets t_max = 100 * hint when t_max unset
    int workers = 0;            // 0: hardware/env default
};

struct HittingTimeStats {
    long n_paths = 0;
    long n_hit = 0;
    long n_censored = 0;
    long n_diverged = 0;
    double mean = 0.0;
    double stderr_ = 0.0;
    double ci_lo = 0.0;
    double ci_hi = 0.0;
    double dt = 0.0;
    double t_max = 0.0;
    bool biased_low = false;  // censored fraction above 1%

    std::vector<double> hit_times;      // per path; censored entries = -1
    std::vector<char> censored_flags;   // 1 censored, 2 diverged
};

/// Euler-Maruyama first-passage sampling of
///   dZ = (-A^T grad W + b + Bz) dt + sqrt(2 eps dt) Sigma xi,
/// Sigma Sigma^T = S, with per-path RNG streams derived from (seed, path
/// index): statistics are bit-identical for any worker count. Hitting is
/// detected at step resolution on the target ball. Requires constant A.
HittingTimeStats simulate_hitting_times(const SimConfig& config,
                                        const DiffusionModel& model);

/// Kinetic demo: noise enters only the velocity block and hitting is
/// measured on the position-marginal ball.
HittingTimeStats simulate_underdamped_demo(const SimConfig& config,
                                           const DiffusionModel& model);

/// Runs the same Brownian paths at dt and dt/2 (coarse increments are sums
/// of fine ones), so the dt-halving shift of the mean is measured without
/// independent-sampling noise. config.dt is the coarse step.
std::pair<HittingTimeStats, HittingTimeStats>
simulate_hitting_times_coupled(const SimConfig& config, const DiffusionModel& model);

/// CSV export of raw samples (path_index, status, time).
void write_hitting_csv(const HittingTimeStats& stats, const std::string& path);

/// Long-run empirical covariance of a single path, for stationarity checks.
MatrixXd empirical_covariance(const SimConfig& config, const DiffusionModel& model,
                              double t_total, double t_burn);

int resolve_worker_count(int requested);

} // namespace metacap
