#include "metacap/mc.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <thread>

namespace metacap {

int resolve_worker_count(int requested) {
    if (requested > 0)
        return requested;
    if (const char* env = std::getenv("METACAP_WORKERS")) {
        int v = std::atoi(env);
        if (v > 0)
            return std::min(v, 64);
    }
    unsigned hw = std::thread::hardware_concurrency();
    return static_cast<int>(std::clamp(hw, 1u, 8u));
}

namespace {

// symmetric factor of S restricted to its positive block; rows/cols with
// zero diagonal (degenerate directions) stay zero
MatrixXd noise_factor(const MatrixXd& A) {
    MatrixXd S = 0.5 * (A + A.transpose());
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
    MatrixXd sqrt_vals = MatrixXd::Zero(S.rows(), S.cols());
    for (int i = 0; i < S.rows(); ++i) {
        double ev = es.eigenvalues()[i];
        if (ev < -1e-12)
            throw ModelError("noise_factor: indefinite symmetric part");
        sqrt_vals(i, i) = ev > 0.0 ? std::sqrt(ev) : 0.0;
    }
    return es.eigenvectors() * sqrt_vals * es.eigenvectors().transpose();
}

double estimate_max_drift(const DiffusionModel& model, const VectorXd& start,
                          const VectorXd& target) {
    // scan the hull of start/target inflated by one unit; excursions beyond
    // it are suppressed by the confining walls
    const int d = model.dim();
    Box box;
    box.lo = start.cwiseMin(target) - VectorXd::Constant(d, 1.0);
    box.hi = start.cwiseMax(target) + VectorXd::Constant(d, 1.0);
    double mx = 0.0;
    int per_axis = d <= 2 ? 21 : 7;
    for (const auto& z : probe_lattice(box, per_axis))
        mx = std::max(mx, model.process_drift(z).norm());
    return mx;
}

struct PathResult {
    double time = -1.0;
    char flag = 0;  // 0 hit, 1 censored, 2 diverged
};

// one path with its own generator; flag semantics as in PathResult
PathResult run_path(const DiffusionModel& model, const SimConfig& cfg, double dt,
                    double t_max, const MatrixXd& sigma, double diverge_radius,
                    std::uint64_t path_seed) {
    std::mt19937_64 rng(path_seed);
    std::normal_distribution<double> normal(0.0, 1.0);
    const int d = model.dim();
    const double noise_scale = std::sqrt(2.0 * cfg.epsilon * dt);
    const bool kinetic = cfg.model_kind == McModelKind::underdamped_demo;
    const int n0 = model.n0();

    VectorXd z = cfg.start;
    VectorXd xi(d);
    const long max_steps = static_cast<long>(std::ceil(t_max / dt));
    for (long k = 1; k <= max_steps; ++k) {
        for (int i = 0; i < d; ++i)
            xi[i] = normal(rng);
        if (kinetic) {
            // noise only in the velocity block
            VectorXd drift = model.process_drift(z);
            for (int i = 0; i < d - n0; ++i)
                z[i] += drift[i] * dt;
            for (int i = d - n0; i < d; ++i)
                z[i] += drift[i] * dt + noise_scale * xi[i];
        } else {
            z += model.process_drift(z) * dt + noise_scale * (sigma * xi);
        }
        bool hit;
        if (kinetic)
            hit = (z.head(d - n0) - cfg.target_center.head(d - n0)).norm() <=
                  cfg.target_radius;
        else
            hit = (z - cfg.target_center).norm() <= cfg.target_radius;
        if (hit)
            return {k * dt, 0};
        if (z.norm() > diverge_radius)
            return {k * dt, 2};
    }
    return {t_max, 1};
}

HittingTimeStats run_ensemble(const SimConfig& cfg, const DiffusionModel& model) {
    if (!model.diffusion_field().is_constant())
        throw ModelError("simulate_hitting_times: requires constant A (the "
                         "variable-coefficient operator has no process "
                         "interpretation here)");
    const int d = model.dim();
    if (cfg.start.size() != d || cfg.target_center.size() != d)
        throw ModelError("simulate_hitting_times: start/target dimension mismatch");

    const bool kinetic = cfg.model_kind == McModelKind::underdamped_demo;
    bool inside = kinetic ? (cfg.start.head(d - model.n0()) -
                             cfg.target_center.head(d - model.n0()))
                                    .norm() <= cfg.target_radius
                          : (cfg.start - cfg.target_center).norm() <=
                                cfg.target_radius;

    double dt = cfg.dt;
    if (dt <= 0.0) {
        double drift_max =
            std::max(estimate_max_drift(model, cfg.start, cfg.target_center), 1e-12);
        dt = std::min(cfg.epsilon / 10.0, 0.01 / drift_max);
    }
    double t_max = cfg.t_max;
    if (t_max <= 0.0) {
        if (cfg.ek_time_hint <= 0.0)
            throw ModelError("simulate_hitting_times: t_max or ek_time_hint required");
        t_max = 100.0 * cfg.ek_time_hint;
    }

    MatrixXd sigma = noise_factor(model.diffusion(cfg.start));
    // blow-up guard: generous multiple of the start/target scale
    double diverge_radius =
        10.0 * std::max({cfg.start.norm(), cfg.target_center.norm(), 1.0}) + 10.0;

    HittingTimeStats st;
    st.n_paths = cfg.n_paths;
    st.dt = dt;
    st.t_max = t_max;
    st.hit_times.assign(cfg.n_paths, -1.0);
    st.censored_flags.assign(cfg.n_paths, 0);

    std::vector<PathResult> results(cfg.n_paths);
    if (inside) {
        for (auto& r : results)
            r = {0.0, 0};
    } else {
        const int workers = resolve_worker_count(cfg.workers);
        auto worker = [&](long lo, long hi) {
            for (long p = lo; p < hi; ++p) {
                std::uint64_t path_seed =
                    splitmix64(cfg.seed ^ splitmix64(static_cast<std::uint64_t>(p) + 1));
                results[p] = run_path(model, cfg, dt, t_max, sigma, diverge_radius,
                                      path_seed);
            }
        };
        if (workers <= 1 || cfg.n_paths < 64) {
            worker(0, cfg.n_paths);
        } else {
            std::vector<std::thread> pool;
            long chunk = (cfg.n_paths + workers - 1) / workers;
            for (int w = 0; w < workers; ++w) {
                long lo = w * chunk, hi = std::min<long>(cfg.n_paths, lo + chunk);
                if (lo < hi)
                    pool.emplace_back(worker, lo, hi);
            }
            for (auto& t : pool)
                t.join();
        }
    }

    // deterministic reduction in path order
    NeumaierSum sum, sumsq;
    for (long p = 0; p < cfg.n_paths; ++p) {
        const auto& r = results[p];
        if (r.flag == 0) {
            ++st.n_hit;
            st.hit_times[p] = r.time;
            sum.add(r.time);
            sumsq.add(r.time * r.time);
        } else {
            ++st.n_censored;
            if (r.flag == 2)
                ++st.n_diverged;
            st.censored_flags[p] = r.flag;
        }
    }
    if (st.n_diverged > 0 && st.n_diverged > cfg.n_paths / 1000)
        throw ModelError("simulate_hitting_times: " + std::to_string(st.n_diverged) +
                         " diverged paths (> 0.1%), decrease dt");
    if (st.n_hit > 0) {
        st.mean = sum.value() / st.n_hit;
        if (st.n_hit > 1) {
            double var =
                (sumsq.value() - st.n_hit * st.mean * st.mean) / (st.n_hit - 1.0);
            st.stderr_ = std::sqrt(std::max(var, 0.0) / st.n_hit);
        }
        st.ci_lo = st.mean - 1.96 * st.stderr_;
        st.ci_hi = st.mean + 1.96 * st.stderr_;
    }
    st.biased_low = st.n_censored > 0.01 * cfg.n_paths;
    return st;
}

} // namespace

HittingTimeStats simulate_hitting_times(const SimConfig& config,
                                        const DiffusionModel& model) {
    if (config.model_kind != McModelKind::overdamped_elliptic)
        throw ModelError("simulate_hitting_times: wrong model kind");
    if (!model.elliptic())
        throw ModelError("simulate_hitting_times: model is not full-rank; use the "
                         "kinetic demo");
    return run_ensemble(config, model);
}

std::pair<HittingTimeStats, HittingTimeStats>
simulate_hitting_times_coupled(const SimConfig& config, const DiffusionModel& model) {
    if (!model.elliptic() || !model.diffusion_field().is_constant())
        throw ModelError("simulate_hitting_times_coupled: requires a constant "
                         "full-rank diffusion");
    if (config.dt <= 0.0 || config.t_max <= 0.0)
        throw ModelError("simulate_hitting_times_coupled: dt and t_max required");
    const int d = model.dim();
    const double dtc = config.dt, dtf = 0.5 * config.dt;
    MatrixXd sigma = noise_factor(model.diffusion(config.start));
    double diverge_radius =
        10.0 * std::max({config.start.norm(), config.target_center.norm(), 1.0}) +
        10.0;

    HittingTimeStats sc, sf;
    for (auto* s : {&sc, &sf}) {
        s->n_paths = config.n_paths;
        s->t_max = config.t_max;
        s->hit_times.assign(config.n_paths, -1.0);
        s->censored_flags.assign(config.n_paths, 0);
    }
    sc.dt = dtc;
    sf.dt = dtf;

    const double scale_c = std::sqrt(2.0 * config.epsilon * dtc);
    const double scale_f = std::sqrt(2.0 * config.epsilon * dtf);
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    const long max_coarse = static_cast<long>(std::ceil(config.t_max / dtc));

    for (long p = 0; p < config.n_paths; ++p) {
        std::mt19937_64 rng(
            splitmix64(config.seed ^ splitmix64(static_cast<std::uint64_t>(p) + 1)));
        std::normal_distribution<double> normal(0.0, 1.0);
        VectorXd zc = config.start, zf = config.start;
        bool done_c = false, done_f = false;
        VectorXd xi1(d), xi2(d);
        for (long k = 1; k <= max_coarse && !(done_c && done_f); ++k) {
            for (int i = 0; i < d; ++i)
                xi1[i] = normal(rng);
            for (int i = 0; i < d; ++i)
                xi2[i] = normal(rng);
            if (!done_f) {
                zf += model.process_drift(zf) * dtf + scale_f * (sigma * xi1);
                if ((zf - config.target_center).norm() <= config.target_radius) {
                    sf.hit_times[p] = (2 * k - 1) * dtf;
                    done_f = true;
                }
                if (!done_f) {
                    zf += model.process_drift(zf) * dtf + scale_f * (sigma * xi2);
                    if ((zf - config.target_center).norm() <= config.target_radius) {
                        sf.hit_times[p] = 2 * k * dtf;
                        done_f = true;
                    }
                }
                if (!done_f && zf.norm() > diverge_radius) {
                    sf.censored_flags[p] = 2;
                    done_f = true;
                }
            }
            if (!done_c) {
                VectorXd xi = inv_sqrt2 * (xi1 + xi2);
                zc += model.process_drift(zc) * dtc + scale_c * (sigma * xi);
                if ((zc - config.target_center).norm() <= config.target_radius) {
                    sc.hit_times[p] = k * dtc;
                    done_c = true;
                }
                if (!done_c && zc.norm() > diverge_radius) {
                    sc.censored_flags[p] = 2;
                    done_c = true;
                }
            }
        }
        if (!done_c)
            sc.censored_flags[p] = 1;
        if (!done_f)
            sf.censored_flags[p] = 1;
    }

    for (auto* s : {&sc, &sf}) {
        NeumaierSum sum, sumsq;
        for (long p = 0; p < config.n_paths; ++p) {
            if (s->censored_flags[p] == 0 && s->hit_times[p] >= 0.0) {
                ++s->n_hit;
                sum.add(s->hit_times[p]);
                sumsq.add(s->hit_times[p] * s->hit_times[p]);
            } else {
                if (s->hit_times[p] < 0.0 && s->censored_flags[p] == 0)
                    s->censored_flags[p] = 1;
                ++s->n_censored;
                if (s->censored_flags[p] == 2)
                    ++s->n_diverged;
            }
        }
        if (s->n_hit > 0) {
            s->mean = sum.value() / s->n_hit;
            if (s->n_hit > 1) {
                double var = (sumsq.value() - s->n_hit * s->mean * s->mean) /
                             (s->n_hit - 1.0);
                s->stderr_ = std::sqrt(std::max(var, 0.0) / s->n_hit);
            }
            s->ci_lo = s->mean - 1.96 * s->stderr_;
            s->ci_hi = s->mean + 1.96 * s->stderr_;
        }
        s->biased_low = s->n_censored > 0.01 * config.n_paths;
    }
    return {sc, sf};
}

HittingTimeStats simulate_underdamped_demo(const SimConfig& config,
                                           const DiffusionModel& model) {
    if (config.model_kind != McModelKind::underdamped_demo)
        throw ModelError("simulate_underdamped_demo: wrong model kind");
    if (model.elliptic())
        throw ModelError("simulate_underdamped_demo: model is not kinetic");
    return run_ensemble(config, model);
}

void write_hitting_csv(const HittingTimeStats& stats, const std::string& path) {
    std::string tmp = path + ".tmp";
    std::ofstream out(tmp, std::ios::trunc);
    if (!out)
        throw PipelineError("cannot open " + tmp + " for writing");
    out << "path_index,status,time\n";
    char buf[80];
    for (long p = 0; p < stats.n_paths; ++p) {
        const char* status = stats.censored_flags[p] == 0   ? "hit"
                             : stats.censored_flags[p] == 1 ? "censored"
                                                            : "diverged";
        double t = stats.censored_flags[p] == 0 ? stats.hit_times[p] : stats.t_max;
        std::snprintf(buf, sizeof buf, "%ld,%s,%.17g\n", p, status, t);
        out << buf;
    }
    out.close();
    std::filesystem::rename(tmp, path);
}

MatrixXd empirical_covariance(const SimConfig& config, const DiffusionModel& model,
                              double t_total, double t_burn) {
    const int d = model.dim();
    double dt = config.dt > 0.0 ? config.dt : config.epsilon / 50.0;
    const bool kinetic = config.model_kind == McModelKind::underdamped_demo;
    const int n0 = model.n0();
    MatrixXd sigma =
        kinetic ? MatrixXd() : noise_factor(model.diffusion(config.start));

    std::mt19937_64 rng(splitmix64(config.seed));
    std::normal_distribution<double> normal(0.0, 1.0);
    VectorXd z = config.start;
    VectorXd mean = VectorXd::Zero(d);
    MatrixXd second = MatrixXd::Zero(d, d);
    long count = 0;
    const double noise_scale = std::sqrt(2.0 * config.epsilon * dt);
    long steps = static_cast<long>(t_total / dt);
    long burn = static_cast<long>(t_burn / dt);
    VectorXd xi(d);
    for (long k = 0; k < steps; ++k) {
        for (int i = 0; i < d; ++i)
            xi[i] = normal(rng);
        VectorXd drift = model.process_drift(z);
        if (kinetic) {
            for (int i = 0; i < d - n0; ++i)
                z[i] += drift[i] * dt;
            for (int i = d - n0; i < d; ++i)
                z[i] += drift[i] * dt + noise_scale * xi[i];
        } else {
            z += drift * dt + noise_scale * (sigma * xi);
        }
        if (k >= burn) {
            mean += z;
            second += z * z.transpose();
            ++count;
        }
    }
    mean /= static_cast<double>(count);
    return second / static_cast<double>(count) - mean * mean.transpose();
}

} // namespace metacap
