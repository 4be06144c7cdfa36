#include "metacap/pipeline.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

namespace metacap {

namespace {

using nlohmann::json;

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key at " + path + "/" + it.key());
}

double auto_or_number(const json& j, const std::string& path) {
    if (j.is_string()) {
        if (j.get<std::string>() == "auto")
            return 0.0;
        throw ConfigError(path + " must be a number or \"auto\"");
    }
    double v = j.get<double>();
    if (v <= 0.0)
        throw ConfigError(path + " must be positive");
    return v;
}

VectorXd to_vec(const json& j, const std::string& path) {
    if (!j.is_array())
        throw ConfigError("expected array at " + path);
    VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i)
        v[static_cast<int>(i)] = j[i].get<double>();
    return v;
}

Box parse_box(const json& j, const std::string& path) {
    reject_unknown(j, {"lo", "hi"}, path);
    Box b{to_vec(j.at("lo"), path + "/lo"), to_vec(j.at("hi"), path + "/hi")};
    if (b.lo.size() != b.hi.size() || (b.hi - b.lo).minCoeff() <= 0.0)
        throw ConfigError("degenerate box at " + path);
    return b;
}

void atomic_write_text(const std::string& path, const std::string& text) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::trunc);
        if (!out)
            throw PipelineError("cannot open " + tmp + " for writing");
        out << text;
    }
    std::filesystem::rename(tmp, path);
}

void write_table(const std::string& path, const std::string& header,
                 const std::vector<std::vector<double>>& rows) {
    std::ostringstream out;
    out << header << "\n";
    for (const auto& r : rows) {
        for (size_t i = 0; i < r.size(); ++i)
            out << (i ? "," : "") << fmt(r[i]);
        out << "\n";
    }
    atomic_write_text(path, out.str());
}

std::string eps_tag(double eps) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.6f", eps);
    return buf;
}

} // namespace

RunConfig parse_run_config(const json& j, std::string raw_text) {
    reject_unknown(j,
                   {"model", "epsilons", "grid", "pde", "mc", "search_box",
                    "outputs", "report_formats"},
                   "");
    RunConfig cfg;
    cfg.raw_text = std::move(raw_text);
    cfg.model_spec = j.at("model");
    cfg.model = parse_model_json(cfg.model_spec);

    if (!j.contains("epsilons") || !j.at("epsilons").is_array() ||
        j.at("epsilons").empty())
        throw ConfigError("/epsilons must be a nonempty array");
    for (const auto& e : j.at("epsilons")) {
        double eps = e.get<double>();
        if (eps <= 0.0 || eps >= std::exp(-1.0))
            throw ConfigError("/epsilons entries must lie in (0, 1/e)");
        cfg.epsilons.push_back(eps);
    }

    if (j.contains("grid")) {
        const auto& g = j.at("grid");
        reject_unknown(g, {"h", "level_mult", "box"}, "/grid");
        if (g.contains("h"))
            cfg.grid.h = auto_or_number(g.at("h"), "/grid/h");
        if (g.contains("level_mult")) {
            cfg.grid.level_mult = g.at("level_mult").get<double>();
            if (cfg.grid.level_mult <= 0.0)
                throw ConfigError("/grid/level_mult must be positive");
        }
        if (g.contains("box"))
            cfg.grid.manual_box = parse_box(g.at("box"), "/grid/box");
    }

    if (j.contains("pde")) {
        const auto& p = j.at("pde");
        reject_unknown(p, {"K", "eta", "well_radius", "refine"}, "/pde");
        if (p.contains("K"))
            cfg.pde.K = auto_or_number(p.at("K"), "/pde/K");
        if (p.contains("eta"))
            cfg.pde.eta = auto_or_number(p.at("eta"), "/pde/eta");
        if (p.contains("well_radius"))
            cfg.pde.well_radius = auto_or_number(p.at("well_radius"), "/pde/well_radius");
        if (p.contains("refine"))
            cfg.pde.refine = p.at("refine").get<bool>();
    }

    if (j.contains("mc")) {
        const auto& m = j.at("mc");
        reject_unknown(m, {"n_paths", "dt", "t_max", "seed", "start", "target",
                           "workers"},
                       "/mc");
        if (m.contains("n_paths")) {
            cfg.mc.n_paths = m.at("n_paths").get<long>();
            if (cfg.mc.n_paths < 1)
                throw ConfigError("/mc/n_paths must be >= 1");
        }
        if (m.contains("dt"))
            cfg.mc.dt = auto_or_number(m.at("dt"), "/mc/dt");
        if (m.contains("t_max"))
            cfg.mc.t_max = auto_or_number(m.at("t_max"), "/mc/t_max");
        if (m.contains("seed"))
            cfg.mc.seed = m.at("seed").get<std::uint64_t>();
        if (m.contains("workers"))
            cfg.mc.workers = m.at("workers").get<int>();
        if (m.contains("start")) {
            const auto& s = m.at("start");
            if (s.is_string()) {
                if (s.get<std::string>() != "m1")
                    throw ConfigError("/mc/start must be an array or \"m1\"");
            } else {
                cfg.mc.start = to_vec(s, "/mc/start");
            }
        }
        if (m.contains("target")) {
            const auto& t = m.at("target");
            reject_unknown(t, {"center", "radius"}, "/mc/target");
            if (t.contains("center")) {
                const auto& c = t.at("center");
                if (c.is_string()) {
                    if (c.get<std::string>() != "m0")
                        throw ConfigError("/mc/target/center must be an array or \"m0\"");
                } else {
                    cfg.mc.target_center = to_vec(c, "/mc/target/center");
                }
            }
            if (t.contains("radius")) {
                cfg.mc.target_radius = t.at("radius").get<double>();
                if (cfg.mc.target_radius <= 0.0)
                    throw ConfigError("/mc/target/radius must be positive");
            }
        }
    }

    const int d = cfg.model->dim();
    cfg.search_box.lo = VectorXd::Constant(d, -3.0);
    cfg.search_box.hi = VectorXd::Constant(d, 3.0);
    if (j.contains("search_box")) {
        cfg.search_box = parse_box(j.at("search_box"), "/search_box");
        if (cfg.search_box.lo.size() != d)
            throw ConfigError("/search_box dimension mismatch");
    }

    if (j.contains("outputs"))
        cfg.outputs = j.at("outputs").get<std::string>();
    if (j.contains("report_formats")) {
        cfg.write_csv = cfg.write_json = false;
        for (const auto& f : j.at("report_formats")) {
            std::string s = f.get<std::string>();
            if (s == "csv")
                cfg.write_csv = true;
            else if (s == "json")
                cfg.write_json = true;
            else
                throw ConfigError("/report_formats entries must be csv or json");
        }
        if (!cfg.write_csv && !cfg.write_json)
            throw ConfigError("/report_formats must not be empty");
    }
    return cfg;
}

RunConfig load_run_config(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw ConfigError("cannot open config file " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    json j;
    try {
        j = json::parse(ss.str());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config is not valid JSON: ") + e.what());
    }
    try {
        return parse_run_config(j, ss.str());
    } catch (const json::exception& e) {
        throw ConfigError(std::string("config schema violation: ") + e.what());
    }
}

WellContext resolve_wells(const RunConfig& cfg) {
    auto pts = find_critical_points(*cfg.model, cfg.search_box, 9);
    WellContext ctx;
    ctx.wells = identify_two_well(pts);
    // the spectral analysis applies to the full-rank case only
    if (cfg.model->elliptic())
        ctx.analysis = analyze_saddle(*cfg.model, ctx.wells.saddle,
                                      ctx.wells.m1.location);
    return ctx;
}

GibbsMeasure make_measure(const RunConfig& cfg, const WellContext& ctx,
                          double epsilon) {
    // box generous enough that the boundary weight is negligible
    double level = ctx.wells.saddle.value +
                   std::max(cfg.grid.level_mult * epsilon * std::log(1.0 / epsilon),
                            25.0 * epsilon);
    const int d = cfg.model->dim();
    VectorXd lo = ctx.wells.m0.location.cwiseMin(ctx.wells.m1.location);
    VectorXd hi = ctx.wells.m0.location.cwiseMax(ctx.wells.m1.location);
    double span = std::max(1.0, (hi - lo).norm());
    Box scan{lo - VectorXd::Constant(d, 2.5 * span),
             hi + VectorXd::Constant(d, 2.5 * span)};
    const int m = 241;
    VectorXd blo = VectorXd::Constant(d, 1e300), bhi = VectorXd::Constant(d, -1e300);
    for (const auto& z : probe_lattice(scan, m))
        if (cfg.model->potential(z) <= level) {
            blo = blo.cwiseMin(z);
            bhi = bhi.cwiseMax(z);
        }
    VectorXd cell = (scan.hi - scan.lo) / (m - 1.0);
    Box box{blo - cell, bhi + cell};
    return partition_function(*cfg.model, epsilon, box, 8,
                              {ctx.wells.m0.location, ctx.wells.m1.location});
}

CheckOutcome run_check(const RunConfig& cfg) {
    CheckOutcome out;
    double eps_probe = cfg.epsilons.front();
    auto probes = probe_lattice(cfg.search_box, cfg.model->dim() <= 2 ? 21 : 7);
    out.report = validate_model(*cfg.model, eps_probe, probes);
    out.pass = out.report.pass(out.divfree_tol);
    return out;
}

AnalyzeOutcome run_analyze(const RunConfig& cfg) {
    if (!cfg.model->elliptic())
        throw ConfigError("analyze requires a full-rank diffusion model");
    AnalyzeOutcome out;
    out.ctx = resolve_wells(cfg);
    for (double eps : cfg.epsilons) {
        GibbsMeasure measure = make_measure(cfg, out.ctx, eps);
        EKPrediction p = ek_prediction(out.ctx.analysis, measure, out.ctx.wells.m1,
                                       out.ctx.wells.saddle);
        AnalyzeRow row;
        row.epsilon = eps;
        row.mu = out.ctx.analysis.mu;
        row.beta = out.ctx.analysis.beta;
        row.omega0 = out.ctx.analysis.omega0;
        row.Z = measure.Z;
        row.laplace_Z = measure.laplace_Z;
        row.A_eps = p.A_eps;
        row.sharp_capacity = p.capacity;
        row.ek_mean_time = p.mean_time;
        out.rows.push_back(row);
    }
    return out;
}

namespace {

struct GridSolves {
    PdeRow row;
    DiscreteField h, h_dag, w, u_pois;
};

GridSolves solve_one_grid(const RunConfig& cfg, const WellContext& ctx,
                          const GibbsMeasure& measure, double eps, double h) {
    const DiffusionModel& model = *cfg.model;
    GridSolves out;
    out.row.epsilon = eps;
    out.row.grid_h = h;

    DomainOptions dopts;
    dopts.h = h;
    dopts.level_mult = cfg.grid.level_mult;
    dopts.level_ref = ctx.wells.saddle.value;
    dopts.well_radius = cfg.pde.well_radius > 0.0 ? cfg.pde.well_radius : eps;
    dopts.manual_box = cfg.grid.manual_box;
    dopts.ballA = BallSpec{ctx.wells.m1.location, dopts.well_radius};
    dopts.ballB = BallSpec{ctx.wells.m0.location, dopts.well_radius};
    auto dom = build_domain(model, eps, dopts);

    out.h = solve_equilibrium(model, eps, dom, false);
    out.h_dag = solve_equilibrium(model, eps, dom, true);
    out.row.cap_dirichlet = capacity_dirichlet(out.h, model, eps, measure);
    out.row.cap_flux = capacity_flux(out.h, model, eps, measure);
    out.row.cap_adjoint_dirichlet = capacity_dirichlet(out.h_dag, model, eps, measure);
    out.row.cap_adjoint_flux =
        capacity_flux(out.h_dag, model, eps, measure, NodeClass::dirichlet_A, true);

    // target-only domain for the landscape and auxiliary problems shares the
    // grid, so fields are exchangeable between the solves
    auto domB = domain_without_A(*dom);
    out.w = solve_landscape(model, eps, domB);
    out.row.w_m1 = out.w.values[domB->grid.nearest(ctx.wells.m1.location)];

    // saddle geometry and the constructed candidates; the hyperrectangle must
    // clear the Dirichlet balls by the mollifier radius
    double eta = cfg.pde.eta > 0.0 ? cfg.pde.eta : std::max(eps * eps, 2.0 * h);
    double clearance = dopts.well_radius + eta;
    SaddleGeometry geo =
        cfg.pde.K > 0.0
            ? build_geometry(model, ctx.analysis, ctx.wells, eps, cfg.pde.K, h,
                             clearance)
            : build_geometry_auto(model, ctx.analysis, ctx.wells, eps, h, 5.0,
                                  clearance);
    out.row.K = geo.K;
    out.row.eta = eta;

    DiscreteField p_raw = sample_p_eps(dom, model, ctx.analysis, geo, eps);
    DiscreteField p_mol = mollify(p_raw, eta);
    std::vector<char> mask = mollification_mask(p_raw, p_mol, eta);

    CandidatePair triv = make_candidate(
        p_mol, trivial_admissible_field(p_mol, model, eps), model, eps, false, mask);
    out.row.J_trivial = evaluate_J(triv, model, eps, measure);

    PoissonResult pois = solve_poisson_admissible(p_mol, model, eps, domB, measure);
    out.u_pois = pois.u;
    CandidatePair poisp = poisson_candidate(p_mol, pois);
    out.row.J_poisson = evaluate_J(poisp, model, eps, measure);

    CandidatePair minp = minimizer_pair(out.h, out.h_dag, model, eps);
    out.row.J_minimizer = evaluate_J(minp, model, eps, measure);

    out.row.sharp_formula =
        sharp_capacity(ctx.analysis, measure, ctx.wells.saddle.value);
    out.row.cap_over_sharp = out.row.cap_dirichlet / out.row.sharp_formula;
    return out;
}

} // namespace

PdeOutcome run_pde(const RunConfig& cfg, const std::string& outdir, bool quiet) {
    if (!cfg.model->elliptic())
        throw ConfigError("pde requires a full-rank diffusion model");
    if (cfg.model->dim() > 2)
        throw ConfigError("pde supports 1d and 2d models");
    PdeOutcome out;
    out.ctx = resolve_wells(cfg);
    for (double eps : cfg.epsilons) {
        GibbsMeasure measure = make_measure(cfg, out.ctx, eps);
        double h0 = cfg.grid.h > 0.0 ? cfg.grid.h : std::sqrt(eps) / 8.0;
        GridSolves coarse = solve_one_grid(cfg, out.ctx, measure, eps, h0);
        if (!quiet)
            std::cerr << "[pde] eps=" << eps << " h=" << h0
                      << " cap=" << coarse.row.cap_dirichlet << "\n";
        PdeRow row = coarse.row;
        if (cfg.pde.refine) {
            GridSolves fine = solve_one_grid(cfg, out.ctx, measure, eps, h0 / 2.0);
            fine.row.richardson_error =
                std::abs(fine.row.cap_dirichlet - coarse.row.cap_dirichlet);
            row = fine.row;
            out.coarse_rows.push_back(coarse.row);
            if (!quiet)
                std::cerr << "[pde] eps=" << eps << " h=" << h0 / 2.0
                          << " cap=" << fine.row.cap_dirichlet << "\n";
            if (!outdir.empty()) {
                std::string base = outdir + "/fields_eps" + eps_tag(eps) + "_";
                write_field_binary(fine.h, base + "h.bin");
                write_field_binary(fine.h_dag, base + "h_dag.bin");
                write_field_binary(fine.w, base + "w.bin");
                write_field_binary(fine.u_pois, base + "u_poisson.bin");
                if (cfg.write_csv) {
                    write_field_csv(fine.h, base + "h.csv");
                    write_field_csv(fine.h_dag, base + "h_dag.csv");
                    write_field_csv(fine.w, base + "w.csv");
                    write_field_csv(fine.u_pois, base + "u_poisson.csv");
                }
            }
        } else if (!outdir.empty()) {
            std::string base = outdir + "/fields_eps" + eps_tag(eps) + "_";
            write_field_binary(coarse.h, base + "h.bin");
            write_field_binary(coarse.h_dag, base + "h_dag.bin");
            write_field_binary(coarse.w, base + "w.bin");
            write_field_binary(coarse.u_pois, base + "u_poisson.bin");
            if (cfg.write_csv) {
                write_field_csv(coarse.h, base + "h.csv");
                write_field_csv(coarse.h_dag, base + "h_dag.csv");
                write_field_csv(coarse.w, base + "w.csv");
                write_field_csv(coarse.u_pois, base + "u_poisson.csv");
            }
        }
        out.rows.push_back(row);
    }
    return out;
}

McOutcome run_mc(const RunConfig& cfg, const std::string& outdir, bool quiet) {
    McOutcome out;
    out.ctx = resolve_wells(cfg);
    const bool kinetic = !cfg.model->elliptic();
    for (double eps : cfg.epsilons) {
        McRow row;
        row.epsilon = eps;
        SimConfig sim;
        sim.epsilon = eps;
        sim.dt = cfg.mc.dt;
        sim.t_max = cfg.mc.t_max;
        sim.n_paths = cfg.mc.n_paths;
        sim.seed = cfg.mc.seed;
        sim.workers = cfg.mc.workers;
        sim.target_radius = cfg.mc.target_radius;
        // well locations of the kinetic family already carry v = 0
        sim.start = cfg.mc.start ? *cfg.mc.start : out.ctx.wells.m1.location;
        sim.target_center =
            cfg.mc.target_center ? *cfg.mc.target_center : out.ctx.wells.m0.location;
        if (kinetic) {
            sim.model_kind = McModelKind::underdamped_demo;
            if (sim.t_max <= 0.0)
                sim.t_max = 1000.0;  // no sharp prediction in the kinetic demo
            row.stats = simulate_underdamped_demo(sim, *cfg.model);
        } else {
            GibbsMeasure measure = make_measure(cfg, out.ctx, eps);
            row.ek_time = eyring_kramers_time(out.ctx.analysis, out.ctx.wells.m1,
                                              out.ctx.wells.saddle, eps);
            sim.ek_time_hint = row.ek_time;
            row.stats = simulate_hitting_times(sim, *cfg.model);
        }
        if (!quiet)
            std::cerr << "[mc] eps=" << eps << " mean=" << row.stats.mean
                      << " hits=" << row.stats.n_hit << "\n";
        if (!outdir.empty())
            write_hitting_csv(row.stats, outdir + "/mc_samples_eps" + eps_tag(eps) +
                                             ".csv");
        out.rows.push_back(std::move(row));
    }
    return out;
}

namespace {

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::vector<double>> rows;

    int col(const std::string& name) const {
        for (size_t i = 0; i < header.size(); ++i)
            if (header[i] == name)
                return static_cast<int>(i);
        throw PipelineError("missing column " + name);
    }
};

CsvTable read_table(const std::string& path) {
    std::ifstream in(path);
    if (!in)
        throw PipelineError("missing input " + path);
    CsvTable t;
    std::string line;
    if (!std::getline(in, line))
        throw PipelineError("empty table " + path);
    std::stringstream hs(line);
    std::string cell;
    while (std::getline(hs, cell, ','))
        t.header.push_back(cell);
    while (std::getline(in, line)) {
        if (line.empty())
            continue;
        std::vector<double> row;
        std::stringstream rs(line);
        while (std::getline(rs, cell, ','))
            row.push_back(std::stod(cell));
        t.rows.push_back(std::move(row));
    }
    return t;
}

const std::vector<double>* find_row(const CsvTable& t, int eps_col, double eps) {
    for (const auto& r : t.rows)
        if (std::abs(r[eps_col] - eps) <= 1e-12 * std::max(1.0, std::abs(eps)))
            return &r;
    return nullptr;
}

} // namespace

CompareOutcome run_compare(const std::string& outdir) {
    CsvTable analyze = read_table(outdir + "/analyze.csv");
    CsvTable pde = read_table(outdir + "/pde.csv");
    CsvTable mc = read_table(outdir + "/mc.csv");
    if (mc.rows.empty() || analyze.rows.empty() || pde.rows.empty())
        throw PipelineError("compare: empty input table");

    CompareOutcome out;
    out.all_pass = true;
    int a_eps = analyze.col("epsilon"), a_ek = analyze.col("ek_mean_time");
    int p_eps_col = pde.col("epsilon"), p_w = pde.col("w_m1");
    int m_eps = mc.col("epsilon"), m_mean = mc.col("mean"), m_lo = mc.col("ci_lo"),
        m_hi = mc.col("ci_hi");

    for (const auto& arow : analyze.rows) {
        double eps = arow[a_eps];
        const auto* prow = find_row(pde, p_eps_col, eps);
        const auto* mrow = find_row(mc, m_eps, eps);
        if (!prow || !mrow)
            continue;
        CompareRow r;
        r.epsilon = eps;
        r.ek_time = arow[a_ek];
        r.w_m1_pde = (*prow)[p_w];
        r.mc_mean = (*mrow)[m_mean];
        r.mc_ci_lo = (*mrow)[m_lo];
        r.mc_ci_hi = (*mrow)[m_hi];
        r.mc_over_ek = r.mc_mean / r.ek_time;
        r.w_over_ek = r.w_m1_pde / r.ek_time;
        r.pass_mc_ek = r.mc_over_ek >= 0.7 && r.mc_over_ek <= 1.3;
        r.pass_w_ek = r.w_over_ek >= 0.85 && r.w_over_ek <= 1.15;
        out.all_pass = out.all_pass && r.pass_mc_ek && r.pass_w_ek;
        out.rows.push_back(r);
    }
    if (out.rows.empty())
        throw PipelineError("compare: no joinable epsilon rows across inputs");
    return out;
}

// ---------------------------------------------------------------------------
// Writers
// ---------------------------------------------------------------------------

void write_check_outputs(const CheckOutcome& out, const RunConfig& cfg,
                         const std::string& outdir) {
    json j;
    j["pass"] = out.pass;
    j["ellipticity_margin"] = out.report.ellipticity_margin;
    j["divfree_residual"] = out.report.divfree_residual;
    j["divfree_tol"] = out.divfree_tol;
    std::vector<double> worst(out.report.divfree_worst_probe.data(),
                              out.report.divfree_worst_probe.data() +
                                  out.report.divfree_worst_probe.size());
    j["divfree_worst_probe"] = worst;
    j["confining_margin"] = out.report.confining_margin;
    j["hessian_asymmetry"] = out.report.hessian_asymmetry;
    j["b_plus_l_mismatch"] = out.report.b_plus_l_mismatch;
    j["nilpotency_defect"] = out.report.nilpotency_defect;
    j["elliptic_B_zero"] = out.report.elliptic_B_zero;
    (void)cfg;
    atomic_write_text(outdir + "/check.json", j.dump(2) + "\n");
}

void write_analyze_outputs(const AnalyzeOutcome& out, const RunConfig& cfg,
                           const std::string& outdir) {
    if (cfg.write_csv) {
        std::vector<std::vector<double>> rows;
        for (const auto& r : out.rows)
            rows.push_back({r.epsilon, r.mu, r.beta, r.omega0, r.Z, r.laplace_Z,
                            r.A_eps, r.sharp_capacity, r.ek_mean_time});
        write_table(outdir + "/analyze.csv",
                    "epsilon,mu,beta,omega0,Z,laplace_Z,A_eps,sharp_capacity,"
                    "ek_mean_time",
                    rows);
    }
    if (cfg.write_json) {
        json arr = json::array();
        for (const auto& r : out.rows) {
            json o;
            o["epsilon"] = r.epsilon;
            o["mu"] = r.mu;
            o["beta"] = r.beta;
            o["omega0"] = r.omega0;
            o["Z"] = r.Z;
            o["laplace_Z"] = r.laplace_Z;
            o["A_eps"] = r.A_eps;
            o["sharp_capacity"] = r.sharp_capacity;
            o["ek_mean_time"] = r.ek_mean_time;
            arr.push_back(o);
        }
        atomic_write_text(outdir + "/analyze.json", arr.dump(2) + "\n");
    }
}

void write_pde_outputs(const PdeOutcome& out, const RunConfig& cfg,
                       const std::string& outdir) {
    auto to_row = [](const PdeRow& r) {
        return std::vector<double>{r.epsilon,
                                   r.grid_h,
                                   r.K,
                                   r.eta,
                                   r.cap_dirichlet,
                                   r.cap_flux,
                                   r.cap_adjoint_dirichlet,
                                   r.cap_adjoint_flux,
                                   r.J_trivial,
                                   r.J_poisson,
                                   r.J_minimizer,
                                   r.sharp_formula,
                                   r.richardson_error,
                                   r.cap_over_sharp,
                                   r.w_m1};
    };
    static const char* kHeader =
        "epsilon,grid_h,K,eta,cap_dirichlet,cap_flux,cap_adjoint_dirichlet,"
        "cap_adjoint_flux,J_trivial,J_poisson,J_minimizer,sharp_formula,"
        "richardson_error,cap_over_sharp,w_m1";
    if (cfg.write_csv) {
        std::vector<std::vector<double>> rows;
        for (const auto& r : out.rows)
            rows.push_back(to_row(r));
        write_table(outdir + "/pde.csv", kHeader, rows);
        if (!out.coarse_rows.empty()) {
            rows.clear();
            for (const auto& r : out.coarse_rows)
                rows.push_back(to_row(r));
            write_table(outdir + "/pde_coarse.csv", kHeader, rows);
        }
    }
    if (cfg.write_json) {
        json arr = json::array();
        for (const auto& r : out.rows) {
            json o;
            o["epsilon"] = r.epsilon;
            o["grid_h"] = r.grid_h;
            o["K"] = r.K;
            o["eta"] = r.eta;
            o["cap_dirichlet"] = r.cap_dirichlet;
            o["cap_flux"] = r.cap_flux;
            o["cap_adjoint_dirichlet"] = r.cap_adjoint_dirichlet;
            o["cap_adjoint_flux"] = r.cap_adjoint_flux;
            o["J_trivial"] = r.J_trivial;
            o["J_poisson"] = r.J_poisson;
            o["J_minimizer"] = r.J_minimizer;
            o["sharp_formula"] = r.sharp_formula;
            o["richardson_error"] = r.richardson_error;
            o["cap_over_sharp"] = r.cap_over_sharp;
            o["w_m1"] = r.w_m1;
            arr.push_back(o);
        }
        atomic_write_text(outdir + "/pde.json", arr.dump(2) + "\n");
    }
}

void write_mc_outputs(const McOutcome& out, const RunConfig& cfg,
                      const std::string& outdir) {
    if (cfg.write_csv) {
        std::vector<std::vector<double>> rows;
        for (const auto& r : out.rows)
            rows.push_back({r.epsilon, static_cast<double>(r.stats.n_paths),
                            static_cast<double>(r.stats.n_hit),
                            static_cast<double>(r.stats.n_censored),
                            static_cast<double>(r.stats.n_diverged), r.stats.mean,
                            r.stats.stderr_, r.stats.ci_lo, r.stats.ci_hi,
                            r.stats.dt, r.stats.t_max,
                            r.stats.biased_low ? 1.0 : 0.0});
        write_table(outdir + "/mc.csv",
                    "epsilon,n_paths,n_hit,n_censored,n_diverged,mean,stderr,ci_lo,"
                    "ci_hi,dt,t_max,biased_low",
                    rows);
    }
    if (cfg.write_json) {
        json arr = json::array();
        for (const auto& r : out.rows) {
            json o;
            o["epsilon"] = r.epsilon;
            o["n_paths"] = r.stats.n_paths;
            o["n_hit"] = r.stats.n_hit;
            o["n_censored"] = r.stats.n_censored;
            o["n_diverged"] = r.stats.n_diverged;
            o["mean"] = r.stats.mean;
            o["stderr"] = r.stats.stderr_;
            o["ci_lo"] = r.stats.ci_lo;
            o["ci_hi"] = r.stats.ci_hi;
            o["dt"] = r.stats.dt;
            o["t_max"] = r.stats.t_max;
            o["biased_low"] = r.stats.biased_low;
            o["ek_time"] = r.ek_time;
            arr.push_back(o);
        }
        atomic_write_text(outdir + "/mc.json", arr.dump(2) + "\n");
    }
}

void write_compare_outputs(const CompareOutcome& out, const std::string& outdir) {
    std::vector<std::vector<double>> rows;
    for (const auto& r : out.rows)
        rows.push_back({r.epsilon, r.ek_time, r.w_m1_pde, r.mc_mean, r.mc_ci_lo,
                        r.mc_ci_hi, r.mc_over_ek, r.w_over_ek,
                        r.pass_mc_ek ? 1.0 : 0.0, r.pass_w_ek ? 1.0 : 0.0});
    write_table(outdir + "/compare.csv",
                "epsilon,ek_time,w_m1_pde,mc_mean,mc_ci_lo,mc_ci_hi,mc_over_ek,"
                "w_over_ek,pass_mc_ek,pass_w_ek",
                rows);
    json j;
    j["all_pass"] = out.all_pass;
    j["mc_over_ek_window"] = {0.7, 1.3};
    j["w_over_ek_window"] = {0.85, 1.15};
    json arr = json::array();
    for (const auto& r : out.rows) {
        json o;
        o["epsilon"] = r.epsilon;
        o["mc_over_ek"] = r.mc_over_ek;
        o["w_over_ek"] = r.w_over_ek;
        o["pass_mc_ek"] = r.pass_mc_ek;
        o["pass_w_ek"] = r.pass_w_ek;
        arr.push_back(o);
    }
    j["rows"] = arr;
    atomic_write_text(outdir + "/compare.json", j.dump(2) + "\n");
}

void write_manifest(const RunConfig& cfg, const std::string& command,
                    const std::string& outdir) {
    json j;
    char hash[32];
    std::snprintf(hash, sizeof hash, "0x%016llx",
                  static_cast<unsigned long long>(fnv1a(cfg.raw_text)));
    j["command"] = command;
    j["config_fnv1a"] = hash;
    j["seed"] = cfg.mc.seed;
    j["grid_h"] = cfg.grid.h;
    j["tool_version"] = kToolVersion;
    const char* workers = std::getenv("METACAP_WORKERS");
    j["workers_env"] = workers ? workers : "";
    atomic_write_text(outdir + "/manifest_" + command + ".json", j.dump(2) + "\n");
}

} // namespace metacap
