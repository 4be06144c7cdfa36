#include "metacap/functional.hpp"

#include <cmath>

namespace metacap {

double p_eps(const VectorXd& z, const DiffusionModel& model,
             const SaddleAnalysis& analysis, const SaddleGeometry& geometry,
             double epsilon, bool adjoint) {
    switch (geometry.classify(model, z)) {
    case RegionLabel::V1:
        return 1.0;
    case RegionLabel::V0:
    case RegionLabel::O:
        return 0.0;
    case RegionLabel::S:
        break;
    }
    const VectorXd& v = adjoint ? analysis.v_dag : analysis.v;
    double beta = adjoint ? analysis.beta_dag : analysis.beta;
    double y = (z - geometry.saddle).dot(v);
    return normal_cdf(y * std::sqrt(beta / epsilon));
}

DiscreteField sample_p_eps(std::shared_ptr<const ComputationalDomain> domain,
                           const DiffusionModel& model,
                           const SaddleAnalysis& analysis,
                           const SaddleGeometry& geometry, double epsilon,
                           bool adjoint) {
    DiscreteField f;
    f.domain = domain;
    f.role = FieldRole::candidate;
    f.values.resize(domain->grid.size());
    for (long i = 0; i < domain->grid.size(); ++i)
        f.values[i] = p_eps(domain->grid.coord(i), model, analysis, geometry,
                            epsilon, adjoint);
    return f;
}

DiscreteField mollify(const DiscreteField& field, double eta) {
    const Grid& g = field.grid();
    const int d = g.dim();
    for (int k = 0; k < d; ++k)
        if (eta < g.h[k])
            throw PdeError("mollify: eta below the grid resolution, mollifier "
                           "unresolvable");

    // discrete bump kernel over offsets inside the eta-ball
    std::vector<std::vector<int>> offsets;
    std::vector<double> weights;
    double wsum = 0.0;
    int rx = static_cast<int>(std::floor(eta / g.h[0]));
    int ry = d == 2 ? static_cast<int>(std::floor(eta / g.h[1])) : 0;
    for (int i = -rx; i <= rx; ++i) {
        for (int j = -ry; j <= ry; ++j) {
            double r2 = std::pow(i * g.h[0], 2) +
                        (d == 2 ? std::pow(j * g.h[1], 2) : 0.0);
            double s2 = r2 / (eta * eta);
            if (s2 >= 1.0)
                continue;
            double w = std::exp(-1.0 / (1.0 - s2));
            offsets.push_back(d == 2 ? std::vector<int>{i, j} : std::vector<int>{i});
            weights.push_back(w);
            wsum += w;
        }
    }
    for (auto& w : weights)
        w /= wsum;

    DiscreteField out = field;
    for (long idx = 0; idx < g.size(); ++idx) {
        auto mi = g.multi(idx);
        NeumaierSum acc;
        for (size_t k = 0; k < offsets.size(); ++k) {
            auto m = mi;
            for (int dd = 0; dd < d; ++dd)
                m[dd] = std::clamp(m[dd] + offsets[k][dd], 0, g.n[dd] - 1);
            acc.add(weights[k] * field.values[g.index(m)]);
        }
        out.values[idx] = acc.value();
    }
    return out;
}

std::vector<char> mollification_mask(const DiscreteField& raw,
                                     const DiscreteField& mol, double eta) {
    const Grid& g = raw.grid();
    std::vector<char> touched(g.size(), 0), mask(g.size(), 0);
    // ramp-scale changes only: smooth-profile corrections are O(eta^2 p'')
    // and must stay in the admissibility norm
    for (long i = 0; i < g.size(); ++i)
        touched[i] = std::abs(mol.values[i] - raw.values[i]) > 0.02;
    int r = static_cast<int>(std::ceil(eta / g.h.minCoeff())) + 2;
    for (long i = 0; i < g.size(); ++i) {
        if (!touched[i])
            continue;
        auto mi = g.multi(i);
        if (g.dim() == 1) {
            for (int s = -r; s <= r; ++s) {
                int x = mi[0] + s;
                if (x >= 0 && x < g.n[0])
                    mask[x] = 1;
            }
        } else {
            for (int sx = -r; sx <= r; ++sx)
                for (int sy = -r; sy <= r; ++sy) {
                    std::vector<int> m = {mi[0] + sx, mi[1] + sy};
                    if (m[0] >= 0 && m[0] < g.n[0] && m[1] >= 0 && m[1] < g.n[1])
                        mask[g.index(m)] = 1;
                }
        }
    }
    return mask;
}

VectorField trivial_admissible_field(const DiscreteField& f,
                                     const DiffusionModel& model, double epsilon) {
    const Grid& g = f.grid();
    VectorField vf;
    vf.domain = f.domain;
    vf.comps.assign(g.dim(), VectorXd::Zero(g.size()));
    for (long i = 0; i < g.size(); ++i) {
        VectorXd l = model.perturbation(g.coord(i));
        for (int d = 0; d < g.dim(); ++d)
            vf.comps[d][i] = l[d] * f.values[i] / epsilon;
    }
    return vf;
}

VectorField gradient_field(const DiscreteField& u) {
    const Grid& g = u.grid();
    VectorField vf;
    vf.domain = u.domain;
    vf.comps.assign(g.dim(), VectorXd::Zero(g.size()));
    for (long i = 0; i < g.size(); ++i) {
        VectorXd gr = node_gradient(u, i);
        for (int d = 0; d < g.dim(); ++d)
            vf.comps[d][i] = gr[d];
    }
    return vf;
}

double admissibility_residual(const DiscreteField& f, const VectorField& g,
                              const DiffusionModel& model, double epsilon,
                              bool adjoint, const std::vector<char>* mask) {
    const Grid& grid = f.grid();
    const int d = grid.dim();
    const double vol = grid.h.prod();
    const double ring = 2.0 * grid.h.maxCoeff();
    NeumaierSum num, den;
    const double sgn = adjoint ? -1.0 : 1.0;
    for (long i = 0; i < grid.size(); ++i) {
        if (mask && (*mask)[i])
            continue;
        auto mi = grid.multi(i);
        bool edge = false;
        for (int dd = 0; dd < d; ++dd)
            if (mi[dd] == 0 || mi[dd] + 1 == grid.n[dd])
                edge = true;
        if (edge)
            continue;  // one-sided differences would pollute the norm
        // staircase rings around the Dirichlet balls are excluded: the
        // residual there reflects the boundary approximation, not the field
        VectorXd zi = grid.coord(i);
        const auto& dom = *f.domain;
        if (dom.ballA &&
            (zi - dom.ballA->center).norm() <= dom.ballA->radius + ring)
            continue;
        if (dom.ballB &&
            (zi - dom.ballB->center).norm() <= dom.ballB->radius + ring)
            continue;
        const VectorXd& z = zi;
        // eps e^{W/eps} div(e^{-W/eps} g) = eps div g - g . grad W
        double div = 0.0;
        for (int dd = 0; dd < d; ++dd) {
            auto up = mi, dn = mi;
            up[dd] += 1;
            dn[dd] -= 1;
            div += (g.comps[dd][grid.index(up)] - g.comps[dd][grid.index(dn)]) /
                   (2.0 * grid.h[dd]);
        }
        double wdiv = epsilon * div - g.at(i).dot(model.gradient(z));
        double source = sgn * model.perturbation(z).dot(node_gradient(f, i));
        double rho = std::exp(-model.potential(z) / epsilon);
        num.add(rho * (wdiv - source) * (wdiv - source) * vol);
        den.add(rho * source * source * vol);
    }
    double n2 = std::max(num.value(), 0.0);
    double d2 = std::max(den.value(), 0.0);
    if (d2 <= 1e-300)
        return std::sqrt(n2);  // reversible-type case: absolute residual
    return std::sqrt(n2 / d2);
}

namespace {

// both halves of a candidate pair must live on one grid descriptor
void require_shared_grid(const DiscreteField& f, const VectorField& g) {
    const Grid& a = f.grid();
    const Grid& b = g.domain->grid;
    bool same = a.n == b.n && (a.lo - b.lo).cwiseAbs().maxCoeff() <= 1e-12 &&
                (a.h - b.h).cwiseAbs().maxCoeff() <= 1e-12 &&
                static_cast<int>(g.comps.size()) == a.dim();
    if (!same)
        throw PdeError("candidate pair: scalar and vector fields are sampled on "
                       "different grids");
}

} // namespace

CandidatePair make_candidate(DiscreteField f, VectorField g,
                             const DiffusionModel& model, double epsilon,
                             bool adjoint, std::vector<char> interface_mask) {
    require_shared_grid(f, g);
    CandidatePair pair;
    pair.f = std::move(f);
    pair.g = std::move(g);
    pair.interface_mask = std::move(interface_mask);
    pair.admissibility_residual = admissibility_residual(
        pair.f, pair.g, model, epsilon, adjoint,
        pair.interface_mask.empty() ? nullptr : &pair.interface_mask);
    return pair;
}

CandidatePair poisson_candidate(DiscreteField f, const PoissonResult& poisson) {
    CandidatePair pair;
    pair.g = gradient_field(poisson.u);
    require_shared_grid(f, pair.g);
    pair.f = std::move(f);
    pair.admissibility_residual = poisson.solve_residual;
    return pair;
}

CandidatePair minimizer_pair(const DiscreteField& h, const DiscreteField& h_dag,
                             const DiffusionModel& model, double epsilon) {
    const Grid& g = h.grid();
    DiscreteField f;
    f.domain = h.domain;
    f.role = FieldRole::candidate;
    f.values = 0.5 * (h.values + h_dag.values);

    VectorField vf;
    vf.domain = h.domain;
    vf.comps.assign(g.dim(), VectorXd::Zero(g.size()));
    for (long i = 0; i < g.size(); ++i) {
        MatrixXd A = model.diffusion(g.coord(i));
        VectorXd gh = node_gradient(h, i);
        VectorXd ghd = node_gradient(h_dag, i);
        VectorXd gi = 0.5 * (A * gh - A.transpose() * ghd);
        for (int d = 0; d < g.dim(); ++d)
            vf.comps[d][i] = gi[d];
    }
    return make_candidate(std::move(f), std::move(vf), model, epsilon);
}

double evaluate_J(const CandidatePair& pair, const DiffusionModel& model,
                  double epsilon, const GibbsMeasure& measure,
                  const JOptions& opts) {
    if (pair.admissibility_residual > opts.residual_tol)
        throw PdeError("evaluate_J: candidate field not admissible (relative "
                       "residual " +
                       std::to_string(pair.admissibility_residual) + " > " +
                       std::to_string(opts.residual_tol) + ")");
    const ComputationalDomain& dom = *pair.f.domain;
    const Grid& g = dom.grid;
    const int d = g.dim();

    double fmin = pair.f.values.minCoeff(), fmax = pair.f.values.maxCoeff();
    if (fmin < -opts.obstacle_tol || fmax > 1.0 + opts.obstacle_tol)
        throw PdeError("evaluate_J: candidate violates the [0,1] bounds");
    for (long i = 0; i < g.size(); ++i)
        if (dom.cls[i] == NodeClass::dirichlet_A &&
            pair.f.values[i] < 1.0 - opts.obstacle_tol)
            throw PdeError("evaluate_J: obstacle violated, f < 1 on the value-1 set");

    const double vol = g.h.prod();
    NeumaierSum acc;
    for (int dd = 0; dd < d; ++dd) {
        for (long P = 0; P < g.size(); ++P) {
            auto mi = g.multi(P);
            if (mi[dd] + 1 >= g.n[dd])
                continue;
            auto miN = mi;
            miN[dd] += 1;
            long N = g.index(miN);
            NodeClass cP = dom.cls[P], cN = dom.cls[N];
            if (cP != NodeClass::interior && cP == cN)
                continue;
            VectorXd zF = g.coord(P);
            zF[dd] += 0.5 * g.h[dd];
            auto stencils = face_gradient_stencils(dom, P, dd);
            VectorXd grad(d);
            for (int t = 0; t < d; ++t) {
                double v = 0.0;
                for (const auto& e : stencils[t])
                    v += e.coef * pair.f.values[e.node];
                grad[t] = v;
            }
            MatrixXd A = model.diffusion(zF);
            if (opts.adjoint)
                A.transposeInPlace();
            MatrixXd S = 0.5 * (A + A.transpose());
            VectorXd gface = 0.5 * (pair.g.at(P) + pair.g.at(N));
            VectorXd u = A * grad - gface;
            VectorXd Sinv_u = S.llt().solve(u);
            double w = std::exp(-model.potential(zF) / epsilon);
            acc.add(w * Sinv_u[dd] * u[dd] * vol);
        }
    }
    return epsilon * acc.value() / measure.Z;
}

} // namespace metacap
