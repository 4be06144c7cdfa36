#include "metacap/fd_solver.hpp"

#include <Eigen/SparseLU>
#include <algorithm>
#include <cmath>

namespace metacap {

std::shared_ptr<ComputationalDomain>
build_domain(const DiffusionModel& model, double epsilon, const DomainOptions& opts) {
    if (opts.h <= 0.0)
        throw PdeError("build_domain: grid spacing must be positive");
    const int d = model.dim();
    if (d > 2)
        throw PdeError("build_domain: grids support dim <= 2");

    Box box;
    if (opts.manual_box) {
        box = *opts.manual_box;
    } else {
        // initial scan box: hull of the Dirichlet ball centres, inflated
        VectorXd lo = VectorXd::Constant(d, 1e300), hi = VectorXd::Constant(d, -1e300);
        for (const auto& b : {opts.ballA, opts.ballB})
            if (b) {
                lo = lo.cwiseMin(b->center);
                hi = hi.cwiseMax(b->center);
            }
        if (!opts.ballA && !opts.ballB) {
            lo = VectorXd::Constant(d, -1.0);
            hi = VectorXd::Constant(d, 1.0);
        }
        double span = std::max(1.0, (hi - lo).norm());
        VectorXd pad = VectorXd::Constant(d, 2.5 * span);
        Box scan{lo - pad, hi + pad};

        double level =
            opts.level_ref + opts.level_mult * epsilon * std::log(1.0 / epsilon);
        const int m = 241;
        VectorXd blo = VectorXd::Constant(d, 1e300), bhi = VectorXd::Constant(d, -1e300);
        bool any = false;
        for (const auto& z : probe_lattice(scan, m)) {
            if (model.potential(z) <= level) {
                blo = blo.cwiseMin(z);
                bhi = bhi.cwiseMax(z);
                any = true;
            }
        }
        if (!any)
            throw PdeError("build_domain: sublevel set not found in scan box");
        VectorXd cell = (scan.hi - scan.lo) / (m - 1.0);
        box.lo = blo - cell;
        box.hi = bhi + cell;
    }

    auto dom = std::make_shared<ComputationalDomain>();
    Grid& g = dom->grid;
    g.lo.resize(d);
    g.h = VectorXd::Constant(d, opts.h);
    for (int k = 0; k < d; ++k) {
        int nk = static_cast<int>(std::ceil((box.hi[k] - box.lo[k]) / opts.h)) + 1;
        nk = std::max(nk, 4);
        double center = 0.5 * (box.lo[k] + box.hi[k]);
        g.n.push_back(nk);
        g.lo[k] = center - 0.5 * (nk - 1) * opts.h;
    }

    double r = opts.well_radius > 0.0 ? opts.well_radius : epsilon;
    dom->ballA = opts.ballA;
    dom->ballB = opts.ballB;
    if (dom->ballA && dom->ballA->radius <= 0.0)
        dom->ballA->radius = r;
    if (dom->ballB && dom->ballB->radius <= 0.0)
        dom->ballB->radius = r;
    if (dom->ballA && dom->ballB) {
        double gap = (dom->ballA->center - dom->ballB->center).norm() -
                     dom->ballA->radius - dom->ballB->radius;
        if (gap <= 0.0)
            throw PdeError("build_domain: Dirichlet balls overlap (dist(A,B) <= 0)");
    }

    dom->cls.assign(g.size(), NodeClass::interior);
    for (long i = 0; i < g.size(); ++i) {
        VectorXd z = g.coord(i);
        if (dom->ballA && (z - dom->ballA->center).norm() <= dom->ballA->radius)
            dom->cls[i] = NodeClass::dirichlet_A;
        else if (dom->ballB && (z - dom->ballB->center).norm() <= dom->ballB->radius)
            dom->cls[i] = NodeClass::dirichlet_B;
    }
    // each ball must own at least its nearest node
    if (dom->ballA) {
        long i = g.nearest(dom->ballA->center);
        if (dom->cls[i] == NodeClass::interior)
            dom->cls[i] = NodeClass::dirichlet_A;
    }
    if (dom->ballB) {
        long i = g.nearest(dom->ballB->center);
        if (dom->cls[i] == NodeClass::interior)
            dom->cls[i] = NodeClass::dirichlet_B;
    }
    dom->n_interior = 0;
    for (auto c : dom->cls)
        if (c == NodeClass::interior)
            ++dom->n_interior;
    if (g.size() > 1500000)
        throw PdeError("build_domain: grid exceeds the 1.5e6 unknown cap");
    return dom;
}

std::shared_ptr<ComputationalDomain> domain_without_A(const ComputationalDomain& dom) {
    auto out = std::make_shared<ComputationalDomain>(dom);
    out->ballA.reset();
    for (auto& c : out->cls)
        if (c == NodeClass::dirichlet_A)
            c = NodeClass::interior;
    out->n_interior = 0;
    for (auto c : out->cls)
        if (c == NodeClass::interior)
            ++out->n_interior;
    return out;
}

namespace {

// one-sided-capable first derivative stencil of the nodal field at node X
std::vector<StencilEntry> node_derivative_stencil(const Grid& g,
                                                  const std::vector<int>& mi,
                                                  int t) {
    std::vector<StencilEntry> s;
    bool up = mi[t] + 1 < g.n[t];
    bool dn = mi[t] - 1 >= 0;
    auto at = [&](int shift) {
        auto m = mi;
        m[t] += shift;
        return g.index(m);
    };
    if (up && dn) {
        s.push_back({at(+1), 0.5 / g.h[t]});
        s.push_back({at(-1), -0.5 / g.h[t]});
    } else if (up) {
        s.push_back({at(+1), 1.0 / g.h[t]});
        s.push_back({at(0), -1.0 / g.h[t]});
    } else {
        s.push_back({at(0), 1.0 / g.h[t]});
        s.push_back({at(-1), -1.0 / g.h[t]});
    }
    return s;
}

void append_scaled(std::vector<StencilEntry>& dst, const std::vector<StencilEntry>& src,
                   double scale) {
    for (const auto& e : src)
        dst.push_back({e.node, e.coef * scale});
}

} // namespace

std::vector<std::vector<StencilEntry>>
face_gradient_stencils(const ComputationalDomain& domain, long P, int d) {
    const Grid& g = domain.grid;
    auto miP = g.multi(P);
    auto miN = miP;
    miN[d] += 1;
    long N = g.index(miN);

    std::vector<std::vector<StencilEntry>> grad(g.dim());
    grad[d].push_back({N, 1.0 / g.h[d]});
    grad[d].push_back({P, -1.0 / g.h[d]});
    for (int t = 0; t < g.dim(); ++t) {
        if (t == d)
            continue;
        append_scaled(grad[t], node_derivative_stencil(g, miP, t), 0.5);
        append_scaled(grad[t], node_derivative_stencil(g, miN, t), 0.5);
    }
    return grad;
}

LinearSystem assemble(const DiffusionModel& model, double epsilon,
                      std::shared_ptr<const ComputationalDomain> domain,
                      const AssembleOptions& opts) {
    if (!model.elliptic())
        throw PdeError("assemble: grid solver requires the full-rank case");
    const Grid& g = domain->grid;
    const int d = g.dim();
    const double sqrt_eps = std::sqrt(epsilon);
    for (int k = 0; k < d; ++k)
        if (g.h[k] > sqrt_eps / 4.0 * (1.0 + 1e-12))
            throw PdeError("assemble: grid spacing does not resolve the transition "
                           "layer (need h <= sqrt(eps)/4)");

    const long N = g.size();
    std::vector<double> Wn(N);
    for (long i = 0; i < N; ++i)
        Wn[i] = model.potential(g.coord(i));

    auto A_at = [&](const VectorXd& z) -> MatrixXd {
        MatrixXd A = opts.identity_diffusion ? MatrixXd::Identity(d, d)
                                             : model.diffusion(z);
        return opts.adjoint ? MatrixXd(A.transpose()) : A;
    };

    std::vector<Eigen::Triplet<double>> trips;
    trips.reserve(static_cast<size_t>(N) * (3 + 4 * d));

    for (long P = 0; P < N; ++P) {
        if (domain->cls[P] != NodeClass::interior) {
            trips.emplace_back(P, P, 1.0);
            continue;
        }
        auto miP = g.multi(P);
        VectorXd zP = g.coord(P);

        // diffusion part: signed face fluxes with row-relative Gibbs weights
        for (int dd = 0; dd < d; ++dd) {
            for (int side = -1; side <= 1; side += 2) {
                auto miQ = miP;
                miQ[dd] += side;
                if (miQ[dd] < 0 || miQ[dd] >= g.n[dd])
                    continue;  // zero-flux outer closure
                long base = side > 0 ? P : g.index(miQ);
                VectorXd zF = g.coord(base);
                zF[dd] += 0.5 * g.h[dd];
                double wF = std::exp((Wn[P] - model.potential(zF)) / epsilon);
                MatrixXd AF = A_at(zF);
                auto grad = face_gradient_stencils(*domain, base, dd);
                double orient = side > 0 ? 1.0 : -1.0;
                double scale = epsilon * wF * orient / g.h[dd];
                for (int t = 0; t < d; ++t) {
                    if (AF(dd, t) == 0.0)
                        continue;
                    for (const auto& e : grad[t])
                        trips.emplace_back(P, e.node, scale * AF(dd, t) * e.coef);
                }
            }
        }

        // perturbation drift, node-centred
        if (!opts.drop_drift) {
            VectorXd l = model.perturbation(zP);
            if (l.cwiseAbs().maxCoeff() > 0.0) {
                MatrixXd S = 0.5 * (model.diffusion(zP) +
                                    model.diffusion(zP).transpose());
                double lam;
                if (d == 1) {
                    lam = S(0, 0);
                } else {
                    Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
                    lam = es.eigenvalues().minCoeff();
                }
                for (int dd = 0; dd < d; ++dd) {
                    double c = (opts.adjoint ? 1.0 : -1.0) * l[dd];
                    if (c == 0.0)
                        continue;
                    double peclet = std::abs(l[dd]) * g.h[dd] / (epsilon * lam);
                    bool use_upwind = opts.scheme == DriftScheme::upwind ||
                                      (opts.scheme == DriftScheme::automatic &&
                                       peclet > 2.0);
                    if (opts.scheme == DriftScheme::central && peclet > 2.0)
                        throw PdeError(
                            "assemble: cell Peclet " + std::to_string(peclet) +
                            " > 2 with the central scheme; use upwind or a finer grid");
                    bool up = miP[dd] + 1 < g.n[dd];
                    bool dn = miP[dd] - 1 >= 0;
                    auto at = [&](int shift) {
                        auto m = miP;
                        m[dd] += shift;
                        return g.index(m);
                    };
                    if (use_upwind) {
                        // one-sided toward the sign keeping off-diagonals positive
                        if (c > 0.0 && up) {
                            trips.emplace_back(P, at(+1), c / g.h[dd]);
                            trips.emplace_back(P, P, -c / g.h[dd]);
                        } else if (c < 0.0 && dn) {
                            trips.emplace_back(P, P, c / g.h[dd]);
                            trips.emplace_back(P, at(-1), -c / g.h[dd]);
                        } else if (up && dn) {
                            trips.emplace_back(P, at(+1), 0.5 * c / g.h[dd]);
                            trips.emplace_back(P, at(-1), -0.5 * c / g.h[dd]);
                        }
                    } else {
                        if (up && dn) {
                            trips.emplace_back(P, at(+1), 0.5 * c / g.h[dd]);
                            trips.emplace_back(P, at(-1), -0.5 * c / g.h[dd]);
                        } else if (up) {
                            trips.emplace_back(P, at(+1), c / g.h[dd]);
                            trips.emplace_back(P, P, -c / g.h[dd]);
                        } else if (dn) {
                            trips.emplace_back(P, P, c / g.h[dd]);
                            trips.emplace_back(P, at(-1), -c / g.h[dd]);
                        }
                    }
                }
            }
        }
    }

    LinearSystem sys;
    sys.M.resize(N, N);
    sys.M.setFromTriplets(trips.begin(), trips.end());
    sys.M.makeCompressed();
    sys.rhs = VectorXd::Zero(N);
    sys.domain = domain;
    sys.epsilon = epsilon;
    sys.opts = opts;
    return sys;
}

namespace {

VectorXd sparse_solve(const LinearSystem& sys) {
    Eigen::SparseLU<Eigen::SparseMatrix<double>> lu;
    lu.analyzePattern(sys.M);
    lu.factorize(sys.M);
    if (lu.info() != Eigen::Success)
        throw PdeError("sparse factorization failed (grid " +
                       std::to_string(sys.domain->grid.size()) + " nodes): " +
                       lu.lastErrorMessage());
    VectorXd x = lu.solve(sys.rhs);
    if (lu.info() != Eigen::Success)
        throw PdeError("sparse solve failed");
    return x;
}

} // namespace

DiscreteField solve_equilibrium(const DiffusionModel& model, double epsilon,
                                std::shared_ptr<const ComputationalDomain> domain,
                                bool adjoint, DriftScheme scheme) {
    if (!domain->ballA || !domain->ballB)
        throw PdeError("solve_equilibrium: both Dirichlet balls are required");
    AssembleOptions opts;
    opts.adjoint = adjoint;
    opts.scheme = scheme;
    LinearSystem sys = assemble(model, epsilon, domain, opts);
    for (long i = 0; i < domain->grid.size(); ++i)
        if (domain->cls[i] == NodeClass::dirichlet_A)
            sys.rhs[i] = 1.0;
    DiscreteField f;
    f.domain = domain;
    f.role = adjoint ? FieldRole::h_dag : FieldRole::h;
    f.values = sparse_solve(sys);
    double lo = f.values.minCoeff(), hi = f.values.maxCoeff();
    if (lo < -1e-8 || hi > 1.0 + 1e-8)
        throw PdeError("solve_equilibrium: discrete maximum principle violated "
                       "(range [" +
                       std::to_string(lo) + ", " + std::to_string(hi) +
                       "]), monotonicity bug");
    return f;
}

DiscreteField solve_landscape(const DiffusionModel& model, double epsilon,
                              std::shared_ptr<const ComputationalDomain> domain,
                              DriftScheme scheme) {
    if (!domain->ballB)
        throw PdeError("solve_landscape: target ball B is required");
    if (domain->ballA)
        throw PdeError("solve_landscape: domain must exclude only the target ball");
    AssembleOptions opts;
    opts.scheme = scheme;
    LinearSystem sys = assemble(model, epsilon, domain, opts);
    for (long i = 0; i < domain->grid.size(); ++i)
        if (domain->cls[i] == NodeClass::interior)
            sys.rhs[i] = -1.0;  // L w = -1 on the interior
    DiscreteField f;
    f.domain = domain;
    f.role = FieldRole::w;
    f.values = sparse_solve(sys);
    // scale-aware roundoff floor: the solution magnitude is the time scale
    if (f.values.minCoeff() < -1e-10 * std::max(1.0, f.values.maxCoeff()))
        throw PdeError("solve_landscape: negative mean exit time, monotonicity bug");
    return f;
}

PoissonResult solve_poisson_admissible(const DiscreteField& f,
                                       const DiffusionModel& model, double epsilon,
                                       std::shared_ptr<const ComputationalDomain> domain,
                                       const GibbsMeasure& measure) {
    if (!domain->ballB)
        throw PdeError("solve_poisson_admissible: target ball B is required");
    if (domain->ballA)
        throw PdeError("solve_poisson_admissible: domain must exclude only the "
                       "target ball");
    AssembleOptions opts;
    opts.identity_diffusion = true;
    opts.drop_drift = true;
    LinearSystem sys = assemble(model, epsilon, domain, opts);
    const Grid& g = domain->grid;
    for (long i = 0; i < g.size(); ++i) {
        if (domain->cls[i] != NodeClass::interior)
            continue;
        VectorXd z = g.coord(i);
        sys.rhs[i] = model.perturbation(z).dot(node_gradient(f, i));
    }
    PoissonResult res;
    res.u.domain = domain;
    res.u.role = FieldRole::u_poisson;
    res.u.values = sparse_solve(sys);
    double rhs_norm = sys.rhs.norm();
    res.solve_residual = rhs_norm > 0.0
                             ? (sys.M * res.u.values - sys.rhs).norm() / rhs_norm
                             : 0.0;

    const double vol = g.h.prod();
    NeumaierSum lhs, rhs;
    for (long i = 0; i < g.size(); ++i) {
        VectorXd z = g.coord(i);
        double rho = std::exp(-model.potential(z) / epsilon) / measure.Z;
        lhs.add(node_gradient(res.u, i).squaredNorm() * rho * vol);
        rhs.add(std::pow(model.perturbation(z).dot(node_gradient(f, i)), 2) * rho *
                vol);
    }
    res.grad_energy = epsilon * lhs.value();
    res.source_energy = rhs.value() / epsilon;
    res.implied_C = res.source_energy > 0.0 ? res.grad_energy / res.source_energy
                                            : 0.0;
    return res;
}

namespace {

// Faces iterate over (P, P+e_d); included when neither endpoint leaves the
// box and the face is not interior to a single Dirichlet ball.
template <typename F>
void for_each_face(const ComputationalDomain& dom, F&& fn) {
    const Grid& g = dom.grid;
    for (int d = 0; d < g.dim(); ++d) {
        for (long P = 0; P < g.size(); ++P) {
            auto mi = g.multi(P);
            if (mi[d] + 1 >= g.n[d])
                continue;
            auto miN = mi;
            miN[d] += 1;
            long N = g.index(miN);
            NodeClass cP = dom.cls[P], cN = dom.cls[N];
            if (cP != NodeClass::interior && cP == cN)
                continue;
            fn(P, N, d);
        }
    }
}

} // namespace

double capacity_dirichlet(const DiscreteField& field, const DiffusionModel& model,
                          double epsilon, const GibbsMeasure& measure) {
    const ComputationalDomain& dom = *field.domain;
    const Grid& g = dom.grid;
    const int d = g.dim();
    const double vol = g.h.prod();
    NeumaierSum acc;
    for_each_face(dom, [&](long P, long N, int dd) {
        (void)N;
        VectorXd zF = g.coord(P);
        zF[dd] += 0.5 * g.h[dd];
        auto stencils = face_gradient_stencils(dom, P, dd);
        VectorXd grad(d);
        for (int t = 0; t < d; ++t) {
            double v = 0.0;
            for (const auto& e : stencils[t])
                v += e.coef * field.values[e.node];
            grad[t] = v;
        }
        MatrixXd A = model.diffusion(zF);
        MatrixXd S = 0.5 * (A + A.transpose());
        double w = std::exp(-model.potential(zF) / epsilon);
        acc.add(w * (S * grad)[dd] * grad[dd] * vol);
    });
    return epsilon * acc.value() / measure.Z;
}

double capacity_flux(const DiscreteField& field, const DiffusionModel& model,
                     double epsilon, const GibbsMeasure& measure,
                     NodeClass which_boundary, bool adjoint) {
    const ComputationalDomain& dom = *field.domain;
    const Grid& g = dom.grid;
    const int d = g.dim();
    const double vol = g.h.prod();
    NeumaierSum acc;
    for_each_face(dom, [&](long P, long N, int dd) {
        bool pin = dom.cls[P] == which_boundary;
        bool nin = dom.cls[N] == which_boundary;
        if (pin == nin)
            return;
        VectorXd zF = g.coord(P);
        zF[dd] += 0.5 * g.h[dd];
        auto stencils = face_gradient_stencils(dom, P, dd);
        VectorXd grad(d);
        for (int t = 0; t < d; ++t) {
            double v = 0.0;
            for (const auto& e : stencils[t])
                v += e.coef * field.values[e.node];
            grad[t] = v;
        }
        MatrixXd A = model.diffusion(zF);
        if (adjoint)
            A.transposeInPlace();
        // outward normal of the PDE domain points into the ball
        double orient = nin ? 1.0 : -1.0;
        double w = std::exp(-model.potential(zF) / epsilon);
        double area = vol / g.h[dd];
        acc.add(orient * w * (A * grad)[dd] * area);
    });
    return epsilon * acc.value() / measure.Z;
}

} // namespace metacap
