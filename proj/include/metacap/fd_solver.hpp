#pragma once

#include <Eigen/Sparse>

#include "metacap/grid.hpp"
#include "metacap/landscape.hpp"
#include "metacap/model.hpp"

namespace metacap {

struct DomainOptions {
    double h = 0.0;                 // grid spacing, all axes
    double level_mult = 10.0;       // box level W <= level_ref + mult*eps*log(1/eps)
    double well_radius = -1.0;      // Dirichlet ball radius; -1 selects eps
    std::optional<BallSpec> ballA;  // value-1 set (omit to exclude nothing)
    std::optional<BallSpec> ballB;  // value-0 / target set
    std::optional<Box> manual_box;
    double level_ref = 0.0;         // usually the barrier height H
};

/// Truncated box domain: the bounding box of {W <= level_ref +
/// level_mult*eps*log(1/eps)} from a coarse scan (or a manual box), snapped
/// to the requested spacing and re-centred so opposite box faces are
/// symmetric about the scan centre. Dirichlet balls become staircase node
/// sets; each ball contains at least its nearest node.
std::shared_ptr<ComputationalDomain>
build_domain(const DiffusionModel& model, double epsilon, const DomainOptions& opts);

/// Same grid with the value-1 ball reclassified as interior, for the
/// landscape and auxiliary problems that exclude only the target set.
std::shared_ptr<ComputationalDomain>
domain_without_A(const ComputationalDomain& dom);

enum class DriftScheme { central, upwind, automatic };

struct AssembleOptions {
    bool adjoint = false;           // transpose A, flip the sign of l
    bool identity_diffusion = false;  // weighted Laplacian (auxiliary problems)
    bool drop_drift = false;
    DriftScheme scheme = DriftScheme::automatic;
};

struct LinearSystem {
    Eigen::SparseMatrix<double> M;
    VectorXd rhs;
    std::shared_ptr<const ComputationalDomain> domain;
    double epsilon = 0.0;
    AssembleOptions opts;
};

/// Flux-form discretization: face fluxes carry the face-centred Gibbs weight
/// (relative to the row node) and the face-averaged diffusion matrix; the
/// perturbation drift is discretized node-centred, central below cell Peclet
/// 2 and first-order upwind above (scheme automatic). Dirichlet rows are
/// identity; interior row sums vanish when no Dirichlet value is referenced.
LinearSystem assemble(const DiffusionModel& model, double epsilon,
                      std::shared_ptr<const ComputationalDomain> domain,
                      const AssembleOptions& opts = {});

/// Solves the equilibrium problem (value 1 on ball A, 0 on ball B, zero-flux
/// outer closure) and verifies the discrete maximum principle to 1e-8.
DiscreteField solve_equilibrium(const DiffusionModel& model, double epsilon,
                                std::shared_ptr<const ComputationalDomain> domain,
                                bool adjoint = false,
                                DriftScheme scheme = DriftScheme::automatic);

/// Solves -L w = 1 with w = 0 on ball B; w(m1) approximates the mean
/// transition time. Fails on negative values beyond -1e-10.
DiscreteField solve_landscape(const DiffusionModel& model, double epsilon,
                              std::shared_ptr<const ComputationalDomain> domain,
                              DriftScheme scheme = DriftScheme::automatic);

struct PoissonResult {
    DiscreteField u;
    double grad_energy = 0.0;    // eps * int |grad u|^2 rho
    double source_energy = 0.0;  // (1/eps) * int |l . grad f|^2 rho
    double implied_C = 0.0;      // ratio of the two energy-bound sides
    double solve_residual = 0.0; // |M u - rhs| / |rhs|, admissibility by construction
};

/// Weighted Poisson problem eps e^{W/eps} div(e^{-W/eps) grad u) = l.grad f
/// with u = 0 on the target ball; grad u is an admissible field for f by
/// construction. Reports the energy bound quantities.
PoissonResult solve_poisson_admissible(const DiscreteField& f,
                                       const DiffusionModel& model, double epsilon,
                                       std::shared_ptr<const ComputationalDomain> domain,
                                       const GibbsMeasure& measure);

/// Weighted Dirichlet form eps * sum_faces (S grad h)_d (d_d h) e^{-W/eps}
/// vol / Z with face-centred gradients (exact two-point normal component,
/// averaged tangential components).
double capacity_dirichlet(const DiscreteField& field, const DiffusionModel& model,
                          double epsilon, const GibbsMeasure& measure);

/// Staircase surface integral of the conormal flux eps (A grad h) . n
/// weighted by e^{-W/eps}/Z over the boundary of the selected ball.
double capacity_flux(const DiscreteField& field, const DiffusionModel& model,
                     double epsilon, const GibbsMeasure& measure,
                     NodeClass which_boundary = NodeClass::dirichlet_A,
                     bool adjoint = false);

/// One entry (node, coefficient) of a finite-difference stencil.
struct StencilEntry {
    long node;
    double coef;
};

/// Reconstructed gradient components at the face between P and its +d
/// neighbour: component d is the exact two-point difference, the others are
/// averaged central differences with one-sided fallback at the box edges.
/// Shared by the assembly and both capacity routes.
std::vector<std::vector<StencilEntry>>
face_gradient_stencils(const ComputationalDomain& domain, long P, int d);

} // namespace metacap
