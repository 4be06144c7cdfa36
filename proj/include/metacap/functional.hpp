#pragma once

#include "metacap/fd_solver.hpp"
#include "metacap/geometry.hpp"

namespace metacap {

/// Transition profile through the bridge set: the Gaussian CDF of the signed
/// distance along v scaled by sqrt(beta/eps); extended to 1 on valley V1 and
/// 0 on V0 and the super-level set. The adjoint flag selects (v_dag,
/// beta_dag).
double p_eps(const VectorXd& z, const DiffusionModel& model,
             const SaddleAnalysis& analysis, const SaddleGeometry& geometry,
             double epsilon, bool adjoint = false);

/// Nodal samples of p_eps on the domain grid.
DiscreteField sample_p_eps(std::shared_ptr<const ComputationalDomain> domain,
                           const DiffusionModel& model,
                           const SaddleAnalysis& analysis,
                           const SaddleGeometry& geometry, double epsilon,
                           bool adjoint = false);

/// Discrete convolution with a compactly supported smooth bump of radius
/// eta; values stay inside the input range and locally constant regions are
/// preserved. Errors when eta is below the grid resolution.
DiscreteField mollify(const DiscreteField& field, double eta);

struct VectorField {
    std::shared_ptr<const ComputationalDomain> domain;
    std::vector<VectorXd> comps;  // one nodal array per axis

    VectorXd at(long idx) const {
        VectorXd v(comps.size());
        for (size_t d = 0; d < comps.size(); ++d)
            v[static_cast<int>(d)] = comps[d][idx];
        return v;
    }
};

struct CandidatePair {
    DiscreteField f;
    VectorField g;
    double admissibility_residual = 0.0;  // relative, rho-weighted L2
    std::vector<char> interface_mask;     // nodes skipped by the residual norm
};

/// g = l f / eps; admissible because the perturbation is weighted
/// divergence-free.
VectorField trivial_admissible_field(const DiscreteField& f,
                                     const DiffusionModel& model, double epsilon);

/// Nodal gradient of the auxiliary potential as an admissible field.
VectorField gradient_field(const DiscreteField& u);

/// Nodes the mollifier changed, dilated by the stencil radius; used to keep
/// ramp truncation error out of the admissibility norm.
std::vector<char> mollification_mask(const DiscreteField& raw,
                                     const DiscreteField& mol, double eta);

/// Relative rho-weighted L2 residual of eps e^{W/eps} div(e^{-W/eps} g) =
/// (+/-) l . grad f, computed with node-centred differences; masked nodes
/// (e.g. mollification ramps) are skipped.
double admissibility_residual(const DiscreteField& f, const VectorField& g,
                              const DiffusionModel& model, double epsilon,
                              bool adjoint = false,
                              const std::vector<char>* mask = nullptr);

CandidatePair make_candidate(DiscreteField f, VectorField g,
                             const DiffusionModel& model, double epsilon,
                             bool adjoint = false,
                             std::vector<char> interface_mask = {});

/// Candidate from a solved auxiliary potential: the admissibility residual
/// is the linear-system residual (the field satisfies the weighted
/// divergence identity by construction in the scheme's own discretization).
CandidatePair poisson_candidate(DiscreteField f, const PoissonResult& poisson);

/// Exact minimiser pair ((h + h_dag)/2, (A grad h - A^T grad h_dag)/2) built
/// from solved equilibrium fields.
CandidatePair minimizer_pair(const DiscreteField& h, const DiscreteField& h_dag,
                             const DiffusionModel& model, double epsilon);

struct JOptions {
    bool adjoint = false;
    double residual_tol = 0.25;
    double obstacle_tol = 1e-9;
};

/// Face-quadrature value of eps <A grad f - g, A grad f - g> with the
/// S^{-1}-weighted inner product against the Gibbs density; an upper bound
/// for the capacity for admissible pairs. Uses the same face set and
/// gradient reconstruction as capacity_dirichlet, so the reversible g = 0
/// case reproduces it exactly.
double evaluate_J(const CandidatePair& pair, const DiffusionModel& model,
                  double epsilon, const GibbsMeasure& measure,
                  const JOptions& opts = {});

} // namespace metacap
