#pragma once

#include <optional>

#include "metacap/landscape.hpp"
#include "metacap/model.hpp"

namespace metacap {

/// Spectral data at an index-1 saddle for the linearized transition problem.
struct SaddleAnalysis {
    VectorXd location;
    MatrixXd H0;   // Hessian of W at the saddle
    MatrixXd A0;   // diffusion at the saddle
    MatrixXd L0;   // Jacobian of l at the saddle
    double mu = 0.0;
    VectorXd v;
    double mu_dag = 0.0;
    VectorXd v_dag;
    double beta = 0.0;
    double beta_dag = 0.0;
    double omega0 = 0.0;   // mu / (2 pi sqrt(-det H0))
    VectorXd e1;           // unit unstable direction of H0, oriented
    double lambda1 = 0.0;  // magnitude of the negative Hessian eigenvalue
    std::vector<double> hess_eigs;  // ascending
};

/// Dense nonsymmetric eigendecomposition of H0*A0 + L0^T (and the adjoint
/// matrix H0*A0^T - L0^T). Exactly one eigenvalue must have negative real
/// part; it is required to be real and defines mu. Eigenvector signs are
/// fixed so v.e1 > 0, with e1 oriented toward `toward` when supplied.
/// Imaginary parts below 1e-9 * spectral radius are truncated to zero.
SaddleAnalysis analyze_saddle(const DiffusionModel& model,
                              const CriticalPoint& saddle,
                              const std::optional<VectorXd>& toward = std::nullopt);

struct EKPrediction {
    double epsilon = 0.0;
    double capacity = 0.0;
    double mean_time = 0.0;
    double A_eps = 0.0;           // (2 pi eps)^{d/2} e^{-H/eps} / Z
    double prefactor_time = 0.0;  // (2 pi / mu) sqrt(-det H0 / det H_m1)
};

/// Leading-order capacity (1/Z)(2 pi eps)^{d/2}/(2 pi) * mu/sqrt(-det H0)
/// * e^{-H/eps} = A_eps * omega0.
double sharp_capacity(const SaddleAnalysis& analysis, const GibbsMeasure& measure,
                      double barrier_H);

/// Mean transition time prediction (2 pi / mu) sqrt(-det H0 / det H_m1)
/// e^{(H - h1)/eps}.
double eyring_kramers_time(const SaddleAnalysis& analysis, const CriticalPoint& m1,
                           const CriticalPoint& saddle, double epsilon);

/// Convenience bundle of the two formulas.
EKPrediction ek_prediction(const SaddleAnalysis& analysis,
                           const GibbsMeasure& measure, const CriticalPoint& m1,
                           const CriticalPoint& saddle);

} // namespace metacap
