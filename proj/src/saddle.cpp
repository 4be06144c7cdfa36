#include "metacap/saddle.hpp"

#include <Eigen/Eigenvalues>
#include <cmath>

namespace metacap {

namespace {

struct NegativeEig {
    double mu = 0.0;
    VectorXd v;
};

// Unique real negative eigenvalue of M; errors if the count differs from one
// or if the candidate is genuinely complex.
NegativeEig unique_negative_eigenpair(const MatrixXd& M) {
    const double sym_tol = 1e-14 * std::max(1.0, M.cwiseAbs().maxCoeff());
    if ((M - M.transpose()).cwiseAbs().maxCoeff() <= sym_tol) {
        // symmetric fast path (reversible or diagonal problems)
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(M);
        int count = 0, which = -1;
        for (int i = 0; i < es.eigenvalues().size(); ++i)
            if (es.eigenvalues()[i] < 0.0) {
                ++count;
                which = i;
            }
        if (count != 1)
            throw ModelError("saddle spectral structure violated: " +
                             std::to_string(count) +
                             " negative eigenvalues (expected exactly 1)");
        return {-es.eigenvalues()[which], es.eigenvectors().col(which)};
    }

    Eigen::EigenSolver<MatrixXd> es(M);
    double rho = es.eigenvalues().cwiseAbs().maxCoeff();
    const double im_tol = 1e-9 * rho;
    int count = 0, which = -1;
    for (int i = 0; i < es.eigenvalues().size(); ++i) {
        std::complex<double> ev = es.eigenvalues()[i];
        if (ev.real() < 0.0) {
            ++count;
            which = i;
            if (std::abs(ev.imag()) > im_tol)
                throw ModelError(
                    "saddle spectral structure violated: negative eigenvalue has "
                    "non-negligible imaginary part " +
                    std::to_string(ev.imag()));
        }
    }
    if (count != 1)
        throw ModelError("saddle spectral structure violated: " +
                         std::to_string(count) +
                         " eigenvalues with negative real part (expected exactly 1)");
    NegativeEig out;
    out.mu = -es.eigenvalues()[which].real();
    Eigen::VectorXcd vc = es.eigenvectors().col(which);
    // eigenvector of a real simple eigenvalue: rotate to the real axis
    int k;
    vc.cwiseAbs().maxCoeff(&k);
    vc *= std::abs(vc[k]) / vc[k];
    out.v = vc.real();
    out.v.normalize();
    return out;
}

} // namespace

SaddleAnalysis analyze_saddle(const DiffusionModel& model,
                              const CriticalPoint& saddle,
                              const std::optional<VectorXd>& toward) {
    if (saddle.kind != CriticalKind::saddle_index_1)
        throw ModelError("analyze_saddle: critical point is not an index-1 saddle");

    SaddleAnalysis sa;
    sa.location = saddle.location;
    sa.H0 = model.hessian(saddle.location);
    sa.A0 = model.diffusion(saddle.location);
    sa.L0 = model.perturbation_jacobian(saddle.location);

    Eigen::SelfAdjointEigenSolver<MatrixXd> hs(sa.H0);
    for (int i = 0; i < hs.eigenvalues().size(); ++i)
        sa.hess_eigs.push_back(hs.eigenvalues()[i]);
    if (sa.hess_eigs.front() >= 0.0 || (sa.hess_eigs.size() > 1 && sa.hess_eigs[1] <= 0.0))
        throw ModelError("analyze_saddle: Hessian inertia is not (1 negative, rest positive)");
    sa.lambda1 = -sa.hess_eigs.front();
    sa.e1 = hs.eigenvectors().col(0);
    if (toward) {
        if (sa.e1.dot(*toward - saddle.location) < 0.0)
            sa.e1 = -sa.e1;
    } else {
        for (int d = 0; d < sa.e1.size(); ++d) {
            if (sa.e1[d] > 0)
                break;
            if (sa.e1[d] < 0) {
                sa.e1 = -sa.e1;
                break;
            }
        }
    }

    MatrixXd M = sa.H0 * sa.A0 + sa.L0.transpose();
    MatrixXd Md = sa.H0 * sa.A0.transpose() - sa.L0.transpose();
    auto p = unique_negative_eigenpair(M);
    auto pd = unique_negative_eigenpair(Md);
    sa.mu = p.mu;
    sa.mu_dag = pd.mu;
    sa.v = p.v;
    sa.v_dag = pd.v;
    if (sa.v.dot(sa.e1) < 0.0)
        sa.v = -sa.v;
    if (sa.v_dag.dot(sa.e1) < 0.0)
        sa.v_dag = -sa.v_dag;
    if (sa.v.dot(sa.e1) == 0.0 || sa.v_dag.dot(sa.e1) == 0.0)
        throw ModelError("analyze_saddle: transition eigenvector orthogonal to the "
                         "unstable direction");

    sa.beta = sa.mu / sa.v.dot(sa.A0 * sa.v);
    sa.beta_dag = sa.mu_dag / sa.v_dag.dot(sa.A0 * sa.v_dag);

    // exactly one negative Hessian eigenvalue, so det H0 < 0
    double neg_det = -sa.H0.determinant();
    if (neg_det <= 0.0)
        throw ModelError("analyze_saddle: det H0 inconsistent with index-1 saddle");
    sa.omega0 = sa.mu / (2.0 * M_PI * std::sqrt(neg_det));
    return sa;
}

double sharp_capacity(const SaddleAnalysis& analysis, const GibbsMeasure& measure,
                      double barrier_H) {
    const int d = static_cast<int>(analysis.location.size());
    double neg_det = -analysis.H0.determinant();
    if (neg_det <= 0.0)
        throw ModelError("sharp_capacity: not an index-1 saddle (det H0 sign)");
    double A_eps = std::pow(2.0 * M_PI * measure.epsilon, 0.5 * d) *
                   std::exp(-barrier_H / measure.epsilon) / measure.Z;
    return A_eps * analysis.mu / (2.0 * M_PI * std::sqrt(neg_det));
}

double eyring_kramers_time(const SaddleAnalysis& analysis, const CriticalPoint& m1,
                           const CriticalPoint& saddle, double epsilon) {
    if (m1.kind != CriticalKind::minimum)
        throw ModelError("eyring_kramers_time: m1 is not a minimum");
    if (saddle.kind != CriticalKind::saddle_index_1)
        throw ModelError("eyring_kramers_time: saddle is not index-1");
    double neg_det0 = -analysis.H0.determinant();
    double detm = 1.0;
    for (double ev : m1.hess_eigs)
        detm *= ev;
    if (detm <= 0.0)
        throw ModelError("eyring_kramers_time: m1 Hessian is not positive definite");
    double pref = (2.0 * M_PI / analysis.mu) * std::sqrt(neg_det0 / detm);
    return pref * std::exp((saddle.value - m1.value) / epsilon);
}

EKPrediction ek_prediction(const SaddleAnalysis& analysis,
                           const GibbsMeasure& measure, const CriticalPoint& m1,
                           const CriticalPoint& saddle) {
    EKPrediction p;
    p.epsilon = measure.epsilon;
    const int d = static_cast<int>(analysis.location.size());
    p.A_eps = std::pow(2.0 * M_PI * measure.epsilon, 0.5 * d) *
              std::exp(-saddle.value / measure.epsilon) / measure.Z;
    p.capacity = sharp_capacity(analysis, measure, saddle.value);
    p.mean_time = eyring_kramers_time(analysis, m1, saddle, measure.epsilon);
    double detm = 1.0;
    for (double ev : m1.hess_eigs)
        detm *= ev;
    double neg_det0 = -analysis.H0.determinant();
    p.prefactor_time = (2.0 * M_PI / analysis.mu) * std::sqrt(neg_det0 / detm);
    return p;
}

} // namespace metacap
