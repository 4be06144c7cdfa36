#pragma once

#include <Eigen/Dense>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metacap/numerics.hpp"
#include <json.hpp>

namespace metacap {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Box {
    VectorXd lo;
    VectorXd hi;
};

struct ConfiningParams {
    double q = 2.0;
    double c1 = 0.0;
    double c2 = 0.0;
};

/// Diffusion field A(z): constant, or a constant base plus a bounded
/// Hoelder-continuous perturbation (PDE-only experiments).
struct DiffusionField {
    MatrixXd base;
    bool perturbed = false;
    double amp = 0.0;
    double alpha = 1.0;
    VectorXd center;
    MatrixXd direction;

    MatrixXd eval(const VectorXd& z) const;
    bool is_constant() const { return !perturbed || amp == 0.0; }
};

/// Drift-diffusion model in divergence form. The drift splits into a
/// gradient part (through the Gibbs weight), a divergence-free perturbation
/// l with b = -l in the full-rank case, and a constant linear part B with a
/// nilpotent block-chain shape (zero in the full-rank case).
class DiffusionModel {
public:
    virtual ~DiffusionModel() = default;

    int dim() const { return dim_; }
    int n0() const { return n0_; }
    bool elliptic() const { return n0_ == dim_; }
    const std::string& family() const { return family_; }
    const MatrixXd& linear_drift() const { return B_; }
    const ConfiningParams& confining() const { return confining_; }
    void set_confining(const ConfiningParams& cp) { confining_ = cp; }
    double holder_alpha() const { return holder_alpha_; }

    virtual double potential(const VectorXd& z) const = 0;
    virtual VectorXd gradient(const VectorXd& z) const = 0;
    virtual MatrixXd hessian(const VectorXd& z) const = 0;

    /// Divergence-free perturbation l(z); zero vector when absent.
    virtual VectorXd perturbation(const VectorXd& z) const;
    /// Jacobian of l; analytic for all builtin families.
    virtual MatrixXd perturbation_jacobian(const VectorXd& z) const;

    MatrixXd diffusion(const VectorXd& z) const { return a_field_.eval(z); }
    const DiffusionField& diffusion_field() const { return a_field_; }

    /// b(z) from the operator's first-order part: -l in the full-rank case.
    virtual VectorXd drift_b(const VectorXd& z) const;

    /// Full process drift -A^T grad W + b + Bz.
    VectorXd process_drift(const VectorXd& z) const;

protected:
    DiffusionModel(int dim, int n0, std::string family, DiffusionField a,
                   MatrixXd B, ConfiningParams confining, double holder_alpha);

    int dim_;
    int n0_;
    std::string family_;
    DiffusionField a_field_;
    MatrixXd B_;
    ConfiningParams confining_;
    double holder_alpha_;
};

struct ModelEval {
    double W = 0.0;
    VectorXd grad;
    MatrixXd hess;
    MatrixXd A;
    VectorXd l;
};

/// All local model data in one call; throws ModelError naming the offending
/// coordinate on non-finite values.
ModelEval eval_model(const DiffusionModel& model, const VectorXd& z);

/// Max over probes of |div(e^{-W/eps} (b+Bz))| e^{+W/eps}, the residual of
/// the stationarity condition. The divergence of b+Bz is taken by central
/// finite differences with step 1e-4*(1+|z|); the weight factor reduces to
/// the exact -(b+Bz).grad(W)/eps term.
struct DivFreeResult {
    double max_residual = 0.0;
    VectorXd worst_probe;
};
DivFreeResult check_divergence_free(const DiffusionModel& model, double epsilon,
                                    const std::vector<VectorXd>& probes);

struct GibbsMeasure {
    double epsilon = 0.0;
    double Z = 0.0;
    double laplace_Z = 0.0;
    double rel_gap = 0.0;            // |Z - laplace_Z| / Z
    double boundary_weight_ratio = 0.0;
    bool box_warning = false;
    Box box;

    double density(const DiffusionModel& model, const VectorXd& z) const;
};

/// Partition function by tensor-product composite Gauss-Legendre quadrature
/// plus the Laplace approximation at the supplied minima.
GibbsMeasure partition_function(const DiffusionModel& model, double epsilon,
                                const Box& box, int quadrature_order,
                                const std::vector<VectorXd>& minima);

struct ValidationReport {
    double ellipticity_margin = 0.0;  // min eigenvalue of S(z) over probes
    double divfree_residual = 0.0;
    VectorXd divfree_worst_probe;
    double confining_margin = 0.0;    // min of W - (c1 |z|^q - c2)
    double hessian_asymmetry = 0.0;
    double b_plus_l_mismatch = 0.0;   // elliptic case: max |b+l|
    double nilpotency_defect = 0.0;   // |B^d|
    bool elliptic_B_zero = true;

    bool pass(double divfree_tol) const {
        return ellipticity_margin > 0.0 && divfree_residual <= divfree_tol &&
               confining_margin > -1e-9 && hessian_asymmetry <= 1e-12 &&
               b_plus_l_mismatch <= 1e-12 && elliptic_B_zero &&
               nilpotency_defect <= 1e-12;
    }
};

/// Probe-based checks of the structural hypotheses: uniform ellipticity of
/// the full-rank block, weighted divergence-freeness, the confining growth
/// bound, Hessian symmetry, and b = -l / B = 0 in the full-rank case.
ValidationReport validate_model(const DiffusionModel& model, double epsilon,
                                const std::vector<VectorXd>& probes);

/// Deterministic probe lattice with per-axis count over the box.
std::vector<VectorXd> probe_lattice(const Box& box, int per_axis);

// Builtin families.
std::unique_ptr<DiffusionModel> make_double_well_1d(DiffusionField a = {});
std::unique_ptr<DiffusionModel> make_double_well_2d_rot(double gamma,
                                                        DiffusionField a = {});
struct PolyTerm {
    double coef = 0.0;
    std::vector<int> powers;
};
std::unique_ptr<DiffusionModel>
make_custom_polynomial(int dim, std::vector<PolyTerm> w_terms,
                       std::vector<std::vector<PolyTerm>> l_terms,
                       DiffusionField a, ConfiningParams confining,
                       double holder_alpha);
/// Kinetic model W = U(x) + |v|^2/2 with noise only in the velocity block.
std::unique_ptr<DiffusionModel>
make_underdamped(int n, std::vector<PolyTerm> u_terms, ConfiningParams confining);

/// Strict-schema JSON loader; unknown keys raise ConfigError with the path.
std::unique_ptr<DiffusionModel> parse_model_json(const nlohmann::json& doc);

} // namespace metacap
