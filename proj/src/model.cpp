#include "metacap/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>

namespace metacap {

MatrixXd DiffusionField::eval(const VectorXd& z) const {
    if (!perturbed || amp == 0.0)
        return base;
    double r = (z - center).norm();
    double s = std::pow(r, alpha);
    return base + (amp * s / (1.0 + s)) * direction;
}

DiffusionModel::DiffusionModel(int dim, int n0, std::string family,
                               DiffusionField a, MatrixXd B,
                               ConfiningParams confining, double holder_alpha)
    : dim_(dim), n0_(n0), family_(std::move(family)), a_field_(std::move(a)),
      B_(std::move(B)), confining_(confining), holder_alpha_(holder_alpha) {
    if (a_field_.base.rows() == 0) {
        a_field_.base = MatrixXd::Identity(dim_, dim_);
    }
    if (B_.rows() == 0)
        B_ = MatrixXd::Zero(dim_, dim_);
}

VectorXd DiffusionModel::perturbation(const VectorXd& z) const {
    return VectorXd::Zero(z.size());
}

MatrixXd DiffusionModel::perturbation_jacobian(const VectorXd& z) const {
    return MatrixXd::Zero(z.size(), z.size());
}

VectorXd DiffusionModel::drift_b(const VectorXd& z) const {
    return -perturbation(z);
}

VectorXd DiffusionModel::process_drift(const VectorXd& z) const {
    return -diffusion(z).transpose() * gradient(z) + drift_b(z) + B_ * z;
}

ModelEval eval_model(const DiffusionModel& model, const VectorXd& z) {
    for (int i = 0; i < z.size(); ++i)
        if (!std::isfinite(z[i]))
            throw ModelError("eval_model: non-finite input coordinate " +
                             std::to_string(i));
    ModelEval out;
    out.W = model.potential(z);
    out.grad = model.gradient(z);
    out.hess = model.hessian(z);
    out.A = model.diffusion(z);
    out.l = model.perturbation(z);
    if (!std::isfinite(out.W))
        throw ModelError("eval_model: non-finite potential value");
    for (int i = 0; i < z.size(); ++i)
        if (!std::isfinite(out.grad[i]))
            throw ModelError("eval_model: non-finite gradient coordinate " +
                             std::to_string(i));
    for (int i = 0; i < out.hess.rows(); ++i)
        for (int j = 0; j < out.hess.cols(); ++j)
            if (!std::isfinite(out.hess(i, j)))
                throw ModelError("eval_model: non-finite hessian entry (" +
                                 std::to_string(i) + "," + std::to_string(j) + ")");
    return out;
}

DivFreeResult check_divergence_free(const DiffusionModel& model, double epsilon,
                                    const std::vector<VectorXd>& probes) {
    if (probes.empty())
        throw ModelError("check_divergence_free: empty probe set");
    if (epsilon <= 0.0)
        throw ModelError("check_divergence_free: epsilon must be positive");

    auto F = [&](const VectorXd& z) {
        return (model.drift_b(z) + model.linear_drift() * z).eval();
    };

    DivFreeResult res;
    res.worst_probe = probes.front();
    for (const auto& z : probes) {
        double h = 1e-4 * (1.0 + z.norm());
        NeumaierSum div;
        for (int d = 0; d < model.dim(); ++d) {
            VectorXd zp = z, zm = z;
            zp[d] += h;
            zm[d] -= h;
            div.add((F(zp)[d] - F(zm)[d]) / (2.0 * h));
        }
        double advect = F(z).dot(model.gradient(z)) / epsilon;
        double r = std::abs(div.value() - advect);
        if (r > res.max_residual) {
            res.max_residual = r;
            res.worst_probe = z;
        }
    }
    return res;
}

double GibbsMeasure::density(const DiffusionModel& model, const VectorXd& z) const {
    return std::exp(-model.potential(z) / epsilon) / Z;
}

namespace {

// Tensor-product composite Gauss-Legendre over the box.
double quadrature_Z(const DiffusionModel& model, double epsilon, const Box& box,
                    int order) {
    const int d = model.dim();
    GaussLegendre gl = gauss_legendre(order);
    std::vector<std::vector<double>> pts(d), wts(d);
    for (int k = 0; k < d; ++k) {
        double len = box.hi[k] - box.lo[k];
        int panels = std::clamp<int>(
            static_cast<int>(std::ceil(len / (0.5 * std::sqrt(epsilon)))), 16, 256);
        double ph = len / panels;
        for (int p = 0; p < panels; ++p) {
            double a = box.lo[k] + p * ph;
            for (int q = 0; q < order; ++q) {
                pts[k].push_back(a + 0.5 * ph * (gl.nodes[q] + 1.0));
                wts[k].push_back(0.5 * ph * gl.weights[q]);
            }
        }
    }
    NeumaierSum total;
    VectorXd z(d);
    if (d == 1) {
        for (size_t i = 0; i < pts[0].size(); ++i) {
            z[0] = pts[0][i];
            total.add(wts[0][i] * std::exp(-model.potential(z) / epsilon));
        }
    } else if (d == 2) {
        for (size_t i = 0; i < pts[0].size(); ++i) {
            z[0] = pts[0][i];
            NeumaierSum row;
            for (size_t j = 0; j < pts[1].size(); ++j) {
                z[1] = pts[1][j];
                row.add(wts[1][j] * std::exp(-model.potential(z) / epsilon));
            }
            total.add(wts[0][i] * row.value());
        }
    } else {
        throw ModelError("partition_function: quadrature supports dim <= 2");
    }
    return total.value();
}

double boundary_weight_ratio(const DiffusionModel& model, double epsilon,
                             const Box& box, const std::vector<VectorXd>& minima) {
    const int d = model.dim();
    double mode = 0.0;
    for (const auto& m : minima)
        mode = std::max(mode, std::exp(-model.potential(m) / epsilon));
    if (mode == 0.0)
        mode = 1.0;
    double worst = 0.0;
    const int n = 33;
    VectorXd z(d);
    for (int k = 0; k < d; ++k) {
        for (int side = 0; side < 2; ++side) {
            // lattice over the face z_k = lo/hi
            int m = (d == 1) ? 1 : n;
            for (int i = 0; i < m; ++i) {
                z[k] = side ? box.hi[k] : box.lo[k];
                if (d == 2) {
                    int o = 1 - k;
                    z[o] = box.lo[o] + (box.hi[o] - box.lo[o]) * i / (n - 1.0);
                }
                worst = std::max(worst, std::exp(-model.potential(z) / epsilon));
            }
        }
    }
    return worst / mode;
}

} // namespace

GibbsMeasure partition_function(const DiffusionModel& model, double epsilon,
                                const Box& box, int quadrature_order,
                                const std::vector<VectorXd>& minima) {
    if (quadrature_order < 2)
        throw ModelError("partition_function: quadrature_order must be >= 2");
    if (epsilon <= 0.0)
        throw ModelError("partition_function: epsilon must be positive");

    GibbsMeasure g;
    g.epsilon = epsilon;
    g.box = box;
    g.Z = quadrature_Z(model, epsilon, box, quadrature_order);

    const int d = model.dim();
    NeumaierSum lap;
    for (const auto& m : minima) {
        double det = model.hessian(m).determinant();
        if (det <= 0.0)
            throw ModelError("partition_function: degenerate minimum in Laplace term");
        lap.add(std::pow(2.0 * M_PI * epsilon, 0.5 * d) / std::sqrt(det) *
                std::exp(-model.potential(m) / epsilon));
    }
    g.laplace_Z = lap.value();
    g.rel_gap = (g.Z > 0.0) ? std::abs(g.Z - g.laplace_Z) / g.Z : 0.0;
    g.boundary_weight_ratio = boundary_weight_ratio(model, epsilon, box, minima);
    g.box_warning = g.boundary_weight_ratio > 1e-10;
    return g;
}

std::vector<VectorXd> probe_lattice(const Box& box, int per_axis) {
    const int d = static_cast<int>(box.lo.size());
    std::vector<VectorXd> out;
    if (d == 1) {
        for (int i = 0; i < per_axis; ++i) {
            VectorXd z(1);
            z[0] = box.lo[0] + (box.hi[0] - box.lo[0]) * i / (per_axis - 1.0);
            out.push_back(z);
        }
    } else if (d == 2) {
        for (int i = 0; i < per_axis; ++i)
            for (int j = 0; j < per_axis; ++j) {
                VectorXd z(2);
                z[0] = box.lo[0] + (box.hi[0] - box.lo[0]) * i / (per_axis - 1.0);
                z[1] = box.lo[1] + (box.hi[1] - box.lo[1]) * j / (per_axis - 1.0);
                out.push_back(z);
            }
    } else {
        // generic recursive lattice for d > 2 (used by the kinetic demo)
        std::vector<int> idx(d, 0);
        while (true) {
            VectorXd z(d);
            for (int k = 0; k < d; ++k)
                z[k] = box.lo[k] + (box.hi[k] - box.lo[k]) * idx[k] / (per_axis - 1.0);
            out.push_back(z);
            int k = 0;
            while (k < d && ++idx[k] == per_axis) {
                idx[k] = 0;
                ++k;
            }
            if (k == d)
                break;
        }
    }
    return out;
}

ValidationReport validate_model(const DiffusionModel& model, double epsilon,
                                const std::vector<VectorXd>& probes) {
    ValidationReport rep;
    rep.ellipticity_margin = std::numeric_limits<double>::infinity();
    rep.confining_margin = std::numeric_limits<double>::infinity();

    const int d = model.dim();
    const int n0 = model.n0();
    const auto& cp = model.confining();

    for (const auto& z : probes) {
        MatrixXd A = model.diffusion(z);
        MatrixXd Ahat = A.bottomRightCorner(n0, n0);
        MatrixXd S = 0.5 * (Ahat + Ahat.transpose());
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(S);
        rep.ellipticity_margin =
            std::min(rep.ellipticity_margin, es.eigenvalues().minCoeff());

        double W = model.potential(z);
        rep.confining_margin = std::min(
            rep.confining_margin,
            W - (cp.c1 * std::pow(z.norm(), cp.q) - cp.c2));

        MatrixXd H = model.hessian(z);
        rep.hessian_asymmetry = std::max(
            rep.hessian_asymmetry, (H - H.transpose()).cwiseAbs().maxCoeff());

        if (model.elliptic()) {
            VectorXd mism = model.drift_b(z) + model.perturbation(z);
            rep.b_plus_l_mismatch =
                std::max(rep.b_plus_l_mismatch, mism.cwiseAbs().maxCoeff());
        }
    }

    auto div = check_divergence_free(model, epsilon, probes);
    rep.divfree_residual = div.max_residual;
    rep.divfree_worst_probe = div.worst_probe;

    MatrixXd Bp = MatrixXd::Identity(d, d);
    for (int k = 0; k < d; ++k)
        Bp = Bp * model.linear_drift();
    rep.nilpotency_defect = Bp.cwiseAbs().maxCoeff();
    rep.elliptic_B_zero =
        !model.elliptic() || model.linear_drift().cwiseAbs().maxCoeff() == 0.0;
    return rep;
}

// ---------------------------------------------------------------------------
// Builtin families
// ---------------------------------------------------------------------------

namespace {

class DoubleWell1D final : public DiffusionModel {
public:
    explicit DoubleWell1D(DiffusionField a)
        : DiffusionModel(1, 1, "double_well_1d", std::move(a), MatrixXd::Zero(1, 1),
                         ConfiningParams{4.0, 0.125, 0.3}, 0.5) {}

    double potential(const VectorXd& z) const override {
        double u = z[0] * z[0] - 1.0;
        return 0.25 * u * u;
    }
    VectorXd gradient(const VectorXd& z) const override {
        VectorXd g(1);
        g[0] = z[0] * z[0] * z[0] - z[0];
        return g;
    }
    MatrixXd hessian(const VectorXd& z) const override {
        MatrixXd h(1, 1);
        h(0, 0) = 3.0 * z[0] * z[0] - 1.0;
        return h;
    }
};

class DoubleWell2DRot final : public DiffusionModel {
public:
    DoubleWell2DRot(double gamma, DiffusionField a)
        : DiffusionModel(2, 2, "double_well_2d_rot", std::move(a),
                         MatrixXd::Zero(2, 2), ConfiningParams{2.0, 0.25, 0.35},
                         0.5),
          gamma_(gamma) {}

    double potential(const VectorXd& z) const override {
        double u = z[0] * z[0] - 1.0;
        return 0.25 * u * u + 0.5 * z[1] * z[1];
    }
    VectorXd gradient(const VectorXd& z) const override {
        VectorXd g(2);
        g[0] = z[0] * z[0] * z[0] - z[0];
        g[1] = z[1];
        return g;
    }
    MatrixXd hessian(const VectorXd& z) const override {
        MatrixXd h = MatrixXd::Zero(2, 2);
        h(0, 0) = 3.0 * z[0] * z[0] - 1.0;
        h(1, 1) = 1.0;
        return h;
    }
    // l = gamma * (-dW/dy, dW/dx): divergence-free and orthogonal to grad W.
    VectorXd perturbation(const VectorXd& z) const override {
        VectorXd l(2);
        l[0] = -gamma_ * z[1];
        l[1] = gamma_ * (z[0] * z[0] * z[0] - z[0]);
        return l;
    }
    MatrixXd perturbation_jacobian(const VectorXd& z) const override {
        MatrixXd J = MatrixXd::Zero(2, 2);
        J(0, 1) = -gamma_;
        J(1, 0) = gamma_ * (3.0 * z[0] * z[0] - 1.0);
        return J;
    }

private:
    double gamma_;
};

double poly_eval(const std::vector<PolyTerm>& terms, const VectorXd& z) {
    NeumaierSum s;
    for (const auto& t : terms) {
        double v = t.coef;
        for (size_t k = 0; k < t.powers.size(); ++k)
            v *= std::pow(z[static_cast<int>(k)], t.powers[k]);
        s.add(v);
    }
    return s.value();
}

std::vector<PolyTerm> poly_diff(const std::vector<PolyTerm>& terms, int axis) {
    std::vector<PolyTerm> out;
    for (const auto& t : terms) {
        if (t.powers[axis] == 0)
            continue;
        PolyTerm d = t;
        d.coef *= d.powers[axis];
        d.powers[axis] -= 1;
        out.push_back(d);
    }
    return out;
}

class CustomPolynomial final : public DiffusionModel {
public:
    CustomPolynomial(int dim, std::vector<PolyTerm> w,
                     std::vector<std::vector<PolyTerm>> l, DiffusionField a,
                     ConfiningParams confining, double holder_alpha)
        : DiffusionModel(dim, dim, "custom_polynomial", std::move(a),
                         MatrixXd::Zero(dim, dim), confining, holder_alpha),
          w_(std::move(w)), l_(std::move(l)) {
        for (int i = 0; i < dim; ++i) {
            wg_.push_back(poly_diff(w_, i));
            std::vector<std::vector<PolyTerm>> row;
            for (int j = 0; j < dim; ++j)
                row.push_back(poly_diff(wg_.back(), j));
            wh_.push_back(std::move(row));
        }
        if (!l_.empty()) {
            for (int i = 0; i < dim; ++i) {
                std::vector<std::vector<PolyTerm>> row;
                for (int j = 0; j < dim; ++j)
                    row.push_back(poly_diff(l_[i], j));
                lj_.push_back(std::move(row));
            }
        }
    }

    double potential(const VectorXd& z) const override { return poly_eval(w_, z); }
    VectorXd gradient(const VectorXd& z) const override {
        VectorXd g(dim_);
        for (int i = 0; i < dim_; ++i)
            g[i] = poly_eval(wg_[i], z);
        return g;
    }
    MatrixXd hessian(const VectorXd& z) const override {
        MatrixXd h(dim_, dim_);
        for (int i = 0; i < dim_; ++i)
            for (int j = 0; j < dim_; ++j)
                h(i, j) = poly_eval(wh_[i][j], z);
        // enforce exact symmetry of the analytic Hessian against roundoff
        return 0.5 * (h + h.transpose());
    }
    VectorXd perturbation(const VectorXd& z) const override {
        VectorXd l = VectorXd::Zero(dim_);
        for (size_t i = 0; i < l_.size(); ++i)
            l[static_cast<int>(i)] = poly_eval(l_[i], z);
        return l;
    }
    MatrixXd perturbation_jacobian(const VectorXd& z) const override {
        MatrixXd J = MatrixXd::Zero(dim_, dim_);
        for (size_t i = 0; i < lj_.size(); ++i)
            for (int j = 0; j < dim_; ++j)
                J(static_cast<int>(i), j) = poly_eval(lj_[i][j], z);
        return J;
    }

private:
    std::vector<PolyTerm> w_;
    std::vector<std::vector<PolyTerm>> l_;
    std::vector<std::vector<PolyTerm>> wg_;
    std::vector<std::vector<std::vector<PolyTerm>>> wh_;
    std::vector<std::vector<std::vector<PolyTerm>>> lj_;
};

class Underdamped final : public DiffusionModel {
public:
    Underdamped(int n, std::vector<PolyTerm> u, ConfiningParams confining)
        : DiffusionModel(2 * n, n, "underdamped", kinetic_field(n),
                         kinetic_B(n), confining, 0.5),
          n_(n), u_(std::move(u)) {
        for (int i = 0; i < n_; ++i) {
            ug_.push_back(poly_diff(u_, i));
            std::vector<std::vector<PolyTerm>> row;
            for (int j = 0; j < n_; ++j)
                row.push_back(poly_diff(ug_.back(), j));
            uh_.push_back(std::move(row));
        }
    }

    double potential(const VectorXd& z) const override {
        return poly_eval(u_, z.head(n_)) + 0.5 * z.tail(n_).squaredNorm();
    }
    VectorXd gradient(const VectorXd& z) const override {
        VectorXd g(2 * n_);
        VectorXd x = z.head(n_);
        for (int i = 0; i < n_; ++i)
            g[i] = poly_eval(ug_[i], x);
        g.tail(n_) = z.tail(n_);
        return g;
    }
    MatrixXd hessian(const VectorXd& z) const override {
        MatrixXd h = MatrixXd::Zero(2 * n_, 2 * n_);
        VectorXd x = z.head(n_);
        for (int i = 0; i < n_; ++i)
            for (int j = 0; j < n_; ++j)
                h(i, j) = poly_eval(uh_[i][j], x);
        h.bottomRightCorner(n_, n_) = MatrixXd::Identity(n_, n_);
        return 0.5 * (h + h.transpose());
    }
    VectorXd drift_b(const VectorXd& z) const override {
        VectorXd b = VectorXd::Zero(2 * n_);
        VectorXd x = z.head(n_);
        for (int i = 0; i < n_; ++i)
            b[n_ + i] = -poly_eval(ug_[i], x);
        return b;
    }

private:
    static DiffusionField kinetic_field(int n) {
        DiffusionField a;
        a.base = MatrixXd::Zero(2 * n, 2 * n);
        a.base.bottomRightCorner(n, n) = MatrixXd::Identity(n, n);
        return a;
    }
    static MatrixXd kinetic_B(int n) {
        MatrixXd B = MatrixXd::Zero(2 * n, 2 * n);
        B.topRightCorner(n, n) = MatrixXd::Identity(n, n);
        return B;
    }

    int n_;
    std::vector<PolyTerm> u_;
    std::vector<std::vector<PolyTerm>> ug_;
    std::vector<std::vector<std::vector<PolyTerm>>> uh_;
};

} // namespace

std::unique_ptr<DiffusionModel> make_double_well_1d(DiffusionField a) {
    return std::make_unique<DoubleWell1D>(std::move(a));
}

std::unique_ptr<DiffusionModel> make_double_well_2d_rot(double gamma,
                                                        DiffusionField a) {
    return std::make_unique<DoubleWell2DRot>(gamma, std::move(a));
}

std::unique_ptr<DiffusionModel>
make_custom_polynomial(int dim, std::vector<PolyTerm> w_terms,
                       std::vector<std::vector<PolyTerm>> l_terms,
                       DiffusionField a, ConfiningParams confining,
                       double holder_alpha) {
    return std::make_unique<CustomPolynomial>(dim, std::move(w_terms),
                                              std::move(l_terms), std::move(a),
                                              confining, holder_alpha);
}

std::unique_ptr<DiffusionModel>
make_underdamped(int n, std::vector<PolyTerm> u_terms, ConfiningParams confining) {
    return std::make_unique<Underdamped>(n, std::move(u_terms), confining);
}

// ---------------------------------------------------------------------------
// JSON schema
// ---------------------------------------------------------------------------

namespace {

using nlohmann::json;

void reject_unknown(const json& obj, const std::set<std::string>& allowed,
                    const std::string& path) {
    for (auto it = obj.begin(); it != obj.end(); ++it)
        if (!allowed.count(it.key()))
            throw ConfigError("unknown key at " + path + "/" + it.key());
}

MatrixXd parse_matrix(const json& j, const std::string& path) {
    if (!j.is_array() || j.empty())
        throw ConfigError("expected matrix (array of rows) at " + path);
    const int rows = static_cast<int>(j.size());
    const int cols = static_cast<int>(j[0].size());
    MatrixXd m(rows, cols);
    for (int i = 0; i < rows; ++i) {
        if (static_cast<int>(j[i].size()) != cols)
            throw ConfigError("ragged matrix at " + path);
        for (int c = 0; c < cols; ++c)
            m(i, c) = j[i][c].get<double>();
    }
    return m;
}

VectorXd parse_vector(const json& j, const std::string& path) {
    if (!j.is_array())
        throw ConfigError("expected array at " + path);
    VectorXd v(j.size());
    for (size_t i = 0; i < j.size(); ++i)
        v[static_cast<int>(i)] = j[i].get<double>();
    return v;
}

std::vector<PolyTerm> parse_terms(const json& j, int dim, const std::string& path) {
    std::vector<PolyTerm> out;
    if (!j.is_array())
        throw ConfigError("expected array of terms at " + path);
    for (size_t i = 0; i < j.size(); ++i) {
        const auto& t = j[i];
        reject_unknown(t, {"coef", "powers"}, path + "[" + std::to_string(i) + "]");
        PolyTerm pt;
        pt.coef = t.at("coef").get<double>();
        for (const auto& p : t.at("powers"))
            pt.powers.push_back(p.get<int>());
        if (static_cast<int>(pt.powers.size()) != dim)
            throw ConfigError("powers length mismatch at " + path + "[" +
                              std::to_string(i) + "]");
        out.push_back(std::move(pt));
    }
    return out;
}

DiffusionField parse_A(const json& j, int dim) {
    DiffusionField a;
    std::string kind = j.at("kind").get<std::string>();
    if (kind == "constant") {
        reject_unknown(j, {"kind", "matrix"}, "/A");
        a.base = parse_matrix(j.at("matrix"), "/A/matrix");
    } else if (kind == "perturbed") {
        reject_unknown(j, {"kind", "base", "amp", "alpha", "center", "direction"},
                       "/A");
        a.base = parse_matrix(j.at("base"), "/A/base");
        a.perturbed = true;
        a.amp = j.at("amp").get<double>();
        a.alpha = j.at("alpha").get<double>();
        a.center = parse_vector(j.at("center"), "/A/center");
        a.direction = j.contains("direction")
                          ? parse_matrix(j.at("direction"), "/A/direction")
                          : MatrixXd::Identity(dim, dim).eval();
        if (a.alpha <= 0.0 || a.alpha >= 1.0)
            throw ConfigError("/A/alpha must lie in (0,1)");
    } else {
        throw ConfigError("unknown /A/kind '" + kind + "'");
    }
    if (a.base.rows() != dim || a.base.cols() != dim)
        throw ConfigError("/A matrix dimension mismatch");
    return a;
}

ConfiningParams parse_confining(const json& j) {
    reject_unknown(j, {"q", "c1", "c2"}, "/confining");
    ConfiningParams cp;
    cp.q = j.at("q").get<double>();
    cp.c1 = j.at("c1").get<double>();
    cp.c2 = j.at("c2").get<double>();
    if (cp.q <= 1.0 || cp.c1 <= 0.0)
        throw ConfigError("/confining requires q > 1 and c1 > 0");
    return cp;
}

} // namespace

std::unique_ptr<DiffusionModel> parse_model_json(const nlohmann::json& doc) {
    reject_unknown(doc, {"family", "params", "A", "gamma", "confining",
                          "holder_alpha"},
                   "/model");
    const std::string family = doc.at("family").get<std::string>();
    const double gamma = doc.value("gamma", 0.0);

    std::unique_ptr<DiffusionModel> model;
    if (family == "double_well_1d") {
        if (gamma != 0.0)
            throw ConfigError("gamma must be 0 for double_well_1d (any "
                              "divergence-free field orthogonal to the gradient "
                              "vanishes in 1d)");
        DiffusionField a;
        if (doc.contains("A"))
            a = parse_A(doc.at("A"), 1);
        model = make_double_well_1d(std::move(a));
    } else if (family == "double_well_2d_rot") {
        DiffusionField a;
        if (doc.contains("A"))
            a = parse_A(doc.at("A"), 2);
        model = make_double_well_2d_rot(gamma, std::move(a));
    } else if (family == "custom_polynomial") {
        const auto& p = doc.at("params");
        reject_unknown(p, {"dim", "W", "l"}, "/model/params");
        int dim = p.at("dim").get<int>();
        if (dim < 1 || dim > 3)
            throw ConfigError("/model/params/dim out of range [1,3]");
        auto w = parse_terms(p.at("W"), dim, "/model/params/W");
        std::vector<std::vector<PolyTerm>> l;
        if (p.contains("l")) {
            const auto& lj = p.at("l");
            if (static_cast<int>(lj.size()) != dim)
                throw ConfigError("/model/params/l must have one component per axis");
            for (int i = 0; i < dim; ++i)
                l.push_back(parse_terms(lj[i], dim,
                                        "/model/params/l[" + std::to_string(i) + "]"));
        }
        DiffusionField a;
        if (doc.contains("A"))
            a = parse_A(doc.at("A"), dim);
        if (!doc.contains("confining"))
            throw ConfigError("custom_polynomial requires /model/confining");
        model = make_custom_polynomial(dim, std::move(w), std::move(l), std::move(a),
                                       parse_confining(doc.at("confining")),
                                       doc.value("holder_alpha", 0.5));
        return model;
    } else if (family == "underdamped") {
        const auto& p = doc.at("params");
        reject_unknown(p, {"n", "U"}, "/model/params");
        int n = p.at("n").get<int>();
        if (n < 1 || n > 2)
            throw ConfigError("/model/params/n out of range [1,2]");
        if (doc.contains("A"))
            throw ConfigError("underdamped fixes the diffusion block; /A not allowed");
        auto u = parse_terms(p.at("U"), n, "/model/params/U");
        ConfiningParams cp{2.0, 0.2, 0.25};
        if (doc.contains("confining"))
            cp = parse_confining(doc.at("confining"));
        model = make_underdamped(n, std::move(u), cp);
        return model;
    } else {
        throw ConfigError("unknown model family '" + family + "'");
    }

    // shared optional overrides for the closed-form families
    if (doc.contains("confining"))
        model->set_confining(parse_confining(doc.at("confining")));
    if (doc.contains("holder_alpha")) {
        double ha = doc.at("holder_alpha").get<double>();
        if (ha <= 0.0 || ha >= 1.0)
            throw ConfigError("/model/holder_alpha must lie in (0,1)");
    }
    return model;
}

// ---------------------------------------------------------------------------
// Quadrature helpers
// ---------------------------------------------------------------------------

GaussLegendre gauss_legendre(int order) {
    GaussLegendre out;
    out.nodes.resize(order);
    out.weights.resize(order);
    for (int i = 0; i < order; ++i) {
        // Newton from the Chebyshev initial guess
        double x = std::cos(M_PI * (i + 0.75) / (order + 0.5));
        double pp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = 0.0;
            for (int j = 0; j < order; ++j) {
                double p2 = p1;
                p1 = p0;
                p0 = ((2.0 * j + 1.0) * x * p1 - j * p2) / (j + 1.0);
            }
            pp = order * (x * p0 - p1) / (x * x - 1.0);
            double dx = p0 / pp;
            x -= dx;
            if (std::abs(dx) < 1e-15)
                break;
        }
        out.nodes[order - 1 - i] = x;
        out.weights[order - 1 - i] = 2.0 / ((1.0 - x * x) * pp * pp);
    }
    return out;
}

double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    int panels, int order) {
    GaussLegendre gl = gauss_legendre(order);
    double ph = (b - a) / panels;
    NeumaierSum total;
    for (int p = 0; p < panels; ++p) {
        double lo = a + p * ph;
        for (int q = 0; q < order; ++q)
            total.add(0.5 * ph * gl.weights[q] *
                      f(lo + 0.5 * ph * (gl.nodes[q] + 1.0)));
    }
    return total.value();
}

} // namespace metacap
