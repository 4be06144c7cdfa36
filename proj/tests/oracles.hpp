// Test-side oracles, independent of the library's computation paths:
// finite-difference differentiation checks, 1d committor/exit-time
// quadratures, and a dense Lyapunov solve for linear-SDE covariances.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <functional>

namespace oracles {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Richardson-extrapolated central difference of a scalar function.
inline double fd_derivative(const std::function<double(double)>& f, double x,
                            double h = 1e-3) {
    double d1 = (f(x + h) - f(x - h)) / (2.0 * h);
    double d2 = (f(x + h / 2) - f(x - h / 2)) / h;
    return (4.0 * d2 - d1) / 3.0;
}

// Composite Simpson on a uniform grid.
inline double simpson(const std::function<double(double)>& f, double a, double b,
                      int n) {
    if (n % 2)
        ++n;
    double h = (b - a) / n;
    double acc = f(a) + f(b);
    for (int i = 1; i < n; ++i)
        acc += f(a + i * h) * (i % 2 ? 4.0 : 2.0);
    return acc * h / 3.0;
}

// 1d committor for the reversible double well with value 1 at the right ball
// edge (xa) and 0 at the left ball edge (xb), xb < x < xa.
inline double committor_1d(const std::function<double(double)>& W, double eps,
                           double xb, double xa, double x, int n = 20000) {
    auto g = [&](double y) { return std::exp(W(y) / eps); };
    double num = simpson(g, xb, x, n);
    double den = simpson(g, xb, xa, n);
    return num / den;
}

// 1d capacity (1/Z) eps / int_{xb}^{xa} e^{W/eps}.
inline double capacity_1d(const std::function<double(double)>& W, double eps,
                          double Z, double xb, double xa, int n = 20000) {
    auto g = [&](double y) { return std::exp(W(y) / eps); };
    return eps / (Z * simpson(g, xb, xa, n));
}

// Mean hitting time of the level `a` from x > a with reflection at +infinity:
// (1/eps) int_a^x e^{W(y)/eps} int_y^{inf} e^{-W(u)/eps} du dy.
inline double exit_time_1d(const std::function<double(double)>& W, double eps,
                           double a, double x, double upper, int n = 4000) {
    auto inner = [&](double y) {
        return simpson([&](double u) { return std::exp(-W(u) / eps); }, y, upper,
                       n);
    };
    return simpson([&](double y) { return std::exp(W(y) / eps) * inner(y); }, a, x,
                   n) /
           eps;
}

// Stationary covariance of dZ = M Z dt + sqrt(Q) dB via the Kronecker-vec
// Lyapunov system M C + C M^T + Q = 0.
inline MatrixXd lyapunov_covariance(const MatrixXd& M, const MatrixXd& Q) {
    const int d = static_cast<int>(M.rows());
    MatrixXd K = MatrixXd::Zero(d * d, d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            for (int k = 0; k < d; ++k) {
                K(i * d + j, k * d + j) += M(i, k);  // (M C)_{ij}
                K(i * d + j, i * d + k) += M(j, k);  // (C M^T)_{ij}
            }
    VectorXd q(d * d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            q[i * d + j] = -Q(i, j);
    VectorXd c = K.fullPivLu().solve(q);
    MatrixXd C(d, d);
    for (int i = 0; i < d; ++i)
        for (int j = 0; j < d; ++j)
            C(i, j) = c[i * d + j];
    return C;
}

} // namespace oracles
