#pragma once

#include <cmath>
#include <cstdint>
#include <functional>
#include <stdexcept>
#include <string>
#include <vector>

namespace metacap {

/// Compensated (Neumaier) accumulator. Used everywhere a reduction must be
/// reproducible to ~1e-13 independent of how the loop is restructured.
class NeumaierSum {
public:
    void add(double x) {
        double t = sum_ + x;
        if (std::abs(sum_) >= std::abs(x))
            comp_ += (sum_ - t) + x;
        else
            comp_ += (x - t) + sum_;
        sum_ = t;
    }
    double value() const { return sum_ + comp_; }

private:
    double sum_ = 0.0;
    double comp_ = 0.0;
};

/// Standard normal CDF via the libm complementary error function.
inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x / std::sqrt(2.0));
}

/// SplitMix64 mixer; used to derive independent per-path RNG seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

/// FNV-1a over a byte string; stable across runs, used for config manifests.
inline std::uint64_t fnv1a(const std::string& bytes) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

struct GaussLegendre {
    std::vector<double> nodes;   // on [-1, 1]
    std::vector<double> weights;
};

/// Gauss-Legendre rule of given order (number of nodes), computed by Newton
/// iteration on Legendre polynomials.
GaussLegendre gauss_legendre(int order);

/// Composite Gauss-Legendre quadrature of f over [a, b] with `panels`
/// uniform panels and `order` nodes per panel.
double integrate_1d(const std::function<double(double)>& f, double a, double b,
                    int panels, int order);

// Error categories map onto the CLI exit-code contract.
struct ConfigError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct ModelError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct LandscapeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PdeError : std::runtime_error {
    using std::runtime_error::runtime_error;
};
struct PipelineError : std::runtime_error {
    using std::runtime_error::runtime_error;
};

} // namespace metacap
