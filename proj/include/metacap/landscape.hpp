#pragma once

#include <optional>
#include <string>
#include <vector>

#include "metacap/model.hpp"

namespace metacap {

enum class CriticalKind { minimum, saddle_index_1, other };

struct CriticalPoint {
    VectorXd location;
    double value = 0.0;      // W at location
    double grad_norm = 0.0;
    std::vector<double> hess_eigs;  // ascending
    int index = 0;           // number of negative eigenvalues
    CriticalKind kind = CriticalKind::other;
};

/// Newton search on grad W seeded from a regular lattice; converged points
/// are deduplicated within 1e-6 and classified by Hessian inertia. A Hessian
/// eigenvalue below 1e-8 * max|eig| raises LandscapeError (degenerate
/// critical point, Morse assumption violated). Diverged seeds are dropped
/// silently.
std::vector<CriticalPoint> find_critical_points(const DiffusionModel& model,
                                                const Box& box,
                                                int seeds_per_axis,
                                                double newton_tol = 1e-11);

/// Target set for path searches.
struct TargetSet {
    enum class Kind { ball, point } kind = Kind::point;
    VectorXd center;
    double radius = 0.0;

    bool contains(const VectorXd& z) const {
        return kind == Kind::point ? (z - center).norm() == 0.0
                                   : (z - center).norm() <= radius;
    }
};

/// Descriptor form {"kind":"ball","center":[...],"radius":r} or
/// {"kind":"point","at":[...]}; unknown keys rejected.
TargetSet parse_target_json(const nlohmann::json& j);

struct LatticeSpec {
    Box box;
    double step = 0.0;
};

struct MinimaxResult {
    double height = 0.0;       // W at the path maximum
    VectorXd witness;          // argmax of W along the path
    std::vector<VectorXd> path;
};

/// Minimax path value between a start point and a target set over the
/// lattice graph (2-neighbor in 1d, 8-neighbor in 2d): Dijkstra variant in
/// which the cost of a path is the maximum node value along it. Ties are
/// broken by lower node value, then lexicographic node order.
MinimaxResult communication_height(const DiffusionModel& model,
                                   const VectorXd& start, const TargetSet& target,
                                   const LatticeSpec& lattice);

/// Convenience split of a two-well critical point set: exactly two minima
/// and one index-1 saddle, with m1 on the positive side of the saddle's
/// unstable direction (first-nonzero-positive orientation).
struct TwoWellSystem {
    CriticalPoint m0;
    CriticalPoint m1;
    CriticalPoint saddle;
    double barrier_height() const { return saddle.value; }
};
TwoWellSystem identify_two_well(const std::vector<CriticalPoint>& pts);

} // namespace metacap
