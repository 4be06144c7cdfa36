#pragma once

#include "metacap/grid.hpp"
#include "metacap/landscape.hpp"
#include "metacap/saddle.hpp"

namespace metacap {

enum class RegionLabel : std::uint8_t { V0 = 0, V1 = 1, S = 2, O = 3 };

/// Saddle-neighbourhood geometry: transition width delta, the hyperrectangle
/// Q in the Hessian eigenbasis, the super-level set O above the bridge
/// threshold, the bridge set S = Q \ O, and the two valley labels from a
/// flood fill of the remaining sub-level nodes.
struct SaddleGeometry {
    double K = 0.0;
    double delta = 0.0;      // K sqrt(eps log(1/eps))
    double threshold = 0.0;  // H + lambda1 delta^2 / 4
    double H = 0.0;
    VectorXd saddle;
    MatrixXd eigvecs;        // Hessian eigenbasis, unstable direction first
    VectorXd half_widths;    // Q half-widths per eigen-axis
    Grid label_grid;
    std::vector<RegionLabel> labels;

    bool in_Q(const VectorXd& z) const {
        VectorXd y = eigvecs.transpose() * (z - saddle);
        for (int i = 0; i < y.size(); ++i)
            if (std::abs(y[i]) > half_widths[i])
                return false;
        return true;
    }

    RegionLabel classify(const DiffusionModel& model, const VectorXd& z) const;
};

struct GeometryError : PdeError {
    using PdeError::PdeError;
};

/// Builds the geometry at the analysed saddle; the valley labels come from a
/// flood fill over {W <= threshold} minus the bridge set at the given grid
/// resolution. Errors when the sub-level set does not split into exactly two
/// components containing m0 and m1, or when either well lies closer to the
/// hyperrectangle than `clearance` (candidate constructions need room for
/// the Dirichlet ball plus the mollifier radius).
SaddleGeometry build_geometry(const DiffusionModel& model,
                              const SaddleAnalysis& analysis,
                              const TwoWellSystem& wells, double epsilon, double K,
                              double grid_h, double clearance = 0.0);

/// Largest K below K_max (default 5) for which the geometry is valid,
/// shrinking by 0.75 on failure.
SaddleGeometry build_geometry_auto(const DiffusionModel& model,
                                   const SaddleAnalysis& analysis,
                                   const TwoWellSystem& wells, double epsilon,
                                   double grid_h, double K_max = 5.0,
                                   double clearance = 0.0);

} // namespace metacap
