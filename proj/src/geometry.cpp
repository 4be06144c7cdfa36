#include "metacap/geometry.hpp"

#include <cmath>
#include <deque>

namespace metacap {

RegionLabel SaddleGeometry::classify(const DiffusionModel& model,
                                     const VectorXd& z) const {
    if (model.potential(z) > threshold)
        return RegionLabel::O;
    if (in_Q(z))
        return RegionLabel::S;
    // valley lookup: nearest labelled node, widening rings on resolution gaps
    const Grid& g = label_grid;
    long idx = g.nearest(z);
    if (labels[idx] == RegionLabel::V0 || labels[idx] == RegionLabel::V1)
        return labels[idx];
    auto mi = g.multi(idx);
    for (int ring = 1; ring < 6; ++ring) {
        if (g.dim() == 1) {
            for (int s : {-ring, ring}) {
                int i = mi[0] + s;
                if (i < 0 || i >= g.n[0])
                    continue;
                RegionLabel lb = labels[i];
                if (lb == RegionLabel::V0 || lb == RegionLabel::V1)
                    return lb;
            }
        } else {
            for (int dx = -ring; dx <= ring; ++dx)
                for (int dy = -ring; dy <= ring; ++dy) {
                    if (std::max(std::abs(dx), std::abs(dy)) != ring)
                        continue;
                    std::vector<int> m = {mi[0] + dx, mi[1] + dy};
                    if (m[0] < 0 || m[0] >= g.n[0] || m[1] < 0 || m[1] >= g.n[1])
                        continue;
                    RegionLabel lb = labels[g.index(m)];
                    if (lb == RegionLabel::V0 || lb == RegionLabel::V1)
                        return lb;
                }
        }
    }
    // below threshold, outside Q, but no valley nearby: treat as bridge
    return RegionLabel::S;
}

SaddleGeometry build_geometry(const DiffusionModel& model,
                              const SaddleAnalysis& analysis,
                              const TwoWellSystem& wells, double epsilon, double K,
                              double grid_h, double clearance) {
    if (epsilon <= 0.0 || epsilon >= std::exp(-1.0))
        throw GeometryError("build_geometry: epsilon must lie in (0, 1/e)");
    if (K <= 0.0)
        throw GeometryError("build_geometry: K must be positive");
    if (grid_h <= 0.0)
        throw GeometryError("build_geometry: label grid spacing must be positive");

    SaddleGeometry geo;
    geo.K = K;
    geo.delta = K * std::sqrt(epsilon * std::log(1.0 / epsilon));
    geo.H = wells.saddle.value;
    geo.saddle = analysis.location;

    const int d = model.dim();
    Eigen::SelfAdjointEigenSolver<MatrixXd> es(analysis.H0);
    geo.eigvecs = es.eigenvectors();
    if (geo.eigvecs.col(0).dot(analysis.e1) < 0.0)
        geo.eigvecs.col(0) *= -1.0;
    double lambda1 = -es.eigenvalues()[0];
    if (lambda1 <= 0.0)
        throw GeometryError("build_geometry: no unstable direction at the saddle");
    geo.threshold = geo.H + lambda1 * geo.delta * geo.delta / 4.0;

    geo.half_widths.resize(d);
    geo.half_widths[0] = geo.delta;
    for (int i = 1; i < d; ++i)
        geo.half_widths[i] = std::sqrt(2.0 * lambda1 / es.eigenvalues()[i]) * geo.delta;

    if (clearance > 0.0) {
        for (const auto* m : {&wells.m0, &wells.m1}) {
            VectorXd y = geo.eigvecs.transpose() * (m->location - geo.saddle);
            double dist2 = 0.0;
            for (int i = 0; i < d; ++i) {
                double ex = std::max(0.0, std::abs(y[i]) - geo.half_widths[i]);
                dist2 += ex * ex;
            }
            if (std::sqrt(dist2) < clearance)
                throw GeometryError(
                    "build_geometry: hyperrectangle within the required clearance "
                    "of a well (K too large)");
        }
    }

    // label lattice over the sub-level bounding box
    {
        VectorXd lo = wells.m0.location.cwiseMin(wells.m1.location)
                          .cwiseMin(geo.saddle);
        VectorXd hi = wells.m0.location.cwiseMax(wells.m1.location)
                          .cwiseMax(geo.saddle);
        double span = std::max(1.0, (hi - lo).norm());
        Box scan{lo - VectorXd::Constant(d, 2.0 * span),
                 hi + VectorXd::Constant(d, 2.0 * span)};
        const int m = 201;
        VectorXd blo = VectorXd::Constant(d, 1e300),
                 bhi = VectorXd::Constant(d, -1e300);
        for (const auto& z : probe_lattice(scan, m))
            if (model.potential(z) <= geo.threshold) {
                blo = blo.cwiseMin(z);
                bhi = bhi.cwiseMax(z);
            }
        VectorXd cell = (scan.hi - scan.lo) / (m - 1.0);
        blo -= cell;
        bhi += cell;
        Grid& g = geo.label_grid;
        g.lo.resize(d);
        g.h = VectorXd::Constant(d, grid_h);
        for (int k = 0; k < d; ++k) {
            int nk = static_cast<int>(std::ceil((bhi[k] - blo[k]) / grid_h)) + 1;
            double center = 0.5 * (blo[k] + bhi[k]);
            g.n.push_back(std::max(nk, 4));
            g.lo[k] = center - 0.5 * (g.n[k] - 1) * grid_h;
        }
    }

    const Grid& g = geo.label_grid;
    constexpr std::uint8_t kUnset = 255;
    std::vector<std::uint8_t> lab(g.size(), kUnset);
    for (long i = 0; i < g.size(); ++i) {
        VectorXd z = g.coord(i);
        if (model.potential(z) > geo.threshold)
            lab[i] = static_cast<std::uint8_t>(RegionLabel::O);
        else if (geo.in_Q(z))
            lab[i] = static_cast<std::uint8_t>(RegionLabel::S);
    }

    auto flood = [&](const VectorXd& seed, RegionLabel mark) {
        long s = g.nearest(seed);
        if (lab[s] != kUnset)
            throw GeometryError("build_geometry: well " +
                                std::to_string(static_cast<int>(mark)) +
                                " is not inside its own valley (K too large or "
                                "model not two-well)");
        std::deque<long> q{s};
        lab[s] = static_cast<std::uint8_t>(mark);
        while (!q.empty()) {
            long u = q.front();
            q.pop_front();
            auto mi = g.multi(u);
            for (int dd = 0; dd < g.dim(); ++dd)
                for (int sgn = -1; sgn <= 1; sgn += 2) {
                    auto m = mi;
                    m[dd] += sgn;
                    if (m[dd] < 0 || m[dd] >= g.n[dd])
                        continue;
                    long v = g.index(m);
                    if (lab[v] == kUnset) {
                        lab[v] = static_cast<std::uint8_t>(mark);
                        q.push_back(v);
                    }
                }
        }
    };
    flood(wells.m0.location, RegionLabel::V0);
    flood(wells.m1.location, RegionLabel::V1);

    long leftover = 0;
    for (long i = 0; i < g.size(); ++i)
        if (lab[i] == kUnset) {
            ++leftover;
            lab[i] = static_cast<std::uint8_t>(RegionLabel::O);
        }
    // a pocket of sub-level nodes unreachable from both wells means the
    // sub-level set did not split into exactly two components
    if (leftover > 0)
        throw GeometryError("build_geometry: sub-level set has more than two "
                            "components after removing the bridge set (" +
                            std::to_string(leftover) + " orphan nodes)");

    geo.labels.resize(g.size());
    for (long i = 0; i < g.size(); ++i)
        geo.labels[i] = static_cast<RegionLabel>(lab[i]);

    if (geo.classify(model, wells.m0.location) != RegionLabel::V0 ||
        geo.classify(model, wells.m1.location) != RegionLabel::V1)
        throw GeometryError("build_geometry: well labels inconsistent");
    if (geo.classify(model, geo.saddle) != RegionLabel::S)
        throw GeometryError("build_geometry: saddle not inside the bridge set");
    return geo;
}

SaddleGeometry build_geometry_auto(const DiffusionModel& model,
                                   const SaddleAnalysis& analysis,
                                   const TwoWellSystem& wells, double epsilon,
                                   double grid_h, double K_max, double clearance) {
    double K = K_max;
    while (K >= 0.05) {
        try {
            return build_geometry(model, analysis, wells, epsilon, K, grid_h,
                                  clearance);
        } catch (const GeometryError&) {
            K *= 0.75;
        }
    }
    throw GeometryError("build_geometry_auto: no valid K found down to 0.05");
}

} // namespace metacap
