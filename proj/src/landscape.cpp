#include "metacap/landscape.hpp"

#include <algorithm>
#include <cmath>
#include <queue>

namespace metacap {

namespace {

std::optional<VectorXd> newton_search(const DiffusionModel& model, VectorXd z,
                                      const Box& box, double tol) {
    const double diam = (box.hi - box.lo).norm();
    for (int it = 0; it < 80; ++it) {
        VectorXd g = model.gradient(z);
        if (!g.allFinite())
            return std::nullopt;
        if (g.norm() <= tol)
            return z;
        MatrixXd H = model.hessian(z);
        Eigen::FullPivLU<MatrixXd> lu(H);
        if (!lu.isInvertible())
            return std::nullopt;
        VectorXd step = lu.solve(-g);
        if (!step.allFinite() || step.norm() > 0.5 * diam)
            return std::nullopt;
        z += step;
        // discard runaways well outside the search box
        for (int d = 0; d < z.size(); ++d)
            if (z[d] < box.lo[d] - 0.5 * diam || z[d] > box.hi[d] + 0.5 * diam)
                return std::nullopt;
    }
    return std::nullopt;
}

} // namespace

std::vector<CriticalPoint> find_critical_points(const DiffusionModel& model,
                                                const Box& box,
                                                int seeds_per_axis,
                                                double newton_tol) {
    if (seeds_per_axis < 3)
        throw LandscapeError("find_critical_points: seeds_per_axis must be >= 3");

    std::vector<VectorXd> converged;
    for (const auto& seed : probe_lattice(box, seeds_per_axis)) {
        auto z = newton_search(model, seed, box, newton_tol);
        if (!z)
            continue;
        bool dup = false;
        for (const auto& c : converged)
            if ((c - *z).norm() < 1e-6) {
                dup = true;
                break;
            }
        if (!dup)
            converged.push_back(*z);
    }

    std::vector<CriticalPoint> out;
    for (const auto& z : converged) {
        CriticalPoint cp;
        cp.location = z;
        cp.value = model.potential(z);
        cp.grad_norm = model.gradient(z).norm();
        Eigen::SelfAdjointEigenSolver<MatrixXd> es(model.hessian(z));
        // scale-free Morse test, floored so a fully flat Hessian is caught too
        double emax = std::max(es.eigenvalues().cwiseAbs().maxCoeff(), 1.0);
        for (int i = 0; i < es.eigenvalues().size(); ++i) {
            double ev = es.eigenvalues()[i];
            if (std::abs(ev) < 1e-8 * emax)
                throw LandscapeError(
                    "degenerate critical point: near-zero Hessian eigenvalue at W=" +
                    std::to_string(cp.value));
            cp.hess_eigs.push_back(ev);
            if (ev < 0.0)
                ++cp.index;
        }
        cp.kind = cp.index == 0   ? CriticalKind::minimum
                  : cp.index == 1 ? CriticalKind::saddle_index_1
                                  : CriticalKind::other;
        out.push_back(std::move(cp));
    }
    std::sort(out.begin(), out.end(), [](const CriticalPoint& a, const CriticalPoint& b) {
        double tol = 1e-10 * (1.0 + std::abs(a.value) + std::abs(b.value));
        if (std::abs(a.value - b.value) > tol)
            return a.value < b.value;
        for (int d = 0; d < a.location.size(); ++d)
            if (std::abs(a.location[d] - b.location[d]) > 1e-9)
                return a.location[d] < b.location[d];
        return false;
    });
    return out;
}

namespace {

struct LatticeGraph {
    Box box;
    double step;
    std::vector<int> n;       // nodes per axis
    int dim;

    int size() const {
        int s = 1;
        for (int d = 0; d < dim; ++d)
            s *= n[d];
        return s;
    }
    VectorXd coord(int idx) const {
        VectorXd z(dim);
        for (int d = 0; d < dim; ++d) {
            z[d] = box.lo[d] + (idx % n[d]) * step;
            idx /= n[d];
        }
        return z;
    }
    int nearest(const VectorXd& z) const {
        int idx = 0, stride = 1;
        for (int d = 0; d < dim; ++d) {
            int i = static_cast<int>(std::lround((z[d] - box.lo[d]) / step));
            i = std::clamp(i, 0, n[d] - 1);
            idx += i * stride;
            stride *= n[d];
        }
        return idx;
    }
};

} // namespace

MinimaxResult communication_height(const DiffusionModel& model,
                                   const VectorXd& start, const TargetSet& target,
                                   const LatticeSpec& lattice) {
    if (lattice.step <= 0.0)
        throw LandscapeError("communication_height: lattice step must be positive");
    LatticeGraph g;
    g.box = lattice.box;
    g.step = lattice.step;
    g.dim = static_cast<int>(lattice.box.lo.size());
    for (int d = 0; d < g.dim; ++d) {
        if (start[d] < g.box.lo[d] || start[d] > g.box.hi[d])
            throw LandscapeError("communication_height: start outside lattice box");
        g.n.push_back(static_cast<int>(
                          std::floor((g.box.hi[d] - g.box.lo[d]) / g.step)) +
                      1);
    }

    if (target.contains(start)) {
        MinimaxResult r;
        r.height = model.potential(start);
        r.witness = start;
        return r;
    }

    const int N = g.size();
    std::vector<double> value(N);
    std::vector<char> is_target(N, 0);
    bool any_target = false;
    for (int i = 0; i < N; ++i) {
        VectorXd z = g.coord(i);
        value[i] = model.potential(z);
        if (target.kind == TargetSet::Kind::ball && target.contains(z)) {
            is_target[i] = 1;
            any_target = true;
        }
    }
    if (target.kind == TargetSet::Kind::point) {
        is_target[g.nearest(target.center)] = 1;
        any_target = true;
    }
    if (!any_target)
        throw LandscapeError("communication_height: target set contains no lattice node");

    // neighbor offsets: 2-neighbor in 1d, 8-neighbor in 2d
    std::vector<std::vector<int>> offsets;
    if (g.dim == 1) {
        offsets = {{-1}, {1}};
    } else if (g.dim == 2) {
        for (int dx = -1; dx <= 1; ++dx)
            for (int dy = -1; dy <= 1; ++dy)
                if (dx || dy)
                    offsets.push_back({dx, dy});
    } else {
        throw LandscapeError("communication_height: lattice supports dim <= 2");
    }

    struct QItem {
        double cost;
        double w;
        int node;
        bool operator>(const QItem& o) const {
            if (cost != o.cost)
                return cost > o.cost;
            if (w != o.w)
                return w > o.w;
            return node > o.node;
        }
    };
    std::priority_queue<QItem, std::vector<QItem>, std::greater<QItem>> pq;
    std::vector<double> best(N, std::numeric_limits<double>::infinity());
    std::vector<int> parent(N, -1);

    int s = g.nearest(start);
    best[s] = value[s];
    pq.push({best[s], value[s], s});

    int reached = -1;
    while (!pq.empty()) {
        auto [cost, w, u] = pq.top();
        pq.pop();
        if (cost > best[u])
            continue;
        if (is_target[u]) {
            reached = u;
            break;
        }
        // decode multi-index
        std::vector<int> mi(g.dim);
        int tmp = u;
        for (int d = 0; d < g.dim; ++d) {
            mi[d] = tmp % g.n[d];
            tmp /= g.n[d];
        }
        for (const auto& off : offsets) {
            int v = 0, stride = 1;
            bool ok = true;
            for (int d = 0; d < g.dim; ++d) {
                int i = mi[d] + off[d];
                if (i < 0 || i >= g.n[d]) {
                    ok = false;
                    break;
                }
                v += i * stride;
                stride *= g.n[d];
            }
            if (!ok)
                continue;
            double c = std::max(best[u], value[v]);
            if (c < best[v]) {
                best[v] = c;
                parent[v] = u;
                pq.push({c, value[v], v});
            }
        }
    }
    if (reached < 0)
        throw LandscapeError("communication_height: target unreachable within lattice");

    MinimaxResult r;
    r.height = best[reached];
    for (int u = reached; u != -1; u = parent[u])
        r.path.push_back(g.coord(u));
    std::reverse(r.path.begin(), r.path.end());
    r.witness = r.path.front();
    double wmax = -std::numeric_limits<double>::infinity();
    for (const auto& z : r.path) {
        double w = model.potential(z);
        if (w > wmax) {
            wmax = w;
            r.witness = z;
        }
    }
    return r;
}

TargetSet parse_target_json(const nlohmann::json& j) {
    TargetSet t;
    std::string kind = j.at("kind").get<std::string>();
    auto to_vec = [](const nlohmann::json& a) {
        VectorXd v(a.size());
        for (size_t i = 0; i < a.size(); ++i)
            v[static_cast<int>(i)] = a[i].get<double>();
        return v;
    };
    if (kind == "ball") {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "kind" && it.key() != "center" && it.key() != "radius")
                throw ConfigError("unknown key in target descriptor: " + it.key());
        t.kind = TargetSet::Kind::ball;
        t.center = to_vec(j.at("center"));
        t.radius = j.at("radius").get<double>();
        if (t.radius <= 0.0)
            throw ConfigError("target ball radius must be positive");
    } else if (kind == "point") {
        for (auto it = j.begin(); it != j.end(); ++it)
            if (it.key() != "kind" && it.key() != "at")
                throw ConfigError("unknown key in target descriptor: " + it.key());
        t.kind = TargetSet::Kind::point;
        t.center = to_vec(j.at("at"));
    } else {
        throw ConfigError("unknown target kind '" + kind + "'");
    }
    return t;
}

TwoWellSystem identify_two_well(const std::vector<CriticalPoint>& pts) {
    std::vector<CriticalPoint> minima, saddles;
    for (const auto& p : pts) {
        if (p.kind == CriticalKind::minimum)
            minima.push_back(p);
        else if (p.kind == CriticalKind::saddle_index_1)
            saddles.push_back(p);
    }
    if (minima.size() != 2 || saddles.empty())
        throw LandscapeError("identify_two_well: expected two minima and a saddle, got " +
                             std::to_string(minima.size()) + " minima and " +
                             std::to_string(saddles.size()) + " saddles");
    // lowest saddle connects the wells in the two-well setting
    const CriticalPoint& sad =
        *std::min_element(saddles.begin(), saddles.end(),
                          [](const CriticalPoint& a, const CriticalPoint& b) {
                              return a.value < b.value;
                          });

    // m1 is the minimum with positive projection onto the well-to-well axis,
    // the axis oriented first-nonzero-positive for determinism
    VectorXd axis = minima[1].location - minima[0].location;
    for (int d = 0; d < axis.size(); ++d) {
        if (axis[d] > 0)
            break;
        if (axis[d] < 0) {
            axis = -axis;
            break;
        }
    }
    TwoWellSystem tw;
    tw.saddle = sad;
    if (axis.dot(minima[1].location - sad.location) >= 0) {
        tw.m0 = minima[0];
        tw.m1 = minima[1];
    } else {
        tw.m0 = minima[1];
        tw.m1 = minima[0];
    }
    return tw;
}

} // namespace metacap
