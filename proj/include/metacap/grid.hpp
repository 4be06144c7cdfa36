#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "metacap/model.hpp"

namespace metacap {

/// Uniform tensor grid; node coordinates are lo + i*h per axis, x fastest in
/// the flat index.
struct Grid {
    VectorXd lo;
    VectorXd h;
    std::vector<int> n;

    int dim() const { return static_cast<int>(n.size()); }
    long size() const {
        long s = 1;
        for (int k : n)
            s *= k;
        return s;
    }
    long index(const std::vector<int>& mi) const {
        long idx = 0, stride = 1;
        for (size_t d = 0; d < n.size(); ++d) {
            idx += mi[d] * stride;
            stride *= n[d];
        }
        return idx;
    }
    std::vector<int> multi(long idx) const {
        std::vector<int> mi(n.size());
        for (size_t d = 0; d < n.size(); ++d) {
            mi[d] = static_cast<int>(idx % n[d]);
            idx /= n[d];
        }
        return mi;
    }
    VectorXd coord(long idx) const {
        VectorXd z(dim());
        for (int d = 0; d < dim(); ++d) {
            z[d] = lo[d] + (idx % n[d]) * h[d];
            idx /= n[d];
        }
        return z;
    }
    long nearest(const VectorXd& z) const {
        long idx = 0, stride = 1;
        for (int d = 0; d < dim(); ++d) {
            int i = static_cast<int>(std::lround((z[d] - lo[d]) / h[d]));
            i = std::clamp(i, 0, n[d] - 1);
            idx += i * stride;
            stride *= n[d];
        }
        return idx;
    }
};

enum class NodeClass : std::uint8_t { interior = 0, dirichlet_A = 1, dirichlet_B = 2 };

enum class FieldRole : std::uint32_t {
    h = 0,
    h_dag = 1,
    w = 2,
    u_poisson = 3,
    candidate = 4
};

struct BallSpec {
    VectorXd center;
    double radius = 0.0;
};

/// Truncated computational box with staircase Dirichlet balls. The outer
/// boundary carries the zero-flux closure; interior nodes adjacent to it use
/// one-sided tangential differences.
struct ComputationalDomain {
    Grid grid;
    std::vector<NodeClass> cls;
    std::optional<BallSpec> ballA;  // value 1 in equilibrium problems
    std::optional<BallSpec> ballB;  // value 0 / target set
    long n_interior = 0;
};

struct DiscreteField {
    std::shared_ptr<const ComputationalDomain> domain;
    FieldRole role = FieldRole::candidate;
    VectorXd values;

    const Grid& grid() const { return domain->grid; }
};

/// CSV export: header "x[,y],value", one node per row, x fastest.
void write_field_csv(const DiscreteField& field, const std::string& path);

/// Compact binary export. Little-endian layout:
///   bytes 0-7   magic "MCGRID01"
///   u32         format version (1)
///   u32         role tag
///   u32         dim
///   per axis:   u64 node count, f64 origin, f64 spacing
///   payload     n_total f64 nodal values, x fastest
void write_field_binary(const DiscreteField& field, const std::string& path);
DiscreteField read_field_binary(const std::string& path);

/// Gradient of a nodal field at a node: central differences, one-sided at
/// the box edges.
VectorXd node_gradient(const DiscreteField& field, long idx);

} // namespace metacap
