#include "metacap/grid.hpp"

#include <bit>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>

static_assert(std::endian::native == std::endian::little,
              "binary grid format assumes a little-endian host");

namespace metacap {

namespace {

void atomic_replace(const std::string& tmp, const std::string& path) {
    std::filesystem::rename(tmp, path);
}

} // namespace

void write_field_csv(const DiscreteField& field, const std::string& path) {
    const Grid& g = field.grid();
    std::string tmp = path + ".tmp";
    std::ofstream out(tmp, std::ios::trunc);
    if (!out)
        throw PipelineError("cannot open " + tmp + " for writing");
    out << (g.dim() == 1 ? "x,value\n" : "x,y,value\n");
    char buf[96];
    for (long i = 0; i < g.size(); ++i) {
        VectorXd z = g.coord(i);
        if (g.dim() == 1)
            std::snprintf(buf, sizeof buf, "%.17g,%.17g\n", z[0], field.values[i]);
        else
            std::snprintf(buf, sizeof buf, "%.17g,%.17g,%.17g\n", z[0], z[1],
                          field.values[i]);
        out << buf;
    }
    out.close();
    atomic_replace(tmp, path);
}

void write_field_binary(const DiscreteField& field, const std::string& path) {
    const Grid& g = field.grid();
    std::string tmp = path + ".tmp";
    std::ofstream out(tmp, std::ios::trunc | std::ios::binary);
    if (!out)
        throw PipelineError("cannot open " + tmp + " for writing");
    out.write("MCGRID01", 8);
    auto put_u32 = [&](std::uint32_t v) {
        out.write(reinterpret_cast<const char*>(&v), 4);
    };
    auto put_u64 = [&](std::uint64_t v) {
        out.write(reinterpret_cast<const char*>(&v), 8);
    };
    auto put_f64 = [&](double v) {
        out.write(reinterpret_cast<const char*>(&v), 8);
    };
    put_u32(1u);
    put_u32(static_cast<std::uint32_t>(field.role));
    put_u32(static_cast<std::uint32_t>(g.dim()));
    for (int d = 0; d < g.dim(); ++d) {
        put_u64(static_cast<std::uint64_t>(g.n[d]));
        put_f64(g.lo[d]);
        put_f64(g.h[d]);
    }
    out.write(reinterpret_cast<const char*>(field.values.data()),
              static_cast<std::streamsize>(sizeof(double) * field.values.size()));
    out.close();
    atomic_replace(tmp, path);
}

DiscreteField read_field_binary(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw PipelineError("cannot open " + path);
    char magic[8];
    in.read(magic, 8);
    if (std::memcmp(magic, "MCGRID01", 8) != 0)
        throw PipelineError("bad magic in " + path);
    auto get_u32 = [&]() {
        std::uint32_t v;
        in.read(reinterpret_cast<char*>(&v), 4);
        return v;
    };
    auto get_u64 = [&]() {
        std::uint64_t v;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    auto get_f64 = [&]() {
        double v;
        in.read(reinterpret_cast<char*>(&v), 8);
        return v;
    };
    std::uint32_t version = get_u32();
    if (version != 1)
        throw PipelineError("unsupported grid format version in " + path);
    auto role = static_cast<FieldRole>(get_u32());
    int dim = static_cast<int>(get_u32());
    auto dom = std::make_shared<ComputationalDomain>();
    dom->grid.lo.resize(dim);
    dom->grid.h.resize(dim);
    for (int d = 0; d < dim; ++d) {
        dom->grid.n.push_back(static_cast<int>(get_u64()));
        dom->grid.lo[d] = get_f64();
        dom->grid.h[d] = get_f64();
    }
    dom->cls.assign(dom->grid.size(), NodeClass::interior);
    DiscreteField f;
    f.domain = dom;
    f.role = role;
    f.values.resize(dom->grid.size());
    in.read(reinterpret_cast<char*>(f.values.data()),
            static_cast<std::streamsize>(sizeof(double) * f.values.size()));
    if (!in)
        throw PipelineError("truncated payload in " + path);
    return f;
}

VectorXd node_gradient(const DiscreteField& field, long idx) {
    const Grid& g = field.grid();
    auto mi = g.multi(idx);
    VectorXd grad(g.dim());
    for (int d = 0; d < g.dim(); ++d) {
        auto up = mi, dn = mi;
        up[d] += 1;
        dn[d] -= 1;
        bool has_up = mi[d] + 1 < g.n[d];
        bool has_dn = mi[d] - 1 >= 0;
        if (has_up && has_dn)
            grad[d] = (field.values[g.index(up)] - field.values[g.index(dn)]) /
                      (2.0 * g.h[d]);
        else if (has_up)
            grad[d] = (field.values[g.index(up)] - field.values[idx]) / g.h[d];
        else
            grad[d] = (field.values[idx] - field.values[g.index(dn)]) / g.h[d];
    }
    return grad;
}

} // namespace metacap
