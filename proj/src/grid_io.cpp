#include "gradest/grid_io.hpp"

#include <bit>
#include <cstdint>
#include <cstring>
#include <fstream>
#include <stdexcept>

#include <fmt/format.h>

namespace gradest {

static_assert(std::endian::native == std::endian::little, "binary snapshots assume a little-endian host");

namespace {

constexpr char kMagic[6] = {'G', 'R', 'D', 'F', '1', '\n'};

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw std::runtime_error("truncated binary snapshot");
    return v;
}

std::ofstream open_out(const std::string& path, std::ios::openmode mode) {
    std::ofstream os(path, mode);
    if (!os) throw std::runtime_error("cannot open '" + path + "' for writing");
    return os;
}

}  // namespace

void write_csv(std::ostream& os, const GridFunction& u) {
    const Grid& g = u.grid();
    const int n = g.dim();
    os << fmt::format("# t={:.17g}\n", u.time());
    for (int k = 0; k < n; ++k) os << 'i' << k << ',';
    for (int k = 0; k < n; ++k) os << 'x' << k << ',';
    os << "value\n";
    for (std::size_t s = 0; s < u.size(); ++s) {
        if (!g.in_domain(s)) continue;
        const Index idx = g.unravel(s);
        const Vec x = g.position(s);
        std::string line;
        for (int k = 0; k < n; ++k) line += fmt::format("{},", idx[k]);
        for (int k = 0; k < n; ++k) line += fmt::format("{:.17g},", x[k]);
        line += fmt::format("{:.17g}\n", u[s]);
        os << line;
    }
}

void write_csv(const std::string& path, const GridFunction& u) {
    auto os = open_out(path, std::ios::out | std::ios::trunc);
    write_csv(os, u);
    if (!os) throw std::runtime_error("write failed: " + path);
}

void write_binary(std::ostream& os, const GridFunction& u) {
    const Grid& g = u.grid();
    os.write(kMagic, sizeof kMagic);
    put<std::int32_t>(os, g.dim());
    for (int e : g.shape()) put<std::int32_t>(os, e);
    put<double>(os, u.time());
    const auto v = u.values();
    os.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
}

void write_binary(const std::string& path, const GridFunction& u) {
    auto os = open_out(path, std::ios::out | std::ios::trunc | std::ios::binary);
    write_binary(os, u);
    if (!os) throw std::runtime_error("write failed: " + path);
}

GridFunction read_binary(std::istream& is, std::shared_ptr<const Grid> grid) {
    char magic[sizeof kMagic];
    if (!is.read(magic, sizeof magic) || std::memcmp(magic, kMagic, sizeof kMagic) != 0)
        throw std::runtime_error("not a grid snapshot");
    const auto dim = get<std::int32_t>(is);
    if (dim != grid->dim()) throw std::runtime_error("snapshot dimension does not match the grid");
    for (int k = 0; k < dim; ++k)
        if (get<std::int32_t>(is) != grid->shape()[k]) throw std::runtime_error("snapshot shape does not match the grid");
    const double t = get<double>(is);
    std::vector<double> values(grid->size());
    if (!is.read(reinterpret_cast<char*>(values.data()), static_cast<std::streamsize>(values.size() * sizeof(double))))
        throw std::runtime_error("truncated binary snapshot");
    return GridFunction(std::move(grid), std::move(values), t);
}

GridFunction read_binary(const std::string& path, std::shared_ptr<const Grid> grid) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw std::runtime_error("cannot open '" + path + "'");
    return read_binary(is, std::move(grid));
}

}  // namespace gradest
