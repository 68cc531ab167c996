#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "gradest/types.hpp"

namespace gradest {

/// Fundamental cell of a periodic lattice: x = sum_k s_k v_k, s in [0,1)^n,
/// sampled with N_k points per generator.
struct LatticeSpec {
    std::vector<Vec> generators;
    std::vector<int> resolution;

    int dim() const { return static_cast<int>(generators.size()); }
    Mat generator_matrix() const;  // generators as columns
    void validate() const;

    static LatticeSpec unit_cube(int n, int resolution);
};

/// Axis-aligned box, vertex-centred: N_k intervals, N_k + 1 samples per axis.
struct RectangleSpec {
    Vec lower;
    Vec upper;
    std::vector<int> resolution;
};

/// Ball sampled on a masked Cartesian grid with spacing 2R/N.
struct DiskSpec {
    Vec center;
    double radius = 1.0;
    int resolution = 64;
};

enum class BoundaryCondition { Periodic, Dirichlet, Neumann };

std::string to_string(BoundaryCondition bc);

struct DomainSpec {
    std::variant<LatticeSpec, RectangleSpec, DiskSpec> shape;
    BoundaryCondition bc = BoundaryCondition::Periodic;

    int dim() const;
    void validate() const;
    bool is_periodic() const { return std::holds_alternative<LatticeSpec>(shape); }
    bool is_disk() const { return std::holds_alternative<DiskSpec>(shape); }
    bool is_rectangle() const { return std::holds_alternative<RectangleSpec>(shape); }

    /// Largest distance between two points of the domain (minimal-image
    /// distance for periodic cells).
    double diameter() const;

    static DomainSpec periodic(LatticeSpec lattice);
    static DomainSpec rectangle(Vec lower, Vec upper, std::vector<int> resolution, BoundaryCondition bc);
    static DomainSpec disk(Vec center, double radius, int resolution, BoundaryCondition bc);
};

enum class NodeKind : std::uint8_t { Interior, Boundary, Exterior };

using Index = std::array<int, kMaxDim>;

/// Sample geometry derived from a DomainSpec. Immutable; shared by every
/// GridFunction on the same domain.
class Grid {
public:
    explicit Grid(DomainSpec spec);

    const DomainSpec& spec() const { return spec_; }
    int dim() const { return dim_; }
    bool periodic() const { return spec_.is_periodic(); }
    BoundaryCondition bc() const { return spec_.bc; }

    const std::vector<int>& shape() const { return shape_; }
    std::size_t size() const { return size_; }
    std::size_t ravel(const Index& i) const;
    Index unravel(std::size_t idx) const;

    Vec position(std::size_t idx) const;
    NodeKind kind(std::size_t idx) const { return kind_[idx]; }
    std::span<const NodeKind> kinds() const { return kind_; }
    /// Interior and boundary samples; exterior mask cells are not part of the domain.
    bool in_domain(std::size_t idx) const { return kind_[idx] != NodeKind::Exterior; }

    /// Neighbour shifted by `delta` along `axis`; wraps on periodic cells,
    /// returns -1 when it leaves the sample array.
    std::ptrdiff_t neighbor(std::size_t idx, int axis, int delta) const;

    /// Physical step vector between adjacent samples along an index axis.
    Vec axis_vector(int axis) const { return axis_vectors_.col(axis); }
    /// Inverse of the matrix whose columns are the axis vectors.
    const Mat& index_to_physical() const { return jinv_; }
    /// Euclidean length of the shortest axis vector.
    double min_spacing() const { return min_spacing_; }

    /// For Neumann domains, the sample whose value each boundary sample copies.
    std::ptrdiff_t neumann_source(std::size_t idx) const { return neumann_source_[idx]; }

private:
    DomainSpec spec_;
    int dim_ = 0;
    std::vector<int> shape_;
    std::vector<std::size_t> strides_;
    std::size_t size_ = 0;
    Vec origin_;
    Mat axis_vectors_;
    Mat jinv_;
    double min_spacing_ = 0.0;
    std::vector<NodeKind> kind_;
    std::vector<std::ptrdiff_t> neumann_source_;

    void classify_nodes();
};

/// Sampled field u(., t) on a Grid.
class GridFunction {
public:
    GridFunction() = default;
    explicit GridFunction(std::shared_ptr<const Grid> grid, double time = 0.0);
    GridFunction(std::shared_ptr<const Grid> grid, std::vector<double> values, double time = 0.0);

    const Grid& grid() const { return *grid_; }
    const std::shared_ptr<const Grid>& grid_ptr() const { return grid_; }
    std::span<const double> values() const { return values_; }
    std::span<double> values() { return values_; }
    std::vector<double>& storage() { return values_; }
    std::size_t size() const { return values_.size(); }
    double operator[](std::size_t i) const { return values_[i]; }
    double& operator[](std::size_t i) { return values_[i]; }

    double time() const { return time_; }
    void set_time(double t) { time_ = t; }

    /// Throws std::invalid_argument when a value is non-finite or a Dirichlet
    /// boundary sample is not exactly zero.
    void validate() const;

private:
    std::shared_ptr<const Grid> grid_;
    std::vector<double> values_;
    double time_ = 0.0;
};

/// y - x + j over lattice translates j, of minimal Euclidean length. Ties
/// go to the lexicographically smallest integer coordinates of j.
Vec minimal_image(const Vec& x, const Vec& y, const LatticeSpec& lattice);

/// Second-order finite-difference gradient at a sample. Central in the
/// interior, one-sided three-point where a neighbour is missing.
Vec gradient(const GridFunction& u, std::size_t idx);

/// Second-order finite-difference Hessian; exactly symmetric.
Mat hessian(const GridFunction& u, std::size_t idx);

/// sup u - inf u over the samples that belong to the domain.
double oscillation(const GridFunction& u);

}  // namespace gradest
