#include "gradest/grid.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <limits>
#include <sstream>

namespace gradest {

Mat LatticeSpec::generator_matrix() const {
    const int n = dim();
    Mat g(n, n);
    for (int k = 0; k < n; ++k) g.col(k) = generators[k];
    return g;
}

void LatticeSpec::validate() const {
    const int n = dim();
    if (n < 1 || n > kMaxDim) throw std::invalid_argument("lattice dimension must be in [1, 3]");
    if (static_cast<int>(resolution.size()) != n)
        throw std::invalid_argument("lattice needs one resolution per generator");
    double norm_product = 1.0;
    for (int k = 0; k < n; ++k) {
        if (generators[k].size() != n) throw std::invalid_argument("generator length must equal dimension");
        if (!generators[k].allFinite()) throw std::invalid_argument("generator must be finite");
        norm_product *= generators[k].norm();
        if (resolution[k] < 8) throw std::invalid_argument("lattice resolution must be >= 8");
    }
    const double det = generator_matrix().determinant();
    if (!(std::abs(det) > 1e-12 * norm_product))
        throw std::invalid_argument("lattice generators are linearly dependent");
}

LatticeSpec LatticeSpec::unit_cube(int n, int resolution) {
    LatticeSpec l;
    for (int k = 0; k < n; ++k) {
        Vec v = Vec::Zero(n);
        v[k] = 1.0;
        l.generators.push_back(v);
        l.resolution.push_back(resolution);
    }
    return l;
}

std::string to_string(BoundaryCondition bc) {
    switch (bc) {
        case BoundaryCondition::Periodic: return "periodic";
        case BoundaryCondition::Dirichlet: return "dirichlet";
        case BoundaryCondition::Neumann: return "neumann";
    }
    return "unknown";
}

int DomainSpec::dim() const {
    return std::visit(
        [](const auto& s) -> int {
            using T = std::decay_t<decltype(s)>;
            if constexpr (std::is_same_v<T, LatticeSpec>) return s.dim();
            else if constexpr (std::is_same_v<T, RectangleSpec>) return static_cast<int>(s.lower.size());
            else return static_cast<int>(s.center.size());
        },
        shape);
}

void DomainSpec::validate() const {
    if (auto* l = std::get_if<LatticeSpec>(&shape)) {
        l->validate();
        if (bc != BoundaryCondition::Periodic)
            throw std::invalid_argument("periodic cells only accept the periodic boundary condition");
        return;
    }
    if (bc == BoundaryCondition::Periodic)
        throw std::invalid_argument("periodic boundary condition requires a periodic cell");
    if (auto* r = std::get_if<RectangleSpec>(&shape)) {
        const int n = static_cast<int>(r->lower.size());
        if (n < 1 || n > kMaxDim || r->upper.size() != n || static_cast<int>(r->resolution.size()) != n)
            throw std::invalid_argument("rectangle corners and resolutions must share dimension 1..3");
        for (int k = 0; k < n; ++k) {
            if (!(r->upper[k] > r->lower[k])) throw std::invalid_argument("rectangle side lengths must be positive");
            if (r->resolution[k] < 8) throw std::invalid_argument("rectangle resolution must be >= 8");
        }
        return;
    }
    const auto& d = std::get<DiskSpec>(shape);
    const int n = static_cast<int>(d.center.size());
    if (n < 1 || n > kMaxDim) throw std::invalid_argument("disk dimension must be in [1, 3]");
    if (!(d.radius > 0.0)) throw std::invalid_argument("disk radius must be positive");
    if (d.resolution < 8) throw std::invalid_argument("disk resolution must be >= 8");
}

double DomainSpec::diameter() const {
    if (auto* r = std::get_if<RectangleSpec>(&shape)) return (r->upper - r->lower).norm();
    if (auto* d = std::get_if<DiskSpec>(&shape)) return 2.0 * d->radius;
    // Largest minimal-image length = covering radius of the lattice, attained at a
    // vertex of the Voronoi cell of 0: a circumcentre of 0 and n lattice points.
    const auto& l = std::get<LatticeSpec>(shape);
    const int n = l.dim();
    const Mat g = l.generator_matrix();
    std::vector<Vec> pts;
    const int span = 2, width = 2 * span + 1;
    const int total = static_cast<int>(std::pow(width, n));
    for (int flat = 0; flat < total; ++flat) {
        int rem = flat;
        Vec j(n);
        for (int a = 0; a < n; ++a) {
            j[a] = rem % width - span;
            rem /= width;
        }
        if (j.squaredNorm() > 0) pts.push_back(g * j);
    }
    double best = 0.0;
    std::vector<int> pick(n);
    auto try_vertex = [&] {
        Mat A(n, n);
        Vec rhs(n);
        for (int a = 0; a < n; ++a) {
            A.row(a) = 2.0 * pts[pick[a]].transpose();
            rhs[a] = pts[pick[a]].squaredNorm();
        }
        const Eigen::FullPivLU<Mat> lu(A);
        if (!lu.isInvertible()) return;
        const Vec c = lu.solve(rhs);
        const double r2 = c.squaredNorm();
        if (r2 <= best * best) return;
        for (const Vec& q : pts)
            if ((c - q).squaredNorm() < r2 * (1.0 - 1e-12)) return;
        best = std::sqrt(r2);
    };
    const int m = static_cast<int>(pts.size());
    std::function<void(int, int)> choose = [&](int depth, int from) {
        if (depth == n) return try_vertex();
        for (int k = from; k < m; ++k) {
            pick[depth] = k;
            choose(depth + 1, k + 1);
        }
    };
    choose(0, 0);
    return best;
}

DomainSpec DomainSpec::periodic(LatticeSpec lattice) {
    DomainSpec d{std::move(lattice), BoundaryCondition::Periodic};
    d.validate();
    return d;
}

DomainSpec DomainSpec::rectangle(Vec lower, Vec upper, std::vector<int> resolution, BoundaryCondition bc) {
    DomainSpec d{RectangleSpec{std::move(lower), std::move(upper), std::move(resolution)}, bc};
    d.validate();
    return d;
}

DomainSpec DomainSpec::disk(Vec center, double radius, int resolution, BoundaryCondition bc) {
    DomainSpec d{DiskSpec{std::move(center), radius, resolution}, bc};
    d.validate();
    return d;
}

// ---------------------------------------------------------------------------

namespace {
constexpr int kDiskPad = 2;
}

Grid::Grid(DomainSpec spec) : spec_(std::move(spec)) {
    spec_.validate();
    dim_ = spec_.dim();
    shape_.assign(dim_, 0);
    axis_vectors_ = Mat::Zero(dim_, dim_);
    origin_ = Vec::Zero(dim_);

    if (auto* l = std::get_if<LatticeSpec>(&spec_.shape)) {
        for (int k = 0; k < dim_; ++k) {
            shape_[k] = l->resolution[k];
            axis_vectors_.col(k) = l->generators[k] / l->resolution[k];
        }
    } else if (auto* r = std::get_if<RectangleSpec>(&spec_.shape)) {
        origin_ = r->lower;
        for (int k = 0; k < dim_; ++k) {
            shape_[k] = r->resolution[k] + 1;
            axis_vectors_(k, k) = (r->upper[k] - r->lower[k]) / r->resolution[k];
        }
    } else {
        const auto& d = std::get<DiskSpec>(spec_.shape);
        const double h = 2.0 * d.radius / d.resolution;
        for (int k = 0; k < dim_; ++k) {
            shape_[k] = d.resolution + 1 + 2 * kDiskPad;
            axis_vectors_(k, k) = h;
            origin_[k] = d.center[k] - d.radius - kDiskPad * h;
        }
    }

    strides_.assign(dim_, 1);
    for (int k = dim_ - 2; k >= 0; --k) strides_[k] = strides_[k + 1] * static_cast<std::size_t>(shape_[k + 1]);
    size_ = strides_[0] * static_cast<std::size_t>(shape_[0]);
    jinv_ = axis_vectors_.inverse();
    min_spacing_ = std::numeric_limits<double>::infinity();
    for (int k = 0; k < dim_; ++k) min_spacing_ = std::min(min_spacing_, axis_vectors_.col(k).norm());
    classify_nodes();
}

std::size_t Grid::ravel(const Index& i) const {
    std::size_t idx = 0;
    for (int k = 0; k < dim_; ++k) {
        if (i[k] < 0 || i[k] >= shape_[k]) throw std::out_of_range("grid index out of range");
        idx += static_cast<std::size_t>(i[k]) * strides_[k];
    }
    return idx;
}

Index Grid::unravel(std::size_t idx) const {
    if (idx >= size_) throw std::out_of_range("grid index out of range");
    Index i{0, 0, 0};
    for (int k = 0; k < dim_; ++k) {
        i[k] = static_cast<int>(idx / strides_[k]);
        idx %= strides_[k];
    }
    return i;
}

Vec Grid::position(std::size_t idx) const {
    const Index i = unravel(idx);
    Vec x = origin_;
    for (int k = 0; k < dim_; ++k) x += static_cast<double>(i[k]) * axis_vectors_.col(k);
    return x;
}

std::ptrdiff_t Grid::neighbor(std::size_t idx, int axis, int delta) const {
    const int n = shape_[axis];
    const int ik = static_cast<int>((idx / strides_[axis]) % static_cast<std::size_t>(n));
    int jk = ik + delta;
    if (periodic()) {
        jk %= n;
        if (jk < 0) jk += n;
    } else if (jk < 0 || jk >= n) {
        return -1;
    }
    return static_cast<std::ptrdiff_t>(idx) + static_cast<std::ptrdiff_t>(jk - ik) * static_cast<std::ptrdiff_t>(strides_[axis]);
}

void Grid::classify_nodes() {
    kind_.assign(size_, NodeKind::Interior);
    neumann_source_.assign(size_, -1);
    if (periodic()) return;

    if (auto* r = std::get_if<RectangleSpec>(&spec_.shape)) {
        (void)r;
        for (std::size_t idx = 0; idx < size_; ++idx) {
            Index i = unravel(idx);
            bool face = false;
            for (int k = 0; k < dim_; ++k) {
                if (i[k] == 0 || i[k] == shape_[k] - 1) {
                    face = true;
                    i[k] = std::clamp(i[k], 1, shape_[k] - 2);
                }
            }
            if (face) {
                kind_[idx] = NodeKind::Boundary;
                neumann_source_[idx] = static_cast<std::ptrdiff_t>(ravel(i));
            }
        }
        return;
    }

    const auto& d = std::get<DiskSpec>(spec_.shape);
    const double h = axis_vectors_(0, 0);
    std::vector<char> inside(size_, 0);
    for (std::size_t idx = 0; idx < size_; ++idx)
        inside[idx] = (position(idx) - d.center).norm() < d.radius - 1e-12 * h;

    for (std::size_t idx = 0; idx < size_; ++idx) {
        if (inside[idx]) continue;
        // Boundary if any Chebyshev neighbour is inside (the Hessian uses corners).
        const Index i = unravel(idx);
        bool touches = false;
        const int cube = static_cast<int>(std::pow(3, dim_));
        for (int c = 0; c < cube && !touches; ++c) {
            int rem = c;
            Index j = i;
            bool valid = true;
            for (int k = 0; k < dim_; ++k) {
                j[k] += rem % 3 - 1;
                rem /= 3;
                if (j[k] < 0 || j[k] >= shape_[k]) valid = false;
            }
            if (valid && inside[ravel(j)]) touches = true;
        }
        kind_[idx] = touches ? NodeKind::Boundary : NodeKind::Exterior;
    }

    // Neumann source: interior sample nearest to the mirror image across the circle.
    for (std::size_t idx = 0; idx < size_; ++idx) {
        if (kind_[idx] != NodeKind::Boundary) continue;
        const Vec x = position(idx);
        const Vec rel = x - d.center;
        const double r = rel.norm();
        const Vec mirror = d.center + rel * ((2.0 * d.radius - r) / r);
        Index base{0, 0, 0};
        for (int k = 0; k < dim_; ++k) base[k] = static_cast<int>(std::lround((mirror[k] - origin_[k]) / h));
        double best = std::numeric_limits<double>::infinity();
        std::ptrdiff_t best_idx = -1;
        const int span = 5;
        const int cube = static_cast<int>(std::pow(span, dim_));
        for (int c = 0; c < cube; ++c) {
            int rem = c;
            Index j = base;
            bool valid = true;
            for (int k = 0; k < dim_; ++k) {
                j[k] += rem % span - span / 2;
                rem /= span;
                if (j[k] < 0 || j[k] >= shape_[k]) valid = false;
            }
            if (!valid) continue;
            const std::size_t jdx = ravel(j);
            if (!inside[jdx]) continue;
            const double dist = (position(jdx) - mirror).norm();
            if (dist < best) {
                best = dist;
                best_idx = static_cast<std::ptrdiff_t>(jdx);
            }
        }
        neumann_source_[idx] = best_idx;
    }
}

// ---------------------------------------------------------------------------

GridFunction::GridFunction(std::shared_ptr<const Grid> grid, double time)
    : grid_(std::move(grid)), values_(grid_->size(), 0.0), time_(time) {}

GridFunction::GridFunction(std::shared_ptr<const Grid> grid, std::vector<double> values, double time)
    : grid_(std::move(grid)), values_(std::move(values)), time_(time) {
    if (values_.size() != grid_->size()) throw std::invalid_argument("value count does not match grid size");
}

void GridFunction::validate() const {
    if (!(time_ >= 0.0)) throw std::invalid_argument("time stamp must be >= 0");
    const bool dirichlet = grid_->bc() == BoundaryCondition::Dirichlet;
    for (std::size_t i = 0; i < values_.size(); ++i) {
        if (!std::isfinite(values_[i])) throw std::invalid_argument("grid function has a non-finite value");
        if (dirichlet && grid_->kind(i) != NodeKind::Interior && values_[i] != 0.0) {
            std::ostringstream os;
            os << "Dirichlet boundary sample " << i << " is " << values_[i] << ", expected 0";
            throw std::invalid_argument(os.str());
        }
    }
}

// ---------------------------------------------------------------------------

Vec minimal_image(const Vec& x, const Vec& y, const LatticeSpec& lattice) {
    const int n = lattice.dim();
    const Mat g = lattice.generator_matrix();
    const Vec d = y - x;
    const Vec frac = g.partialPivLu().solve(d);
    Index base{0, 0, 0};
    for (int k = 0; k < n; ++k) base[k] = -static_cast<int>(std::lround(frac[k]));

    // Search radius 2 around the rounded translate covers moderately skewed cells.
    const int span = 5;
    const int cube = static_cast<int>(std::pow(span, n));
    double best_len = std::numeric_limits<double>::infinity();
    Index best_j{0, 0, 0};
    Vec best = d;
    // Enumerate in lexicographic order so the first strict minimum wins ties.
    for (int c = 0; c < cube; ++c) {
        int rem = c;
        Index j = base;
        for (int k = n - 1; k >= 0; --k) {
            j[k] += rem % span - span / 2;
            rem /= span;
        }
        Vec cand = d;
        for (int k = 0; k < n; ++k) cand += static_cast<double>(j[k]) * lattice.generators[k];
        const double len = cand.norm();
        const double tie = 1e-12 * std::max(1.0, len);
        if (len < best_len - tie) {
            best_len = len;
            best = cand;
            best_j = j;
        } else if (std::abs(len - best_len) <= tie &&
                   std::lexicographical_compare(j.begin(), j.begin() + n, best_j.begin(), best_j.begin() + n)) {
            best = cand;
            best_j = j;
        }
    }
    return best;
}

// ---------------------------------------------------------------------------

namespace {

bool usable(const Grid& g, std::ptrdiff_t idx) { return idx >= 0 && g.in_domain(static_cast<std::size_t>(idx)); }

// First derivative along an index axis (per unit index step).
double index_derivative(const GridFunction& u, std::size_t idx, int axis) {
    const Grid& g = u.grid();
    const auto p1 = g.neighbor(idx, axis, 1);
    const auto m1 = g.neighbor(idx, axis, -1);
    if (usable(g, p1) && usable(g, m1)) return 0.5 * (u[p1] - u[m1]);
    const auto p2 = g.neighbor(idx, axis, 2);
    if (usable(g, p1) && usable(g, p2)) return 0.5 * (-3.0 * u[idx] + 4.0 * u[p1] - u[p2]);
    const auto m2 = g.neighbor(idx, axis, -2);
    if (usable(g, m1) && usable(g, m2)) return 0.5 * (3.0 * u[idx] - 4.0 * u[m1] + u[m2]);
    throw std::out_of_range("no finite-difference stencil fits at this sample");
}

double index_second_derivative(const GridFunction& u, std::size_t idx, int axis) {
    const Grid& g = u.grid();
    const auto p1 = g.neighbor(idx, axis, 1);
    const auto m1 = g.neighbor(idx, axis, -1);
    if (usable(g, p1) && usable(g, m1)) return u[p1] - 2.0 * u[idx] + u[m1];
    const auto p2 = g.neighbor(idx, axis, 2);
    const auto p3 = g.neighbor(idx, axis, 3);
    if (usable(g, p1) && usable(g, p2) && usable(g, p3)) return 2.0 * u[idx] - 5.0 * u[p1] + 4.0 * u[p2] - u[p3];
    const auto m2 = g.neighbor(idx, axis, -2);
    const auto m3 = g.neighbor(idx, axis, -3);
    if (usable(g, m1) && usable(g, m2) && usable(g, m3)) return 2.0 * u[idx] - 5.0 * u[m1] + 4.0 * u[m2] - u[m3];
    throw std::out_of_range("no second-difference stencil fits at this sample");
}

double index_cross_derivative(const GridFunction& u, std::size_t idx, int k, int l) {
    const Grid& g = u.grid();
    const auto kp = g.neighbor(idx, k, 1);
    const auto km = g.neighbor(idx, k, -1);
    if (kp >= 0 && km >= 0) {
        const auto pp = g.neighbor(kp, l, 1), pm = g.neighbor(kp, l, -1);
        const auto mp = g.neighbor(km, l, 1), mm = g.neighbor(km, l, -1);
        if (usable(g, pp) && usable(g, pm) && usable(g, mp) && usable(g, mm))
            return 0.25 * (u[pp] - u[pm] - u[mp] + u[mm]);
    }
    // Difference along k of the l-derivative, one-sided where needed.
    if (usable(g, kp) && usable(g, km))
        return 0.5 * (index_derivative(u, kp, l) - index_derivative(u, km, l));
    const auto kp2 = g.neighbor(idx, k, 2);
    if (usable(g, kp) && usable(g, kp2))
        return 0.5 * (-3.0 * index_derivative(u, idx, l) + 4.0 * index_derivative(u, kp, l) -
                      index_derivative(u, kp2, l));
    const auto km2 = g.neighbor(idx, k, -2);
    if (usable(g, km) && usable(g, km2))
        return 0.5 * (3.0 * index_derivative(u, idx, l) - 4.0 * index_derivative(u, km, l) +
                      index_derivative(u, km2, l));
    throw std::out_of_range("no cross-derivative stencil fits at this sample");
}

void check_index(const GridFunction& u, std::size_t idx) {
    if (idx >= u.size()) throw std::out_of_range("grid index out of range");
    if (!u.grid().in_domain(idx)) throw std::out_of_range("sample lies outside the domain mask");
}

}  // namespace

Vec gradient(const GridFunction& u, std::size_t idx) {
    check_index(u, idx);
    const int n = u.grid().dim();
    Vec gi(n);
    for (int k = 0; k < n; ++k) gi[k] = index_derivative(u, idx, k);
    return u.grid().index_to_physical().transpose() * gi;
}

Mat hessian(const GridFunction& u, std::size_t idx) {
    check_index(u, idx);
    const int n = u.grid().dim();
    Mat hi(n, n);
    for (int k = 0; k < n; ++k) {
        hi(k, k) = index_second_derivative(u, idx, k);
        for (int l = k + 1; l < n; ++l) {
            const double c = 0.5 * (index_cross_derivative(u, idx, k, l) + index_cross_derivative(u, idx, l, k));
            hi(k, l) = c;
            hi(l, k) = c;
        }
    }
    const Mat& j = u.grid().index_to_physical();
    Mat h = j.transpose() * hi * j;
    return 0.5 * (h + h.transpose());
}

double oscillation(const GridFunction& u) {
    double lo = std::numeric_limits<double>::infinity();
    double hi = -lo;
    const Grid& g = u.grid();
    for (std::size_t i = 0; i < u.size(); ++i) {
        if (!g.in_domain(i)) continue;
        lo = std::min(lo, u[i]);
        hi = std::max(hi, u[i]);
    }
    return hi >= lo ? hi - lo : 0.0;
}

}  // namespace gradest
