#include "gradest/kernels.hpp"

#include <algorithm>
#include <cmath>
#include <functional>

#include <omp.h>

namespace gradest {

PairGeometry::PairGeometry(const Grid& grid) : grid_(&grid), dim_(grid.dim()), periodic_(grid.periodic()) {
    const auto& shape = grid.shape();
    ext_shape_.resize(dim_);
    for (int k = 0; k < dim_; ++k) ext_shape_[k] = periodic_ ? shape[k] : 2 * shape[k] - 1;
    ext_stride_.assign(dim_, 1);
    for (int k = dim_ - 2; k >= 0; --k) ext_stride_[k] = ext_stride_[k + 1] * static_cast<std::size_t>(ext_shape_[k + 1]);
    const std::size_t codes = ext_stride_[0] * static_cast<std::size_t>(ext_shape_[0]);

    coord_.assign(dim_, std::vector<int>(grid.size()));
    for (std::size_t s = 0; s < grid.size(); ++s) {
        const Index i = grid.unravel(s);
        for (int k = 0; k < dim_; ++k) coord_[k][s] = i[k];
        if (grid.in_domain(s)) samples_.push_back(s);
    }

    Mat axes(dim_, dim_);
    for (int k = 0; k < dim_; ++k) axes.col(k) = grid.axis_vector(k);
    const LatticeSpec* lattice = std::get_if<LatticeSpec>(&grid.spec().shape);
    const Vec origin = Vec::Zero(dim_);

    distance_.resize(codes);
    for (std::size_t c = 0; c < codes; ++c) {
        std::size_t rem = c;
        Vec off(dim_);
        for (int k = 0; k < dim_; ++k) {
            int o = static_cast<int>(rem / ext_stride_[k]);
            rem %= ext_stride_[k];
            if (!periodic_) o -= shape[k] - 1;
            off[k] = o;
        }
        const Vec disp = axes * off;
        distance_[c] = periodic_ ? minimal_image(origin, disp, *lattice).norm() : disp.norm();
    }
    // Largest distance actually realised by two domain samples.
    if (periodic_) {
        max_distance_ = *std::max_element(distance_.begin(), distance_.end());
    } else if (grid.spec().is_disk()) {
        // extreme points of a masked disk are boundary samples
        std::vector<Vec> ring;
        for (std::size_t s : samples_)
            if (grid.kind(s) == NodeKind::Boundary) ring.push_back(grid.position(s));
        for (std::size_t a = 0; a < ring.size(); ++a)
            for (std::size_t b = a + 1; b < ring.size(); ++b)
                max_distance_ = std::max(max_distance_, (ring[b] - ring[a]).norm());
    } else {
        Vec lo = grid.position(samples_.front()), hi = lo;
        for (std::size_t s : samples_) {
            const Vec x = grid.position(s);
            lo = lo.cwiseMin(x);
            hi = hi.cwiseMax(x);
        }
        max_distance_ = (hi - lo).norm();
    }
}

std::size_t PairGeometry::code(std::size_t i, std::size_t j) const {
    std::size_t c = 0;
    const auto& shape = grid_->shape();
    for (int k = 0; k < dim_; ++k) {
        int o = coord_[k][j] - coord_[k][i];
        if (periodic_) {
            if (o < 0) o += shape[k];
        } else {
            o += shape[k] - 1;
        }
        c += static_cast<std::size_t>(o) * ext_stride_[k];
    }
    return c;
}

std::size_t PairGeometry::code_of_shift(const Index& shift) const {
    std::size_t c = 0;
    const auto& shape = grid_->shape();
    for (int k = 0; k < dim_; ++k) {
        int o = shift[k];
        if (periodic_) {
            o %= shape[k];
            if (o < 0) o += shape[k];
        } else {
            o += shape[k] - 1;
        }
        c += static_cast<std::size_t>(o) * ext_stride_[k];
    }
    return c;
}

std::vector<PairGeometry::NearOffset> PairGeometry::near_offsets(double radius) const {
    std::vector<NearOffset> out;
    const Mat& jinv = grid_->index_to_physical();
    Index span{0, 0, 0};
    for (int k = 0; k < dim_; ++k) span[k] = static_cast<int>(std::ceil(radius * jinv.row(k).norm())) + 1;
    Mat axes(dim_, dim_);
    for (int k = 0; k < dim_; ++k) axes.col(k) = grid_->axis_vector(k);

    Index shift{0, 0, 0};
    std::function<void(int)> rec = [&](int k) {
        if (k == dim_) {
            // keep the lexicographically positive representative
            int first = 0;
            for (int a = 0; a < dim_; ++a)
                if (shift[a] != 0) {
                    first = shift[a];
                    break;
                }
            if (first <= 0) return;
            Vec off(dim_);
            for (int a = 0; a < dim_; ++a) off[a] = shift[a];
            if ((axes * off).norm() <= radius * (1.0 + 1e-12)) out.push_back({code_of_shift(shift), shift});
            return;
        }
        for (int s = -span[k]; s <= span[k]; ++s) {
            shift[k] = s;
            rec(k + 1);
        }
        shift[k] = 0;
    };
    rec(0);
    return out;
}

// ---------------------------------------------------------------------------

double radical_inverse(std::uint64_t k, unsigned base) {
    double inv = 1.0 / base, f = inv, r = 0.0;
    while (k > 0) {
        r += static_cast<double>(k % base) * f;
        k /= base;
        f *= inv;
    }
    return r;
}

namespace {

inline void offer_pair(PairMax& best, const std::vector<double>& u, std::size_t a, std::size_t b, double pen) {
    const double d = u[b] - u[a];
    if (d >= 0.0) best.offer(d - pen, a, b);
    else best.offer(-d - pen, b, a);
}

}  // namespace

PairMax scan_pairs_exhaustive(const GridFunction& u, const PairGeometry& geom, const std::vector<double>& penalty,
                              Exec exec) {
    const auto& samples = geom.domain_samples();
    const std::vector<double> values(u.values().begin(), u.values().end());
    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(samples.size());
    PairMax result;
    if (exec == Exec::Serial) {
        for (std::ptrdiff_t a = 0; a < count; ++a)
            for (std::ptrdiff_t b = a + 1; b < count; ++b)
                offer_pair(result, values, samples[a], samples[b], penalty[geom.code(samples[a], samples[b])]);
        return result;
    }
#pragma omp parallel
    {
        PairMax local;
#pragma omp for schedule(dynamic, 16) nowait
        for (std::ptrdiff_t a = 0; a < count; ++a)
            for (std::ptrdiff_t b = a + 1; b < count; ++b)
                offer_pair(local, values, samples[a], samples[b], penalty[geom.code(samples[a], samples[b])]);
#pragma omp critical(gradest_pair_merge)
        result.merge(local);
    }
    return result;
}

PairMax scan_pairs_sampled(const GridFunction& u, const PairGeometry& geom, const std::vector<double>& penalty,
                           std::uint64_t budget, Exec exec) {
    const auto& samples = geom.domain_samples();
    const std::vector<double> values(u.values().begin(), u.values().end());
    const double m = static_cast<double>(samples.size());
    const Grid& g = geom.grid();
    const auto near = geom.near_offsets(kNearBandSpacings * g.min_spacing());
    const std::ptrdiff_t nsamples = static_cast<std::ptrdiff_t>(samples.size());
    const std::ptrdiff_t nbudget = static_cast<std::ptrdiff_t>(budget);

    auto sampled_body = [&](PairMax& best, std::ptrdiff_t k) {
        const auto q = static_cast<std::uint64_t>(k) + 1;
        auto a = static_cast<std::size_t>(radical_inverse(q, 2) * m);
        auto b = static_cast<std::size_t>(radical_inverse(q, 3) * m);
        if (a == b) return;
        a = samples[a];
        b = samples[b];
        if (a > b) std::swap(a, b);
        offer_pair(best, values, a, b, penalty[geom.code(a, b)]);
    };
    auto near_body = [&](PairMax& best, std::ptrdiff_t s) {
        const std::size_t a = samples[s];
        for (const auto& off : near) {
            std::ptrdiff_t b = static_cast<std::ptrdiff_t>(a);
            for (int k = 0; k < g.dim() && b >= 0; ++k)
                if (off.shift[k] != 0) b = g.neighbor(static_cast<std::size_t>(b), k, off.shift[k]);
            if (b < 0 || !g.in_domain(static_cast<std::size_t>(b))) continue;
            const auto bb = static_cast<std::size_t>(b);
            if (bb == a) continue;
            offer_pair(best, values, std::min(a, bb), std::max(a, bb), penalty[off.code]);
        }
    };

    PairMax result;
    if (exec == Exec::Serial) {
        for (std::ptrdiff_t k = 0; k < nbudget; ++k) sampled_body(result, k);
        for (std::ptrdiff_t s = 0; s < nsamples; ++s) near_body(result, s);
        return result;
    }
#pragma omp parallel
    {
        PairMax local;
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t k = 0; k < nbudget; ++k) sampled_body(local, k);
#pragma omp for schedule(static) nowait
        for (std::ptrdiff_t s = 0; s < nsamples; ++s) near_body(local, s);
#pragma omp critical(gradest_pair_merge)
        result.merge(local);
    }
    return result;
}

PairMax scan_pairs(const GridFunction& u, const PairGeometry& geom, const std::vector<double>& penalty, Exec exec) {
    if (penalty.size() != geom.code_count()) throw std::invalid_argument("penalty table does not match pair geometry");
    if (geom.domain_samples().size() <= kExhaustivePairLimit) return scan_pairs_exhaustive(u, geom, penalty, exec);
    return scan_pairs_sampled(u, geom, penalty, kSampledPairBudget, exec);
}

std::vector<double> max_difference_by_offset(const GridFunction& u, const PairGeometry& geom, Exec exec) {
    const auto& samples = geom.domain_samples();
    const std::vector<double> values(u.values().begin(), u.values().end());
    const std::size_t codes = geom.code_count();
    const std::ptrdiff_t count = static_cast<std::ptrdiff_t>(samples.size());
    std::vector<double> out(codes, 0.0);
    if (exec == Exec::Serial) {
        for (std::ptrdiff_t a = 0; a < count; ++a)
            for (std::ptrdiff_t b = a + 1; b < count; ++b) {
                const std::size_t c = geom.code(samples[a], samples[b]);
                out[c] = std::max(out[c], std::abs(values[samples[b]] - values[samples[a]]));
            }
        return out;
    }
#pragma omp parallel
    {
        std::vector<double> local(codes, 0.0);
#pragma omp for schedule(dynamic, 16) nowait
        for (std::ptrdiff_t a = 0; a < count; ++a)
            for (std::ptrdiff_t b = a + 1; b < count; ++b) {
                const std::size_t c = geom.code(samples[a], samples[b]);
                local[c] = std::max(local[c], std::abs(values[samples[b]] - values[samples[a]]));
            }
#pragma omp critical(gradest_offset_merge)
        for (std::size_t c = 0; c < codes; ++c) out[c] = std::max(out[c], local[c]);
    }
    return out;
}

}  // namespace gradest
