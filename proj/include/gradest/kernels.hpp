#pragma once

#include <cstdint>
#include <limits>
#include <vector>

#include "gradest/grid.hpp"

namespace gradest {

/// Distance bookkeeping for sample pairs. Every ordered pair (i, j) maps to an
/// offset code; on periodic cells the code is the wrapped index offset and the
/// distance uses the minimal image, on bounded domains the code is the signed
/// offset and the distance is Euclidean.
class PairGeometry {
public:
    explicit PairGeometry(const Grid& grid);

    const Grid& grid() const { return *grid_; }
    std::size_t code_count() const { return distance_.size(); }
    std::size_t code(std::size_t i, std::size_t j) const;
    double distance(std::size_t i, std::size_t j) const { return distance_[code(i, j)]; }
    const std::vector<double>& distances() const { return distance_; }
    double max_distance() const { return max_distance_; }

    /// Samples that belong to the domain, ascending.
    const std::vector<std::size_t>& domain_samples() const { return samples_; }

    /// Offsets (as code, index shift) with 0 < distance <= radius, one of each
    /// +/- pair.
    struct NearOffset {
        std::size_t code;
        Index shift;
    };
    std::vector<NearOffset> near_offsets(double radius) const;

private:
    const Grid* grid_;
    int dim_;
    bool periodic_;
    std::vector<int> ext_shape_;
    std::vector<std::size_t> ext_stride_;
    std::vector<std::vector<int>> coord_;  // coord_[axis][sample]
    std::vector<double> distance_;
    std::vector<std::size_t> samples_;
    double max_distance_ = 0.0;

    std::size_t code_of_shift(const Index& shift) const;
};

/// Running maximum over pairs. Ties resolve to the smaller (i, j) so serial
/// and threaded scans agree bit for bit.
struct PairMax {
    double value = -std::numeric_limits<double>::infinity();
    std::size_t i = 0;
    std::size_t j = 0;
    std::uint64_t pairs = 0;

    void offer(double v, std::size_t a, std::size_t b) {
        ++pairs;
        if (v > value || (v == value && (a < i || (a == i && b < j)))) {
            value = v;
            i = a;
            j = b;
        }
    }
    void merge(const PairMax& o) {
        const std::uint64_t total = pairs + o.pairs;
        offer(o.value, o.i, o.j);
        pairs = total;
    }
};

inline constexpr std::size_t kExhaustivePairLimit = std::size_t{1} << 13;
inline constexpr std::uint64_t kSampledPairBudget = 10'000'000;
inline constexpr double kNearBandSpacings = 4.0;

/// max over unordered pairs of |u_j - u_i| - penalty[code(i, j)]. The result
/// is oriented so that u[j] >= u[i].
PairMax scan_pairs_exhaustive(const GridFunction& u, const PairGeometry& geom, const std::vector<double>& penalty,
                              Exec exec);

/// Halton(2,3) sampled index pairs plus every pair closer than
/// kNearBandSpacings * min spacing.
PairMax scan_pairs_sampled(const GridFunction& u, const PairGeometry& geom, const std::vector<double>& penalty,
                           std::uint64_t budget, Exec exec);

/// Exhaustive below kExhaustivePairLimit domain samples, sampled above.
PairMax scan_pairs(const GridFunction& u, const PairGeometry& geom, const std::vector<double>& penalty, Exec exec);

/// max over i of |u[i + offset] - u[i]| for every offset code (exhaustive).
/// Pairs are visited as (lower index, higher index), so only those codes are filled.
std::vector<double> max_difference_by_offset(const GridFunction& u, const PairGeometry& geom, Exec exec);

double radical_inverse(std::uint64_t k, unsigned base);

}  // namespace gradest
