#pragma once

#include <stdexcept>
#include <string>

#include <Eigen/Dense>

namespace gradest {

// Spatial dimension n is at most 3; anisotropy lives on (n+1)-covectors.
inline constexpr int kMaxDim = 3;

using Vec = Eigen::Matrix<double, Eigen::Dynamic, 1, 0, kMaxDim + 1, 1>;
using Mat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, 0, kMaxDim + 1, kMaxDim + 1>;

/// Root of every error the library raises on its own account. Precondition
/// violations on arguments use std::invalid_argument / std::out_of_range.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// An iterative method failed to reach its tolerance.
class NumericalFailure : public Error {
public:
    using Error::Error;
};

/// Coefficient matrix has no ellipticity along the gradient direction.
class DegenerateAlongGradient : public Error {
public:
    using Error::Error;
};

/// Anisotropy fails the sampled strict-convexity test.
class NotStrictlyConvex : public Error {
public:
    using Error::Error;
};

/// The distance function is not smooth at the query point (foot point not unique).
class NonSmoothPoint : public Error {
public:
    using Error::Error;
};

/// Invalid or incompatible configuration.
class ConfigError : public Error {
public:
    using Error::Error;
};

/// Execution policy for kernels that have a serial reference and an OpenMP variant.
enum class Exec { Serial, Parallel };

}  // namespace gradest
