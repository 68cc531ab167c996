#pragma once

#include <vector>

#include <nlohmann/json.hpp>

#include "gradest/anisotropy.hpp"
#include "gradest/grid.hpp"

namespace gradest {

// Boundary geometry of rectangles and disks. A null anisotropy means the
// Euclidean distance in closed form; a model (even a Euclidean one) goes
// through the dual norm F* and, on disks, through boundary sampling.
//
// Curvatures are signed so that convex boundaries are positive: on a disk of
// radius R with Euclidean anisotropy every kappa_i is 1/R.

struct DistanceResult {
    double d = 0.0;
    Vec foot;    // nearest boundary point
    Vec normal;  // inward anisotropic unit normal at the foot, F*(normal) = 1
};

/// d(x) = inf { F*(x - y) : y on the boundary }. Throws std::invalid_argument
/// outside the open domain and NonSmoothPoint when the foot point is not unique.
DistanceResult anisotropic_distance(const AnisotropyModel* model, const DomainSpec& domain, const Vec& x);

struct CurvatureResult {
    double d = 0.0;
    std::vector<double> kappa;     // principal curvatures at the foot point
    double level_mean = 0.0;       // sum kappa_i / (1 - d kappa_i)
    double laplacian = 0.0;        // sum -kappa_i / (1 - d kappa_i), the Euclidean Laplacian of d
};

/// Throws NonSmoothPoint on the cut locus or beyond the focal distance.
CurvatureResult distance_laplacian_and_curvatures(const AnisotropyModel* model, const DomainSpec& domain,
                                                  const Vec& x);

/// Shape data at a boundary point y.
struct BoundaryPoint {
    Vec y;
    Vec normal;                 // inward anisotropic normal
    std::vector<double> kappa;  // eigenvalues of the shape operator
    double self_adjoint_residual = 0.0;
};

class BoundaryGeometry {
public:
    BoundaryGeometry(const AnisotropyModel* model, DomainSpec domain);

    /// Geometry at the boundary point nearest to y (disk) or on the face
    /// containing y (rectangle faces only; corners are rejected).
    BoundaryPoint at(const Vec& y) const;
    /// -min kappa over a boundary sample, clamped at 0.
    double lower_curvature_bound() const { return c1_; }
    nlohmann::ordered_json to_json() const;

private:
    const AnisotropyModel* model_;
    DomainSpec domain_;
    double c1_ = 0.0;
};

/// d at every domain sample of the grid; NaN where the point is not smooth
/// (cut locus) or on the boundary ring.
std::vector<double> distance_field(const AnisotropyModel* model, const Grid& grid);

}  // namespace gradest
