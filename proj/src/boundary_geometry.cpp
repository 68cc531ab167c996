#include "gradest/boundary_geometry.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

namespace gradest {

namespace {

constexpr double kTieTol = 1e-10;

void require_dim(const DomainSpec& domain, const Vec& x) {
    if (x.size() != domain.dim()) throw std::invalid_argument("point dimension does not match the domain");
    if (!x.allFinite()) throw std::invalid_argument("point must be finite");
}

void require_planar_model(const AnisotropyModel* model, const DomainSpec& domain) {
    if (model && model->dim() != domain.dim())
        throw std::invalid_argument("anisotropy dimension does not match the domain");
    if (model && domain.is_disk() && domain.dim() != 2)
        throw std::invalid_argument("anisotropic distance on balls is implemented for n = 2");
}

double dual(const AnisotropyModel* model, const Vec& v) { return model ? dual_norm(*model, v) : v.norm(); }

Vec inward_normal(const AnisotropyModel* model, const Vec& nu) {
    return model ? Vec(model->Ftilde_gradient(nu)) : nu;
}

Vec circle_point(const DiskSpec& d, double th) {
    Vec y(2);
    y << d.center[0] + d.radius * std::cos(th), d.center[1] + d.radius * std::sin(th);
    return y;
}

struct DiskFoot {
    double d;
    double theta;
};

template <class Fn>
std::pair<double, double> golden(Fn&& f, double a, double b, double tol) {
    const double g = 0.6180339887498949;
    double c = b - g * (b - a), e = a + g * (b - a);
    double fc = f(c), fe = f(e);
    while (b - a > tol) {
        if (fc < fe) {
            b = e;
            e = c;
            fe = fc;
            c = b - g * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = e;
            fc = fe;
            e = a + g * (b - a);
            fe = f(e);
        }
    }
    const double x = 0.5 * (a + b);
    return {f(x), x};
}

DiskFoot disk_foot(const AnisotropyModel* model, const DiskSpec& disk, const Vec& x) {
    auto f = [&](double th) { return dual(model, x - circle_point(disk, th)); };
    int count = 1024;
    std::vector<double> vals;
    double prev = std::numeric_limits<double>::infinity();
    for (;;) {
        vals.resize(count);
        for (int k = 0; k < count; ++k) vals[k] = f(2.0 * std::numbers::pi * k / count);
        const double m = *std::min_element(vals.begin(), vals.end());
        if (std::abs(m - prev) < 1e-6 || count >= (1 << 16)) break;
        prev = m;
        count *= 2;
    }
    const double dth = 2.0 * std::numbers::pi / count;
    const double vmin = *std::min_element(vals.begin(), vals.end());
    const double vmax = *std::max_element(vals.begin(), vals.end());
    if (vmax - vmin <= kTieTol * std::max(vmax, 1e-300))
        throw NonSmoothPoint("every boundary point is equidistant");

    // refine every discrete local minimum that could be global
    std::vector<std::pair<double, double>> minima;  // (value, theta)
    for (int k = 0; k < count; ++k) {
        const double l = vals[(k + count - 1) % count], r = vals[(k + 1) % count];
        if (vals[k] <= l && vals[k] <= r && vals[k] <= vmin + 0.05 * (vmax - vmin)) {
            const double th = dth * k;
            minima.push_back(golden(f, th - dth, th + dth, 1e-13));
        }
    }
    std::sort(minima.begin(), minima.end());
    const auto best = minima.front();
    for (std::size_t k = 1; k < minima.size(); ++k) {
        double sep = std::remainder(minima[k].second - best.second, 2.0 * std::numbers::pi);
        if (std::abs(sep) > 2.0 * dth && minima[k].first - best.first <= kTieTol * best.first)
            throw NonSmoothPoint("foot point is not unique");
    }
    int near = 0;
    for (double v : vals)
        if (v - best.first <= kTieTol * best.first) ++near;
    if (near > count / 4) throw NonSmoothPoint("foot point is not unique");
    return {best.first, best.second};
}

}  // namespace

DistanceResult anisotropic_distance(const AnisotropyModel* model, const DomainSpec& domain, const Vec& x) {
    require_dim(domain, x);
    require_planar_model(model, domain);
    const int n = domain.dim();
    if (const auto* disk = std::get_if<DiskSpec>(&domain.shape)) {
        const Vec rel = x - disk->center;
        const double r = rel.norm();
        if (!(r < disk->radius)) throw std::invalid_argument("point lies outside the open disk");
        if (!model) {
            if (r <= 1e-12 * disk->radius) throw NonSmoothPoint("the centre is equidistant from the boundary");
            const Vec out = rel / r;
            return {disk->radius - r, Vec(disk->center + disk->radius * out), Vec(-out)};
        }
        const auto foot = disk_foot(model, *disk, x);
        const Vec y = circle_point(*disk, foot.theta);
        const Vec nu = (disk->center - y) / disk->radius;
        return {foot.d, y, inward_normal(model, nu)};
    }
    if (const auto* rect = std::get_if<RectangleSpec>(&domain.shape)) {
        for (int k = 0; k < n; ++k)
            if (!(x[k] > rect->lower[k] && x[k] < rect->upper[k]))
                throw std::invalid_argument("point lies outside the open rectangle");
        double best = std::numeric_limits<double>::infinity(), second = best;
        int face = -1;
        double sign = 1.0;
        for (int k = 0; k < n; ++k) {
            for (double s : {1.0, -1.0}) {
                Vec e = Vec::Zero(n);
                e[k] = s;
                const double gap = s > 0 ? x[k] - rect->lower[k] : rect->upper[k] - x[k];
                const double d = model ? gap / model->Ftilde(e) : gap;
                if (d < best) {
                    second = best;
                    best = d;
                    face = k;
                    sign = s;
                } else if (d < second) {
                    second = d;
                }
            }
        }
        if (second - best <= 1e-12 * std::max(best, 1e-300)) throw NonSmoothPoint("two faces are equidistant");
        Vec e = Vec::Zero(n);
        e[face] = sign;
        Vec foot = x;
        foot[face] = sign > 0 ? rect->lower[face] : rect->upper[face];
        Vec nrm = inward_normal(model, e);
        if (model) {
            // foot of the anisotropic segment along the normal direction
            foot = x - best * nrm;
        }
        return {best, foot, nrm};
    }
    throw std::invalid_argument("distance to the boundary is undefined on a periodic cell");
}

BoundaryGeometry::BoundaryGeometry(const AnisotropyModel* model, DomainSpec domain)
    : model_(model), domain_(std::move(domain)) {
    domain_.validate();
    require_planar_model(model_, domain_);
    if (domain_.is_periodic()) throw std::invalid_argument("periodic cells have no boundary");
    double kmin = 0.0;
    if (const auto* disk = std::get_if<DiskSpec>(&domain_.shape)) {
        if (domain_.dim() == 2) {
            for (int k = 0; k < 256; ++k) {
                const auto bp = at(circle_point(*disk, 2.0 * std::numbers::pi * k / 256));
                for (double kap : bp.kappa) kmin = std::min(kmin, kap);
            }
        }
    }
    c1_ = std::max(0.0, -kmin);
}

BoundaryPoint BoundaryGeometry::at(const Vec& y) const {
    require_dim(domain_, y);
    const int n = domain_.dim();
    BoundaryPoint bp;
    if (const auto* disk = std::get_if<DiskSpec>(&domain_.shape)) {
        const Vec rel = y - disk->center;
        if (rel.norm() == 0.0) throw std::invalid_argument("boundary query at the centre");
        const Vec nu = -rel.normalized();
        bp.y = disk->center - disk->radius * nu;
        bp.normal = inward_normal(model_, nu);
        if (!model_) {
            bp.kappa.assign(n - 1, 1.0 / disk->radius);
            return bp;
        }
        Vec t(2);
        t << -nu[1], nu[0];
        const double kap = t.dot(model_->Ftilde_hessian(nu) * t) / disk->radius;
        bp.kappa = {kap};
        return bp;
    }
    const auto& rect = std::get<RectangleSpec>(domain_.shape);
    int face = -1, hits = 0;
    double sign = 1.0;
    for (int k = 0; k < n; ++k) {
        const double span = rect.upper[k] - rect.lower[k];
        if (std::abs(y[k] - rect.lower[k]) <= 1e-12 * span) {
            face = k;
            sign = 1.0;
            ++hits;
        } else if (std::abs(y[k] - rect.upper[k]) <= 1e-12 * span) {
            face = k;
            sign = -1.0;
            ++hits;
        }
    }
    if (hits != 1) throw std::invalid_argument("point is not on the relative interior of a face");
    Vec e = Vec::Zero(n);
    e[face] = sign;
    bp.y = y;
    bp.normal = inward_normal(model_, e);
    bp.kappa.assign(n - 1, 0.0);
    return bp;
}

nlohmann::ordered_json BoundaryGeometry::to_json() const {
    return {{"domain", domain_.is_disk() ? "disk" : "rectangle"},
            {"anisotropy", model_ ? model_->describe() : "euclidean-closed-form"},
            {"lower_curvature_bound", c1_}};
}

CurvatureResult distance_laplacian_and_curvatures(const AnisotropyModel* model, const DomainSpec& domain,
                                                  const Vec& x) {
    const auto dr = anisotropic_distance(model, domain, x);
    BoundaryGeometry geo(model, domain);
    CurvatureResult out;
    out.d = dr.d;
    out.kappa = geo.at(dr.foot).kappa;
    for (double k : out.kappa) {
        const double denom = 1.0 - dr.d * k;
        if (!(denom > 1e-12)) throw NonSmoothPoint("point lies beyond the focal distance");
        out.level_mean += k / denom;
        out.laplacian += -k / denom;
    }
    return out;
}

std::vector<double> distance_field(const AnisotropyModel* model, const Grid& grid) {
    std::vector<double> d(grid.size(), std::numeric_limits<double>::quiet_NaN());
    const DomainSpec& spec = grid.spec();
    for (std::size_t i = 0; i < grid.size(); ++i) {
        if (grid.kind(i) != NodeKind::Interior) continue;
        try {
            d[i] = anisotropic_distance(model, spec, grid.position(i)).d;
        } catch (const NonSmoothPoint&) {
        } catch (const std::invalid_argument&) {
        }
    }
    return d;
}

}  // namespace gradest
