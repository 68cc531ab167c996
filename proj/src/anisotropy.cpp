#include "gradest/anisotropy.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <random>
#include <sstream>

#include "gradest/kernels.hpp"

namespace gradest {

namespace {

Mat identity(int d) { return Mat::Identity(d, d); }

double require_nonzero(const Vec& z) {
    const double r = z.norm();
    if (!(r > 0.0) || !std::isfinite(r)) throw std::invalid_argument("anisotropy evaluated at zero or non-finite covector");
    return r;
}

}  // namespace

double EuclideanNorm::value(const Vec& z) const { return z.norm(); }

Vec EuclideanNorm::gradient(const Vec& z) const { return z / require_nonzero(z); }

Mat EuclideanNorm::hessian(const Vec& z) const {
    const double r = require_nonzero(z);
    const Vec e = z / r;
    return (identity(static_cast<int>(z.size())) - e * e.transpose()) / r;
}

EllipsoidNorm::EllipsoidNorm(Mat q) : q_(std::move(q)) {
    if (q_.rows() != q_.cols() || q_.rows() < 2 || q_.rows() > kMaxDim + 1)
        throw std::invalid_argument("ellipsoid matrix must be square of size 2..4");
    if ((q_ - q_.transpose()).cwiseAbs().maxCoeff() > 1e-12 * q_.cwiseAbs().maxCoeff())
        throw std::invalid_argument("ellipsoid matrix must be symmetric");
    Eigen::SelfAdjointEigenSolver<Mat> es(q_);
    if (!(es.eigenvalues().minCoeff() > 0.0)) throw std::invalid_argument("ellipsoid matrix must be positive definite");
}

double EllipsoidNorm::value(const Vec& z) const { return std::sqrt(z.dot(q_ * z)); }

Vec EllipsoidNorm::gradient(const Vec& z) const {
    require_nonzero(z);
    return q_ * z / value(z);
}

Mat EllipsoidNorm::hessian(const Vec& z) const {
    require_nonzero(z);
    const double f = value(z);
    const Vec qz = q_ * z;
    return (q_ - qz * qz.transpose() / (f * f)) / f;
}

nlohmann::ordered_json EllipsoidNorm::params() const {
    nlohmann::ordered_json rows = nlohmann::ordered_json::array();
    for (int i = 0; i < q_.rows(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (int j = 0; j < q_.cols(); ++j) row.push_back(q_(i, j));
        rows.push_back(row);
    }
    return {{"Q", rows}};
}

QuarticNorm::QuarticNorm(double eps) : eps_(eps) {
    if (!(eps >= 0.0) || !std::isfinite(eps)) throw std::invalid_argument("quartic eps must be finite and >= 0");
}

double QuarticNorm::value(const Vec& z) const {
    const double r2 = z.squaredNorm();
    return std::pow(r2 * r2 + eps_ * z.array().pow(4).sum(), 0.25);
}

Vec QuarticNorm::gradient(const Vec& z) const {
    require_nonzero(z);
    const double r2 = z.squaredNorm();
    const double g = r2 * r2 + eps_ * z.array().pow(4).sum();
    const Vec dg = 4.0 * r2 * z + 4.0 * eps_ * z.array().cube().matrix();
    return 0.25 * std::pow(g, -0.75) * dg;
}

Mat QuarticNorm::hessian(const Vec& z) const {
    require_nonzero(z);
    const int d = static_cast<int>(z.size());
    const double r2 = z.squaredNorm();
    const double g = r2 * r2 + eps_ * z.array().pow(4).sum();
    const Vec dg = 4.0 * r2 * z + 4.0 * eps_ * z.array().cube().matrix();
    Mat d2g = 4.0 * r2 * identity(d) + 8.0 * z * z.transpose();
    d2g.diagonal() += 12.0 * eps_ * z.array().square().matrix();
    return 0.25 * std::pow(g, -0.75) * d2g - (3.0 / 16.0) * std::pow(g, -1.75) * dg * dg.transpose();
}

TiltedMobility::TiltedMobility(double delta) : delta_(delta) {
    if (!(std::abs(delta) < 1.0)) throw std::invalid_argument("tilted mobility requires |delta| < 1");
}

double TiltedMobility::value(const Vec& z) const { return 1.0 + delta_ * z[z.size() - 1] / require_nonzero(z); }

// ---------------------------------------------------------------------------

namespace {

/// Orthonormal basis of the complement of q in R^d, as columns.
Mat tangent_basis(const Vec& q) {
    const int d = static_cast<int>(q.size());
    Eigen::HouseholderQR<Mat> qr(q);
    const Mat full = qr.householderQ() * identity(d);
    return full.rightCols(d - 1);
}

/// Minimises f over the unit sphere in R^d: dense deterministic samples, then
/// a shrinking compass search in tangent coordinates around the best sample.
template <class Fn>
std::pair<double, Vec> sphere_minimize(int d, int samples, Fn&& f) {
    double best = std::numeric_limits<double>::infinity();
    Vec arg;
    for (const Vec& q : sphere_points(d, samples)) {
        const double v = f(q);
        if (v < best) {
            best = v;
            arg = q;
        }
    }
    double step = 4.0 * std::pow(1.0 / samples, 1.0 / std::max(1, d - 1));
    while (step > 1e-10) {
        bool improved = false;
        const Mat basis = tangent_basis(arg);
        for (int k = 0; k < d - 1 && !improved; ++k) {
            for (double sgn : {1.0, -1.0}) {
                Vec cand = arg + sgn * step * basis.col(k);
                cand.normalize();
                const double v = f(cand);
                if (v < best) {
                    best = v;
                    arg = cand;
                    improved = true;
                    break;
                }
            }
        }
        if (!improved) step *= 0.5;
    }
    return {best, arg};
}

double tangential_min_eigen(const FinslerNorm& norm, const Vec& q) {
    const Mat b = tangent_basis(q);
    const Mat h = b.transpose() * norm.hessian(q) * b;
    if (h.rows() == 1) return h(0, 0);
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().minCoeff();
}

double tangential_max_eigen(const FinslerNorm& norm, const Vec& q) {
    const Mat b = tangent_basis(q);
    const Mat h = b.transpose() * norm.hessian(q) * b;
    if (h.rows() == 1) return h(0, 0);
    Eigen::SelfAdjointEigenSolver<Mat> es(h, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff();
}

constexpr double kConvexityThreshold = 1e-4;

int sphere_samples(int d) { return d == 2 ? 4096 : (d == 3 ? 8192 : 16384); }

}  // namespace

std::vector<Vec> sphere_points(int d, int count) {
    std::vector<Vec> pts;
    pts.reserve(count);
    if (d == 1) {
        Vec a(1), b(1);
        a << 1.0;
        b << -1.0;
        return {a, b};
    }
    if (d == 2) {
        for (int k = 0; k < count; ++k) {
            const double th = 2.0 * std::numbers::pi * (k + 0.5) / count;
            Vec v(2);
            v << std::cos(th), std::sin(th);
            pts.push_back(v);
        }
        return pts;
    }
    if (d == 3) {
        const double golden = std::numbers::pi * (3.0 - std::sqrt(5.0));
        for (int k = 0; k < count; ++k) {
            const double z = 1.0 - 2.0 * (k + 0.5) / count;
            const double r = std::sqrt(std::max(0.0, 1.0 - z * z));
            Vec v(3);
            v << r * std::cos(golden * k), r * std::sin(golden * k), z;
            pts.push_back(v);
        }
        return pts;
    }
    const unsigned bases[] = {2, 3, 5, 7, 11, 13};
    for (int k = 1; pts.size() < static_cast<std::size_t>(count); ++k) {
        Vec v(d);
        for (int a = 0; a < d; a += 2) {
            const double u1 = std::max(radical_inverse(k, bases[a]), 1e-300);
            const double u2 = radical_inverse(k, bases[a + 1]);
            const double r = std::sqrt(-2.0 * std::log(u1));
            v[a] = r * std::cos(2.0 * std::numbers::pi * u2);
            if (a + 1 < d) v[a + 1] = r * std::sin(2.0 * std::numbers::pi * u2);
        }
        if (v.norm() > 1e-12) pts.push_back(v.normalized());
    }
    return pts;
}

AnisotropyModel::AnisotropyModel(std::shared_ptr<const FinslerNorm> norm, std::shared_ptr<const Mobility> mobility,
                                 int n, bool check_admissible)
    : norm_(std::move(norm)), mobility_(std::move(mobility)), n_(n) {
    if (!norm_ || !mobility_) throw std::invalid_argument("anisotropy needs a norm and a mobility");
    if (n < 1 || n > kMaxDim) throw std::invalid_argument("anisotropy dimension must be in [1, 3]");
    if (norm_->fixed_dim() != 0 && norm_->fixed_dim() != n + 1)
        throw std::invalid_argument("norm acts on R^" + std::to_string(norm_->fixed_dim()) + ", expected R^" +
                                    std::to_string(n + 1));
    if (!check_admissible) return;
    const int d = n + 1;
    for (const Vec& q : sphere_points(d, 512)) {
        if (!(norm_->value(q) > 0.0) || !(mobility_->value(q) > 0.0))
            throw std::invalid_argument("norm and mobility must be positive on the sphere");
    }
    convexity_floor_ =
        sphere_minimize(d, 2048, [&](const Vec& q) { return tangential_min_eigen(*norm_, q); }).first;
    if (!(convexity_floor_ > kConvexityThreshold)) {
        std::ostringstream os;
        os << "anisotropy " << norm_->name() << " is not strictly convex: tangential Hessian minimum "
           << convexity_floor_ << " <= " << kConvexityThreshold;
        throw NotStrictlyConvex(os.str());
    }
}

std::string AnisotropyModel::describe() const { return norm_->name() + "/" + mobility_->name(); }

nlohmann::ordered_json AnisotropyModel::to_json() const {
    return {{"norm", norm_->name()},
            {"norm_params", norm_->params()},
            {"mobility", mobility_->name()},
            {"mobility_params", mobility_->params()},
            {"n", n_}};
}

Vec AnisotropyModel::lift(const Vec& p, double last) const {
    Vec z(n_ + 1);
    z.head(n_) = p;
    z[n_] = last;
    return z;
}

double AnisotropyModel::F(const Vec& p) const { return norm_->value(lift(p, -1.0)); }
double AnisotropyModel::m(const Vec& p) const { return mobility_->value(lift(p, -1.0)); }

Mat AnisotropyModel::coefficient(const Vec& p) const {
    const Vec z = lift(p, -1.0);
    return mobility_->value(z) * norm_->value(z) * norm_->hessian(z).topLeftCorner(n_, n_);
}

double AnisotropyModel::Ftilde(const Vec& p) const { return norm_->value(lift(p, 0.0)); }
Vec AnisotropyModel::Ftilde_gradient(const Vec& p) const { return norm_->gradient(lift(p, 0.0)).head(n_); }
Mat AnisotropyModel::Ftilde_hessian(const Vec& p) const {
    return norm_->hessian(lift(p, 0.0)).topLeftCorner(n_, n_);
}

std::shared_ptr<const AnisotropyModel> make_anisotropy(const std::string& norm, const nlohmann::ordered_json& np,
                                                       const std::string& mobility, double delta, int n) {
    std::shared_ptr<const FinslerNorm> fn;
    if (norm == "euclidean") {
        fn = std::make_shared<EuclideanNorm>();
    } else if (norm == "ellipsoid") {
        const int d = n + 1;
        Mat q = Mat::Zero(d, d);
        if (np.contains("diag")) {
            const auto& dg = np.at("diag");
            if (static_cast<int>(dg.size()) != d) throw ConfigError("ellipsoid diag needs " + std::to_string(d) + " entries");
            for (int i = 0; i < d; ++i) q(i, i) = dg[i].get<double>();
        } else if (np.contains("Q")) {
            const auto& rows = np.at("Q");
            if (static_cast<int>(rows.size()) != d) throw ConfigError("ellipsoid Q must be " + std::to_string(d) + "x" + std::to_string(d));
            for (int i = 0; i < d; ++i) {
                if (static_cast<int>(rows[i].size()) != d) throw ConfigError("ellipsoid Q row has wrong length");
                for (int j = 0; j < d; ++j) q(i, j) = rows[i][j].get<double>();
            }
        } else {
            throw ConfigError("ellipsoid needs 'diag' or 'Q'");
        }
        fn = std::make_shared<EllipsoidNorm>(q);
    } else if (norm == "quartic") {
        fn = std::make_shared<QuarticNorm>(np.value("eps", 0.3));
    } else {
        throw ConfigError("unknown anisotropy norm '" + norm + "'");
    }
    std::shared_ptr<const Mobility> mob;
    if (mobility == "constant") mob = std::make_shared<ConstantMobility>();
    else if (mobility == "tilted") mob = std::make_shared<TiltedMobility>(delta);
    else throw ConfigError("unknown mobility '" + mobility + "'");
    return std::make_shared<AnisotropyModel>(fn, mob, n);
}

// ---------------------------------------------------------------------------

double HomogeneityReport::max() const {
    return std::max({gradient_degree0, radial_flatness, hessian_degree, value_degree1, derivative_consistency});
}

nlohmann::ordered_json HomogeneityReport::to_json() const {
    return {{"value_degree1", value_degree1},
            {"gradient_degree0", gradient_degree0},
            {"radial_flatness", radial_flatness},
            {"hessian_degree_minus1", hessian_degree},
            {"derivative_consistency", derivative_consistency},
            {"max", max()}};
}

HomogeneityReport verify_homogeneity(const AnisotropyModel& model, int samples, std::uint64_t seed) {
    const FinslerNorm& f = model.norm();
    const int d = model.dim() + 1;
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::uniform_real_distribution<double> logl(std::log(0.1), std::log(10.0));
    HomogeneityReport r;
    auto rvec = [&] {
        Vec v(d);
        for (int k = 0; k < d; ++k) v[k] = normal(rng);
        return v;
    };
    for (int s = 0; s < samples; ++s) {
        const Vec q = rvec();
        const Vec v = rvec();
        const double lam = std::exp(logl(rng));
        const double fq = f.value(q);
        const Vec g = f.gradient(q);
        const Mat h = f.hessian(q);
        const double hscale = h.norm();

        r.value_degree1 = std::max(r.value_degree1, std::abs(f.value(lam * q) - lam * fq) / (lam * fq));
        r.gradient_degree0 = std::max(r.gradient_degree0, (f.gradient(lam * q) - g).norm() / g.norm());
        r.radial_flatness = std::max(r.radial_flatness, std::abs(q.dot(h * v)) / (hscale * q.norm() * v.norm()));
        const double hv = v.dot(h * v);
        r.hessian_degree = std::max(r.hessian_degree,
                                    std::abs(lam * v.dot(f.hessian(lam * q) * v) - hv) / (hscale * v.squaredNorm()));

        // analytic derivatives against central differences
        const double step = 1e-5 * q.norm();
        const Vec e = v.normalized();
        const double dfd = (f.value(q + step * e) - f.value(q - step * e)) / (2.0 * step);
        const Vec dgd = (f.gradient(q + step * e) - f.gradient(q - step * e)) / (2.0 * step);
        r.derivative_consistency = std::max(
            r.derivative_consistency,
            std::max(std::abs(dfd - g.dot(e)) / g.norm(), (dgd - h * e).norm() / std::max(hscale, 1e-300)));
    }
    return r;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json SphereConstants::to_json() const {
    return {{"A1", A1},       {"A2", A2},       {"A", A},         {"C", C},
            {"F_min", F_min}, {"F_max", F_max}, {"m_min", m_min}, {"m_max", m_max},
            {"D2_max", D2_max}, {"D3_max", D3_max}};
}

SphereConstants sphere_constants(const AnisotropyModel& model) {
    const FinslerNorm& f = model.norm();
    const Mobility& mob = model.mobility();
    const int d = model.dim() + 1;
    const int count = sphere_samples(d);
    SphereConstants c;
    c.A1 = sphere_minimize(d, count, [&](const Vec& q) { return tangential_min_eigen(f, q); }).first;
    if (!(c.A1 > kConvexityThreshold)) {
        std::ostringstream os;
        os << "tangential Hessian minimum " << c.A1 << " <= " << kConvexityThreshold;
        throw NotStrictlyConvex(os.str());
    }
    c.A2 = sphere_minimize(d, count, [&](const Vec& q) { return mob.value(q) * f.value(q); }).first;
    c.A = c.A1 * c.A2;
    c.F_min = sphere_minimize(d, count, [&](const Vec& q) { return f.value(q); }).first;
    c.F_max = -sphere_minimize(d, count, [&](const Vec& q) { return -f.value(q); }).first;
    c.m_min = sphere_minimize(d, count, [&](const Vec& q) { return mob.value(q); }).first;
    c.m_max = -sphere_minimize(d, count, [&](const Vec& q) { return -mob.value(q); }).first;
    c.D2_max = -sphere_minimize(d, count, [&](const Vec& q) { return -tangential_max_eigen(f, q); }).first;

    // Third derivatives from central differences of the analytic Hessian,
    // bounded by the Frobenius norm of the tangential tensor.
    const double step = 1e-4;
    for (const Vec& q : sphere_points(d, count / 8)) {
        const Mat b = tangent_basis(q);
        double frob2 = 0.0;
        for (int k = 0; k < d - 1; ++k) {
            const Vec e = b.col(k);
            const Mat dh = (f.hessian(q + step * e) - f.hessian(q - step * e)) / (2.0 * step);
            frob2 += (b.transpose() * dh * b).squaredNorm();
        }
        c.D3_max = std::max(c.D3_max, std::sqrt(frob2));
    }
    c.C = std::max({c.F_max, 1.0 / c.F_min, c.m_max, 1.0 / c.m_min, c.D2_max, 1.0 / c.A1, c.D3_max});
    return c;
}

// ---------------------------------------------------------------------------

namespace {

enum class DualKind { Euclidean, Ellipsoid, Generic };

DualKind dual_kind(const AnisotropyModel& model) {
    if (dynamic_cast<const EuclideanNorm*>(&model.norm())) return DualKind::Euclidean;
    if (dynamic_cast<const EllipsoidNorm*>(&model.norm())) return DualKind::Ellipsoid;
    return DualKind::Generic;
}

Mat ellipsoid_block(const AnisotropyModel& model) {
    const auto& e = dynamic_cast<const EllipsoidNorm&>(model.norm());
    return e.q().topLeftCorner(model.dim(), model.dim());
}

/// Maximiser of v.w / Ftilde(w) on the unit sphere, rescaled onto {Ftilde = 1}.
Vec generic_maximizer(const AnisotropyModel& model, const Vec& v) {
    const int n = model.dim();
    const double vn = v.norm();
    auto objective = [&](const Vec& w) { return v.dot(w) / model.Ftilde(w); };
    auto riem_grad = [&](const Vec& w) {
        const double ft = model.Ftilde(w);
        Vec g = v / ft - v.dot(w) * model.Ftilde_gradient(w) / (ft * ft);
        return Vec(g - g.dot(w) * w);
    };
    if (n == 1) {
        Vec w(1);
        w << (v[0] >= 0.0 ? 1.0 : -1.0);
        return w / model.Ftilde(w);
    }

    Vec best;
    double best_val = -std::numeric_limits<double>::infinity();
    for (Vec w : sphere_points(n, 64)) {
        double val = objective(w);
        double lr = 0.5 / std::max(vn, 1e-300);
        for (int it = 0; it < 200; ++it) {
            const Vec g = riem_grad(w);
            if (g.norm() <= 1e-12 * vn) break;
            Vec cand = (w + lr * g).normalized();
            const double cv = objective(cand);
            if (cv > val) {
                w = cand;
                val = cv;
                lr *= 1.5;
            } else {
                lr *= 0.5;
                if (lr < 1e-16) break;
            }
        }
        if (val > best_val) {
            best_val = val;
            best = w;
        }
    }

    // Newton polish on v = mu DFtilde(p), Ftilde(p) = 1.
    Vec p = best / model.Ftilde(best);
    double mu = v.dot(p);
    for (int it = 0; it < 50; ++it) {
        const Vec g = model.Ftilde_gradient(p);
        Vec res(n + 1);
        res.head(n) = v - mu * g;
        res[n] = model.Ftilde(p) - 1.0;
        if (res.norm() <= 1e-15 * std::max(1.0, vn)) break;
        Mat jac = Mat::Zero(n + 1, n + 1);
        jac.topLeftCorner(n, n) = -mu * model.Ftilde_hessian(p);
        jac.topRightCorner(n, 1) = -g;
        jac.bottomLeftCorner(1, n) = g.transpose();
        const Vec delta = jac.fullPivLu().solve(-res);
        p += delta.head(n);
        mu += delta[n];
    }
    const Vec w = p.normalized();
    const double gnorm = riem_grad(w).norm();
    if (!(gnorm <= 1e-10 * std::max(1.0, vn)) || !std::isfinite(gnorm)) {
        std::ostringstream os;
        os << "dual norm optimiser stalled with gradient norm " << gnorm;
        throw NumericalFailure(os.str());
    }
    return p;
}

}  // namespace

double dual_norm(const AnisotropyModel& model, const Vec& v) {
    if (static_cast<int>(v.size()) != model.dim()) throw std::invalid_argument("dual norm argument has wrong dimension");
    if (!v.allFinite()) throw std::invalid_argument("dual norm argument must be finite");
    if (v.isZero(0.0)) return 0.0;
    switch (dual_kind(model)) {
        case DualKind::Euclidean: return v.norm();
        case DualKind::Ellipsoid: return std::sqrt(v.dot(ellipsoid_block(model).ldlt().solve(v)));
        case DualKind::Generic: break;
    }
    return v.dot(generic_maximizer(model, v));
}

Vec dual_maximizer(const AnisotropyModel& model, const Vec& v) {
    if (static_cast<int>(v.size()) != model.dim()) throw std::invalid_argument("dual norm argument has wrong dimension");
    if (v.isZero(0.0)) throw std::invalid_argument("normal map needs a nonzero argument");
    switch (dual_kind(model)) {
        case DualKind::Euclidean: return v.normalized();
        case DualKind::Ellipsoid: {
            const Vec y = ellipsoid_block(model).ldlt().solve(v);
            return y / std::sqrt(v.dot(y));
        }
        case DualKind::Generic: break;
    }
    return generic_maximizer(model, v);
}

Vec normal_to_covector(const AnisotropyModel& model, const Vec& n) { return dual_maximizer(model, n); }

Vec covector_to_normal(const AnisotropyModel& model, const Vec& p) {
    if (p.isZero(0.0)) throw std::invalid_argument("normal map needs a nonzero argument");
    return model.Ftilde_gradient(p);
}

}  // namespace gradest
