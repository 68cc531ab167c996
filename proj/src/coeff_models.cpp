#include "gradest/coeff_models.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <sstream>

#include "gradest/config_util.hpp"

namespace gradest {

Coefficients CoefficientModel::coefficients(const Vec& p, double t) const {
    if (!p.allFinite()) throw std::invalid_argument("gradient argument must be finite");
    if (fixed_dim() != 0 && p.size() != fixed_dim())
        throw std::invalid_argument(name() + " model expects gradients of dimension " + std::to_string(fixed_dim()));
    Mat a = matrix(p, t);
    a = 0.5 * (a + a.transpose()).eval();
    return {a, drift(p, t)};
}

nlohmann::ordered_json CoefficientModel::to_json() const {
    nlohmann::ordered_json j{{"kind", name()}, {"params", params()}};
    if (regularization() > 0.0) j["regularization"] = regularization();
    return j;
}

Mat McfModel::matrix(const Vec& p, double) const {
    const int n = static_cast<int>(p.size());
    return Mat::Identity(n, n) - p * p.transpose() / (1.0 + p.squaredNorm());
}

IsotropicModel::IsotropicModel(Fn alpha, Fn beta, nlohmann::ordered_json description)
    : alpha_(std::move(alpha)), beta_(std::move(beta)), description_(std::move(description)) {
    const double a0 = alpha_(0.0, 0.0), b0 = beta_(0.0, 0.0);
    if (!(a0 >= 0.0) || !(b0 >= 0.0)) throw std::invalid_argument("isotropic alpha and beta must be non-negative");
    if (std::abs(a0 - b0) > 1e-12 * std::max(1.0, std::abs(a0)))
        throw std::invalid_argument("isotropic model needs alpha(0) = beta(0)");
}

Mat IsotropicModel::matrix(const Vec& p, double t) const {
    const int n = static_cast<int>(p.size());
    const double r = p.norm();
    if (r == 0.0) return alpha_(0.0, t) * Mat::Identity(n, n);
    const Vec e = p / r;
    const Mat proj = e * e.transpose();
    return alpha_(r, t) * proj + beta_(r, t) * (Mat::Identity(n, n) - proj);
}

PLaplacianModel::PLaplacianModel(double p, double eps) : p_(p), eps_(eps) {
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p-Laplacian requires p > 1");
    if (eps_ < 0.0) eps_ = p >= 2.0 ? 0.0 : 1e-8;
    if (p < 2.0 && eps_ == 0.0) throw std::invalid_argument("p-Laplacian with p < 2 needs eps > 0");
}

Mat PLaplacianModel::matrix(const Vec& q, double) const {
    const int n = static_cast<int>(q.size());
    const double r2 = q.squaredNorm() + eps_ * eps_;
    if (r2 == 0.0) return (p_ == 2.0 ? 1.0 : 0.0) * Mat::Identity(n, n);
    const double scale = std::pow(r2, 0.5 * (p_ - 2.0));
    return scale * (Mat::Identity(n, n) + (p_ - 2.0) * q * q.transpose() / r2);
}

std::optional<double> PLaplacianModel::closed_form_alpha(double R, double) const {
    const double r2 = R * R + eps_ * eps_;
    if (r2 == 0.0) return p_ == 2.0 ? 1.0 : 0.0;
    return std::pow(r2, 0.5 * (p_ - 4.0)) * (eps_ * eps_ + (p_ - 1.0) * R * R);
}

AnisotropicModel::AnisotropicModel(std::shared_ptr<const AnisotropyModel> aniso) : aniso_(std::move(aniso)) {
    if (!aniso_) throw std::invalid_argument("anisotropic model needs an anisotropy");
}

CustomModel::CustomModel(MatrixFn a, DriftFn b, nlohmann::ordered_json description, int dim)
    : a_(std::move(a)), b_(std::move(b)), description_(std::move(description)), dim_(dim) {
    if (!a_) throw std::invalid_argument("custom model needs a matrix function");
}

// ---------------------------------------------------------------------------

namespace {

constexpr double kGolden = 0.6180339887498949;
constexpr int kAngleGrid = 256;

template <class Fn>
std::pair<double, double> golden_min(Fn&& f, double a, double b, double tol = 1e-12) {
    double c = b - kGolden * (b - a), d = a + kGolden * (b - a);
    double fc = f(c), fd = f(d);
    while (b - a > tol) {
        if (fc < fd) {
            b = d;
            d = c;
            fd = fc;
            c = b - kGolden * (b - a);
            fc = f(c);
        } else {
            a = c;
            c = d;
            fc = fd;
            d = a + kGolden * (b - a);
            fd = f(d);
        }
    }
    const double x = 0.5 * (a + b);
    return {f(x), x};
}

/// min over theta in (-pi/2, pi/2) of (cos^2 a_pp + 2 sin cos a_pw + sin^2 a_ww) / cos^2.
double theta_min(double app, double apw, double aww) {
    auto f = [&](double th) {
        const double tn = std::tan(th);
        return app + 2.0 * tn * apw + tn * tn * aww;
    };
    const double lim = 0.5 * std::numbers::pi;
    double best = std::numeric_limits<double>::infinity();
    double arg = 0.0;
    for (int k = 0; k < kAngleGrid; ++k) {
        const double th = -lim + lim * (2.0 * k + 1.0) / kAngleGrid;
        const double v = f(th);
        if (v < best) {
            best = v;
            arg = th;
        }
    }
    const double w = lim / kAngleGrid * 2.0;
    const double lo = std::max(-lim + 1e-15, arg - w), hi = std::min(lim - 1e-15, arg + w);
    return std::min(best, golden_min(f, lo, hi).first);
}

/// Inner infimum over v for a fixed direction e of p.
double direction_min(const Mat& a, const Vec& e) {
    const int n = static_cast<int>(e.size());
    const double app = e.dot(a * e);
    if (n == 1) return app;
    if (n == 2) {
        Vec w(2);
        w << -e[1], e[0];
        return theta_min(app, e.dot(a * w), w.dot(a * w));
    }
    // n == 3: w on the tangent circle of e.
    Eigen::HouseholderQR<Mat> qr(e);
    const Mat basis = (qr.householderQ() * Mat::Identity(3, 3)).rightCols(2);
    auto over_psi = [&](double psi) {
        const Vec w = std::cos(psi) * basis.col(0) + std::sin(psi) * basis.col(1);
        return theta_min(app, e.dot(a * w), w.dot(a * w));
    };
    const int grid = 64;
    double best = std::numeric_limits<double>::infinity(), arg = 0.0;
    for (int k = 0; k < grid; ++k) {
        const double psi = std::numbers::pi * k / grid;
        const double v = over_psi(psi);
        if (v < best) {
            best = v;
            arg = psi;
        }
    }
    const double w = std::numbers::pi / grid;
    return std::min(best, golden_min(over_psi, arg - w, arg + w, 1e-10).first);
}

int model_dim(const CoefficientModel& model, int n) {
    const int d = model.fixed_dim() != 0 ? model.fixed_dim() : n;
    if (d < 1 || d > kMaxDim) throw std::invalid_argument("dimension must be in [1, 3]");
    return d;
}

void require_positive(double alpha, double R) {
    if (!(alpha > 1e-12) || !std::isfinite(alpha)) {
        std::ostringstream os;
        os << "degenerate along the gradient at R = " << R << " (alpha = " << alpha << ")";
        throw DegenerateAlongGradient(os.str());
    }
}

}  // namespace

double sampled_alpha(const CoefficientModel& model, double R, double t, int n) {
    if (!(R >= 0.0) || !std::isfinite(R)) throw std::invalid_argument("R must be finite and >= 0");
    const int d = model_dim(model, n);
    auto at_direction = [&](const Vec& e) { return direction_min(model.coefficients(R * e, t).A, e); };
    double best = std::numeric_limits<double>::infinity();
    if (d == 1) {
        Vec e(1);
        for (double s : {1.0, -1.0}) {
            e << s;
            best = std::min(best, at_direction(e));
        }
    } else if (d == 2) {
        auto f = [&](double phi) {
            Vec e(2);
            e << std::cos(phi), std::sin(phi);
            return at_direction(e);
        };
        double arg = 0.0;
        for (int k = 0; k < kAngleGrid; ++k) {
            const double phi = 2.0 * std::numbers::pi * k / kAngleGrid;
            const double v = f(phi);
            if (v < best) {
                best = v;
                arg = phi;
            }
        }
        const double w = 2.0 * std::numbers::pi / kAngleGrid;
        best = std::min(best, golden_min(f, arg - w, arg + w, 1e-10).first);
    } else {
        Vec arg;
        for (const Vec& e : sphere_points(3, kAngleGrid)) {
            const double v = at_direction(e);
            if (v < best) {
                best = v;
                arg = e;
            }
        }
        double step = 0.25;
        while (step > 1e-9) {
            bool improved = false;
            Eigen::HouseholderQR<Mat> qr(arg);
            const Mat basis = (qr.householderQ() * Mat::Identity(3, 3)).rightCols(2);
            for (int k = 0; k < 2 && !improved; ++k)
                for (double s : {1.0, -1.0}) {
                    const Vec cand = (arg + s * step * basis.col(k)).normalized();
                    const double v = at_direction(cand);
                    if (v < best) {
                        best = v;
                        arg = cand;
                        improved = true;
                        break;
                    }
                }
            if (!improved) step *= 0.5;
        }
    }
    require_positive(best, R);
    return best;
}

double degeneracy_alpha(const CoefficientModel& model, double R, double t, int n) {
    if (!(R >= 0.0) || !std::isfinite(R)) throw std::invalid_argument("R must be finite and >= 0");
    if (auto a = model.closed_form_alpha(R, t)) {
        require_positive(*a, R);
        return *a;
    }
    return sampled_alpha(model, R, t, n);
}

DegeneracyProfile degeneracy_profile(const CoefficientModel& model, double R_max, double t, int n) {
    if (!(R_max > 0.0)) throw std::invalid_argument("R_max must be positive");
    DegeneracyProfile prof;
    for (int j = -40;; ++j) {
        const double R = std::min(std::pow(10.0, j / 20.0), R_max);
        prof.R.push_back(R);
        prof.alpha.push_back(degeneracy_alpha(model, R, t, n));
        if (R >= R_max) break;
    }
    try {
        const auto c = ellipticity_constants(model, R_max, n);
        prof.A0 = c.A0;
        prof.P = c.P;
    } catch (const UnboundedDegeneracy&) {
    }
    return prof;
}

EllipticityConstants ellipticity_constants(const CoefficientModel& model, double R_max, int n) {
    if (!(R_max > 1.0)) throw std::invalid_argument("R_max must exceed 1");
    std::vector<double> Rs, f;
    for (int j = 0;; ++j) {
        const double R = std::min(std::pow(10.0, j / 20.0), R_max);
        Rs.push_back(R);
        f.push_back(degeneracy_alpha(model, R, 0.0, n) * R * R);
        if (R >= R_max) break;
    }
    const double top = f.back();
    const double tenth = degeneracy_alpha(model, R_max / 10.0, 0.0, n) * (R_max / 10.0) * (R_max / 10.0);
    const double ratio = top / tenth;
    if (ratio < 0.95) {
        std::ostringstream os;
        os << "unbounded degeneracy: alpha R^2 drops by factor " << ratio << " over the last decade below R_max";
        throw UnboundedDegeneracy(os.str());
    }
    // suffix minima g(P) = min_{R >= P} f(R)
    std::vector<double> g(f.size());
    g.back() = f.back();
    for (std::size_t k = f.size() - 1; k-- > 0;) g[k] = std::min(f[k], g[k + 1]);
    if (ratio < 1.05) {
        for (std::size_t k = 0; k < g.size(); ++k)
            if (g[k] >= 0.99 * top) return {g[k], Rs[k]};
        return {g.back(), Rs.back()};
    }
    return {g.front(), Rs.front()};
}

// ---------------------------------------------------------------------------

namespace {

IsotropicModel::Fn rational_fn(const nlohmann::ordered_json& j, const std::string& where) {
    check_keys(j, {"c", "q"}, where);
    const double c = require<double>(j, "c", where);
    const double q = optional<double>(j, "q", 0.0, where);
    if (!(c >= 0.0)) throw ConfigError(where + ".c must be >= 0");
    return [c, q](double s, double) { return c * std::pow(1.0 + s * s, q); };
}

}  // namespace

std::shared_ptr<const CoefficientModel> make_model(const nlohmann::ordered_json& block, int n) {
    const std::string where = "model";
    const auto kind = require<std::string>(block, "kind", where);
    try {
        if (kind == "mcf") {
            check_keys(block, {"kind"}, where);
            return std::make_shared<McfModel>();
        }
        if (kind == "plaplacian") {
            check_keys(block, {"kind", "p", "eps"}, where);
            return std::make_shared<PLaplacianModel>(require<double>(block, "p", where),
                                                     optional<double>(block, "eps", -1.0, where));
        }
        if (kind == "isotropic") {
            check_keys(block, {"kind", "alpha", "beta"}, where);
            return std::make_shared<IsotropicModel>(rational_fn(block.at("alpha"), where + ".alpha"),
                                                    rational_fn(block.at("beta"), where + ".beta"),
                                                    nlohmann::ordered_json{{"alpha", block.at("alpha")},
                                                                           {"beta", block.at("beta")}});
        }
        if (kind == "anisotropic") {
            check_keys(block, {"kind", "norm", "norm_params", "mobility", "delta"}, where);
            auto aniso = make_anisotropy(require<std::string>(block, "norm", where),
                                         block.value("norm_params", nlohmann::ordered_json::object()),
                                         optional<std::string>(block, "mobility", "constant", where),
                                         optional<double>(block, "delta", 0.0, where), n);
            return std::make_shared<AnisotropicModel>(aniso);
        }
        if (kind == "custom") {
            check_keys(block, {"kind", "matrix", "drift"}, where);
            const auto rows = require<std::vector<std::vector<double>>>(block, "matrix", where);
            if (static_cast<int>(rows.size()) != n) throw ConfigError(where + ".matrix must be n x n");
            Mat a(n, n);
            for (int i = 0; i < n; ++i) {
                if (static_cast<int>(rows[i].size()) != n) throw ConfigError(where + ".matrix must be n x n");
                for (int k = 0; k < n; ++k) a(i, k) = rows[i][k];
            }
            const double b = optional<double>(block, "drift", 0.0, where);
            CustomModel::DriftFn drift;
            if (b != 0.0) drift = [b](const Vec&, double) { return b; };
            return std::make_shared<CustomModel>([a](const Vec&, double) { return a; }, drift,
                                                 nlohmann::ordered_json{{"matrix", rows}, {"drift", b}}, n);
        }
    } catch (const std::invalid_argument& e) {
        throw ConfigError(where + ": " + e.what());
    }
    throw ConfigError(where + ": unknown kind '" + kind + "'");
}

}  // namespace gradest
