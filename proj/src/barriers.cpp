#include "gradest/barriers.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <limits>
#include <numbers>
#include <stdexcept>

#include <boost/math/quadrature/gauss_kronrod.hpp>

namespace gradest {

AlphaFn csf_alpha() {
    return [](double s, double) { return 1.0 / (1.0 + s * s); };
}

AlphaFn plap_alpha(double p) {
    if (!(p > 1.0)) throw std::invalid_argument("p must exceed 1");
    return [p](double s, double) { return (p - 1.0) * std::pow(std::abs(s), p - 2.0); };
}

AlphaFn scaled_alpha(AlphaFn base, double a) {
    return [base = std::move(base), a](double s, double t) { return a * base(s, t); };
}

std::vector<double> linspace(double a, double b, int n) {
    if (n < 2) throw std::invalid_argument("linspace needs at least two points");
    std::vector<double> v(n);
    for (int k = 0; k < n; ++k) v[k] = a + (b - a) * k / (n - 1);
    v.back() = b;
    return v;
}

std::vector<double> geomspace(double a, double b, int n) {
    if (!(a > 0.0 && b > 0.0)) throw std::invalid_argument("geomspace needs positive endpoints");
    auto v = linspace(std::log(a), std::log(b), n);
    for (double& x : v) x = std::exp(x);
    v.front() = a;
    v.back() = b;
    return v;
}

// ---------------------------------------------------------------------------

namespace {

void require_p(double p) {
    if (!(p > 1.0) || !std::isfinite(p)) throw std::invalid_argument("p must be a finite number greater than 1");
}

template <class F>
double integrate(F&& f, double a, double b) {
    if (b <= a) return 0.0;
    return boost::math::quadrature::gauss_kronrod<double, 31>::integrate(f, a, b, 12, 1e-13);
}

// Integrals after the substitutions s = sin(theta) (p > 2) and s = tan(theta) (p < 2).
double fp_theta_integral(double p, double theta) {
    if (p > 2.0) {
        const double k = 2.0 / (p - 2.0) + 1.0;
        return integrate([k](double th) { return std::pow(std::cos(th), k); }, 0.0, theta);
    }
    const double k = 2.0 / (2.0 - p) - 2.0;
    return integrate([k](double th) { return std::pow(std::cos(th), k); }, 0.0, theta);
}

constexpr double kGaussCutoff = 12.0;  // tail below exp(-144) / 24

}  // namespace

double fp_value(double p, double xi) {
    require_p(p);
    if (!(xi >= 0.0)) throw std::invalid_argument("xi must be nonnegative");
    if (xi == 0.0) return 0.0;
    if (p == 2.0)
        return integrate([](double s) { return std::exp(-s * s); }, 0.0, std::min(xi, kGaussCutoff));
    if (p > 2.0) return fp_theta_integral(p, std::asin(std::min(xi, 1.0)));
    return fp_theta_integral(p, std::isinf(xi) ? 0.5 * std::numbers::pi : std::atan(xi));
}

double fp_limit(double p) {
    require_p(p);
    if (p == 2.0) return integrate([](double s) { return std::exp(-s * s); }, 0.0, kGaussCutoff);
    return fp_theta_integral(p, 0.5 * std::numbers::pi);
}

double fp_derivative(double p, double xi) {
    require_p(p);
    if (p > 2.0) return xi < 1.0 ? std::pow(1.0 - xi * xi, 1.0 / (p - 2.0)) : 0.0;
    if (p == 2.0) return std::exp(-xi * xi);
    return std::pow(1.0 + xi * xi, -1.0 / (2.0 - p));
}

double fp_second_derivative(double p, double xi) {
    require_p(p);
    if (p > 2.0) {
        if (xi >= 1.0) return 0.0;
        const double m = 1.0 / (p - 2.0);
        return -2.0 * m * xi * std::pow(1.0 - xi * xi, m - 1.0);
    }
    if (p == 2.0) return -2.0 * xi * std::exp(-xi * xi);
    const double m = 1.0 / (2.0 - p);
    return -2.0 * m * xi * std::pow(1.0 + xi * xi, -m - 1.0);
}

double rp_constant(double p) {
    require_p(p);
    if (p == 2.0) return 2.0;
    const double two_f = 2.0 * fp_limit(p);
    if (p > 2.0) return std::pow(2.0 * p * (p - 1.0) / (p - 2.0), 1.0 / p) * std::pow(two_f, -(p - 2.0) / p);
    return std::pow((2.0 - p) / (2.0 * p * (p - 1.0)), -1.0 / p) * std::pow(two_f, (2.0 - p) / p);
}

PLapBarrier::PLapBarrier(double p, double M, double z_max, double t_max)
    : p_(p), M_(M), fp_inf_(0.0), rp_(0.0), z_max_(z_max), t_max_(t_max) {
    require_p(p);
    if (!(M > 0.0) || !std::isfinite(M)) throw std::invalid_argument("M must be positive");
    if (!(z_max > 0.0 && t_max > 0.0)) throw std::invalid_argument("profile ranges must be positive");
    fp_inf_ = fp_limit(p);
    rp_ = rp_constant(p);
}

double PLapBarrier::similarity_variable(double z, double t) const {
    const double tau = t / (M_ * M_);
    return (z / M_) / (std::pow(tau, 1.0 / p_) * rp_);
}

double PLapBarrier::value(double z, double t) const {
    if (z < 0.0) throw std::invalid_argument("z must be nonnegative");
    if (t <= 0.0) return z > 0.0 ? 0.5 * M_ : 0.0;
    return M_ * fp_value(p_, similarity_variable(z, t)) / (2.0 * fp_inf_);
}

double PLapBarrier::dz(double z, double t) const {
    if (t <= 0.0) return 0.0;
    const double tau = t / (M_ * M_);
    const double scale = std::pow(tau, 1.0 / p_) * rp_;
    return fp_derivative(p_, similarity_variable(z, t)) / (2.0 * fp_inf_ * scale);
}

double PLapBarrier::dzz(double z, double t) const {
    if (t <= 0.0) return 0.0;
    const double tau = t / (M_ * M_);
    const double scale = std::pow(tau, 1.0 / p_) * rp_;
    return fp_second_derivative(p_, similarity_variable(z, t)) / (2.0 * fp_inf_ * scale * scale * M_);
}

double PLapBarrier::dt(double z, double t) const {
    if (t <= 0.0) return 0.0;
    const double xi = similarity_variable(z, t);
    return -M_ * fp_derivative(p_, xi) * xi / (2.0 * fp_inf_ * p_ * t);
}

double PLapBarrier::max_slope(double t) const {
    return std::pow(M_, 2.0 / p_) * std::pow(t, -1.0 / p_) / (2.0 * rp_ * fp_inf_);
}

nlohmann::ordered_json PLapBarrier::describe() const {
    return {{"kind", kind()}, {"family", "plaplacian"}, {"p", p_}, {"M", M_}, {"R_p", rp_}, {"F_p_inf", fp_inf_}};
}

// ---------------------------------------------------------------------------

ScaledProfile::ScaledProfile(ProfilePtr base, double M, double time_factor)
    : base_(std::move(base)), M_(M), a_(time_factor) {
    if (!base_) throw std::invalid_argument("null base profile");
    if (!(M > 0.0) || !(time_factor > 0.0)) throw std::invalid_argument("scale factors must be positive");
}

double ScaledProfile::value(double z, double t) const { return M_ * base_->value(z / M_, a_ * t / (M_ * M_)); }
double ScaledProfile::dz(double z, double t) const { return base_->dz(z / M_, a_ * t / (M_ * M_)); }
double ScaledProfile::dzz(double z, double t) const { return base_->dzz(z / M_, a_ * t / (M_ * M_)) / M_; }
double ScaledProfile::dt(double z, double t) const { return a_ / M_ * base_->dt(z / M_, a_ * t / (M_ * M_)); }

nlohmann::ordered_json ScaledProfile::describe() const {
    return {{"kind", kind()}, {"scaled", {{"M", M_}, {"time_factor", a_}}}, {"base", base_->describe()}};
}

// ---------------------------------------------------------------------------

std::size_t TranslatorProfile::locate(double z) const {
    auto it = std::upper_bound(z_.begin(), z_.end(), z);
    std::size_t k = it == z_.begin() ? 0 : static_cast<std::size_t>(it - z_.begin()) - 1;
    return std::min(k, z_.size() - 2);
}

double TranslatorProfile::value(double z, double t) const {
    if (z < 0.0) throw std::invalid_argument("z must be nonnegative");
    if (z >= z_.back() || (flat_ && z >= *flat_)) return g_.back() + c_ * t;
    const std::size_t k = locate(z);
    const double h = z_[k + 1] - z_[k], s = (z - z_[k]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * g_[k] + h10 * h * gp_[k] + h01 * g_[k + 1] + h11 * h * gp_[k + 1] + c_ * t;
}

double TranslatorProfile::dz(double z, double) const {
    if (z < 0.0) throw std::invalid_argument("z must be nonnegative");
    if (z >= z_.back() || (flat_ && z >= *flat_)) return gp_.back();
    const std::size_t k = locate(z);
    const double h = z_[k + 1] - z_[k], s = (z - z_[k]) / h;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * gp_[k] + h10 * h * gpp_[k] + h01 * gp_[k + 1] + h11 * h * gpp_[k + 1];
}

double TranslatorProfile::dzz(double z, double) const {
    if (z < 0.0) throw std::invalid_argument("z must be nonnegative");
    if (flat_ && z > *flat_) return 0.0;
    if (z >= z_.back()) return gpp_.back();
    const std::size_t k = locate(z);
    const double h = z_[k + 1] - z_[k], s = (z - z_[k]) / h;
    const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
    const double d01 = 6 * s - 6 * s * s, d11 = 3 * s * s - 2 * s;
    return (d00 * gp_[k] + d01 * gp_[k + 1]) / h + d10 * gpp_[k] + d11 * gpp_[k + 1];
}

nlohmann::ordered_json TranslatorProfile::describe() const {
    nlohmann::ordered_json j{{"kind", kind()}, {"speed", c_}, {"forcing", B_}, {"z_max", z_.back()},
                             {"slope0", gp_.front()}, {"nodes", z_.size()}};
    if (flat_) j["flat_from"] = *flat_;
    return j;
}

std::shared_ptr<const TranslatorProfile> translator_profile(AlphaFn alpha, double c, double B, double z_max,
                                                            double slope0, double tol) {
    if (!alpha) throw std::invalid_argument("null alpha");
    if (!(c > 0.0) || !(B >= 0.0) || !(z_max > 0.0) || !(slope0 >= 0.0) || !(tol > 0.0))
        throw std::invalid_argument("translator needs c > 0, B >= 0, z_max > 0, slope0 >= 0");
    auto prof = std::shared_ptr<TranslatorProfile>(new TranslatorProfile());
    prof->alpha_ = alpha;
    prof->c_ = c;
    prof->B_ = B;
    const double forcing = c - B;

    auto rhs = [&](double gp) {
        const double a = alpha(gp, 0.0);
        if (!(a > 0.0) || !std::isfinite(a)) return std::numeric_limits<double>::quiet_NaN();
        return forcing / a;
    };
    struct State {
        double g, gp;
    };
    auto rk4 = [&](State y, double h) {
        const double k1g = y.gp, k1p = rhs(y.gp);
        const double k2g = y.gp + 0.5 * h * k1p, k2p = rhs(k2g);
        const double k3g = y.gp + 0.5 * h * k2p, k3p = rhs(k3g);
        const double k4g = y.gp + h * k3p, k4p = rhs(k4g);
        return State{y.g + h / 6.0 * (k1g + 2 * k2g + 2 * k3g + k4g), y.gp + h / 6.0 * (k1p + 2 * k2p + 2 * k3p + k4p)};
    };
    auto push = [&](double z, const State& y) {
        prof->z_.push_back(z);
        prof->g_.push_back(y.g);
        prof->gp_.push_back(y.gp);
        prof->gpp_.push_back(prof->flat_ ? 0.0 : rhs(y.gp));
    };
    auto fail = [&](const std::string& why, double z) {
        if (prof->z_.size() < 2) push(z, State{prof->g_.back(), prof->gp_.back()});
        throw DegenerateOde("translator ODE degenerates at z = " + std::to_string(z) + ": " + why, prof);
    };

    State y{0.0, slope0};
    double z = 0.0;
    if (!std::isfinite(rhs(slope0))) throw DegenerateOde("alpha is not positive at the initial slope", nullptr);
    push(z, y);
    double h = z_max / 1000.0;
    std::size_t steps = 0;
    while (z < z_max) {
        if (++steps > 20000000) fail("step budget exhausted", z);
        h = std::min(h, z_max - z);
        if (h < 1e-14 * std::max(1.0, z)) fail("step size underflow", z);
        const State full = rk4(y, h);
        const State half = rk4(rk4(y, 0.5 * h), 0.5 * h);
        if (!std::isfinite(full.gp) || !std::isfinite(half.gp)) {
            h *= 0.25;
            continue;
        }
        const double eg = std::abs(half.g - full.g) / 15.0 / (tol * (1.0 + std::abs(half.g)));
        const double ep = std::abs(half.gp - full.gp) / 15.0 / (tol * (1.0 + std::abs(half.gp)));
        const double err = std::max(eg, ep);
        if (err > 1.0) {
            h *= std::max(0.2, 0.9 * std::pow(err, -0.2));
            continue;
        }
        State next{half.g + (half.g - full.g) / 15.0, half.gp + (half.gp - full.gp) / 15.0};
        if (next.gp < 0.0) {
            // g' reaches zero inside the step: bisect for the crossing, then hold g
            double lo = 0.0, hi = h;
            for (int it = 0; it < 200 && hi - lo > 1e-16 * std::max(1.0, z); ++it) {
                const double mid = 0.5 * (lo + hi);
                (rk4(rk4(y, 0.5 * mid), 0.5 * mid).gp < 0.0 ? hi : lo) = mid;
            }
            State at = rk4(rk4(y, 0.5 * lo), 0.5 * lo);
            at.gp = 0.0;
            z += lo;
            push(z, at);
            prof->flat_ = z;
            prof->gpp_.back() = rhs(0.0);
            if (z < z_max) {
                push(z_max, at);
                prof->gpp_.back() = 0.0;
            }
            return prof;
        }
        z += h;
        y = next;
        push(z, y);
        h *= std::min(5.0, 0.9 * std::pow(std::max(err, 1e-10), -0.2));
    }
    return prof;
}

// ---------------------------------------------------------------------------

namespace {

// Taylor coefficients a_0, a_2, ..., a_10 of the regular solution with phi(0) = a0.
std::array<double, 6> radial_series(int n, double a0) {
    std::array<double, 6> a{};
    a[0] = a0;
    for (int j = 0; j < 5; ++j) {
        const int k = 2 * j;
        a[j + 1] = (1.0 - k) * a[j] / (2.0 * (k + 2) * (k + n));
    }
    return a;
}

void series_eval(int n, double a0, double z, double& phi, double& dphi) {
    const auto a = radial_series(n, a0);
    phi = 0.0;
    dphi = 0.0;
    double zk = 1.0;
    for (int j = 0; j < 6; ++j) {
        const int k = 2 * j;
        phi += a[j] * zk;
        if (k > 0) dphi += k * a[j] * zk / z;
        zk *= z * z;
    }
}

constexpr double kRadialSeriesEnd = 0.05;

}  // namespace

double radial_phi0_exact(int n) {
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    return 2.0 * std::tgamma(0.5 * (n + 1)) / std::tgamma(0.5 * n);
}

RadialProfile radial_profile(int n, double tol) {
    if (n < 1) throw std::invalid_argument("n must be at least 1");
    RadialProfile prof;
    prof.n_ = n;
    const double h = prof.h_;
    const int count = static_cast<int>(std::lround(RadialProfile::kZmax / h));
    const int series_nodes = static_cast<int>(std::lround(kRadialSeriesEnd / h));

    auto f = [n](double z, double phi, double dphi) { return 0.5 * (phi - z * dphi) - (n - 1) * dphi / z; };
    auto integrate_table = [&](double a0, bool keep) {
        if (keep) {
            prof.z_.assign(count + 1, 0.0);
            prof.phi_.assign(count + 1, 0.0);
            prof.dphi_.assign(count + 1, 0.0);
        }
        double phi = a0, dphi = 0.0;
        for (int k = 0; k <= series_nodes; ++k) {
            const double z = k * h;
            if (k == 0) {
                phi = a0;
                dphi = 0.0;
            } else {
                series_eval(n, a0, z, phi, dphi);
            }
            if (keep) {
                prof.z_[k] = z;
                prof.phi_[k] = phi;
                prof.dphi_[k] = dphi;
            }
        }
        for (int k = series_nodes; k < count; ++k) {
            const double z = k * h;
            const double k1a = dphi, k1b = f(z, phi, dphi);
            const double k2a = dphi + 0.5 * h * k1b, k2b = f(z + 0.5 * h, phi + 0.5 * h * k1a, k2a);
            const double k3a = dphi + 0.5 * h * k2b, k3b = f(z + 0.5 * h, phi + 0.5 * h * k2a, k3a);
            const double k4a = dphi + h * k3b, k4b = f(z + h, phi + h * k3a, k4a);
            phi += h / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a);
            dphi += h / 6.0 * (k1b + 2 * k2b + 2 * k3b + k4b);
            if (keep) {
                prof.z_[k + 1] = (k + 1) * h;
                prof.phi_[k + 1] = phi;
                prof.dphi_[k + 1] = dphi;
            }
        }
        return dphi - 1.0;
    };

    double lo = 0.1, hi = 10.0;
    double glo = integrate_table(lo, false), ghi = integrate_table(hi, false);
    for (int it = 0; it < 60 && glo > 0.0; ++it) {
        hi = lo;
        ghi = glo;
        lo *= 0.5;
        glo = integrate_table(lo, false);
    }
    for (int it = 0; it < 60 && ghi < 0.0; ++it) {
        lo = hi;
        glo = ghi;
        hi *= 2.0;
        ghi = integrate_table(hi, false);
    }
    if (!(glo <= 0.0 && ghi >= 0.0)) throw NumericalFailure("radial profile: shooting bracket not found");
    double mid = 0.5 * (lo + hi), gmid = integrate_table(mid, false);
    for (int it = 0; it < 200 && std::abs(gmid) > 1e-3 * tol; ++it) {
        (gmid < 0.0 ? lo : hi) = mid;
        mid = 0.5 * (lo + hi);
        gmid = integrate_table(mid, false);
    }
    if (std::abs(gmid) > tol) throw NumericalFailure("radial profile: shooting did not converge");
    integrate_table(mid, true);
    prof.phi0_ = mid;
    return prof;
}

double RadialProfile::value(double z) const {
    if (z < 0.0) throw std::invalid_argument("z must be nonnegative");
    if (z >= z_.back()) return phi_.back() + dphi_.back() * (z - z_.back());
    const std::size_t k = std::min(static_cast<std::size_t>(z / h_), z_.size() - 2);
    const double s = (z - z_[k]) / h_;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * phi_[k] + h10 * h_ * dphi_[k] + h01 * phi_[k + 1] + h11 * h_ * dphi_[k + 1];
}

double RadialProfile::node_dzz(std::size_t k) const {
    const double z = z_[k];
    if (k == 0) return phi0_ / (2.0 * n_);
    return 0.5 * (phi_[k] - z * dphi_[k]) - (n_ - 1) * dphi_[k] / z;
}

double RadialProfile::dz(double z) const {
    if (z < 0.0) throw std::invalid_argument("z must be nonnegative");
    if (z >= z_.back()) return dphi_.back();
    const std::size_t k = std::min(static_cast<std::size_t>(z / h_), z_.size() - 2);
    const double s = (z - z_[k]) / h_;
    const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
    const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
    return h00 * dphi_[k] + h10 * h_ * node_dzz(k) + h01 * dphi_[k + 1] + h11 * h_ * node_dzz(k + 1);
}

double RadialProfile::dzz(double z) const {
    if (z < 0.0) throw std::invalid_argument("z must be nonnegative");
    if (z == 0.0) return phi0_ / (2.0 * n_);
    const double d = dz(z);
    return 0.5 * (value(z) - z * d) - (n_ - 1) * d / z;
}

double RadialProfile::residual(double z) const {
    if (z < 0.0) throw std::invalid_argument("z must be nonnegative");
    // phi' is odd, so the stencil may straddle z = 0
    auto d = [this](double x) { return x < 0.0 ? -dz(-x) : dz(x); };
    const double h = h_;
    // backward five-point difference where the centred stencil would leave the table
    const double second =
        z + 2 * h <= z_.back() * (1.0 + 1e-12)
            ? (-d(z + 2 * h) + 8 * d(z + h) - 8 * d(z - h) + d(z - 2 * h)) / (12 * h)
            : (25 * d(z) - 48 * d(z - h) + 36 * d(z - 2 * h) - 16 * d(z - 3 * h) + 3 * d(z - 4 * h)) / (12 * h);
    const double radial = z == 0.0 ? (n_ - 1) * second : (n_ - 1) * d(z) / z;
    return second + radial - 0.5 * (value(z) - z * d(z));
}

SupersolutionWa::SupersolutionWa(std::shared_ptr<const RadialProfile> profile, double base, double a, Vec x0,
                                 double mu, double lambda, double v)
    : profile_(std::move(profile)), base_(base), a_(a), mu_(mu), lambda_(lambda), v_(v), x0_(std::move(x0)) {
    if (!profile_) throw std::invalid_argument("null radial profile");
    if (!(a > 0.0) || !(mu >= 0.0) || !(lambda > 0.0) || !(v >= 0.0))
        throw std::invalid_argument("w_a needs a > 0, mu >= 0, Lambda > 0, v >= 0");
    if (x0_.size() != profile_->dim()) throw std::invalid_argument("x0 dimension does not match the profile");
}

double SupersolutionWa::operator()(const Vec& x, double t) const {
    if (x.size() != x0_.size()) throw std::invalid_argument("point dimension mismatch");
    if (t < 0.0) throw std::invalid_argument("t must be nonnegative");
    const double r = (x - x0_).norm();
    if (t == 0.0) return base_ + a_ + v_ * r;
    const double s = std::sqrt(lambda_ * t);
    return base_ + a_ + mu_ * t + v_ * s * profile_->value(r / s);
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json ResidualReport::to_json() const {
    return {{"min_residual", min_residual},
            {"max_abs_residual", max_abs_residual},
            {"worst_z", worst_z},
            {"worst_t", worst_t},
            {"points", points}};
}

ResidualReport supersolution_residual(const BarrierProfile& phi, const AlphaFn& alpha, double B,
                                      const std::vector<double>& zs, const std::vector<double>& ts,
                                      const std::function<bool(double, double)>& skip) {
    ResidualReport rep;
    rep.min_residual = std::numeric_limits<double>::infinity();
    for (double t : ts) {
        for (double z : zs) {
            if (skip && skip(z, t)) continue;
            const double r = phi.dt(z, t) - alpha(phi.dz(z, t), t) * phi.dzz(z, t) - B;
            ++rep.points;
            if (r < rep.min_residual) {
                rep.min_residual = r;
                rep.worst_z = z;
                rep.worst_t = t;
            }
            rep.max_abs_residual = std::max(rep.max_abs_residual, std::abs(r));
        }
    }
    if (rep.points == 0) rep.min_residual = 0.0;
    return rep;
}

void export_profile_csv(const BarrierProfile& phi, const AlphaFn& alpha, double B, const std::vector<double>& zs,
                        const std::vector<double>& ts, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot open " + path);
    out << std::setprecision(17) << "z,t,phi,dphi,d2phi,residual\n";
    for (double t : ts) {
        for (double z : zs) {
            const double v = phi.value(z, t), d = phi.dz(z, t), dd = phi.dzz(z, t);
            out << z << ',' << t << ',' << v << ',' << d << ',' << dd << ',' << phi.dt(z, t) - alpha(d, t) * dd - B
                << '\n';
        }
    }
    if (!out) throw std::runtime_error("write failed: " + path);
}

}  // namespace gradest
