#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include "gradest/barriers.hpp"

namespace gradest {

namespace {

// Shape-preserving node slopes (Fritsch-Butland harmonic mean) for one slice.
double pchip_slope(const double* v, int n, double h, int i) {
    if (i == 0 || i == n) {
        const int s = i == 0 ? 1 : -1;
        const int a = i, b = i + s, c = i + 2 * s;
        const double d0 = (v[b] - v[a]) / h * s, d1 = (v[c] - v[b]) / h * s;
        double d = 0.5 * (3.0 * d0 - d1);
        if (d * d0 <= 0.0) d = 0.0;
        else if (d0 * d1 <= 0.0 && std::abs(d) > 3.0 * std::abs(d0)) d = 3.0 * d0;
        return d;
    }
    const double dl = (v[i] - v[i - 1]) / h, dr = (v[i + 1] - v[i]) / h;
    if (dl * dr <= 0.0) return 0.0;
    return 2.0 * dl * dr / (dl + dr);
}

double pchip_eval(const double* v, int n, double h, double z, int deriv) {
    int k = std::clamp(static_cast<int>(z / h), 0, n - 1);
    const double s = (z - k * h) / h;
    const double m0 = pchip_slope(v, n, h, k), m1 = pchip_slope(v, n, h, k + 1);
    const double y0 = v[k], y1 = v[k + 1];
    if (deriv == 0) {
        const double h00 = (1 + 2 * s) * (1 - s) * (1 - s), h10 = s * (1 - s) * (1 - s);
        const double h01 = s * s * (3 - 2 * s), h11 = s * s * (s - 1);
        return h00 * y0 + h10 * h * m0 + h01 * y1 + h11 * h * m1;
    }
    if (deriv == 1) {
        const double d00 = 6 * s * s - 6 * s, d10 = 3 * s * s - 4 * s + 1;
        const double d01 = 6 * s - 6 * s * s, d11 = 3 * s * s - 2 * s;
        return (d00 * y0 + d01 * y1) / h + d10 * m0 + d11 * m1;
    }
    const double e00 = 12 * s - 6, e10 = 6 * s - 4, e01 = 6 - 12 * s, e11 = 6 * s - 2;
    return (e00 * y0 + e01 * y1) / (h * h) + (e10 * m0 + e11 * m1) / h;
}

}  // namespace

std::shared_ptr<const ComparisonProfile> ComparisonProfile::build(AlphaFn alpha, double L, double t_max,
                                                                  double amplitude, ComparisonOptions opt,
                                                                  std::string label) {
    if (!alpha) throw std::invalid_argument("null alpha");
    if (!(L > 0.0) || !(t_max > 0.0) || !(amplitude > 0.0))
        throw std::invalid_argument("comparison profile needs L, t_max, amplitude > 0");
    if (opt.nodes < 8 || !(opt.growth >= 1.0) || !(opt.start_time > 0.0) || !(opt.first_step > 0.0))
        throw std::invalid_argument("invalid comparison options");

    auto prof = std::shared_ptr<ComparisonProfile>(new ComparisonProfile());
    prof->alpha_ = alpha;
    prof->label_ = std::move(label);
    prof->L_ = L;
    prof->amp_ = amplitude;
    prof->n_ = opt.nodes;
    const int n = opt.nodes;
    const double dz = L / n;
    prof->dz_ = dz;
    // times scale with the square of the amplitude so that rescaled problems
    // are solved on exactly rescaled grids
    const double s2 = 4.0 * amplitude * amplitude;
    const double t0 = opt.start_time * s2;
    prof->t0_ = t0;
    const double t_end = t0 + t_max;
    const double dt_max = t_max / 100.0;
    double dt = std::min(opt.first_step * s2, dt_max);

    std::vector<double> cur(n + 1), next(n + 1), res(n + 1), lo(n + 1), di(n + 1), up(n + 1), delta(n + 1);
    const double h0 = opt.ramp_cells * dz;
    for (int i = 0; i <= n; ++i) cur[i] = std::min(amplitude, 2.0 * amplitude * i * dz / h0);
    cur[0] = 0.0;
    cur[n] = amplitude;
    prof->times_.push_back(t0);
    prof->table_.insert(prof->table_.end(), cur.begin(), cur.end());

    const double inv2dz = 0.5 / dz, invdz2 = 1.0 / (dz * dz);
    auto alpha_and_slope = [&](double s, double t, double& a, double& da) {
        a = alpha(s, t);
        const double e = 1e-6 * std::max(1.0, std::abs(s));
        da = (alpha(s + e, t) - alpha(s - e, t)) / (2.0 * e);
    };

    // residual R_i = phi_i - old_i - dt alpha(s_i) L_i
    auto residual = [&](const std::vector<double>& v, const std::vector<double>& old, double step, double t) {
        double worst = 0.0;
        for (int i = 1; i < n; ++i) {
            const double s = (v[i + 1] - v[i - 1]) * inv2dz;
            const double lap = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * invdz2;
            res[i] = v[i] - old[i] - step * alpha(s, t) * lap;
            worst = std::max(worst, std::abs(res[i]));
        }
        return worst;
    };

    double t = t0;
    while (t < t_end * (1.0 - 1e-14)) {
        double step = std::min(dt, t_end - t);
        bool ok = false;
        for (int attempt = 0; attempt < 30 && !ok; ++attempt) {
            next = cur;
            const double tn = t + step - t0;
            double worst = residual(next, cur, step, tn);
            for (int it = 0; it < opt.newton_max; ++it) {
                if (!std::isfinite(worst)) break;
                if (worst <= 1e-14 * amplitude) {
                    ok = true;
                    break;
                }
                for (int i = 1; i < n; ++i) {
                    const double s = (next[i + 1] - next[i - 1]) * inv2dz;
                    const double lap = (next[i + 1] - 2.0 * next[i] + next[i - 1]) * invdz2;
                    double a, da;
                    alpha_and_slope(s, tn, a, da);
                    lo[i] = -step * (-da * inv2dz * lap + a * invdz2);
                    di[i] = 1.0 + 2.0 * step * a * invdz2;
                    up[i] = -step * (da * inv2dz * lap + a * invdz2);
                }
                // Thomas algorithm on rows 1..n-1 (boundary values fixed)
                std::vector<double>& c = up;
                std::vector<double>& d = delta;
                double denom = di[1];
                c[1] = up[1] / denom;
                d[1] = res[1] / denom;
                for (int i = 2; i < n; ++i) {
                    denom = di[i] - lo[i] * c[i - 1];
                    c[i] = up[i] / denom;
                    d[i] = (res[i] - lo[i] * d[i - 1]) / denom;
                }
                for (int i = n - 2; i >= 1; --i) d[i] -= c[i] * d[i + 1];
                double change = 0.0;
                for (int i = 1; i < n; ++i) {
                    next[i] -= d[i];
                    change = std::max(change, std::abs(d[i]));
                }
                const double prev = worst;
                worst = residual(next, cur, step, tn);
                if (change <= 1e-16 * amplitude && worst <= 1e-11 * amplitude && worst >= 0.5 * prev) {
                    ok = true;  // converged to rounding level
                    break;
                }
            }
            if (!ok) step *= 0.5;
        }
        if (!ok) throw NumericalFailure("comparison profile: Newton iteration did not converge at t = " + std::to_string(t));
        cur.swap(next);
        t += step;
        prof->times_.push_back(t);
        prof->table_.insert(prof->table_.end(), cur.begin(), cur.end());
        dt = std::min(step * opt.growth, dt_max);
    }

    const double tol = 1e-9 * amplitude;
    if (prof->max_monotonicity_violation(9.0 * t0) > tol || prof->max_concavity_violation(9.0 * t0) > tol)
        throw NumericalFailure("comparison profile lost monotonicity or concavity after the transient");
    return prof;
}

std::shared_ptr<const ComparisonProfile> csf_profile(double L, double t_max, ComparisonOptions opt) {
    return ComparisonProfile::build(csf_alpha(), L, t_max, 0.5, opt, "csf");
}

std::size_t ComparisonProfile::slice_for(double tau, double& w) const {
    if (tau > times_.back() * (1.0 + 1e-12))
        throw std::out_of_range("time beyond the tabulated range of the comparison profile");
    tau = std::clamp(tau, times_.front(), times_.back());
    // right-continuous: a stored time resolves to the slice that ends there, so
    // dt() is the backward difference the implicit solver satisfied. Times within
    // roundoff of a stored time (e.g. after an amplitude rescaling) snap onto it.
    const double snap = 1e-13 * std::abs(tau);
    auto it = std::lower_bound(times_.begin(), times_.end(), tau - snap);
    if (it != times_.end() && *it <= tau + snap) tau = *it;
    std::size_t k = it == times_.begin() ? 0 : static_cast<std::size_t>(it - times_.begin()) - 1;
    k = std::min(k, times_.size() - 2);
    w = (tau - times_[k]) / (times_[k + 1] - times_[k]);
    return k;
}

namespace {

// Second-order nodal difference (one-sided at the ends), linearly interpolated.
double nodal_derivative(const double* v, int n, double h, double z, int deriv) {
    auto at = [&](int i) {
        if (deriv == 1) {
            if (i == 0) return (-3.0 * v[0] + 4.0 * v[1] - v[2]) / (2.0 * h);
            if (i == n) return (3.0 * v[n] - 4.0 * v[n - 1] + v[n - 2]) / (2.0 * h);
            return (v[i + 1] - v[i - 1]) / (2.0 * h);
        }
        if (i == 0) return (2.0 * v[0] - 5.0 * v[1] + 4.0 * v[2] - v[3]) / (h * h);
        if (i == n) return (2.0 * v[n] - 5.0 * v[n - 1] + 4.0 * v[n - 2] - v[n - 3]) / (h * h);
        return (v[i + 1] - 2.0 * v[i] + v[i - 1]) / (h * h);
    };
    const int k = std::clamp(static_cast<int>(z / h), 0, n - 1);
    const double s = (z - k * h) / h;
    return (1.0 - s) * at(k) + s * at(k + 1);
}

}  // namespace

double ComparisonProfile::interp_node(std::size_t s, double w, double z, int deriv) const {
    const double* a = table_.data() + s * (n_ + 1);
    const double* b = a + (n_ + 1);
    if (deriv == 0) return (1.0 - w) * pchip_eval(a, n_, dz_, z, 0) + w * pchip_eval(b, n_, dz_, z, 0);
    return (1.0 - w) * nodal_derivative(a, n_, dz_, z, deriv) + w * nodal_derivative(b, n_, dz_, z, deriv);
}

double ComparisonProfile::value(double z, double t) const {
    if (z < 0.0 || t < 0.0) throw std::invalid_argument("profile arguments must be nonnegative");
    if (z >= L_) return amp_;
    double w;
    const std::size_t k = slice_for(t + t0_, w);
    return interp_node(k, w, z, 0);
}

double ComparisonProfile::dz(double z, double t) const {
    if (z < 0.0 || t < 0.0) throw std::invalid_argument("profile arguments must be nonnegative");
    if (z >= L_) return 0.0;
    double w;
    const std::size_t k = slice_for(t + t0_, w);
    return interp_node(k, w, z, 1);
}

double ComparisonProfile::dzz(double z, double t) const {
    if (z < 0.0 || t < 0.0) throw std::invalid_argument("profile arguments must be nonnegative");
    if (z >= L_) return 0.0;
    double w;
    const std::size_t k = slice_for(t + t0_, w);
    return interp_node(k, w, z, 2);
}

double ComparisonProfile::dt(double z, double t) const {
    if (z < 0.0 || t < 0.0) throw std::invalid_argument("profile arguments must be nonnegative");
    if (z >= L_) return 0.0;
    double w;
    const std::size_t k = slice_for(t + t0_, w);
    const double* a = table_.data() + k * (n_ + 1);
    const double* b = a + (n_ + 1);
    return (pchip_eval(b, n_, dz_, z, 0) - pchip_eval(a, n_, dz_, z, 0)) / (times_[k + 1] - times_[k]);
}

double ComparisonProfile::min_discrete_residual(double t_from) const {
    double worst = std::numeric_limits<double>::infinity();
    const double inv2dz = 0.5 / dz_, invdz2 = 1.0 / (dz_ * dz_);
    for (std::size_t k = 1; k < times_.size(); ++k) {
        if (times_[k] - t0_ < t_from) continue;
        const double* v = table_.data() + k * (n_ + 1);
        const double* o = v - (n_ + 1);
        const double step = times_[k] - times_[k - 1];
        for (int i = 1; i < n_; ++i) {
            const double s = (v[i + 1] - v[i - 1]) * inv2dz;
            const double lap = (v[i + 1] - 2.0 * v[i] + v[i - 1]) * invdz2;
            worst = std::min(worst, (v[i] - o[i]) / step - alpha_(s, times_[k] - t0_) * lap);
        }
    }
    return std::isfinite(worst) ? worst : 0.0;
}

double ComparisonProfile::max_concavity_violation(double t_from) const {
    double worst = 0.0;
    for (std::size_t k = 0; k < times_.size(); ++k) {
        if (times_[k] - t0_ < t_from) continue;
        const double* v = table_.data() + k * (n_ + 1);
        for (int i = 1; i < n_; ++i) worst = std::max(worst, v[i + 1] - 2.0 * v[i] + v[i - 1]);
    }
    return worst;
}

double ComparisonProfile::max_monotonicity_violation(double t_from) const {
    double worst = 0.0;
    for (std::size_t k = 0; k < times_.size(); ++k) {
        if (times_[k] - t0_ < t_from) continue;
        const double* v = table_.data() + k * (n_ + 1);
        for (int i = 0; i < n_; ++i) worst = std::max(worst, v[i] - v[i + 1]);
    }
    return worst;
}

nlohmann::ordered_json ComparisonProfile::describe() const {
    return {{"kind", kind()}, {"family", label_}, {"L", L_},           {"amplitude", amp_},
            {"nodes", n_},    {"slices", times_.size()}, {"start_time", t0_}, {"t_max", t_max()}};
}

}  // namespace gradest
