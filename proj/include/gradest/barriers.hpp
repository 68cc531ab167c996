#pragma once

#include <array>
#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradest/types.hpp"

namespace gradest {

/// alpha(s, t) of the one-dimensional comparison equation phi_t = alpha(phi', t) phi'' (+ B).
using AlphaFn = std::function<double(double, double)>;

AlphaFn csf_alpha();                         // 1 / (1 + s^2)
AlphaFn plap_alpha(double p);                // (p - 1) |s|^{p-2}
AlphaFn scaled_alpha(AlphaFn base, double a);  // a * base

/// One-dimensional comparison function phi(z, t) on [0, z_max] x [0, t_max].
class BarrierProfile {
public:
    virtual ~BarrierProfile() = default;
    virtual double value(double z, double t) const = 0;
    virtual double dz(double z, double t) const = 0;
    virtual double dzz(double z, double t) const = 0;
    virtual double dt(double z, double t) const = 0;
    virtual double z_max() const = 0;
    virtual double t_max() const = 0;
    virtual std::string kind() const = 0;
    virtual nlohmann::ordered_json describe() const = 0;
    /// sup_z phi(z, t) for t > 0 (the limit value the profile approaches).
    virtual double amplitude() const = 0;
};

using ProfilePtr = std::shared_ptr<const BarrierProfile>;

// ---------------------------------------------------------------------------
// p-Laplacian self-similar profiles

double fp_value(double p, double xi);
double fp_derivative(double p, double xi);         // integrand
double fp_second_derivative(double p, double xi);  // derivative of the integrand
double fp_limit(double p);
double rp_constant(double p);

/// w(z, t) = M phi(z / M, t / M^2), phi(z, t) = F_p(z / (t^{1/p} R_p)) / (2 F_p(inf)).
class PLapBarrier final : public BarrierProfile {
public:
    PLapBarrier(double p, double M, double z_max = 1e300, double t_max = 1e300);
    double value(double z, double t) const override;
    double dz(double z, double t) const override;
    double dzz(double z, double t) const override;
    double dt(double z, double t) const override;
    double z_max() const override { return z_max_; }
    double t_max() const override { return t_max_; }
    std::string kind() const override { return "closed_form"; }
    nlohmann::ordered_json describe() const override;
    double amplitude() const override { return 0.5 * M_; }

    double similarity_variable(double z, double t) const;
    /// max_z phi'(z, t) = M^{2/p} t^{-1/p} / (2 R_p F_p(inf)).
    double max_slope(double t) const;
    double p() const { return p_; }

private:
    double p_, M_, fp_inf_, rp_, z_max_, t_max_;
};

// ---------------------------------------------------------------------------
// Tabulated solution of phi_t = alpha(phi') phi'' with a step as initial data

struct ComparisonOptions {
    int nodes = 2048;            // intervals on [0, L]
    double start_time = 1e-4;    // initial slice, relative to amplitude 1/2
    double first_step = 1e-5;    // relative to amplitude 1/2
    double growth = 1.05;
    double ramp_cells = 8.0;     // initial data min(amp, z / h0), h0 = ramp_cells * dz
    int newton_max = 40;
};

/// phi(0, t) = 0, phi(L, t) = amplitude; backward Euler in time, Newton on the
/// tridiagonal system. Profile time t is measured from the step, i.e. the table
/// slice at internal time start_time + t.
class ComparisonProfile final : public BarrierProfile {
public:
    static std::shared_ptr<const ComparisonProfile> build(AlphaFn alpha, double L, double t_max,
                                                          double amplitude = 0.5, ComparisonOptions opt = {},
                                                          std::string label = "comparison");

    double value(double z, double t) const override;
    double dz(double z, double t) const override;
    double dzz(double z, double t) const override;
    double dt(double z, double t) const override;
    double z_max() const override { return L_; }
    double t_max() const override { return times_.back() - t0_; }
    std::string kind() const override { return "tabulated"; }
    nlohmann::ordered_json describe() const override;
    double amplitude() const override { return amp_; }

    /// Backward-Euler residual phi_t - alpha(phi') phi'' at every stored node
    /// (difference quotients of the table), minimum over slices with t >= t_from.
    double min_discrete_residual(double t_from = 0.0) const;
    /// Largest positive second difference / negative first difference over
    /// slices with t >= t_from (0 means concave and nondecreasing).
    double max_concavity_violation(double t_from) const;
    double max_monotonicity_violation(double t_from) const;

    const std::vector<double>& times() const { return times_; }  // internal times
    double start_time() const { return t0_; }
    std::size_t node_count() const { return static_cast<std::size_t>(n_) + 1; }
    double node_value(std::size_t slice, std::size_t node) const { return table_[slice * (n_ + 1) + node]; }
    double spacing() const { return dz_; }

private:
    ComparisonProfile() = default;
    AlphaFn alpha_;
    std::string label_;
    double L_ = 0.0, amp_ = 0.5, dz_ = 0.0, t0_ = 0.0;
    int n_ = 0;
    std::vector<double> times_;
    std::vector<double> table_;

    std::size_t slice_for(double tau, double& w) const;
    double interp_node(std::size_t s, double w, double z, int deriv) const;
};

/// Curve-shortening comparison profile on [0, L], amplitude 1/2.
std::shared_ptr<const ComparisonProfile> csf_profile(double L, double t_max, ComparisonOptions opt = {});

/// M * base(z / M, a t / M^2): amplitude rescaling plus a time factor (a = A
/// turns a solution of phi_t = phi''/(1+phi'^2) into one of phi_t = A phi''/(1+phi'^2)).
class ScaledProfile final : public BarrierProfile {
public:
    ScaledProfile(ProfilePtr base, double M, double time_factor = 1.0);
    double value(double z, double t) const override;
    double dz(double z, double t) const override;
    double dzz(double z, double t) const override;
    double dt(double z, double t) const override;
    double z_max() const override { return M_ * base_->z_max(); }
    double t_max() const override { return base_->t_max() * M_ * M_ / a_; }
    std::string kind() const override { return base_->kind(); }
    nlohmann::ordered_json describe() const override;
    double amplitude() const override { return M_ * base_->amplitude(); }

private:
    ProfilePtr base_;
    double M_, a_;
};

// ---------------------------------------------------------------------------
// Translating solutions phi(z, t) = g(z) + c t with g'' = (c - B) / alpha(g')

class TranslatorProfile final : public BarrierProfile {
public:
    double value(double z, double t) const override;
    double dz(double z, double t) const override;
    double dzz(double z, double t) const override;
    double dt(double, double) const override { return c_; }
    double z_max() const override { return z_.back(); }
    double t_max() const override { return 1e300; }
    std::string kind() const override { return "translator"; }
    nlohmann::ordered_json describe() const override;
    double amplitude() const override { return g_.back(); }

    double speed() const { return c_; }
    double forcing() const { return B_; }
    /// z where g' reached 0 (concave case), if it did.
    std::optional<double> flat_from() const { return flat_; }
    std::size_t node_count() const { return z_.size(); }

    friend std::shared_ptr<const TranslatorProfile> translator_profile(AlphaFn, double, double, double, double, double);

private:
    TranslatorProfile() = default;
    AlphaFn alpha_;
    double c_ = 0.0, B_ = 0.0;
    std::vector<double> z_, g_, gp_, gpp_;
    std::optional<double> flat_;
    std::size_t locate(double z) const;
};

class DegenerateOde : public Error {
public:
    DegenerateOde(const std::string& what, std::shared_ptr<const TranslatorProfile> partial)
        : Error(what), partial_(std::move(partial)) {}
    const std::shared_ptr<const TranslatorProfile>& partial() const { return partial_; }

private:
    std::shared_ptr<const TranslatorProfile> partial_;
};

/// Adaptive RK4 (step doubling). alpha is evaluated at t = 0. Stops early and
/// holds g constant when g' reaches 0; throws DegenerateOde (with the partial
/// profile) when the step size underflows.
std::shared_ptr<const TranslatorProfile> translator_profile(AlphaFn alpha, double c, double B, double z_max,
                                                            double slope0 = 0.0, double tol = 1e-12);

// ---------------------------------------------------------------------------
// Radial profile phi'' + (n-1) phi'/z = (phi - z phi') / 2, phi'(0) = 0

class RadialProfile {
public:
    static constexpr double kZmax = 20.0;

    double value(double z) const;
    double dz(double z) const;
    double dzz(double z) const;  // from the ODE
    double phi0() const { return phi0_; }
    int dim() const { return n_; }
    double spacing() const { return h_; }
    /// ODE residual with phi'' from a five-point difference of phi'.
    double residual(double z) const;
    std::size_t node_count() const { return z_.size(); }
    double node(std::size_t k) const { return z_[k]; }
    double node_slope(std::size_t k) const { return dphi_[k]; }

    friend RadialProfile radial_profile(int n, double tol);

private:
    int n_ = 1;
    double phi0_ = 0.0, h_ = 1e-3;
    std::vector<double> z_, phi_, dphi_;
    double node_dzz(std::size_t k) const;
};

/// Shooting on phi(0) with bisection until |phi'(20) - 1| <= tol.
RadialProfile radial_profile(int n, double tol = 1e-6);

/// Exact phi(0) for the normalisation phi'(inf) = 1: 2 Gamma((n+1)/2) / Gamma(n/2).
double radial_phi0_exact(int n);

/// w_a(x, t) = base + a + mu t + v sqrt(Lambda t) phi(|x - x0| / sqrt(Lambda t)).
class SupersolutionWa {
public:
    SupersolutionWa(std::shared_ptr<const RadialProfile> profile, double base, double a, Vec x0, double mu,
                    double lambda, double v);
    double operator()(const Vec& x, double t) const;

private:
    std::shared_ptr<const RadialProfile> profile_;
    double base_, a_, mu_, lambda_, v_;
    Vec x0_;
};

// ---------------------------------------------------------------------------
// Residual and shape checks on an arbitrary profile

struct ResidualReport {
    double min_residual = 0.0;  // min of phi_t - alpha(phi') phi'' - B
    double max_abs_residual = 0.0;
    double worst_z = 0.0, worst_t = 0.0;
    std::size_t points = 0;
    nlohmann::ordered_json to_json() const;
};

/// Evaluates on the tensor grid zs x ts, skipping points where `skip` is true.
ResidualReport supersolution_residual(const BarrierProfile& phi, const AlphaFn& alpha, double B,
                                      const std::vector<double>& zs, const std::vector<double>& ts,
                                      const std::function<bool(double, double)>& skip = {});

/// (z, t, phi, phi', phi'', residual) rows.
void export_profile_csv(const BarrierProfile& phi, const AlphaFn& alpha, double B, const std::vector<double>& zs,
                        const std::vector<double>& ts, const std::string& path);

std::vector<double> linspace(double a, double b, int n);
std::vector<double> geomspace(double a, double b, int n);

}  // namespace gradest
