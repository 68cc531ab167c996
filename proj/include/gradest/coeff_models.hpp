#pragma once

#include <functional>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradest/anisotropy.hpp"
#include "gradest/types.hpp"

namespace gradest {

class UnboundedDegeneracy : public Error {
public:
    using Error::Error;
};

struct Coefficients {
    Mat A;
    double b = 0.0;
};

/// u_t = a^{ij}(Du, t) D_i D_j u + b(Du, t).
class CoefficientModel {
public:
    virtual ~CoefficientModel() = default;

    /// Validates p and returns (A, b). A is exactly symmetric.
    Coefficients coefficients(const Vec& p, double t) const;
    virtual Mat matrix(const Vec& p, double t) const = 0;
    virtual double drift(const Vec&, double) const { return 0.0; }

    /// Degeneracy scalar in closed form where the model has one.
    virtual std::optional<double> closed_form_alpha(double, double) const { return std::nullopt; }

    virtual std::string name() const = 0;
    virtual nlohmann::ordered_json params() const = 0;
    /// Spatial dimension the model is tied to, 0 if any.
    virtual int fixed_dim() const { return 0; }
    virtual bool has_drift() const { return false; }
    /// Nonzero when a numerical regularisation is active (reported).
    virtual double regularization() const { return 0.0; }

    nlohmann::ordered_json to_json() const;
};

class McfModel final : public CoefficientModel {
public:
    Mat matrix(const Vec& p, double t) const override;
    std::optional<double> closed_form_alpha(double R, double) const override { return 1.0 / (1.0 + R * R); }
    std::string name() const override { return "mcf"; }
    nlohmann::ordered_json params() const override { return nlohmann::ordered_json::object(); }
};

/// A = alpha(|p|) p^ p^T + beta(|p|) (I - p^ p^T), A(0) = alpha(0) I.
class IsotropicModel final : public CoefficientModel {
public:
    using Fn = std::function<double(double, double)>;
    IsotropicModel(Fn alpha, Fn beta, nlohmann::ordered_json description);
    Mat matrix(const Vec& p, double t) const override;
    std::optional<double> closed_form_alpha(double R, double t) const override { return alpha_(R, t); }
    std::string name() const override { return "isotropic"; }
    nlohmann::ordered_json params() const override { return description_; }
    double alpha(double R, double t) const { return alpha_(R, t); }
    double beta(double R, double t) const { return beta_(R, t); }

private:
    Fn alpha_, beta_;
    nlohmann::ordered_json description_;
};

/// div(|Du|^{p-2} Du) with |p| replaced by sqrt(|p|^2 + eps^2).
class PLaplacianModel final : public CoefficientModel {
public:
    /// eps < 0 selects the default: 0 for p >= 2, 1e-8 for p < 2.
    explicit PLaplacianModel(double p, double eps = -1.0);
    Mat matrix(const Vec& q, double t) const override;
    std::optional<double> closed_form_alpha(double R, double t) const override;
    std::string name() const override { return "plaplacian"; }
    nlohmann::ordered_json params() const override { return {{"p", p_}, {"eps", eps_}}; }
    double regularization() const override { return eps_; }
    double p() const { return p_; }
    double eps() const { return eps_; }

private:
    double p_, eps_;
};

/// a = m(p) F(p) D^2F(p).
class AnisotropicModel final : public CoefficientModel {
public:
    explicit AnisotropicModel(std::shared_ptr<const AnisotropyModel> aniso);
    Mat matrix(const Vec& p, double) const override { return aniso_->coefficient(p); }
    std::string name() const override { return "anisotropic"; }
    nlohmann::ordered_json params() const override { return aniso_->to_json(); }
    int fixed_dim() const override { return aniso_->dim(); }
    const AnisotropyModel& anisotropy() const { return *aniso_; }
    std::shared_ptr<const AnisotropyModel> anisotropy_ptr() const { return aniso_; }

private:
    std::shared_ptr<const AnisotropyModel> aniso_;
};

class CustomModel final : public CoefficientModel {
public:
    using MatrixFn = std::function<Mat(const Vec&, double)>;
    using DriftFn = std::function<double(const Vec&, double)>;
    CustomModel(MatrixFn a, DriftFn b, nlohmann::ordered_json description, int dim = 0);
    Mat matrix(const Vec& p, double t) const override { return a_(p, t); }
    double drift(const Vec& p, double t) const override { return b_ ? b_(p, t) : 0.0; }
    std::string name() const override { return "custom"; }
    nlohmann::ordered_json params() const override { return description_; }
    int fixed_dim() const override { return dim_; }
    bool has_drift() const override { return static_cast<bool>(b_); }

private:
    MatrixFn a_;
    DriftFn b_;
    nlohmann::ordered_json description_;
    int dim_;
};

/// alpha(R, t) = R^2 inf_{|p|=R, v.p != 0} v^T A v / (v.p)^2; closed form when
/// available, sampled otherwise. n is used when the model is dimension-free.
/// Throws DegenerateAlongGradient when the infimum is not positive.
double degeneracy_alpha(const CoefficientModel& model, double R, double t, int n = 2);

/// Always the sampled minimisation (256-point angle grid + golden section).
double sampled_alpha(const CoefficientModel& model, double R, double t, int n = 2);

struct DegeneracyProfile {
    std::vector<double> R;
    std::vector<double> alpha;
    std::optional<double> A0;
    std::optional<double> P;
};

/// alpha on R = 10^{j/20}, j = -40.., up to R_max.
DegeneracyProfile degeneracy_profile(const CoefficientModel& model, double R_max, double t = 0.0, int n = 2);

struct EllipticityConstants {
    double A0;
    double P;
};

/// (A0, P) with sampled alpha(R) R^2 >= A0 on [P, R_max]. Throws
/// UnboundedDegeneracy when alpha R^2 decays at the top of the scan.
EllipticityConstants ellipticity_constants(const CoefficientModel& model, double R_max, int n = 2);

/// Builds a model from a configuration block; n is the spatial dimension.
std::shared_ptr<const CoefficientModel> make_model(const nlohmann::ordered_json& block, int n);

}  // namespace gradest
