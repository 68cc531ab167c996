#pragma once

#include <cstdint>
#include <memory>
#include <string>

#include <nlohmann/json.hpp>

#include "gradest/types.hpp"

namespace gradest {

/// Positively 1-homogeneous, strictly convex function on (n+1)-covectors.
class FinslerNorm {
public:
    virtual ~FinslerNorm() = default;
    virtual double value(const Vec& z) const = 0;
    virtual Vec gradient(const Vec& z) const = 0;
    virtual Mat hessian(const Vec& z) const = 0;
    virtual std::string name() const = 0;
    virtual nlohmann::ordered_json params() const = 0;
    /// Largest dimension the norm accepts (0 = any).
    virtual int fixed_dim() const { return 0; }
};

class EuclideanNorm final : public FinslerNorm {
public:
    double value(const Vec& z) const override;
    Vec gradient(const Vec& z) const override;
    Mat hessian(const Vec& z) const override;
    std::string name() const override { return "euclidean"; }
    nlohmann::ordered_json params() const override { return nlohmann::ordered_json::object(); }
};

/// sqrt(z^T Q z), Q symmetric positive definite.
class EllipsoidNorm final : public FinslerNorm {
public:
    explicit EllipsoidNorm(Mat q);
    double value(const Vec& z) const override;
    Vec gradient(const Vec& z) const override;
    Mat hessian(const Vec& z) const override;
    std::string name() const override { return "ellipsoid"; }
    nlohmann::ordered_json params() const override;
    int fixed_dim() const override { return static_cast<int>(q_.rows()); }
    const Mat& q() const { return q_; }

private:
    Mat q_;
};

/// (|z|^4 + eps * sum z_k^4)^(1/4).
class QuarticNorm final : public FinslerNorm {
public:
    explicit QuarticNorm(double eps = 0.3);
    double value(const Vec& z) const override;
    Vec gradient(const Vec& z) const override;
    Mat hessian(const Vec& z) const override;
    std::string name() const override { return "quartic"; }
    nlohmann::ordered_json params() const override { return {{"eps", eps_}}; }
    double eps() const { return eps_; }

private:
    double eps_;
};

/// Positively 0-homogeneous positive mobility.
class Mobility {
public:
    virtual ~Mobility() = default;
    virtual double value(const Vec& z) const = 0;
    virtual std::string name() const = 0;
    virtual nlohmann::ordered_json params() const = 0;
};

class ConstantMobility final : public Mobility {
public:
    double value(const Vec&) const override { return 1.0; }
    std::string name() const override { return "constant"; }
    nlohmann::ordered_json params() const override { return nlohmann::ordered_json::object(); }
};

/// 1 + delta * z_last / |z|, |delta| < 1.
class TiltedMobility final : public Mobility {
public:
    explicit TiltedMobility(double delta);
    double value(const Vec& z) const override;
    std::string name() const override { return "tilted"; }
    nlohmann::ordered_json params() const override { return {{"delta", delta_}}; }

private:
    double delta_;
};

/// Anisotropy (Fbar, mbar) for an n-dimensional graph; Fbar acts on R^{n+1}.
/// The graph functions are F(p) = Fbar(p, -1), m(p) = mbar(p, -1) and the
/// restricted norm is Ftilde(p) = Fbar(p, 0).
class AnisotropyModel {
public:
    /// Throws NotStrictlyConvex when the sampled tangential Hessian minimum is <= 1e-4.
    AnisotropyModel(std::shared_ptr<const FinslerNorm> norm, std::shared_ptr<const Mobility> mobility, int n,
                    bool check_admissible = true);

    int dim() const { return n_; }
    const FinslerNorm& norm() const { return *norm_; }
    const Mobility& mobility() const { return *mobility_; }
    std::string describe() const;
    nlohmann::ordered_json to_json() const;

    Vec lift(const Vec& p, double last) const;

    double F(const Vec& p) const;
    double m(const Vec& p) const;
    /// m(p) F(p) D^2F(p), n x n.
    Mat coefficient(const Vec& p) const;

    double Ftilde(const Vec& p) const;
    Vec Ftilde_gradient(const Vec& p) const;
    Mat Ftilde_hessian(const Vec& p) const;

    /// Tangential Hessian minimum found at construction (for admissibility).
    double convexity_floor() const { return convexity_floor_; }

private:
    std::shared_ptr<const FinslerNorm> norm_;
    std::shared_ptr<const Mobility> mobility_;
    int n_;
    double convexity_floor_ = 0.0;
};

std::shared_ptr<const AnisotropyModel> make_anisotropy(const std::string& norm, const nlohmann::ordered_json& norm_params,
                                                       const std::string& mobility, double delta, int n);

/// Deterministic points on S^{d-1} (Fibonacci spiral on S^2, uniform circle on S^1,
/// normalised Halton-Gaussian otherwise).
std::vector<Vec> sphere_points(int d, int count);

struct HomogeneityReport {
    double value_degree1 = 0.0;     // |F(lq) - l F(q)| / (l F(q))
    double gradient_degree0 = 0.0;  // |DF(lq) - DF(q)| / |DF(q)|
    double radial_flatness = 0.0;   // |D^2F(q)(q, v)| / (|D^2F(q)| |q| |v|)
    double hessian_degree = 0.0;    // |l D^2F(lq)(v,v) - D^2F(q)(v,v)| / scale
    double derivative_consistency = 0.0;  // analytic derivatives vs central differences
    double max() const;
    nlohmann::ordered_json to_json() const;
};

HomogeneityReport verify_homogeneity(const AnisotropyModel& model, int samples = 1000, std::uint64_t seed = 7);

struct SphereConstants {
    double A1 = 0.0;
    double A2 = 0.0;
    double A = 0.0;
    double C = 0.0;
    // ingredients of C
    double F_min = 0.0, F_max = 0.0, m_min = 0.0, m_max = 0.0, D2_max = 0.0, D3_max = 0.0;
    nlohmann::ordered_json to_json() const;
};

/// Throws NotStrictlyConvex when A1 <= 1e-4.
SphereConstants sphere_constants(const AnisotropyModel& model);

/// F*(v) = sup { v.p : Ftilde(p) <= 1 }.
double dual_norm(const AnisotropyModel& model, const Vec& v);

/// Covector p(v) = DF*|_v on {Ftilde = 1} attaining the supremum.
Vec dual_maximizer(const AnisotropyModel& model, const Vec& v);

/// p(n) = DF*|_n.
Vec normal_to_covector(const AnisotropyModel& model, const Vec& n);
/// n(p) = DFtilde|_p.
Vec covector_to_normal(const AnisotropyModel& model, const Vec& p);

}  // namespace gradest
