#pragma once

#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "gradest/anisotropy.hpp"
#include "gradest/barriers.hpp"
#include "gradest/evolve.hpp"
#include "gradest/kernels.hpp"

namespace gradest {

// ---------------------------------------------------------------------------
// Doubled-variable functional Z(x, y, t) = u(y) - u(x) - 2 phi(|y - x| / 2, t) - eps (1 + t)

struct ZResult {
    double margin = 0.0;
    std::size_t x = 0, y = 0;  // u(y) >= u(x)
    double distance = 0.0;
    std::uint64_t pairs = 0;
    bool exhaustive = true;
    nlohmann::ordered_json to_json(const Grid& grid) const;
};

/// psi is the modulus in the half-distance variable: the penalty of a pair at
/// distance d is 2 psi(d / 2).
using ModulusFn = std::function<double(double)>;

ZResult z_check(const GridFunction& u, const PairGeometry& geom, const ModulusFn& psi, double eps, Exec exec);
/// phi(., u.time()) as the modulus. Throws std::out_of_range when the profile
/// does not reach half the largest pair distance.
ZResult z_check(const GridFunction& u, const PairGeometry& geom, const BarrierProfile& phi, double eps, Exec exec);

// ---------------------------------------------------------------------------

/// Least concave nondecreasing majorant of the binned pair differences.
class EmpiricalModulus {
public:
    double operator()(double s) const;
    /// Hull vertices (s, psi), starting at (0, 0).
    const std::vector<double>& knots() const { return s_; }
    const std::vector<double>& values() const { return v_; }
    double bin_width() const { return bin_; }

    friend EmpiricalModulus empirical_modulus(const GridFunction& u, const PairGeometry& geom, Exec exec, int bins);

private:
    std::vector<double> s_, v_;
    double bin_ = 0.0;
};

EmpiricalModulus empirical_modulus(const GridFunction& u, const PairGeometry& geom, Exec exec, int bins = 256);

// ---------------------------------------------------------------------------
// Gradient-bound curves

enum class BoundCurve { Mcf, Anisotropic, Corollary, PLaplacian, AnisotropicDirichlet };

std::string to_string(BoundCurve c);
BoundCurve bound_curve_from_string(const std::string& s);

struct BoundParams {
    double M = 1.0;
    double A = 1.0;   // anisotropic ellipticity
    double A0 = 1.0;  // corollary constants
    double P = 1.0;
    double p = 2.0;   // p-Laplacian exponent
    double C = 1.0;   // anisotropic Dirichlet constant
    nlohmann::ordered_json to_json() const;
};

/// mcf: sqrt(exp(2M^2/t) - 1); anisotropic: sqrt(exp(2M^2/(A t)) - 1);
/// corollary: P exp(1 + M^2/(A0 t)); plaplacian: M^{2/p} t^{-1/p} / (2 R_p F_p(inf));
/// anisotropic Dirichlet: sqrt(C exp(M^2/(A t)) - 1). Overflow gives +inf.
double gradient_bound(BoundCurve curve, const BoundParams& params, double t);

// ---------------------------------------------------------------------------

struct CheckRow {
    double t = 0.0;
    double margin = 0.0;     // signed, <= tolerance passes
    double tolerance = 0.0;
    double value = 0.0;      // measured quantity
    double bound = 0.0;      // reference quantity
    double ratio = 0.0;      // value / bound where meaningful
    bool pass = false;
    nlohmann::ordered_json location;
};

struct VerificationReport {
    std::string name;
    nlohmann::ordered_json params = nlohmann::ordered_json::object();
    nlohmann::ordered_json provenance = nlohmann::ordered_json::object();
    std::vector<CheckRow> rows;
    std::size_t skipped = 0;

    bool pass() const;
    double worst_margin() const;
    double best_ratio() const;
    nlohmann::ordered_json to_json() const;
    std::string table() const;
};

/// Modulus tolerance C_disc h^2 + 1e-8. On the periodic heat model the worst
/// positive margin (unmollified step, t = 0.005, N = 32..128) is 3.4..3.8 h^2;
/// C_disc doubles that.
inline constexpr double kModulusCdisc = 8.0;
double modulus_tolerance(double h, double scale = 1.0);

/// z_check at every checkpoint state against `phi`.
VerificationReport modulus_check(const std::vector<Checkpoint>& checkpoints, const BarrierProfile& phi, double tol,
                                 double eps, Exec exec);

/// margin = max|Du|(t) - bound(t), tolerance = slack * bound(t); checkpoints
/// before t_min are not reported.
VerificationReport gradient_bound_check(const std::vector<Checkpoint>& checkpoints, BoundCurve curve,
                                        const BoundParams& params, double slack, double t_min = 0.0);

using DistanceBarrier = std::function<double(double, double)>;  // (d, t)

/// margin = max over samples with a finite distance of |u| - phi(d, t);
/// samples with NaN distance (cut locus) are skipped and counted.
VerificationReport boundary_estimate_check(const std::vector<Checkpoint>& checkpoints,
                                           const std::vector<double>& distance, const DistanceBarrier& phi,
                                           double tol);

// ---------------------------------------------------------------------------
// Ellipticity of anisotropic coefficients

struct LemmaReport {
    double min_ratio = 0.0;       // (1+|p|^2) v.a v / (A |v|^2)
    double min_chain_slack = 0.0; // v.a v - A1 A2 (|v_perp|^2 + (v.p^)^2 / (1+|p|^2)), relative
    double A = 0.0;
    std::size_t samples = 0;
    Vec worst_p, worst_v;
    nlohmann::ordered_json to_json() const;
};

LemmaReport ellipticity_lemma_check(const AnisotropyModel& model, const SphereConstants& constants,
                                    int samples = 10000, double p_max = 1e3, std::uint64_t seed = 11);

}  // namespace gradest
