#include "gradest/verify.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>

namespace gradest {

namespace {

nlohmann::ordered_json point_json(const Vec& x) {
    nlohmann::ordered_json a = nlohmann::ordered_json::array();
    for (int k = 0; k < x.size(); ++k) a.push_back(x[k]);
    return a;
}

}  // namespace

nlohmann::ordered_json ZResult::to_json(const Grid& grid) const {
    return {{"margin", margin},
            {"x", point_json(grid.position(x))},
            {"y", point_json(grid.position(y))},
            {"distance", distance},
            {"pairs", pairs},
            {"exhaustive", exhaustive}};
}

ZResult z_check(const GridFunction& u, const PairGeometry& geom, const ModulusFn& psi, double eps, Exec exec) {
    if (!(eps >= 0.0)) throw std::invalid_argument("eps must be nonnegative");
    const auto& dist = geom.distances();
    std::vector<double> penalty(dist.size());
    const double shift = eps * (1.0 + u.time());
    for (std::size_t c = 0; c < dist.size(); ++c) penalty[c] = 2.0 * psi(0.5 * dist[c]) + shift;
    const PairMax best = scan_pairs(u, geom, penalty, exec);
    ZResult z;
    z.margin = best.value;
    z.x = best.i;
    z.y = best.j;
    z.distance = geom.distance(best.i, best.j);
    z.pairs = best.pairs;
    z.exhaustive = geom.domain_samples().size() <= kExhaustivePairLimit;
    return z;
}

ZResult z_check(const GridFunction& u, const PairGeometry& geom, const BarrierProfile& phi, double eps, Exec exec) {
    const double need = 0.5 * geom.max_distance();
    if (phi.z_max() < need * (1.0 - 1e-12))
        throw std::out_of_range("barrier profile covers z <= " + std::to_string(phi.z_max()) + " but pairs need " +
                                std::to_string(need));
    const double t = u.time();
    return z_check(u, geom, [&phi, t](double s) { return phi.value(s, t); }, eps, exec);
}

// ---------------------------------------------------------------------------

double EmpiricalModulus::operator()(double s) const {
    if (s <= 0.0) return 0.0;
    if (s >= s_.back()) return v_.back();
    const auto it = std::upper_bound(s_.begin(), s_.end(), s);
    const std::size_t k = static_cast<std::size_t>(it - s_.begin());
    const double w = (s - s_[k - 1]) / (s_[k] - s_[k - 1]);
    return (1.0 - w) * v_[k - 1] + w * v_[k];
}

EmpiricalModulus empirical_modulus(const GridFunction& u, const PairGeometry& geom, Exec exec, int bins) {
    if (bins < 1) throw std::invalid_argument("need at least one bin");
    const auto diff = max_difference_by_offset(u, geom, exec);
    const auto& dist = geom.distances();
    const double s_max = 0.5 * geom.max_distance();
    EmpiricalModulus out;
    out.bin_ = s_max > 0.0 ? s_max / bins : 0.0;

    std::vector<double> rep(bins, std::numeric_limits<double>::infinity());
    std::vector<double> val(bins, -1.0);
    for (std::size_t c = 0; c < dist.size(); ++c) {
        if (!(dist[c] > 0.0) || !(diff[c] >= 0.0)) continue;
        const double s = 0.5 * dist[c];
        const int b = std::min(bins - 1, static_cast<int>(s / out.bin_));
        rep[b] = std::min(rep[b], s);
        val[b] = std::max(val[b], 0.5 * diff[c]);
    }
    std::vector<std::pair<double, double>> pts{{0.0, 0.0}};
    double running = 0.0;
    for (int b = 0; b < bins; ++b) {
        if (val[b] < 0.0) continue;
        running = std::max(running, val[b]);
        pts.emplace_back(rep[b], running);
    }
    // upper hull (least concave majorant); nondecreasing because the last
    // point carries the running maximum
    std::vector<std::pair<double, double>> hull;
    for (const auto& p : pts) {
        while (hull.size() >= 2) {
            const auto& a = hull[hull.size() - 2];
            const auto& b = hull.back();
            const double cross = (b.first - a.first) * (p.second - a.second) - (b.second - a.second) * (p.first - a.first);
            if (cross >= 0.0) hull.pop_back();
            else break;
        }
        if (!hull.empty() && p.first == hull.back().first) {
            hull.back().second = std::max(hull.back().second, p.second);
            continue;
        }
        hull.push_back(p);
    }
    for (const auto& [s, v] : hull) {
        out.s_.push_back(s);
        out.v_.push_back(v);
    }
    if (out.s_.size() == 1) {
        out.s_.push_back(std::max(s_max, 1.0));
        out.v_.push_back(0.0);
    }
    return out;
}

// ---------------------------------------------------------------------------

std::string to_string(BoundCurve c) {
    switch (c) {
        case BoundCurve::Mcf: return "mcf";
        case BoundCurve::Anisotropic: return "anisotropic";
        case BoundCurve::Corollary: return "corollary";
        case BoundCurve::PLaplacian: return "plaplacian";
        case BoundCurve::AnisotropicDirichlet: return "anisotropic_dirichlet";
    }
    return "unknown";
}

BoundCurve bound_curve_from_string(const std::string& s) {
    for (BoundCurve c : {BoundCurve::Mcf, BoundCurve::Anisotropic, BoundCurve::Corollary, BoundCurve::PLaplacian,
                         BoundCurve::AnisotropicDirichlet})
        if (to_string(c) == s) return c;
    throw ConfigError("unknown gradient bound curve '" + s + "'");
}

nlohmann::ordered_json BoundParams::to_json() const {
    return {{"M", M}, {"A", A}, {"A0", A0}, {"P", P}, {"p", p}, {"C", C}};
}

double gradient_bound(BoundCurve curve, const BoundParams& q, double t) {
    if (!(t > 0.0)) throw std::invalid_argument("gradient bounds need t > 0");
    if (!(q.M >= 0.0)) throw std::invalid_argument("M must be nonnegative");
    const double M2 = q.M * q.M;
    switch (curve) {
        case BoundCurve::Mcf: return std::sqrt(std::expm1(2.0 * M2 / t));
        case BoundCurve::Anisotropic:
            if (!(q.A > 0.0)) throw std::invalid_argument("missing constant A");
            return std::sqrt(std::expm1(2.0 * M2 / (q.A * t)));
        case BoundCurve::Corollary:
            if (!(q.A0 > 0.0) || !(q.P > 0.0)) throw std::invalid_argument("missing constants A0, P");
            return q.P * std::exp(1.0 + M2 / (q.A0 * t));
        case BoundCurve::PLaplacian:
            return std::pow(q.M, 2.0 / q.p) * std::pow(t, -1.0 / q.p) / (2.0 * rp_constant(q.p) * fp_limit(q.p));
        case BoundCurve::AnisotropicDirichlet:
            if (!(q.A > 0.0) || !(q.C >= 1.0)) throw std::invalid_argument("missing constants A, C >= 1");
            return std::sqrt(q.C * std::exp(M2 / (q.A * t)) - 1.0);
    }
    throw std::invalid_argument("unknown curve");
}

// ---------------------------------------------------------------------------

bool VerificationReport::pass() const {
    return std::all_of(rows.begin(), rows.end(), [](const CheckRow& r) { return r.pass; });
}

double VerificationReport::worst_margin() const {
    double w = -std::numeric_limits<double>::infinity();
    for (const auto& r : rows) w = std::max(w, r.margin - r.tolerance);
    return w;
}

double VerificationReport::best_ratio() const {
    double b = 0.0;
    for (const auto& r : rows) b = std::max(b, r.ratio);
    return b;
}

nlohmann::ordered_json VerificationReport::to_json() const {
    nlohmann::ordered_json rj = nlohmann::ordered_json::array();
    for (const auto& r : rows) {
        rj.push_back({{"t", r.t},
                      {"margin", r.margin},
                      {"tolerance", r.tolerance},
                      {"value", r.value},
                      {"bound", r.bound},
                      {"ratio", r.ratio},
                      {"pass", r.pass},
                      {"location", r.location}});
    }
    return {{"name", name}, {"params", params},   {"provenance", provenance}, {"pass", pass()},
            {"skipped", skipped}, {"checkpoints", rj}};
}

std::string VerificationReport::table() const {
    std::ostringstream os;
    os << name << (pass() ? "  [pass]" : "  [FAIL]") << '\n';
    os << std::setw(10) << "t" << std::setw(14) << "margin" << std::setw(12) << "tol" << std::setw(14) << "value"
       << std::setw(14) << "bound" << std::setw(10) << "ratio" << "  ok\n";
    os << std::scientific << std::setprecision(3);
    for (const auto& r : rows) {
        os << std::setw(10) << r.t << std::setw(14) << r.margin << std::setw(12) << r.tolerance << std::setw(14)
           << r.value << std::setw(14) << r.bound << std::setw(10) << std::fixed << std::setprecision(3) << r.ratio
           << std::scientific << "  " << (r.pass ? "yes" : "NO") << '\n';
    }
    if (skipped) os << "skipped samples: " << skipped << '\n';
    return os.str();
}

double modulus_tolerance(double h, double scale) {
    if (!(h > 0.0) || !(scale > 0.0)) throw std::invalid_argument("tolerance needs h > 0 and scale > 0");
    return scale * (kModulusCdisc * h * h + 1e-8);
}

VerificationReport modulus_check(const std::vector<Checkpoint>& checkpoints, const BarrierProfile& phi, double tol,
                                 double eps, Exec exec) {
    VerificationReport rep;
    rep.name = "modulus";
    rep.params = {{"eps", eps}, {"tolerance", tol}};
    rep.provenance = {{"barrier", phi.describe()}};
    std::optional<PairGeometry> geom;
    for (const auto& cp : checkpoints) {
        if (cp.state.size() == 0) throw std::invalid_argument("modulus check needs checkpoint states");
        if (!geom || &geom->grid() != &cp.state.grid()) geom.emplace(cp.state.grid());
        const ZResult z = z_check(cp.state, *geom, phi, eps, exec);
        CheckRow r;
        r.t = cp.state.time();
        r.margin = z.margin;
        r.tolerance = tol;
        r.value = z.margin;
        r.pass = z.margin <= tol;
        r.location = z.to_json(cp.state.grid());
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

VerificationReport gradient_bound_check(const std::vector<Checkpoint>& checkpoints, BoundCurve curve,
                                        const BoundParams& params, double slack, double t_min) {
    if (!(slack >= 0.0)) throw std::invalid_argument("slack must be nonnegative");
    VerificationReport rep;
    rep.name = "gradient_bound:" + to_string(curve);
    rep.params = params.to_json();
    rep.params["slack"] = slack;
    rep.params["t_min"] = t_min;
    for (const auto& cp : checkpoints) {
        const double t = cp.diag.t;
        if (!(t > 0.0) || t < t_min) continue;
        CheckRow r;
        r.t = t;
        r.bound = gradient_bound(curve, params, t);
        r.value = cp.diag.max_grad;
        r.margin = r.value - r.bound;
        r.tolerance = slack * r.bound;
        r.ratio = r.bound > 0.0 ? r.value / r.bound : 0.0;
        r.pass = r.margin <= r.tolerance;
        if (cp.state.size() != 0) r.location = {{"x", point_json(cp.state.grid().position(cp.diag.argmax_grad))}};
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

VerificationReport boundary_estimate_check(const std::vector<Checkpoint>& checkpoints,
                                           const std::vector<double>& distance, const DistanceBarrier& phi,
                                           double tol) {
    VerificationReport rep;
    rep.name = "boundary_estimate";
    rep.params = {{"tolerance", tol}};
    for (const auto& cp : checkpoints) {
        const GridFunction& u = cp.state;
        if (u.size() == 0) throw std::invalid_argument("boundary check needs checkpoint states");
        if (u.grid().bc() != BoundaryCondition::Dirichlet)
            throw ConfigError("boundary estimate requires a Dirichlet domain");
        if (distance.size() != u.size()) throw std::invalid_argument("distance field does not match the grid");
        const double t = u.time();
        double worst = -std::numeric_limits<double>::infinity();
        std::size_t at = 0, skipped = 0;
        for (std::size_t i = 0; i < u.size(); ++i) {
            if (u.grid().kind(i) != NodeKind::Interior) continue;
            if (std::isnan(distance[i])) {
                ++skipped;
                continue;
            }
            const double m = std::abs(u[i]) - phi(distance[i], t);
            if (m > worst) {
                worst = m;
                at = i;
            }
        }
        rep.skipped = std::max(rep.skipped, skipped);
        CheckRow r;
        r.t = t;
        r.margin = worst;
        r.tolerance = tol;
        r.value = std::abs(u[at]);
        r.bound = phi(distance[at], t);
        r.ratio = r.bound > 0.0 ? r.value / r.bound : 0.0;
        r.pass = worst <= tol;
        r.location = {{"x", point_json(u.grid().position(at))}, {"d", distance[at]}};
        rep.rows.push_back(std::move(r));
    }
    return rep;
}

// ---------------------------------------------------------------------------

nlohmann::ordered_json LemmaReport::to_json() const {
    return {{"min_ratio", min_ratio},
            {"min_chain_slack", min_chain_slack},
            {"A", A},
            {"samples", samples},
            {"worst_p", point_json(worst_p)},
            {"worst_v", point_json(worst_v)}};
}

LemmaReport ellipticity_lemma_check(const AnisotropyModel& model, const SphereConstants& k, int samples,
                                    double p_max, std::uint64_t seed) {
    if (samples < 1 || !(p_max > 0.0)) throw std::invalid_argument("invalid sampling parameters");
    const int n = model.dim();
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> gauss;
    std::uniform_real_distribution<double> expo(-3.0, std::log10(p_max));
    LemmaReport rep;
    rep.A = k.A;
    rep.min_ratio = std::numeric_limits<double>::infinity();
    rep.min_chain_slack = std::numeric_limits<double>::infinity();
    const double a12 = k.A1 * k.A2;
    for (int s = 0; s < samples; ++s) {
        Vec dir(n), v(n);
        for (int i = 0; i < n; ++i) dir[i] = gauss(rng);
        for (int i = 0; i < n; ++i) v[i] = gauss(rng);
        const Vec p = dir.normalized() * std::pow(10.0, expo(rng));
        const double vv = v.squaredNorm();
        const double q = v.dot(model.coefficient(p) * v);
        const double P2 = p.squaredNorm();
        const double ratio = (1.0 + P2) * q / (k.A * vv);
        if (ratio < rep.min_ratio) {
            rep.min_ratio = ratio;
            rep.worst_p = p;
            rep.worst_v = v;
        }
        const Vec ph = p.normalized();
        const double along = v.dot(ph);
        const double chain = a12 * ((v - along * ph).squaredNorm() + along * along / (1.0 + P2));
        rep.min_chain_slack = std::min(rep.min_chain_slack, q / chain - 1.0);
        ++rep.samples;
    }
    return rep;
}

}  // namespace gradest
