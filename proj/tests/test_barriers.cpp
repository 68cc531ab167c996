#include <cmath>
#include <numbers>

#include <doctest.h>

#include "gradest/barriers.hpp"

using namespace gradest;

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    int k = 0;
    for (double x : xs) v[k++] = x;
    return v;
}

// Stored nodes / slices of a tabulated profile, mapped through an amplitude
// rescaling z -> M z, t -> M^2 t.
std::vector<double> table_nodes(const ComparisonProfile& p, double M, std::size_t stride = 8) {
    std::vector<double> zs;
    for (std::size_t i = 1; i + 1 < p.node_count(); i += stride) zs.push_back(M * i * p.spacing());
    return zs;
}
std::vector<double> table_times(const ComparisonProfile& p, double M, double t_from = 0.0) {
    std::vector<double> ts;
    for (std::size_t k = 1; k < p.times().size(); ++k) {
        const double t = p.times()[k] - p.start_time();
        if (t >= t_from) ts.push_back(M * M * t);
    }
    return ts;
}

}  // namespace

TEST_CASE("F_p values and limits") {
    for (double p : {1.3, 1.5, 2.0, 3.0, 4.0}) CHECK(fp_value(p, 0.0) == 0.0);
    CHECK(std::abs(fp_limit(2.0) - std::sqrt(kPi) / 2.0) <= 1e-10);
    CHECK(std::abs(fp_limit(4.0) - kPi / 4.0) <= 1e-10);
    for (double p : {1.5, 2.0, 3.0}) {
        // F_p is increasing, its derivative is the integrand, and it approaches F_p(inf)
        const double h = 1e-5;
        for (double xi : {0.1, 0.5, 0.9}) {
            CHECK(fp_derivative(p, xi) > 0.0);
            CHECK((fp_value(p, xi + h) - fp_value(p, xi - h)) / (2 * h) ==
                  doctest::Approx(fp_derivative(p, xi)).epsilon(1e-7));
        }
        CHECK(fp_value(p, 1e4) == doctest::Approx(fp_limit(p)).epsilon(1e-9));  // tail ~ xi^{-3} for p = 1.5
    }
    CHECK(fp_value(3.0, 1.0) == doctest::Approx(fp_limit(3.0)).epsilon(1e-12));  // compact support for p > 2
    CHECK_THROWS(fp_value(1.0, 0.5));
    CHECK_THROWS(rp_constant(0.8));
}

TEST_CASE("R_p constants") {
    CHECK(rp_constant(2.0) == doctest::Approx(2.0).epsilon(1e-12));
    CHECK(rp_constant(4.0) == doctest::Approx(std::pow(12.0, 0.25) / std::sqrt(kPi / 2.0)).epsilon(1e-10));
    // R_p alone diverges like (p - 2)^{-1/2} at p = 2 while F_p(inf) vanishes like
    // (p - 2)^{1/2}; their product, which fixes the profile, is continuous.
    const double rf2 = rp_constant(2.0) * fp_limit(2.0);
    CHECK(rf2 == doctest::Approx(std::sqrt(kPi)).epsilon(1e-10));
    for (double p : {2.0 - 1e-3, 2.0 + 1e-3}) {
        CHECK(std::abs(rp_constant(p) * fp_limit(p) - rf2) <= 1e-2 * rf2);
        const PLapBarrier near(p, 1.0), at(2.0, 1.0);
        for (double z : {0.05, 0.2, 0.6})
            for (double t : {0.01, 0.1}) CHECK(std::abs(near.value(z, t) - at.value(z, t)) <= 1e-2);
    }
}

TEST_CASE("p-Laplacian barrier: normalisation, sharp slope and residual") {
    const PLapBarrier b2(2.0, 1.0);
    CHECK(b2.value(1e6, 0.3) == doctest::Approx(0.5).epsilon(1e-12));
    for (double t : {0.01, 0.1, 1.0}) {
        CHECK(b2.max_slope(t) == doctest::Approx(1.0 / (2.0 * std::sqrt(kPi * t))).epsilon(1e-12));
        CHECK(b2.dz(0.0, t) == doctest::Approx(b2.max_slope(t)).epsilon(1e-12));
    }
    for (double p : {1.5, 2.0, 3.0, 4.0}) {
        for (double M : {0.5, 1.0, 2.0, 5.0}) {
            const PLapBarrier b(p, M);
            CHECK(b.value(0.0, 0.2) == 0.0);
            CHECK(b.amplitude() == 0.5 * M);
            // max slope at z = 0: F_p' peaks at 0
            const double t = 0.2;
            CHECK(b.max_slope(t) == doctest::Approx(std::pow(M, 2.0 / p) * std::pow(t, -1.0 / p) /
                                                     (2.0 * rp_constant(p) * fp_limit(p)))
                                        .epsilon(1e-12));
            const auto zs = linspace(0.01 * M, 1.5 * M, 60);
            const auto ts = linspace(0.02 * M * M, 0.5 * M * M, 25);
            const auto skip = [&](double z, double tt) {
                return p > 2.0 && std::abs(b.similarity_variable(z, tt) - 1.0) < 1e-3;
            };
            const ResidualReport r = supersolution_residual(b, plap_alpha(p), 0.0, zs, ts, skip);
            INFO("p=", p, " M=", M);
            CHECK(r.max_abs_residual <= 1e-8 * std::max(1.0, 1.0 / M));
        }
    }
    // t = 0: the step
    CHECK(b2.value(0.3, 0.0) == 0.5);
    CHECK(b2.value(0.0, 0.0) == 0.0);
}

TEST_CASE("curve-shortening profile: boundary values, initial step, shape and residual") {
    const auto prof = csf_profile(1.0, 0.5);
    for (std::size_t k = 0; k < prof->times().size(); ++k) {
        CHECK(prof->node_value(k, 0) == 0.0);
        CHECK(prof->node_value(k, prof->node_count() - 1) <= 0.5 + 1e-12);
    }
    // close to the step just after the start time, away from z = 0
    for (double z : {0.1, 0.3, 0.7, 1.0}) CHECK(prof->value(z, 0.0) == doctest::Approx(0.5).epsilon(1e-9));
    CHECK(prof->min_discrete_residual() >= -1e-6);
    const double t_shape = 9.0 * prof->start_time();
    CHECK(prof->max_concavity_violation(t_shape) <= 1e-9);
    CHECK(prof->max_monotonicity_violation(t_shape) <= 1e-9);
    // same quantity through the generic residual on stored nodes and slices
    const ResidualReport r =
        supersolution_residual(*prof, csf_alpha(), 0.0, table_nodes(*prof, 1.0), table_times(*prof, 1.0));
    CHECK(r.min_residual >= -1e-6);
    CHECK_THROWS_AS(prof->value(0.5, 2.0 * prof->t_max() + 1.0), std::out_of_range);
}

TEST_CASE("curve-shortening profile: amplitude scaling law") {
    const auto base = csf_profile(1.0, 0.25);
    // Directly solving the amplitude-1 problem on [0, 2] matches 2 phi(z/2, t/4).
    ComparisonOptions opt;
    const auto big = ComparisonProfile::build(csf_alpha(), 2.0, 1.0, 1.0, opt);
    const ScaledProfile scaled(base, 2.0);
    double worst = 0.0;
    for (double z : linspace(0.0, 2.0, 41))
        for (double t : {0.01, 0.05, 0.2, 0.6, 1.0}) worst = std::max(worst, std::abs(big->value(z, t) - scaled.value(z, t)));
    CHECK(worst <= 1e-4);
    // The rescaled table re-solves the equation on its own rescaled nodes and
    // slices, with the residual divided by M.
    const ResidualReport rb =
        supersolution_residual(*base, csf_alpha(), 0.0, table_nodes(*base, 1.0), table_times(*base, 1.0));
    for (double M : {0.5, 2.0, 5.0}) {
        const ScaledProfile s(base, M);
        const ResidualReport r =
            supersolution_residual(s, csf_alpha(), 0.0, table_nodes(*base, M), table_times(*base, M));
        INFO("M=", M);
        CHECK(std::abs(r.min_residual * M - rb.min_residual) <= 1e-9);
        CHECK(r.min_residual >= -1e-6);
    }
}

TEST_CASE("translator profiles against closed forms") {
    // heat: g = c z^2 / 2
    const auto heat = translator_profile([](double, double) { return 1.0; }, 0.7, 0.0, 2.0);
    for (double z : linspace(0.0, 2.0, 21)) {
        CHECK(heat->value(z, 0.0) == doctest::Approx(0.35 * z * z).epsilon(1e-10));
        CHECK(heat->dt(z, 0.3) == 0.7);
    }
    // curve shortening: g = -(1/c) ln cos(c z) for c z <= 1.4
    const double c = 0.5;
    const auto csf = translator_profile(csf_alpha(), c, 0.0, 1.4 / c);
    for (double z : linspace(0.0, 1.4 / c, 57)) {
        CHECK(std::abs(csf->value(z, 0.0) + std::log(std::cos(c * z)) / c) <= 1e-8);
        CHECK(std::abs(csf->dz(z, 0.0) - std::tan(c * z)) <= 1e-8 * (1.0 + std::tan(c * z)));
    }
    const ResidualReport r = supersolution_residual(*csf, csf_alpha(), 0.0, linspace(0.0, 1.4 / c, 57), {0.0, 1.0});
    CHECK(r.min_residual >= -1e-6);
    CHECK(r.max_abs_residual <= 1e-8 * (1.0 + c * (1.0 + std::pow(std::tan(1.4), 2))));
    // c = B: straight line
    const auto line = translator_profile(csf_alpha(), 0.3, 0.3, 1.0, 0.8);
    for (double z : linspace(0.0, 1.0, 11)) {
        CHECK(line->value(z, 2.0) == doctest::Approx(0.8 * z + 0.6).epsilon(1e-12));
        CHECK(line->dzz(z, 0.0) == 0.0);
    }
    // B > c: concave, flattens when g' reaches 0
    const auto concave = translator_profile(csf_alpha(), 0.1, 0.3, 5.0, 1.0);
    REQUIRE(concave->flat_from().has_value());
    CHECK(concave->dz(4.9, 0.0) == 0.0);
    // curve shortening blows up at c z = pi / 2
    CHECK_THROWS_AS(translator_profile(csf_alpha(), 1.0, 0.0, 2.0), DegenerateOde);
    try {
        translator_profile(csf_alpha(), 1.0, 0.0, 2.0);
    } catch (const DegenerateOde& e) {
        REQUIRE(e.partial());
        CHECK(e.partial()->z_max() < kPi / 2.0);
        CHECK(e.partial()->z_max() > 1.4);
    }
}

TEST_CASE("radial profile") {
    for (int n : {1, 2, 3}) {
        const RadialProfile rp = radial_profile(n);
        INFO("n=", n);
        CHECK(std::abs(rp.dz(RadialProfile::kZmax) - 1.0) <= 1e-6);
        // normalised at z = 20 rather than infinity: phi'(z) = 1 - (n-1)/z^2 + O(z^-4)
        CHECK(rp.phi0() == doctest::Approx(radial_phi0_exact(n) * (1.0 + (n - 1) / 400.0)).epsilon(1e-4));
        double worst = 0.0;
        for (std::size_t k = 0; k < rp.node_count(); ++k) worst = std::max(worst, std::abs(rp.residual(rp.node(k))));
        CHECK(worst <= 1e-8);
        for (std::size_t k = 0; k < rp.node_count(); ++k) {
            CHECK(rp.node_slope(k) >= 0.0);
            CHECK(rp.node_slope(k) <= 1.0 + 1e-6);
        }
        // series start at the regular singular point: phi''(0) = phi(0) / (2n)
        CHECK(rp.dzz(0.0) == doctest::Approx(rp.phi0() / (2.0 * n)).epsilon(1e-8));
        CHECK(std::abs(rp.dzz(rp.node(1)) - rp.dzz(0.0)) <= 1e-5);
    }
}

TEST_CASE("supersolution w_a limits") {
    const auto rp = std::make_shared<const RadialProfile>(radial_profile(2));
    const Vec x0 = vec({0.1, -0.2});
    const SupersolutionWa w(rp, 0.3, 0.05, x0, 0.2, 1.5, 2.0);
    CHECK(w(x0, 0.0) == doctest::Approx(0.35));
    CHECK(w(x0, 1e-12) == doctest::Approx(0.35).epsilon(1e-5));
    const Vec x = vec({0.6, 0.4});
    CHECK(w(x, 0.0) == doctest::Approx(0.35 + 2.0 * (x - x0).norm()).epsilon(1e-12));
    CHECK(w(x, 1e-12) == doctest::Approx(0.35 + 2.0 * (x - x0).norm()).epsilon(1e-6));
    const SupersolutionWa flat(rp, 0.3, 0.05, x0, 0.2, 1.5, 0.0);
    CHECK(flat(x, 0.5) == doctest::Approx(0.35 + 0.1).epsilon(1e-14));
    CHECK(flat(x0, 0.5) == flat(x, 0.5));
}

TEST_CASE("scaled alpha and linspace/geomspace helpers") {
    CHECK(scaled_alpha(csf_alpha(), 3.0)(1.0, 0.0) == doctest::Approx(1.5));
    CHECK(plap_alpha(3.0)(2.0, 0.0) == doctest::Approx(4.0));
    const auto l = linspace(0.0, 1.0, 5);
    CHECK(l.size() == 5u);
    CHECK(l.back() == 1.0);
    const auto g = geomspace(0.01, 1.0, 3);
    CHECK(g[1] == doctest::Approx(0.1));
}
