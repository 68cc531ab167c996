#include <cmath>
#include <numbers>

#include <doctest.h>

#include "gradest/boundary_geometry.hpp"
#include "gradest/verify.hpp"

using namespace gradest;

namespace {

constexpr double kPi = std::numbers::pi;

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    int k = 0;
    for (double x : xs) v[k++] = x;
    return v;
}

std::shared_ptr<const Grid> periodic_grid(int n, int N) {
    return std::make_shared<const Grid>(DomainSpec::periodic(LatticeSpec::unit_cube(n, N)));
}

}  // namespace

TEST_CASE("z_check on constant data approaches -eps (1 + t) at the shortest pair") {
    const auto g = periodic_grid(2, 16);
    const GridFunction u(g, std::vector<double>(g->size(), 2.0), 0.5);
    const PairGeometry geom(*g);
    const ModulusFn psi = [](double s) { return s; };
    const ZResult z = z_check(u, geom, psi, 0.01, Exec::Serial);
    CHECK(z.exhaustive);
    CHECK(z.margin == doctest::Approx(-g->min_spacing() - 0.01 * 1.5).epsilon(1e-12));
    CHECK(z.distance == doctest::Approx(g->min_spacing()));
    const ZResult z0 = z_check(u, geom, psi, 0.0, Exec::Parallel);
    CHECK(z0.margin < 0.0);
    CHECK(z0.margin == doctest::Approx(-g->min_spacing()).epsilon(1e-12));
}

TEST_CASE("z_check is monotone in the modulus and agrees across policies") {
    const auto g = periodic_grid(2, 24);
    const GridFunction u = mollify(g, square_wave_field(g->spec(), 0, 1.0), 0.1);
    const PairGeometry geom(*g);
    const ModulusFn small = [](double s) { return std::min(0.5, 2.0 * s); };
    const ModulusFn big = [](double s) { return std::min(0.5, 4.0 * s); };
    const ZResult a = z_check(u, geom, small, 0.0, Exec::Serial);
    const ZResult b = z_check(u, geom, big, 0.0, Exec::Serial);
    CHECK(a.margin >= b.margin);
    const ZResult ap = z_check(u, geom, small, 0.0, Exec::Parallel);
    CHECK(ap.margin == a.margin);
    CHECK(ap.x == a.x);
    CHECK(ap.y == a.y);
    CHECK(u[a.y] >= u[a.x]);
}

TEST_CASE("z_check against a profile that is too short throws") {
    const auto g = periodic_grid(2, 16);
    const GridFunction u(g, std::vector<double>(g->size(), 0.0), 0.1);
    const PairGeometry geom(*g);
    const auto heat = csf_profile(0.1, 0.5);
    CHECK_THROWS_AS(z_check(u, geom, *heat, 0.0, Exec::Serial), std::out_of_range);
}

TEST_CASE("empirical modulus: constant, linear and generic fields") {
    const auto g = std::make_shared<const Grid>(
        DomainSpec::rectangle(vec({0, 0}), vec({1, 1}), {32, 32}, BoundaryCondition::Neumann));
    const PairGeometry geom(*g);
    const EmpiricalModulus zero = empirical_modulus(GridFunction(g, std::vector<double>(g->size(), 4.0)), geom,
                                                    Exec::Serial);
    for (double s : {0.0, 0.1, 0.4, 0.7}) CHECK(zero(s) == 0.0);

    // u = k x_0 without boundary imposition: |u(y) - u(x)| / 2 <= k s, with
    // equality on axis-aligned pairs
    const double k = 1.7;
    std::vector<double> lin(g->size());
    for (std::size_t i = 0; i < g->size(); ++i) lin[i] = k * g->position(i)[0];
    const EmpiricalModulus m = empirical_modulus(GridFunction(g, lin), geom, Exec::Serial);
    for (double s : linspace(0.02, 0.5, 25)) CHECK(std::abs(m(s) - k * s) <= k * 2.0 * m.bin_width());
    const auto& ks = m.knots();
    const auto& vs = m.values();
    for (std::size_t j = 1; j < ks.size(); ++j) CHECK(vs[j] >= vs[j - 1]);
    for (std::size_t j = 2; j < ks.size(); ++j)
        CHECK((vs[j] - vs[j - 1]) / (ks[j] - ks[j - 1]) <= (vs[j - 1] - vs[j - 2]) / (ks[j - 1] - ks[j - 2]) + 1e-12);

    // generic field: bounded by osc / 2 and itself a valid modulus
    const auto p = periodic_grid(2, 32);
    const GridFunction u = sample(p, [](const Vec& x) {
        return std::sin(2 * kPi * x[0]) + 0.5 * std::cos(6 * kPi * x[1]) + (x[0] > 0.6 ? 0.3 : 0.0);
    });
    const PairGeometry pg(*p);
    const EmpiricalModulus e = empirical_modulus(u, pg, Exec::Parallel);
    for (double s : linspace(0.0, 0.4, 41)) CHECK(e(s) <= 0.5 * oscillation(u) + 1e-12);
    const ZResult z = z_check(u, pg, [&](double s) { return e(s); }, 0.0, Exec::Parallel);
    CHECK(z.margin <= 1e-12);
}

TEST_CASE("gradient bound curves") {
    BoundParams mp;
    mp.M = 1.0;
    CHECK(gradient_bound(BoundCurve::Mcf, mp, 1.0) == doctest::Approx(std::sqrt(std::exp(2.0) - 1.0)).epsilon(1e-14));
    CHECK(gradient_bound(BoundCurve::Mcf, mp, 1.0) == doctest::Approx(2.528).epsilon(1e-3));
    BoundParams pp;
    pp.p = 2.0;
    for (double t : {0.01, 0.3, 2.0})
        CHECK(gradient_bound(BoundCurve::PLaplacian, pp, t) ==
              doctest::Approx(1.0 / (2.0 * std::sqrt(kPi * t))).epsilon(1e-10));
    CHECK(gradient_bound(BoundCurve::PLaplacian, pp, 1.0) == doctest::Approx(0.2821).epsilon(1e-4));
    // anisotropic with A = 1 is the MCF curve
    CHECK(gradient_bound(BoundCurve::Anisotropic, mp, 0.7) == gradient_bound(BoundCurve::Mcf, mp, 0.7));
    BoundParams cp;
    cp.A0 = 2.0;
    cp.P = 3.0;
    CHECK(gradient_bound(BoundCurve::Corollary, cp, 0.5) == doctest::Approx(3.0 * std::exp(2.0)).epsilon(1e-14));
    // floors as t grows
    CHECK(gradient_bound(BoundCurve::Mcf, mp, 1e12) <= 1e-5);
    CHECK(gradient_bound(BoundCurve::PLaplacian, pp, 1e12) <= 1e-5);
    // overflow
    CHECK(std::isinf(gradient_bound(BoundCurve::Mcf, mp, 1e-5)));
    for (BoundCurve c : {BoundCurve::Mcf, BoundCurve::Anisotropic, BoundCurve::Corollary, BoundCurve::PLaplacian,
                         BoundCurve::AnisotropicDirichlet})
        CHECK(bound_curve_from_string(to_string(c)) == c);
    CHECK_THROWS(bound_curve_from_string("tanh"));
}

TEST_CASE("gradient bound check passes a heat run and fails the same run scaled by 10") {
    const auto g = periodic_grid(1, 128);
    EvolveOptions opt;
    EvolutionRun run(std::make_shared<PLaplacianModel>(2.0), mollify(make_square_wave(g, 0, 1.0), 0.02), opt);
    run.run_to(0.2, {0.02, 0.05, 0.1});
    BoundParams bp;
    bp.M = 1.0;
    bp.p = 2.0;
    const VerificationReport ok = gradient_bound_check(run.checkpoints(), BoundCurve::PLaplacian, bp, 0.05, 0.02);
    CHECK(ok.rows.size() == 4u);
    CHECK(ok.pass());
    CHECK(ok.best_ratio() > 0.5);
    CHECK(ok.best_ratio() <= 1.05);

    std::vector<Checkpoint> scaled;
    for (const Checkpoint& c : run.checkpoints()) {
        GridFunction s = c.state;
        for (double& v : s.values()) v *= 10.0;
        scaled.push_back({measure(s, true), s});
    }
    const VerificationReport bad = gradient_bound_check(scaled, BoundCurve::PLaplacian, bp, 0.05, 0.02);
    CHECK_FALSE(bad.pass());
    CHECK(bad.worst_margin() > 0.0);
    // late checkpoints decay exponentially below the algebraic bound, so only
    // the early ones flip
    CHECK_FALSE(bad.rows.front().pass);
}

TEST_CASE("boundary estimate: zero state passes with margin -min phi, cut locus skipped") {
    const auto g = std::make_shared<const Grid>(DomainSpec::disk(vec({0, 0}), 1.0, 32, BoundaryCondition::Dirichlet));
    const auto d = distance_field(nullptr, *g);
    const GridFunction u(g, std::vector<double>(g->size(), 0.0), 0.1);
    const std::vector<Checkpoint> cps{{measure(u, true), u}};
    const DistanceBarrier phi = [](double dd, double) { return 0.5 + dd; };
    const VerificationReport r = boundary_estimate_check(cps, d, phi, 1e-8);
    CHECK(r.pass());
    CHECK(r.skipped == 1u);
    double dmin = 1e300;
    for (std::size_t i = 0; i < g->size(); ++i)
        if (g->kind(i) == NodeKind::Interior && !std::isnan(d[i])) dmin = std::min(dmin, d[i]);
    CHECK(r.rows[0].margin == doctest::Approx(-(0.5 + dmin)).epsilon(1e-12));
    CHECK(r.worst_margin() == doctest::Approx(-(0.5 + dmin) - 1e-8).epsilon(1e-12));

    GridFunction big(g, std::vector<double>(g->size(), 0.0), 0.1);
    for (std::size_t i = 0; i < g->size(); ++i)
        if (g->kind(i) == NodeKind::Interior) big[i] = 5.0;
    const std::vector<Checkpoint> bcps{{measure(big, true), big}};
    CHECK_FALSE(boundary_estimate_check(bcps, d, phi, 1e-8).pass());
}

TEST_CASE("modulus check on a heat run against the heat barrier; corrupted barrier fails") {
    const auto g = periodic_grid(1, 64);
    EvolutionRun run(std::make_shared<PLaplacianModel>(2.0), make_square_wave(g, 0, 1.0));
    run.run_to(0.05, {0.005, 0.01, 0.02});
    const PLapBarrier phi(2.0, 1.0);
    const VerificationReport ok =
        modulus_check(run.checkpoints(), phi, modulus_tolerance(g->min_spacing()), 0.0, Exec::Parallel);
    CHECK(ok.pass());
    const PLapBarrier half(2.0, 0.5);
    const VerificationReport bad =
        modulus_check(run.checkpoints(), half, modulus_tolerance(g->min_spacing()), 0.0, Exec::Parallel);
    CHECK_FALSE(bad.pass());
    CHECK(modulus_tolerance(0.1) == doctest::Approx(kModulusCdisc * 0.01 + 1e-8));
    CHECK(modulus_tolerance(0.1, 2.0) == doctest::Approx(2.0 * (kModulusCdisc * 0.01 + 1e-8)));
}

TEST_CASE("report serialisation and pass logic") {
    VerificationReport r;
    r.name = "demo";
    CheckRow a;
    a.t = 0.1;
    a.margin = -0.2;
    a.tolerance = 0.01;
    a.pass = true;
    CheckRow b = a;
    b.t = 0.2;
    b.margin = 0.005;
    r.rows = {a, b};
    CHECK(r.pass());
    CHECK(r.worst_margin() == doctest::Approx(-0.005));  // margin - tolerance
    const auto j = r.to_json();
    CHECK(j["name"] == "demo");
    CHECK(j["pass"] == true);
    CHECK(j["checkpoints"].size() == 2u);
    r.rows[1].margin = 0.02;
    r.rows[1].pass = false;
    CHECK_FALSE(r.pass());
    CHECK_FALSE(r.table().empty());
}
