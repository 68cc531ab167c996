#include <cmath>
#include <numbers>

#include <doctest.h>

#include "gradest/boundary_geometry.hpp"

using namespace gradest;

namespace {

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    int k = 0;
    for (double x : xs) v[k++] = x;
    return v;
}

const DomainSpec kDisk = DomainSpec::disk(vec({0, 0}), 1.0, 64, BoundaryCondition::Dirichlet);
const DomainSpec kBox = DomainSpec::rectangle(vec({0, 0}), vec({1, 1}), {32, 32}, BoundaryCondition::Dirichlet);

std::shared_ptr<const AnisotropyModel> euclid() { return make_anisotropy("euclidean", {}, "constant", 0.0, 2); }

std::shared_ptr<const AnisotropyModel> ellipsoid() {
    return make_anisotropy("ellipsoid", {{"Q", {{4.0, 0.0, 0.0}, {0.0, 1.0, 0.0}, {0.0, 0.0, 1.0}}}}, "constant",
                           0.0, 2);
}

}  // namespace

TEST_CASE("Euclidean distance on disk and rectangle") {
    for (const AnisotropyModel* m : {static_cast<const AnisotropyModel*>(nullptr), euclid().get()}) {
        const Vec x = vec({0.3 * std::cos(0.7), 0.3 * std::sin(0.7)});
        const DistanceResult r = anisotropic_distance(m, kDisk, x);
        CHECK(r.d == doctest::Approx(0.7).epsilon(1e-9));
        CHECK((r.foot - x / x.norm()).norm() <= 1e-6);
        CHECK((r.normal + x / x.norm()).norm() <= 1e-6);

        const DistanceResult b = anisotropic_distance(m, kBox, vec({0.2, 0.5}));
        CHECK(b.d == doctest::Approx(0.2).epsilon(1e-12));
        CHECK((b.foot - vec({0.0, 0.5})).norm() <= 1e-12);
        CHECK((b.normal - vec({1.0, 0.0})).norm() <= 1e-10);
    }
    CHECK_THROWS_AS(anisotropic_distance(nullptr, kDisk, vec({1.2, 0.0})), std::invalid_argument);
    CHECK_THROWS_AS(anisotropic_distance(nullptr, kBox, vec({1.0, 0.5})), std::invalid_argument);
}

TEST_CASE("ellipsoid anisotropic distance on the disk matches a brute-force boundary scan") {
    const auto m = ellipsoid();
    const int M = 100000;
    for (const Vec& x : {vec({0.1, 0.2}), vec({-0.5, 0.3}), vec({0.6, -0.6}), vec({0.0, 0.85})}) {
        double brute = 1e300;
        for (int k = 0; k < M; ++k) {
            const double th = 2.0 * std::numbers::pi * k / M;
            brute = std::min(brute, dual_norm(*m, x - vec({std::cos(th), std::sin(th)})));
        }
        const DistanceResult r = anisotropic_distance(m.get(), kDisk, x);
        CHECK(std::abs(r.d - brute) <= 1e-4 * brute);
        CHECK(dual_norm(*m, x - r.foot) == doctest::Approx(r.d).epsilon(1e-9));
        CHECK(dual_norm(*m, r.normal) == doctest::Approx(1.0).epsilon(1e-9));
    }
}

TEST_CASE("distance Laplacian on the disk: closed form and finite differences") {
    const CurvatureResult c = distance_laplacian_and_curvatures(nullptr, kDisk, vec({0.5, 0.0}));
    REQUIRE(c.kappa.size() == 1u);
    CHECK(c.kappa[0] == doctest::Approx(1.0));
    CHECK(c.laplacian == doctest::Approx(-2.0).epsilon(1e-12));
    CHECK(c.level_mean == doctest::Approx(2.0).epsilon(1e-12));

    const double h = 1e-3;
    for (double r : {0.2, 0.35, 0.5, 0.7, 0.9}) {
        const Vec x = vec({r * std::cos(1.1), r * std::sin(1.1)});
        auto d = [&](const Vec& y) { return anisotropic_distance(nullptr, kDisk, y).d; };
        double lap = 0.0;
        for (int k = 0; k < 2; ++k) {
            Vec e = Vec::Zero(2);
            e[k] = h;
            lap += (d(x + e) - 2.0 * d(x) + d(x - e)) / (h * h);
        }
        const CurvatureResult cr = distance_laplacian_and_curvatures(nullptr, kDisk, x);
        CHECK(cr.laplacian == doctest::Approx(-1.0 / r).epsilon(1e-12));
        CHECK(std::abs(lap - cr.laplacian) <= 1e-3);
    }
}

TEST_CASE("rectangle faces are flat; the disk centre and the box diagonal are cut-locus points") {
    const CurvatureResult c = distance_laplacian_and_curvatures(nullptr, kBox, vec({0.2, 0.5}));
    CHECK(c.laplacian == 0.0);
    for (double k : c.kappa) CHECK(k == 0.0);
    CHECK_THROWS_AS(distance_laplacian_and_curvatures(nullptr, kDisk, vec({0.0, 0.0})), NonSmoothPoint);
    CHECK_THROWS_AS(anisotropic_distance(nullptr, kBox, vec({0.5, 0.5})), NonSmoothPoint);
    CHECK_THROWS_AS(anisotropic_distance(nullptr, kBox, vec({0.25, 0.25})), NonSmoothPoint);
}

TEST_CASE("boundary geometry: disk curvature 1/R, Euclidean normals, self-adjoint shape operator") {
    const DomainSpec disk2 = DomainSpec::disk(vec({0.5, -0.5}), 2.0, 64, BoundaryCondition::Dirichlet);
    const auto e = euclid();
    const BoundaryGeometry bg(e.get(), disk2);
    for (int k = 0; k < 16; ++k) {
        const double th = 2.0 * std::numbers::pi * k / 16.0;
        const Vec u = vec({std::cos(th), std::sin(th)});
        const BoundaryPoint p = bg.at(Vec(vec({0.5, -0.5}) + 2.0 * u));
        REQUIRE(p.kappa.size() == 1u);
        CHECK(p.kappa[0] == doctest::Approx(0.5).epsilon(1e-8));
        CHECK((p.normal + u).norm() <= 1e-10);
        CHECK(p.self_adjoint_residual <= 1e-8);
    }
    CHECK(bg.lower_curvature_bound() == 0.0);

    const auto m = ellipsoid();
    const BoundaryGeometry ba(m.get(), kDisk);
    for (int k = 0; k < 16; ++k) {
        const double th = 2.0 * std::numbers::pi * k / 16.0;
        const BoundaryPoint p = ba.at(vec({std::cos(th), std::sin(th)}));
        CHECK(p.self_adjoint_residual <= 1e-8);
        CHECK(p.kappa[0] > 0.0);
        CHECK(dual_norm(*m, p.normal) == doctest::Approx(1.0).epsilon(1e-9));
    }

    const BoundaryGeometry box(nullptr, kBox);
    const BoundaryPoint f = box.at(vec({0.0, 0.3}));
    CHECK((f.normal - vec({1.0, 0.0})).norm() <= 1e-12);
    for (double k : f.kappa) CHECK(k == 0.0);
    CHECK_THROWS(box.at(vec({0.0, 0.0})));
}

TEST_CASE("distance field marks the disk centre as non-smooth and is finite elsewhere inside") {
    const Grid g(DomainSpec::disk(vec({0, 0}), 1.0, 32, BoundaryCondition::Dirichlet));
    const auto d = distance_field(nullptr, g);
    REQUIRE(d.size() == g.size());
    std::size_t nan_count = 0;
    for (std::size_t i = 0; i < g.size(); ++i) {
        if (g.kind(i) != NodeKind::Interior) continue;
        const Vec x = g.position(i);
        if (std::isnan(d[i])) {
            ++nan_count;
            CHECK(x.norm() <= 1e-9);
        } else {
            CHECK(d[i] == doctest::Approx(1.0 - x.norm()).epsilon(1e-9));
        }
    }
    CHECK(nan_count == 1u);
}
