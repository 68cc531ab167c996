#include <cmath>
#include <numbers>
#include <random>

#include <doctest.h>

#include "gradest/anisotropy.hpp"
#include "gradest/verify.hpp"

using namespace gradest;

namespace {

Vec vec(std::initializer_list<double> xs) {
    Vec v(static_cast<Eigen::Index>(xs.size()));
    int k = 0;
    for (double x : xs) v[k++] = x;
    return v;
}

nlohmann::ordered_json diag_q(std::initializer_list<double> d) {
    const std::vector<double> v(d);
    nlohmann::ordered_json q = nlohmann::ordered_json::array();
    for (std::size_t i = 0; i < v.size(); ++i) {
        nlohmann::ordered_json row = nlohmann::ordered_json::array();
        for (std::size_t k = 0; k < v.size(); ++k) row.push_back(i == k ? v[i] : 0.0);
        q.push_back(row);
    }
    return q;
}

std::shared_ptr<const AnisotropyModel> ellipsoid2d() {
    return make_anisotropy("ellipsoid", {{"Q", diag_q({4, 1, 1})}}, "constant", 0.0, 2);
}

Vec random_vec(std::mt19937_64& rng, int n) {
    std::normal_distribution<double> N01;
    Vec v(n);
    for (int k = 0; k < n; ++k) v[k] = N01(rng);
    return v;
}

std::vector<std::shared_ptr<const AnisotropyModel>> builtins(int n) {
    std::vector<std::shared_ptr<const AnisotropyModel>> out;
    for (const char* mob : {"constant", "tilted"}) {
        const double delta = std::string(mob) == "tilted" ? 0.3 : 0.0;
        out.push_back(make_anisotropy("euclidean", {}, mob, delta, n));
        out.push_back(make_anisotropy("ellipsoid", {{"Q", n == 2 ? diag_q({4, 1, 1}) : diag_q({4, 1, 1, 1})}}, mob,
                                      delta, n));
        out.push_back(make_anisotropy("quartic", {{"eps", 0.3}}, mob, delta, n));
    }
    return out;
}

}  // namespace

TEST_CASE("homogeneity identities hold for every built-in anisotropy") {
    for (int n : {2, 3})
        for (const auto& m : builtins(n)) {
            const HomogeneityReport r = verify_homogeneity(*m, 1000, 7);
            INFO(m->describe(), " n=", n);
            CHECK(r.max() <= 1e-6);
            CHECK(r.derivative_consistency <= 1e-5);
        }
    const auto e = make_anisotropy("euclidean", {}, "constant", 0.0, 2);
    CHECK(verify_homogeneity(*e).radial_flatness <= 1e-12);
}

TEST_CASE("ellipsoid gradient is 0-homogeneous") {
    const auto m = ellipsoid2d();
    std::mt19937_64 rng(2);
    for (int k = 0; k < 200; ++k) {
        const Vec q = random_vec(rng, 3);
        const Vec g1 = m->norm().gradient(q), g2 = m->norm().gradient(2.0 * q);
        CHECK((g1 - g2).norm() <= 1e-8 * g1.norm());
    }
}

TEST_CASE("mobility is 0-homogeneous and positive; tilted rejects |delta| >= 1") {
    const TiltedMobility t(0.6);
    std::mt19937_64 rng(4);
    for (int k = 0; k < 200; ++k) {
        const Vec z = random_vec(rng, 3);
        CHECK(t.value(z) > 0.0);
        CHECK(t.value(3.7 * z) == doctest::Approx(t.value(z)).epsilon(1e-14));
    }
    CHECK_THROWS(TiltedMobility(1.0));
    CHECK_THROWS(TiltedMobility(-1.2));
}

TEST_CASE("sphere constants: Euclidean is (1, 1, 1); ellipsoid satisfies the ellipticity inequality a posteriori") {
    const auto e = make_anisotropy("euclidean", {}, "constant", 0.0, 2);
    const SphereConstants ke = sphere_constants(*e);
    CHECK(ke.A1 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ke.A2 == doctest::Approx(1.0).epsilon(1e-9));
    CHECK(ke.A == doctest::Approx(1.0).epsilon(1e-9));

    const auto m = make_anisotropy("ellipsoid", {{"Q", diag_q({4, 1})}}, "constant", 0.0, 1);
    const SphereConstants k = sphere_constants(*m);
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> U(-3.0, 3.0);
    double worst = 1e300;
    for (int s = 0; s < 10000; ++s) {
        const Vec p = random_vec(rng, 1).normalized() * std::pow(10.0, U(rng));
        const Vec v = random_vec(rng, 1);
        worst = std::min(worst, (1.0 + p.squaredNorm()) * v.dot(m->coefficient(p) * v) / v.squaredNorm());
    }
    CHECK(worst >= k.A * (1.0 - 1e-6));
}

TEST_CASE("quartic perturbation: convexity degenerates as the quartic term dominates") {
    // eps -> 0 is the Euclidean norm (A1 -> 1); the tangential curvature of the
    // l4-like unit sphere vanishes at the axes as eps grows.
    std::vector<double> a1;
    for (double eps : {1e-3, 1e-1, 10.0, 1e2, 1e3}) {
        const AnisotropyModel m(std::make_shared<QuarticNorm>(eps), std::make_shared<ConstantMobility>(), 2);
        a1.push_back(sphere_constants(m).A1);
    }
    CHECK(a1[0] == doctest::Approx(1.0).epsilon(1e-3));
    for (std::size_t k = 1; k < a1.size(); ++k) CHECK(a1[k] < a1[k - 1]);
    // A1 ~ c eps^{-1/2}: extrapolate the last decade to the rejection threshold
    const double slope = std::log10(a1[4] / a1[3]);
    CHECK(slope == doctest::Approx(-0.5).epsilon(0.3));
    CHECK_THROWS_AS(AnisotropyModel(std::make_shared<QuarticNorm>(1e8), std::make_shared<ConstantMobility>(), 2),
                    NotStrictlyConvex);
    const AnisotropyModel unchecked(std::make_shared<QuarticNorm>(1e8), std::make_shared<ConstantMobility>(), 2,
                                    false);
    CHECK_THROWS_AS(sphere_constants(unchecked), NotStrictlyConvex);
}

TEST_CASE("dual norm: closed forms, zero, homogeneity and double duality") {
    const auto euc = make_anisotropy("euclidean", {}, "constant", 0.0, 2);
    const auto ell = ellipsoid2d();
    CHECK(dual_norm(*ell, vec({2.0, 0.0})) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(dual_norm(*ell, vec({0.0, 0.0})) == 0.0);
    std::mt19937_64 rng(8);
    Mat qinv(2, 2);
    qinv << 0.25, 0.0, 0.0, 1.0;
    for (int s = 0; s < 1000; ++s) {
        const Vec v = random_vec(rng, 2);
        CHECK(std::abs(dual_norm(*euc, v) - v.norm()) <= 1e-12 * v.norm());
        const double fs = dual_norm(*ell, v);
        CHECK(std::abs(fs * fs - v.dot(qinv * v)) <= 1e-8 * v.dot(qinv * v));
    }
    const auto quart = make_anisotropy("quartic", {{"eps", 0.3}}, "constant", 0.0, 2);
    for (const auto& m : {euc, ell, quart}) {
        for (int s = 0; s < 40; ++s) {
            const Vec v = random_vec(rng, 2);
            CHECK(dual_norm(*m, 2.5 * v) == doctest::Approx(2.5 * dual_norm(*m, v)).epsilon(1e-9));
            // (F*)* = Ftilde: sup over {F* <= 1} of p.v is attained at the normal n(p)/F*(n(p))
            const Vec n = covector_to_normal(*m, v);
            CHECK(v.dot(n) / dual_norm(*m, n) == doctest::Approx(m->Ftilde(v)).epsilon(1e-6));
            // and no point of the dual unit ball does better (sampled)
            for (int k = 0; k < 32; ++k) {
                const double th = 2.0 * std::numbers::pi * k / 32.0;
                const Vec w = vec({std::cos(th), std::sin(th)});
                CHECK(v.dot(w) / dual_norm(*m, w) <= m->Ftilde(v) * (1.0 + 1e-9));
            }
        }
    }
}

TEST_CASE("normal maps: Euclidean, ellipsoid round trip and scaling invariance") {
    const auto euc = make_anisotropy("euclidean", {}, "constant", 0.0, 2);
    const Vec n = vec({3.0, -4.0});
    CHECK((normal_to_covector(*euc, n) - n / 5.0).norm() <= 1e-12);
    const auto ell = ellipsoid2d();
    Mat q(2, 2);
    q << 4.0, 0.0, 0.0, 1.0;
    std::mt19937_64 rng(10);
    for (int s = 0; s < 500; ++s) {
        Vec p = random_vec(rng, 2);
        p /= ell->Ftilde(p);
        const Vec np = covector_to_normal(*ell, p);
        CHECK((np - q * p / std::sqrt(p.dot(q * p))).norm() <= 1e-12);
        CHECK((normal_to_covector(*ell, np) - p).norm() <= 1e-8);
        CHECK(normal_to_covector(*ell, 2.0 * np) == normal_to_covector(*ell, np));
    }
    CHECK_THROWS(normal_to_covector(*ell, vec({0.0, 0.0})));
    CHECK_THROWS(covector_to_normal(*ell, vec({0.0, 0.0})));
}

TEST_CASE("ellipticity lemma and projection chain for ellipsoid and quartic with both mobilities") {
    for (const auto& m :
         {make_anisotropy("ellipsoid", {{"Q", diag_q({4, 1, 1})}}, "constant", 0.0, 2),
          make_anisotropy("ellipsoid", {{"Q", diag_q({4, 1, 1})}}, "tilted", 0.3, 2),
          make_anisotropy("quartic", {{"eps", 0.3}}, "constant", 0.0, 2),
          make_anisotropy("quartic", {{"eps", 0.3}}, "tilted", 0.3, 2)}) {
        const SphereConstants k = sphere_constants(*m);
        const LemmaReport r = ellipticity_lemma_check(*m, k, 10000, 1e3, 11);
        INFO(m->describe());
        CHECK(r.samples == 10000u);
        CHECK(r.min_ratio >= 1.0 - 1e-4);
        CHECK(r.min_chain_slack >= -1e-6);
    }
}

TEST_CASE("graph functions: F(p) = Fbar(p, -1) and m(p) = mbar(p, -1)") {
    const auto m = make_anisotropy("quartic", {{"eps", 0.3}}, "tilted", 0.3, 2);
    const Vec p = vec({0.4, -1.1});
    CHECK(m->F(p) == m->norm().value(vec({0.4, -1.1, -1.0})));
    CHECK(m->m(p) == m->mobility().value(vec({0.4, -1.1, -1.0})));
    CHECK(m->Ftilde(p) == m->norm().value(vec({0.4, -1.1, 0.0})));
    CHECK_THROWS_AS(make_anisotropy("octagon", {}, "constant", 0.0, 2), ConfigError);
}
