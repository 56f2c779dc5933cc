#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <limits>
#include <random>

#include "hvm/geometry.hpp"

using namespace hvm;
using Catch::Approx;

TEST_CASE("characteristic maps: pinned values") {
    CHECK(g_plus(1.0) == 0.0);
    CHECK(g_plus_inv(0.0) == 1.0);
    CHECK(g_plus(2.0) == Approx(0.75).margin(1e-15));
    CHECK(g_plus_inv(0.75) == Approx(2.0).margin(1e-15));
    CHECK(g_minus(2.0) == Approx(-0.75).margin(1e-15));
    CHECK(g_minus_inv(0.75) == Approx(std::sqrt(1.5625) - 0.75).margin(1e-15));
    CHECK_THROWS_AS(g_plus(0.0), std::domain_error);
    CHECK_THROWS_AS(g_plus(-1.0), std::domain_error);
}

TEST_CASE("characteristic maps: inversion over 12 decades") {
    // |g_plus_inv(g_plus(z)) - z| <= 8 eps (1+z)
    const double eps = std::numeric_limits<double>::epsilon();
    std::mt19937 rng(12345);
    std::uniform_real_distribution<double> expo(-6.0, 6.0);
    for (int k = 0; k < 200000; ++k) {
        double z = std::pow(10.0, expo(rng));
        double back = g_plus_inv(g_plus(z));
        REQUIRE(std::abs(back - z) <= 8.0 * eps * (1.0 + z));
    }
    // derivative identity g_plus'(z) = 1/(1+hat(g_plus(z)))
    for (double z : {0.3, 1.0, 2.5, 17.0}) {
        CHECK(g_plus_prime(z) == Approx(1.0 / (1.0 + hat(g_plus(z)))).epsilon(1e-13));
    }
}

TEST_CASE("p0: pinned values and positivity") {
    CHECK(p0_of(0.0, 0.0, 0.0) == 1.0);
    CHECK(p0_of(0.0, 3.0, 4.0) == Approx(std::sqrt(26.0)).epsilon(1e-15));
    // x -> +inf limit with p = (-3, 0): sqrt(10) - 3, still positive
    double lim = p0_of(1e12, -3.0, 0.0);
    CHECK(lim == Approx(std::sqrt(10.0) - 3.0).epsilon(1e-9));
    CHECK(lim > 0.0);

    std::mt19937 rng(777);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int k = 0; k < 1000000; ++k) {
        double x = 50.0 * std::tan(1.55 * u(rng));
        double p1 = 50.0 * std::tan(1.55 * u(rng));
        double p2 = 50.0 * std::tan(1.55 * u(rng));
        REQUIRE(p0_of(x, p1, p2) > 0.0);
    }
}

TEST_CASE("region classification: pinned examples") {
    const double R0 = 2.0;
    CHECK(classify_region(0.0, 0.0, R0).label == RegionLabel::Omega1);
    CHECK(classify_region(0.5, 3.0, R0).label == RegionLabel::Omega2);
    CHECK(classify_region(0.5, -3.0, R0).label == RegionLabel::Omega4);
    CHECK(classify_region(3.0, 0.0, R0).label == RegionLabel::Omega3);
    CHECK(classify_region(2.0, 3.0, R0).in_vacuum);       // sqrt(10) >= 2 + 1
    CHECK_FALSE(classify_region(3.0, 0.0, R0).in_vacuum); // 1 < 2 + 1.5
    CHECK_THROWS_AS(classify_region(-0.1, 0.0, R0), std::domain_error);
}

TEST_CASE("region classification: partition and mirror symmetry") {
    std::mt19937 rng(42);
    std::uniform_real_distribution<double> ux(-30.0, 30.0);
    std::uniform_real_distribution<double> ut(0.0, 40.0);
    auto mirrored = [](RegionLabel l) {
        if (l == RegionLabel::Omega2) return RegionLabel::Omega4;
        if (l == RegionLabel::Omega4) return RegionLabel::Omega2;
        return l;
    };
    for (int k = 0; k < 100000; ++k) {
        double tau = ut(rng), x = ux(rng);
        auto r = classify_region(tau, x, 1.0);
        // exactly one label: membership per the defining inequalities
        double a = g_minus_inv(x), b = g_plus_inv(x);
        int members = 0;
        if (tau < std::min(a, b)) ++members;
        if (a <= tau && tau < b) ++members;
        if (tau >= std::max(a, b)) ++members;
        if (b <= tau && tau < a) ++members;
        REQUIRE(members == 1);
        auto rm = classify_region(tau, -x, 1.0);
        REQUIRE(rm.label == mirrored(r.label));
    }
}

TEST_CASE("surface families") {
    CHECK(sigma_time(0, 2.0, 5.0) == 2.0);
    CHECK(sigma_time(1, 2.0, 5.0) == Approx(2.0 + std::sqrt(26.0)));
    CHECK(sigma_time(2, 2.0, 5.0) == Approx(2.0 + 2.0 * std::sqrt(26.0)));
    CHECK_THROWS_AS(SurfaceFamily(3), std::domain_error);
}
