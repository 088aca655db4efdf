#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "bandlab/semicircle.hpp"

using namespace bandlab;

TEST_CASE("m at i is the golden ratio conjugate") {
    const Complex m = stieltjes_m(Complex(0, 1));
    CHECK(std::abs(m - Complex(0, (std::sqrt(5.0) - 1) / 2)) <= 1e-15);
}

TEST_CASE("dyson residual and half plane on a grid") {
    double worst = 0.0;
    for (double E = -3.0; E <= 3.0; E += 0.1)
        for (double eta : {1e-6, 1e-3, 0.02, 0.1, 1.0, 10.0}) {
            for (double s : {1.0, -1.0}) {
                const Complex z(E, s * eta);
                const Complex m = stieltjes_m(z);
                worst = std::max(worst, std::abs(-1.0 / m - z - m));
                CHECK(m.imag() * z.imag() > 0);
                CHECK(std::abs(m) < 1.0);
            }
        }
    CHECK(worst <= 1e-12);
}

TEST_CASE("fixed point iteration agrees") {
    // independent oracle: iterate m <- -1/(z+m), a contraction off the real axis
    const Complex z(0.3, 0.5);
    Complex m(0, 1);
    for (int i = 0; i < 2000; ++i) m = -1.0 / (z + m);
    CHECK(std::abs(m - stieltjes_m(z)) <= 1e-13);
}

TEST_CASE("real axis outside the spectrum") {
    const Complex m = stieltjes_m(Complex(3.0, 0.0));
    CHECK(std::abs(m - Complex((-3.0 + std::sqrt(5.0)) / 2, 0)) <= 1e-15);
    CHECK_THROWS_AS(stieltjes_m(Complex(1.0, 0.0)), DomainError);
    CHECK_THROWS_AS(stieltjes_m(Complex(-2.0, 0.0)), DomainError);
}

TEST_CASE("density") {
    CHECK(semicircle_density(0.0) == doctest::Approx(1.0 / M_PI));
    CHECK(semicircle_density(2.5) == 0.0);
    double mass = 0.0;
    const int n = 200000;
    for (int i = 0; i < n; ++i) {
        const double E = -2.0 + 4.0 * (i + 0.5) / n;
        mass += semicircle_density(E) * 4.0 / n;
    }
    CHECK(mass == doctest::Approx(1.0).epsilon(1e-6));
    // Im m tends to pi rho from above
    for (double E : {-1.5, 0.0, 0.7}) CHECK(stieltjes_m(Complex(E, 1e-9)).imag() == doctest::Approx(M_PI * semicircle_density(E)).epsilon(1e-6));
}

TEST_CASE("localization length") {
    CHECK(localization_length(40, 400, 0.1) == doctest::Approx(40 / std::sqrt(0.1)));
    CHECK(localization_length(40, 400, 1e-3) == 400);
    CHECK_THROWS_AS(localization_length(40, 400, 0.0), DomainError);
    CHECK_THROWS_AS(localization_length(40, 400, -1.0), DomainError);
}

TEST_CASE("spectral points") {
    const auto p = SpectralPoint::make(Complex(0.2, 0.05), 40, 400);
    CHECK(p.eta == 0.05);
    CHECK(p.dyson_residual() <= 1e-12);
    const auto q = p.conj();
    CHECK(q.z == std::conj(p.z));
    CHECK(q.m == std::conj(p.m));
    CHECK(q.eta == p.eta);
}

TEST_CASE("bulk domain") {
    CHECK(in_bulk_domain(Complex(0, 0.1), 0.1, 0.1, 10, 400));
    CHECK_FALSE(in_bulk_domain(Complex(0, 1e-4), 0.1, 0.1, 10, 400));
    CHECK_FALSE(in_bulk_domain(Complex(2.5, 0.01), 0.1, 0.1, 10, 400));
    CHECK_FALSE(in_bulk_domain(Complex(20, 1), 0.1, 0.1, 10, 400));
}
