// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qsep/quadrature.hpp"

using namespace qsep;

TEST_CASE("gaussian half-line integrals") {
    QuadratureSpec spec;
    spec.domain_cut = 40.0;

    const double v1 = integrate_half_line([](double q) { return std::exp(-0.5 * q * q); }, spec).value;
    CHECK(v1 == Catch::Approx(std::sqrt(M_PI / 2.0)).epsilon(1e-13));

    // half-Gaussian raw second moment at sigma = 1 equals sigma^2
    const double v2 =
        integrate_half_line([](double q) { return q * q * 2.0 / std::sqrt(2.0 * M_PI) * std::exp(-0.5 * q * q); },
                            spec)
            .value;
    CHECK(v2 == Catch::Approx(1.0).epsilon(1e-13));

    const double v3 = integrate_half_line([](double q) { return q * std::exp(-q * q); }, spec).value;
    CHECK(v3 == Catch::Approx(0.5).epsilon(1e-13));
}

TEST_CASE("composite rule matches adaptive rule") {
    QuadratureSpec comp;
    comp.rule = QuadRule::gauss_legendre_composite;
    auto f = [](double q) { return std::exp(-q * q) * std::cos(3.0 * q); };
    const double a = integrate(f, 0.0, 10.0).value;
    const double c = integrate(f, 0.0, 10.0, comp).value;
    CHECK(a == Catch::Approx(c).epsilon(1e-11));
}

TEST_CASE("halfline_gaussian_moment closed forms") {
    CHECK(halfline_gaussian_moment(0, 1.0) == Catch::Approx(0.5).epsilon(1e-15));
    CHECK(halfline_gaussian_moment(1, 1.0) == Catch::Approx(std::sqrt(M_PI) / 4.0).epsilon(1e-14));
    CHECK(halfline_gaussian_moment(2, 2.0) == Catch::Approx(0.125).epsilon(1e-14));
    CHECK_THROWS_AS(halfline_gaussian_moment(1, 0.0), std::invalid_argument);
    CHECK_THROWS_AS(halfline_gaussian_moment(-1, 1.0), std::invalid_argument);
}

TEST_CASE("moments agree with quadrature across A and k") {
    for (double A : {0.1, 0.5, 1.0, 2.0, 10.0}) {
        for (int k : {0, 1, 2, 5, 10, 20, 40, 80}) {
            const double peak = std::sqrt((k + 1) / (2.0 * A));
            QuadratureSpec spec;
            spec.domain_cut = peak + 16.0 / std::sqrt(2.0 * A) + 1.0;
            spec.rel_tol = 1e-13;
            const double num =
                integrate_half_line([&](double q) { return std::pow(q, k + 1) * std::exp(-A * q * q); }, spec)
                    .value;
            const double closed = halfline_gaussian_moment(k, A);
            CHECK(num == Catch::Approx(closed).epsilon(1e-11));
        }
    }
}

TEST_CASE("domain cut beyond the decay scale is inert") {
    auto f = [](double q) { return std::exp(-0.5 * q * q) * (1.0 + q * q); };
    QuadratureSpec spec;
    spec.domain_cut = 12.0;
    const double base = integrate_half_line(f, spec).value;
    spec.domain_cut *= 1.5;
    const double wider = integrate_half_line(f, spec).value;
    CHECK(std::abs(wider - base) <= spec.rel_tol * std::abs(base));
}

TEST_CASE("non-convergence carries the best estimate") {
    QuadratureSpec spec;
    spec.max_panels = 4;
    spec.rel_tol = 1e-15;
    bool thrown = false;
    try {
        integrate([](double q) { return std::cos(200.0 * q * q); }, 0.0, 20.0, spec);
    } catch (const ConvergenceError& e) {
        thrown = true;
        CHECK(std::isfinite(e.best_estimate()));
    }
    CHECK(thrown);
}

TEST_CASE("quadrature parameter validation") {
    QuadratureSpec bad;
    bad.nodes_per_panel = 1;
    CHECK_THROWS_AS(bad.validate(), std::invalid_argument);
    QuadratureSpec bad2;
    bad2.rel_tol = 0.0;
    CHECK_THROWS_AS(bad2.validate(), std::invalid_argument);
}
