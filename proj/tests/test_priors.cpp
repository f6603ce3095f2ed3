// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <random>

#include "qsep/priors.hpp"
#include "qsep/quadrature.hpp"

using namespace qsep;

namespace {

QuadratureSpec prior_spec(const Prior& p) {
    QuadratureSpec s;
    s.domain_cut = support_cut(p);
    s.rel_tol = 1e-13;
    return s;
}

PriorMoments numeric_moments(const Prior& p) {
    const auto s = prior_spec(p);
    const double m0 = integrate_half_line([&](double q) { return pdf(p, q); }, s).value;
    const double m1 = integrate_half_line([&](double q) { return q * pdf(p, q); }, s).value;
    const double m2 = integrate_half_line([&](double q) { return q * q * pdf(p, q); }, s).value;
    return {m1 / m0, m2 / m0 - (m1 / m0) * (m1 / m0), m2 / m0};
}

}  // namespace

TEST_CASE("erfcx") {
    CHECK(erfcx(0.0) == Catch::Approx(1.0));
    // reference values across both branches
    const std::pair<double, double> ref[] = {
        {0.5, 0.6156903441929258},  {1.0, 0.427583576155807},    {3.0, 0.17900115118138998},
        {6.0, 0.09277656780053836}, {8.0, 0.06998516620088094},  {12.0, 0.04685422101489376},
        {26.0, 0.02168358485056291}};
    for (const auto& [x, v] : ref) {
        INFO("x = " << x);
        CHECK(erfcx(x) == Catch::Approx(v).epsilon(5e-13));
    }
    CHECK(erfcx(50.0) == Catch::Approx(1.0 / (50.0 * std::sqrt(M_PI))).epsilon(1e-3));
    CHECK(erfcx(-2.0) == Catch::Approx(2.0 * std::exp(4.0) - erfcx(2.0)).epsilon(1e-13));
}

TEST_CASE("half gaussian closed forms") {
    const HalfGaussianPrior p(1.0);
    CHECK(p.pdf(0.0) == Catch::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-15));
    const auto m = p.moments();
    CHECK(m.mean == Catch::Approx(std::sqrt(2.0 / M_PI)).epsilon(1e-15));
    CHECK(m.variance == Catch::Approx(1.0 - 2.0 / M_PI).epsilon(1e-15));
    CHECK(m.second_moment == 1.0);
    CHECK_THROWS_AS(p.pdf(-0.1), std::invalid_argument);
    CHECK_THROWS_AS(HalfGaussianPrior(0.0), std::invalid_argument);
}

TEST_CASE("displaced prior reduces to half gaussian at mu = 0") {
    const DisplacedHalfGaussianPrior d(0.0, 1.0);
    const HalfGaussianPrior h(1.0);
    for (double q : {0.0, 0.3, 1.0, 2.7}) CHECK(d.pdf(q) == Catch::Approx(h.pdf(q)).epsilon(1e-13));
    CHECK(d.mu_t == Catch::Approx(h.moments().mean).epsilon(1e-14));
    CHECK(d.sigma_t2 == Catch::Approx(h.moments().variance).epsilon(1e-14));
}

TEST_CASE("displaced prior normalization and moments") {
    const Prior p = DisplacedHalfGaussianPrior(1.0, 1.0);
    const auto s = prior_spec(p);
    const double norm = integrate_half_line([&](double q) { return pdf(p, q); }, s).value;
    CHECK(norm == Catch::Approx(1.0).epsilon(1e-12));

    const DisplacedHalfGaussianPrior far(3.0, 0.1);
    CHECK(far.mu_t == Catch::Approx(3.0).margin(1e-8));
    CHECK(far.sigma_t2 == Catch::Approx(0.01).margin(1e-8));

    // the cached normalization matches its integral definition
    const DisplacedHalfGaussianPrior d(1.0, 1.0);
    const double g_numeric =
        integrate_half_line([&](double q) { return std::exp(-0.5 * (q - 1.0) * (q - 1.0)); },
                            prior_spec(Prior(d)))
            .value;
    CHECK(d.normalization() == Catch::Approx(g_numeric).epsilon(1e-12));
}

TEST_CASE("closed-form moments match quadrature over the parameter grid") {
    for (double mu : {-2.0, -1.0, 0.0, 0.5, 1.0, 3.0, 5.0}) {
        for (double sigma : {0.05, 0.3, 1.0, 3.0}) {
            const Prior p = DisplacedHalfGaussianPrior(mu, sigma);
            const auto closed = moments(p);
            const auto num = numeric_moments(p);
            INFO("mu=" << mu << " sigma=" << sigma);
            CHECK(std::abs(closed.mean - num.mean) <= 1e-10 * std::max(1.0, std::abs(closed.mean)));
            CHECK(std::abs(closed.variance - num.variance) <= 1e-10 * std::max(1.0, closed.variance));
            CHECK(std::abs(closed.second_moment - num.second_moment) <=
                  1e-10 * std::max(1.0, closed.second_moment));
        }
    }
}

TEST_CASE("pdf is monotone decreasing past the mode") {
    for (double mu : {-1.0, 0.0, 2.0}) {
        const DisplacedHalfGaussianPrior p(mu, 0.8);
        const double start = std::max(mu, 0.0);
        double prev = p.pdf(start);
        for (int i = 1; i <= 40; ++i) {
            const double q = start + 0.2 * i;
            const double cur = p.pdf(q);
            CHECK(cur <= prev + 1e-15);
            CHECK(cur >= 0.0);
            prev = cur;
        }
    }
}

TEST_CASE("moment inversion round trip") {
    // forward -> invert -> same parameters
    for (double mu : {-1.0, 0.0, 0.5, 1.5, 2.0}) {
        for (double sigma : {0.3, 0.7, 1.0}) {
            const DisplacedHalfGaussianPrior fwd(mu, sigma);
            const auto inv = invert_moments(fwd.mu_t, fwd.sigma_t2);
            INFO("mu=" << mu << " sigma=" << sigma);
            CHECK(std::abs(inv.mu_t - fwd.mu_t) <= 1e-8 * std::max(1.0, fwd.mu_t));
            CHECK(std::abs(inv.sigma_t2 - fwd.sigma_t2) <= 1e-8 * std::max(1.0, fwd.sigma_t2));
            CHECK(inv.mu == Catch::Approx(mu).margin(2e-6));
            CHECK(inv.sigma == Catch::Approx(sigma).margin(2e-6));
        }
    }

    const auto narrow = invert_moments(3.0, 0.01);
    CHECK(narrow.mu == Catch::Approx(3.0).margin(1e-6));
    CHECK(narrow.sigma == Catch::Approx(0.1).margin(1e-6));

    // the half-Gaussian ratio is the mu = 0 member of the family
    const double ratio = std::sqrt(2.0 / M_PI) / std::sqrt(1.0 - 2.0 / M_PI);
    const auto boundary = invert_moments(ratio, 1.0);
    CHECK(std::abs(boundary.mu) < 1e-6);
}

TEST_CASE("unattainable targets are reported, not clamped") {
    CHECK_THROWS_AS(invert_moments(0.2, 0.05), UnattainableTargetError);
    CHECK_THROWS_AS(invert_moments(1.0, 2.0), UnattainableTargetError);
    CHECK_THROWS_AS(invert_moments(-1.0, 0.5), std::invalid_argument);
}

TEST_CASE("sampling is deterministic and unbiased") {
    const Prior p = DisplacedHalfGaussianPrior(-1.0, 0.6);
    const auto m = moments(p);
    std::mt19937_64 g1(42), g2(42);
    double acc = 0.0;
    const int n = 100000;
    for (int i = 0; i < n; ++i) acc += sample(p, g1);
    double acc2 = 0.0;
    for (int i = 0; i < n; ++i) acc2 += sample(p, g2);
    CHECK(acc == acc2);  // bit-identical reruns
    const double se = std::sqrt(m.variance / n);
    CHECK(acc / n == Catch::Approx(m.mean).margin(5.0 * se));

    std::mt19937_64 g3(7);
    const Prior h = HalfGaussianPrior(1.0);
    double hacc = 0.0;
    for (int i = 0; i < n; ++i) hacc += sample(h, g3);
    CHECK(hacc / n == Catch::Approx(std::sqrt(2.0 / M_PI)).margin(5.0 * std::sqrt((1.0 - 2.0 / M_PI) / n)));
}
