// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qsep/measurements.hpp"
#include "qsep/personick.hpp"

using namespace qsep;
namespace ms = qsep::measurements;

TEST_CASE("photon-counting closed form") {
    // sigma = 1: 1 - sqrt(2)/4 - sqrt(2)/pi
    const double expected = 1.0 - std::sqrt(2.0) / 4.0 - std::sqrt(2.0) / M_PI;
    CHECK(expected == Catch::Approx(0.1962884513281732).epsilon(1e-15));
    CHECK(ms::mse_pnr_closed_form(1.0) == Catch::Approx(expected).epsilon(1e-15));

    // large-sigma trend: risk becomes a vanishing fraction of the variance
    CHECK(ms::mse_pnr_closed_form(50.0) / (50.0 * 50.0) <= 0.02);
    CHECK_THROWS_AS(ms::mse_pnr_closed_form(-1.0), std::invalid_argument);
}

TEST_CASE("photon-counting quadrature equals the closed form") {
    for (double sigma : {0.1, 0.5, 1.0, 2.0, 3.0}) {
        const auto r = ms::mse_pnr(HalfGaussianPrior(sigma));
        INFO("sigma = " << sigma << " k_max = " << r.k_max);
        CHECK(std::abs(r.mse - ms::mse_pnr_closed_form(sigma)) <= 1e-8);
        CHECK(r.tail_mass <= 1e-10);
    }
}

TEST_CASE("photon-counting limits and reductions") {
    // narrow prior: detector almost always reads zero, estimator -> prior mean
    const auto narrow = ms::mse_pnr(HalfGaussianPrior(0.01));
    CHECK(narrow.mse == Catch::Approx(1e-4 * (1.0 - 2.0 / M_PI)).epsilon(0.01));

    // displaced prior at mu = 0 is the half-Gaussian
    const auto a = ms::mse_pnr(DisplacedHalfGaussianPrior(0.0, 1.0));
    const auto b = ms::mse_pnr(HalfGaussianPrior(1.0));
    CHECK(a.mse == Catch::Approx(b.mse).epsilon(1e-10));

    // undersized explicit k_max leaves outcome mass on the table
    CHECK_THROWS_AS(ms::mse_pnr(HalfGaussianPrior(1.0), 3), ConvergenceError);

    // admissibility: never worse than the constant prior-mean estimator
    for (double sigma : {0.3, 1.0, 2.0}) {
        const auto m = moments(Prior(HalfGaussianPrior(sigma)));
        CHECK(ms::mse_pnr(HalfGaussianPrior(sigma)).mse <= m.variance + 1e-9);
    }
}

TEST_CASE("homodyne risk") {
    // narrow prior limit
    const auto narrow = ms::mse_homodyne(HalfGaussianPrior(0.01));
    CHECK(narrow.mse == Catch::Approx(1e-4 * (1.0 - 2.0 / M_PI)).epsilon(0.01));

    const auto r = ms::mse_homodyne(HalfGaussianPrior(1.0));
    CHECK(r.mse >= personick::mmse_half_gaussian_series(1.0, 30) - 1e-8);
    CHECK(r.mse >= 0.0);
    const auto m = moments(Prior(HalfGaussianPrior(1.0)));
    CHECK(r.mse <= m.variance + 1e-9);

    CHECK_THROWS_AS(ms::mse_homodyne(FullGaussianPrior(1.0)), std::invalid_argument);
}

TEST_CASE("outcome density normalizes") {
    QuadratureSpec spec;
    std::mt19937_64 gen(2024);
    for (int i = 0; i < 20; ++i) {
        const double qa = 6.0 * rng::uniform01(gen);
        const double total =
            integrate([qa](double q) { return ms::homodyne_likelihood(q, qa); }, -qa - 10.0, qa + 10.0, spec)
                .value;
        INFO("q_alpha = " << qa);
        CHECK(total == Catch::Approx(1.0).epsilon(1e-10));
    }
    double poisson_total = 0.0;
    for (int k = 0; k <= 40; ++k) poisson_total += ms::pnr_likelihood(k, 2.0);
    CHECK(poisson_total == Catch::Approx(1.0).epsilon(1e-10));
}

TEST_CASE("vanishing separation scale: every strategy reaches the prior variance") {
    // all three risks agree pairwise within 2% at sigma = 0.01
    const double mmse = personick::mmse_half_gaussian_series(0.01, 16);
    const double pnr = ms::mse_pnr(HalfGaussianPrior(0.01)).mse;
    const double hom = ms::mse_homodyne(HalfGaussianPrior(0.01)).mse;
    const double lo = std::min({mmse, pnr, hom});
    const double hi = std::max({mmse, pnr, hom});
    CHECK((hi - lo) / lo <= 0.02);
}

TEST_CASE("posterior means") {
    // flat-likelihood limit: k = 0 on a narrow prior returns the prior mean
    const auto p0 = ms::posterior_mean_pnr(0, HalfGaussianPrior(0.01));
    CHECK_FALSE(p0.degenerate);
    CHECK(p0.value == Catch::Approx(0.01 * std::sqrt(2.0 / M_PI)).epsilon(1e-3));

    // homodyne posterior mean is even in the outcome by construction
    const auto plus = ms::posterior_mean_homodyne(1.3, HalfGaussianPrior(1.0));
    const auto minus = ms::posterior_mean_homodyne(-1.3, HalfGaussianPrior(1.0));
    CHECK(plus.value == minus.value);

    // posterior concentrates near the likelihood peak sqrt(2k) once the prior
    // is broad; a sharp prior pulls it to sqrt(2k sigma^2/(1+sigma^2))
    const auto p10 = ms::posterior_mean_pnr(10, HalfGaussianPrior(3.0));
    CHECK(std::abs(p10.value - std::sqrt(20.0)) / std::sqrt(20.0) <= 0.15);
    const auto p10n = ms::posterior_mean_pnr(10, HalfGaussianPrior(1.0));
    CHECK(std::abs(p10n.value - std::sqrt(10.0)) / std::sqrt(10.0) <= 0.15);

    // numerically zero marginal likelihood falls back to the prior mean
    const auto deg = ms::posterior_mean_pnr(300, HalfGaussianPrior(0.1));
    CHECK(deg.degenerate);
    CHECK(deg.value == Catch::Approx(0.1 * std::sqrt(2.0 / M_PI)));
}

TEST_CASE("monte carlo cross-check") {
    const Prior prior = HalfGaussianPrior(1.0);
    const auto mc = ms::mc_mse(ms::Measurement::pnr, prior, 200000, 12345);
    CHECK(std::abs(mc.estimate - ms::mse_pnr_closed_form(1.0)) <= 4.0 * mc.std_error);

    const auto mc2 = ms::mc_mse(ms::Measurement::pnr, prior, 200000, 12345);
    CHECK(mc.estimate == mc2.estimate);  // seeded determinism
    CHECK(mc.std_error == mc2.std_error);

    const auto hom = ms::mc_mse(ms::Measurement::homodyne, prior, 200000, 99);
    const auto quad = ms::mse_homodyne(prior);
    CHECK(std::abs(hom.estimate - quad.mse) <= 4.0 * hom.std_error);

    CHECK_THROWS_AS(ms::mc_mse(ms::Measurement::pnr, prior, 100, 1), std::invalid_argument);
}
