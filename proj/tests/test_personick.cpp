// SPDX-License-Identifier: Apache-2.0
#include <catch2/catch_amalgamated.hpp>

#include <cmath>

#include "qsep/personick.hpp"

using namespace qsep;
using personick::GammaTriple;

namespace {

GammaTriple half_gaussian_triple(double sigma, int cutoff) {
    return personick::build_gamma_numeric(HalfGaussianPrior(sigma), cutoff);
}

}  // namespace

TEST_CASE("squeezed thermal parameters at sigma = 1") {
    const auto sp = fock::squeeze_params(1.0);
    CHECK(sp.r == Catch::Approx(std::log(3.0) / 4.0).epsilon(1e-15));
    CHECK(sp.n_bar == Catch::Approx(0.5 * (std::sqrt(3.0) - 1.0)).epsilon(1e-15));
    CHECK(sp.s == Catch::Approx(2.0 - std::sqrt(3.0)).epsilon(1e-14));
    // cosh r - sinh r = (2 sigma^2 + 1)^{-1/4}
    CHECK(std::cosh(sp.r) - std::sinh(sp.r) == Catch::Approx(std::pow(3.0, -0.25)).epsilon(1e-14));
    for (double sigma : {0.1, 1.0, 3.0}) {
        const auto p = fock::squeeze_params(sigma);
        CHECK(p.r >= 0.0);
        CHECK(p.n_bar >= 0.0);
        CHECK(p.s >= 0.0);
        CHECK(p.s < 1.0);
    }
    CHECK_THROWS_AS(fock::squeeze_params(0.0), std::invalid_argument);
}

TEST_CASE("numeric gamma triple structure") {
    const auto g = half_gaussian_triple(1.0, 40);
    CHECK(g.gamma0.entries.trace() == Catch::Approx(1.0).margin(1e-9));
    CHECK(g.gamma2_trace == 1.0);

    for (int n = 0; n <= 40; ++n)
        for (int m = 0; m <= 40; ++m)
            if ((n + m) % 2 == 1) {
                CHECK(g.gamma0.entries(n, m) == 0.0);
                CHECK(g.gamma1.entries(n, m) == 0.0);
            }

    const auto eg = fock::eigh(g.gamma0);
    CHECK(eg.eigenvalues.minCoeff() >= -1e-10);

    // narrow prior collapses onto the vacuum projector
    const auto tiny = half_gaussian_triple(0.02, 12);
    CHECK(tiny.gamma0.entries(0, 0) > 0.999);

    // displaced prior: gamma2 is the exact raw second moment
    const Prior disp = DisplacedHalfGaussianPrior(1.0, 1.0);
    const auto gd = personick::build_gamma_numeric(disp, 40);
    const auto m = moments(disp);
    CHECK(gd.gamma2_trace == Catch::Approx(m.second_moment).epsilon(1e-14));
    CHECK(gd.gamma0.entries.trace() == Catch::Approx(1.0).margin(1e-9));
}

TEST_CASE("analytic gamma0 equals the quadrature path") {
    for (double sigma : {0.5, 1.0}) {
        const auto numeric = half_gaussian_triple(sigma, 30);
        const auto analytic = personick::build_gamma0_analytic(sigma, 30);
        INFO("sigma = " << sigma);
        CHECK((numeric.gamma0.entries - analytic.entries).cwiseAbs().maxCoeff() <= 1e-8);
    }

    // spectrum of the squeezed thermal state is geometric
    const auto g0 = personick::build_gamma0_analytic(1.0, 40);
    const auto eg = fock::eigh(g0);
    const auto sp = fock::squeeze_params(1.0);
    for (int k = 0; k < 12; ++k) {
        const double expected = (1.0 - sp.s) * std::pow(sp.s, k);
        CHECK(eg.eigenvalues[40 - k] == Catch::Approx(expected).epsilon(1e-8));
    }

    // narrow prior limit: the squeezed thermal state collapses onto vacuum
    const auto tiny = personick::build_gamma0_analytic(0.01, 10);
    CHECK(tiny.entries(0, 0) == Catch::Approx(1.0).margin(1e-4));
    CHECK(tiny.entries.trace() == Catch::Approx(1.0).margin(1e-8));
}

TEST_CASE("squeezed-frame gamma1 elements") {
    const int cutoff = 16;
    for (double sigma : {0.5, 1.0, 2.0}) {
        const auto M = personick::gamma1_squeezed_frame_analytic(sigma, cutoff);
        INFO("sigma = " << sigma);
        for (int n = 0; n <= cutoff; ++n)
            for (int m = 0; m <= cutoff; ++m)
                if ((n + m) % 2 == 1) CHECK(M(n, m) == 0.0);

        // coefficient-times-moment route, exact for n+m <= 20
        for (int n = 0; n <= 8; ++n) {
            for (int m = n; m <= 10; m += 2) {
                const double coeff = personick::gamma1_element_coefficient_route(sigma, n, m);
                CHECK(M(n, m) == Catch::Approx(coeff).epsilon(1e-9).margin(1e-13));
            }
        }
    }

    // (0,0) element in closed form: H_0 = 1 so I+ = I- = 1/(2A)
    const auto sp = fock::squeeze_params(1.0);
    const double A = 0.5 * (1.0 + 1.0 - std::tanh(sp.r));
    const double expected = 1.0 / (std::sqrt(2.0 * M_PI) * std::cosh(sp.r) * A);
    const auto M = personick::gamma1_squeezed_frame_analytic(1.0, 4);
    CHECK(M(0, 0) == Catch::Approx(expected).epsilon(1e-12));

    // against the squeeze-conjugated quadrature operator
    const int big = 60;
    const auto gnum = half_gaussian_triple(1.0, big);
    const auto U = fock::squeeze_matrix(sp.r, big);
    Eigen::MatrixXd conj = U.entries.transpose() * gnum.gamma1.entries * U.entries;
    const auto Mfull = personick::gamma1_squeezed_frame_analytic(1.0, 16);
    CHECK((conj.topLeftCorner(17, 17) - Mfull).cwiseAbs().maxCoeff() <= 1e-8);
}

TEST_CASE("estimator solve on the commuting case") {
    // geometric state with every eigenvalue pair above the regularization
    // floor, so B must be exactly c * identity
    const int dim = 13;
    Eigen::VectorXd lam(dim);
    for (int n = 0; n < dim; ++n) lam[n] = std::pow(0.5, n);
    lam /= lam.sum();
    GammaTriple g;
    g.gamma0 = fock::make_operator(Eigen::MatrixXd(lam.asDiagonal()), true);
    g.gamma1 = fock::make_operator(Eigen::MatrixXd((0.7 * lam).asDiagonal()), true);
    g.gamma2_trace = 2.0;
    const auto sol = personick::solve_estimator(g);
    Eigen::MatrixXd expect = 0.7 * Eigen::MatrixXd::Identity(dim, dim);
    CHECK((sol.B.entries - expect).cwiseAbs().maxCoeff() < 1e-12);
    CHECK(sol.mmse == Catch::Approx(2.0 - 0.7 * g.gamma1.entries.trace()).epsilon(1e-12));
    CHECK(sol.diag.regularized_pairs == 0);
    CHECK(sol.diag.lyapunov_residual <= 1e-14);
}

TEST_CASE("single-source anchors") {
    // delta = sigma^2/(1+2 sigma^2), tr(B Gamma_1) = 2 sigma^4/(1+2 sigma^2)
    struct Case {
        double sigma;
        int cutoff;
    };
    for (const auto& tc : {Case{0.5, 16}, Case{1.0, 26}}) {
        const auto g = personick::build_gamma_single_source(tc.sigma, tc.cutoff);
        const auto sol = personick::solve_estimator(g);
        const double s2 = tc.sigma * tc.sigma;
        INFO("sigma = " << tc.sigma);
        CHECK(sol.mmse == Catch::Approx(s2 / (1.0 + 2.0 * s2)).margin(1e-6));
        CHECK(sol.trace_B_gamma1 == Catch::Approx(2.0 * s2 * s2 / (1.0 + 2.0 * s2)).margin(1e-6));
        CHECK(sol.diag.lyapunov_residual <= 1e-9);
        CHECK(sol.mmse >= 0.0);
        CHECK(sol.mmse <= g.gamma2_trace);
    }
}

TEST_CASE("optimal estimator is the position operator in the squeezed frame") {
    const int cutoff = 30;
    const auto g = personick::build_gamma_single_source(1.0, cutoff);
    const auto sol = personick::solve_estimator(g);
    const auto sp = fock::squeeze_params(1.0);

    const int big = static_cast<int>(std::ceil((cutoff + 1) * std::exp(2.0 * sp.r))) + 16;
    Eigen::MatrixXd Bpad = Eigen::MatrixXd::Zero(big, big);
    Bpad.topLeftCorner(cutoff + 1, cutoff + 1) = sol.B.entries;
    const auto U = fock::squeeze_matrix(sp.r, big - 1);
    Eigen::MatrixXd Bt = U.entries.transpose() * Bpad * U.entries;

    const double c = std::sqrt(2.0) / std::pow(3.0, 0.75);  // sqrt(2) sigma^2 / (2 sigma^2 + 1)^{3/4}
    for (int n = 0; n <= 8; ++n) {
        CHECK(Bt(n, n) == Catch::Approx(0.0).margin(1e-6));
        CHECK(Bt(n, n + 1) == Catch::Approx(c * std::sqrt(n + 1.0)).margin(1e-6));
        if (n + 2 <= 8) CHECK(Bt(n, n + 2) == Catch::Approx(0.0).margin(1e-6));
    }
}

TEST_CASE("two-source solve matches the closed-form series") {
    const auto g = half_gaussian_triple(1.0, 30);
    const auto sol = personick::solve_estimator(g);
    const double series = personick::mmse_half_gaussian_series(1.0, 30);
    CHECK(sol.mmse == Catch::Approx(series).margin(1e-7));
    CHECK(sol.diag.lyapunov_residual <= 1e-9);
    CHECK(sol.diag.dropped_pairs == 0);

    // the risk from the real-space trace equals the eigenbasis route
    const auto probe = personick::solve_estimator(g, 1e-13, false);
    CHECK(std::abs(sol.mmse - probe.mmse) <= 1e-10);
    CHECK(sol.mmse == Catch::Approx(g.gamma2_trace - sol.trace_B_gamma1));

    // B inherits the even-parity block structure
    for (int n = 0; n <= 30; ++n)
        for (int m = 0; m <= 30; ++m)
            if ((n + m) % 2 == 1) CHECK(std::abs(sol.B.entries(n, m)) <= 1e-9);
}

TEST_CASE("closed-form series behaviour") {
    // vanishing-width prior carries no information: mmse -> prior variance
    const double tiny = personick::mmse_half_gaussian_series(0.01, 16);
    CHECK(tiny == Catch::Approx(1e-4 * (1.0 - 2.0 / M_PI)).epsilon(0.02));

    const double s1 = personick::mmse_half_gaussian_series(1.0, 30);
    CHECK(s1 > 0.0);
    CHECK(s1 < 0.1962884513281732);  // below the photon-counting risk

    // cutoff convergence: the partial sums are monotone, mmse non-increasing
    const double c20 = personick::mmse_half_gaussian_series(1.0, 20);
    const double c40 = personick::mmse_half_gaussian_series(1.0, 40);
    CHECK(c20 >= c40 - 1e-15);
    CHECK(std::abs(c40 - c20) <= 1e-8);
}

TEST_CASE("mmse is invariant under squeezing the frame") {
    const auto g = personick::build_gamma_single_source(1.0, 26);
    const auto [b0, a0] = personick::unitary_invariance_check(g, 0.0);
    CHECK(b0 == a0);

    const auto [before, after] = personick::unitary_invariance_check(g, 0.3);
    CHECK(before == Catch::Approx(1.0 / 3.0).margin(1e-6));
    CHECK(std::abs(after - before) <= 1e-7);

    const auto gh = half_gaussian_triple(1.0, 26);
    const auto [hb, ha] = personick::unitary_invariance_check(gh, 0.3);
    CHECK(std::abs(ha - hb) <= 1e-7);

    CHECK_THROWS_AS(personick::unitary_invariance_check(g, 1.5), std::invalid_argument);
}

TEST_CASE("auto cutoff converges and stays modest") {
    const auto res = personick::auto_cutoff(FullGaussianPrior(1.0));
    CHECK(res.converged);
    CHECK_FALSE(res.capped);
    CHECK(res.cutoff <= 64);
    CHECK(res.solution.mmse == Catch::Approx(1.0 / 3.0).margin(1e-6));

    const auto hg = personick::auto_cutoff(HalfGaussianPrior(0.5));
    CHECK(hg.converged);
    CHECK(hg.cutoff <= 64);
    CHECK(hg.solution.mmse == Catch::Approx(personick::mmse_half_gaussian_series(0.5, 40)).margin(1e-6));
}

TEST_CASE("solve rejects unnormalized states") {
    auto g = half_gaussian_triple(1.0, 20);
    g.gamma0.entries *= 3.0;
    CHECK_THROWS_AS(personick::solve_estimator(g), std::invalid_argument);
}
