// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <stdexcept>
#include <vector>

#include "qsep/priors.hpp"
#include "qsep/quadrature.hpp"

namespace qsep {
namespace measurements {

// Likelihoods for the single detected photon of the symmetric two-source
// state: photon counting sees Poisson(q^2/2); position homodyne sees the
// two-Gaussian mixture.

inline double pnr_likelihood(int k, double q_alpha) {
    const double lam = 0.5 * q_alpha * q_alpha;
    if (lam == 0.0) return k == 0 ? 1.0 : 0.0;
    return std::exp(-lam + k * std::log(lam) - std::lgamma(k + 1.0));
}

inline double homodyne_likelihood(double q, double q_alpha) {
    const double dm = q - q_alpha, dp = q + q_alpha;
    return (std::exp(-dm * dm) + std::exp(-dp * dp)) / (2.0 * std::sqrt(M_PI));
}

struct PnrResult {
    double mse = 0.0;
    int k_max = 0;
    double tail_mass = 0.0;
};

namespace detail {

struct Grid {
    std::vector<double> q, w;
};

inline Grid half_line_grid(double L, int panels, int order) {
    const auto& [x, wts] = gauss_legendre(order);
    Grid g;
    g.q.reserve(panels * order);
    g.w.reserve(panels * order);
    const double h = L / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = (p + 0.5) * h, half = 0.5 * h;
        for (std::size_t i = 0; i < x.size(); ++i) {
            g.q.push_back(mid + half * x[i]);
            g.w.push_back(half * wts[i]);
        }
    }
    return g;
}

/// One PNR risk evaluation on a fixed grid: returns sum_k N_k^2/D_k together
/// with the covered outcome mass sum_k D_k.
inline void pnr_pass(const Prior& prior, const Grid& g, int k_max, double& gain, double& coverage,
                     std::vector<double>* posterior_means) {
    const std::size_t n = g.q.size();
    std::vector<double> wp(n), pmf(n);
    for (std::size_t i = 0; i < n; ++i) {
        wp[i] = g.w[i] * pdf(prior, g.q[i]);
        pmf[i] = std::exp(-0.5 * g.q[i] * g.q[i]);  // k = 0
    }
    gain = 0.0;
    coverage = 0.0;
    for (int k = 0; k <= k_max; ++k) {
        double D = 0.0, N = 0.0;
        for (std::size_t i = 0; i < n; ++i) {
            const double c = wp[i] * pmf[i];
            D += c;
            N += c * g.q[i];
        }
        coverage += D;
        if (D > 1e-280) gain += N * N / D;
        if (posterior_means) posterior_means->push_back(D > 1e-280 ? N / D : moments(prior).mean);
        for (std::size_t i = 0; i < n; ++i) pmf[i] *= 0.5 * g.q[i] * g.q[i] / (k + 1);
    }
}

inline int pnr_auto_k_max(const Prior& prior, double L, int order) {
    const Grid g = half_line_grid(L, std::max(16, static_cast<int>(std::ceil(L))), order);
    std::vector<double> wp(g.q.size()), pmf(g.q.size());
    for (std::size_t i = 0; i < g.q.size(); ++i) {
        wp[i] = g.w[i] * pdf(prior, g.q[i]);
        pmf[i] = std::exp(-0.5 * g.q[i] * g.q[i]);
    }
    // smallest k with prior-averaged tail below 1e-10, then extended until the
    // q^2-weighted tail (what the truncated risk sum actually misses) is also
    // below 1e-10
    double coverage = 0.0;
    for (int k = 0; k <= 8192; ++k) {
        double D = 0.0;
        for (std::size_t i = 0; i < g.q.size(); ++i) D += wp[i] * pmf[i];
        coverage += D;
        const double tail = 1.0 - coverage;
        if (tail < 1e-10 && tail * 2.0 * (k + 1) < 1e-10) return k;
        for (std::size_t i = 0; i < g.q.size(); ++i) pmf[i] *= 0.5 * g.q[i] * g.q[i] / (k + 1);
    }
    throw ConvergenceError("mse_pnr: outcome tail does not close below 1e-10 within k = 8192", coverage, 0.0);
}

}  // namespace detail

/// Bayes risk of photon counting with the posterior-mean estimator,
///   mse = m2 - sum_k N_k^2 / D_k,
/// panel-doubled until stable. k_max = 0 selects the smallest cutoff with
/// prior-averaged outcome tail below 1e-10; an explicit k_max whose tail
/// exceeds 1e-8 is an error (the truncated sum would not be trustworthy).
inline PnrResult mse_pnr(const Prior& prior, int k_max = 0, const QuadratureSpec& spec = {}) {
    if (!is_half_line(prior)) throw std::invalid_argument("mse_pnr: prior must live on q >= 0");
    spec.validate();
    const double L = spec.domain_cut > 0.0 ? spec.domain_cut : support_cut(prior);
    const int order = spec.nodes_per_panel;
    const int km = (k_max > 0) ? k_max : detail::pnr_auto_k_max(prior, L, order);
    const double m2 = moments(prior).second_moment;

    int panels = std::max(16, static_cast<int>(std::ceil(L / 1.5)));
    double gain = 0.0, coverage = 0.0;
    detail::pnr_pass(prior, detail::half_line_grid(L, panels, order), km, gain, coverage, nullptr);
    const double tol = std::max(spec.rel_tol, 1e-12);
    while (2 * panels <= spec.max_panels) {
        double gain2 = 0.0, cov2 = 0.0;
        detail::pnr_pass(prior, detail::half_line_grid(L, 2 * panels, order), km, gain2, cov2, nullptr);
        const double change = std::abs(gain2 - gain);
        gain = gain2;
        coverage = cov2;
        panels *= 2;
        if (change <= tol * std::max(m2, 1.0)) break;
    }
    const double tail = 1.0 - coverage;
    if (k_max > 0 && tail > 1e-8) {
        throw ConvergenceError(
            "mse_pnr: outcome tail mass above 1e-8 at the requested k_max; increase k_max", m2 - gain, tail);
    }
    return {m2 - gain, km, tail};
}

/// Closed-form PNR risk for the half-Gaussian prior:
///   sigma^2 - (2 sigma^2 / (pi sqrt(sigma^2+1))) [sigma asin(sigma/sqrt(sigma^2+1)) + 1].
inline double mse_pnr_closed_form(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("mse_pnr_closed_form: sigma must be positive");
    const double s2 = sigma * sigma;
    const double root = std::sqrt(s2 + 1.0);
    return s2 - (2.0 * s2 / (M_PI * root)) * (sigma * std::asin(sigma / root) + 1.0);
}

struct PosteriorMean {
    double value = 0.0;
    bool degenerate = false;  // marginal likelihood numerically zero; prior mean returned
};

/// Posterior mean of the separation given k detected photons.
inline PosteriorMean posterior_mean_pnr(int k, const Prior& prior, const QuadratureSpec& spec = {}) {
    if (k < 0) throw std::invalid_argument("posterior_mean_pnr: k must be >= 0");
    if (!is_half_line(prior)) throw std::invalid_argument("posterior_mean_pnr: prior must live on q >= 0");
    const double L = spec.domain_cut > 0.0 ? spec.domain_cut : support_cut(prior);
    QuadratureSpec s = spec;
    s.domain_cut = L;
    const double D = integrate([&](double q) { return pdf(prior, q) * pnr_likelihood(k, q); }, 0.0, L, s).value;
    if (D <= 1e-280) return {moments(prior).mean, true};
    const double N =
        integrate([&](double q) { return pdf(prior, q) * pnr_likelihood(k, q) * q; }, 0.0, L, s).value;
    return {N / D, false};
}

/// Posterior mean of the separation given homodyne outcome q. Even in q by
/// construction (the likelihood only depends on |q|).
inline PosteriorMean posterior_mean_homodyne(double q, const Prior& prior, const QuadratureSpec& spec = {}) {
    if (!std::isfinite(q)) throw std::invalid_argument("posterior_mean_homodyne: q must be finite");
    if (!is_half_line(prior)) throw std::invalid_argument("posterior_mean_homodyne: prior must live on q >= 0");
    const double aq = std::abs(q);
    const double L = spec.domain_cut > 0.0 ? spec.domain_cut : support_cut(prior);
    QuadratureSpec s = spec;
    s.domain_cut = L;
    const double D =
        integrate([&](double qa) { return pdf(prior, qa) * homodyne_likelihood(aq, qa); }, 0.0, L, s).value;
    if (D <= 1e-280) return {moments(prior).mean, true};
    const double N =
        integrate([&](double qa) { return pdf(prior, qa) * homodyne_likelihood(aq, qa) * qa; }, 0.0, L, s)
            .value;
    return {N / D, false};
}

struct HomodyneResult {
    double mse = 0.0;
    int outer_panels = 0;
    int inner_panels = 0;
};

/// Bayes risk of position homodyne with the posterior-mean estimator,
///   mse = m2 - 2 int_0^inf N(q)^2 / D(q) dq
/// (outer integral folded onto q >= 0 by evenness). The inner posterior
/// integrals are evaluated on a shared source grid; both grids are refined
/// together until the risk is stable.
inline HomodyneResult mse_homodyne(const Prior& prior, const QuadratureSpec& spec = {}) {
    if (!is_half_line(prior)) throw std::invalid_argument("mse_homodyne: prior must live on q >= 0");
    spec.validate();
    const double L = spec.domain_cut > 0.0 ? spec.domain_cut : support_cut(prior);
    const double Lq = L + 8.0;
    const int order = spec.nodes_per_panel;
    const double m2 = moments(prior).second_moment;

    auto evaluate = [&](int inner_panels, int outer_panels) {
        const detail::Grid src = detail::half_line_grid(L, inner_panels, order);
        std::vector<double> wp(src.q.size());
        for (std::size_t i = 0; i < src.q.size(); ++i) wp[i] = src.w[i] * pdf(prior, src.q[i]);
        const detail::Grid out = detail::half_line_grid(Lq, outer_panels, order);
        double gain = 0.0;
        for (std::size_t j = 0; j < out.q.size(); ++j) {
            double D = 0.0, N = 0.0;
            for (std::size_t i = 0; i < src.q.size(); ++i) {
                const double c = wp[i] * homodyne_likelihood(out.q[j], src.q[i]);
                D += c;
                N += c * src.q[i];
            }
            if (D > 1e-280) gain += out.w[j] * N * N / D;
        }
        return 2.0 * gain;
    };

    int inner = std::max(16, static_cast<int>(std::ceil(L / 1.5)));
    int outer = std::max(16, static_cast<int>(std::ceil(Lq / 1.5)));
    double gain = evaluate(inner, outer);
    const double tol = std::max(spec.rel_tol, 1e-12);
    bool converged = false;
    while (4 * inner * outer <= spec.max_panels * 64) {
        const double gain2 = evaluate(2 * inner, 2 * outer);
        const double change = std::abs(gain2 - gain);
        gain = gain2;
        inner *= 2;
        outer *= 2;
        if (change <= tol * std::max(m2, 1.0)) {
            converged = true;
            break;
        }
    }
    if (!converged)
        throw ConvergenceError("mse_homodyne: grid refinement did not stabilize the risk", m2 - gain, 0.0);
    return {m2 - gain, outer, inner};
}

enum class Measurement { pnr, homodyne };

struct McResult {
    double estimate = 0.0;
    double std_error = 0.0;
};

/// Seeded Monte Carlo estimate of the measurement risk: draw a separation
/// from the prior, an outcome from the likelihood, apply the posterior-mean
/// estimator, average the squared error. Estimators are tabulated once
/// (per outcome k for photon counting; dense grid with linear interpolation
/// for homodyne). Same seed, same result.
inline McResult mc_mse(Measurement kind, const Prior& prior, std::int64_t n_samples, std::uint64_t seed,
                       const QuadratureSpec& spec = {}) {
    if (n_samples < 10000) throw std::invalid_argument("mc_mse: n_samples must be >= 1e4");
    if (!is_half_line(prior)) throw std::invalid_argument("mc_mse: prior must live on q >= 0");
    const double L = spec.domain_cut > 0.0 ? spec.domain_cut : support_cut(prior);
    std::mt19937_64 gen(seed);

    std::vector<double> table;
    double grid_step = 0.0;
    if (kind == Measurement::pnr) {
        const int km = detail::pnr_auto_k_max(prior, L, spec.nodes_per_panel) + 16;
        double gain, cov;
        table.reserve(km + 1);
        detail::pnr_pass(prior, detail::half_line_grid(L, std::max(32, static_cast<int>(L) * 2), spec.nodes_per_panel),
                         km, gain, cov, &table);
    } else {
        const double Lq = L + 8.0;
        const int npt = 8192;
        grid_step = Lq / (npt - 1);
        table.resize(npt);
        const detail::Grid src = detail::half_line_grid(L, std::max(32, static_cast<int>(L) * 2), spec.nodes_per_panel);
        std::vector<double> wp(src.q.size());
        for (std::size_t i = 0; i < src.q.size(); ++i) wp[i] = src.w[i] * pdf(prior, src.q[i]);
        const double prior_mean = moments(prior).mean;
        for (int j = 0; j < npt; ++j) {
            const double q = j * grid_step;
            double D = 0.0, N = 0.0;
            for (std::size_t i = 0; i < src.q.size(); ++i) {
                const double c = wp[i] * homodyne_likelihood(q, src.q[i]);
                D += c;
                N += c * src.q[i];
            }
            table[j] = D > 1e-280 ? N / D : prior_mean;
        }
    }

    double sum = 0.0, sum_sq = 0.0;
    const double inv_sqrt2 = 1.0 / std::sqrt(2.0);
    for (std::int64_t i = 0; i < n_samples; ++i) {
        const double qa = sample(prior, gen);
        double est;
        if (kind == Measurement::pnr) {
            const std::uint64_t k = rng::poisson(0.5 * qa * qa, gen);
            est = k < table.size() ? table[k] : posterior_mean_pnr(static_cast<int>(k), prior, spec).value;
        } else {
            const double sign = rng::uniform01(gen) < 0.5 ? -1.0 : 1.0;
            const double q = std::abs(sign * qa + inv_sqrt2 * rng::normal(gen));
            const double pos = std::min(q / grid_step, static_cast<double>(table.size() - 1));
            const std::size_t j0 = static_cast<std::size_t>(pos);
            const std::size_t j1 = std::min(j0 + 1, table.size() - 1);
            const double frac = pos - static_cast<double>(j0);
            est = table[j0] * (1.0 - frac) + table[j1] * frac;
        }
        const double e = (est - qa) * (est - qa);
        sum += e;
        sum_sq += e * e;
    }
    const double mean = sum / n_samples;
    const double var = std::max(0.0, sum_sq / n_samples - mean * mean);
    return {mean, std::sqrt(var / n_samples)};
}

}  // namespace measurements
}  // namespace qsep
