// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "qsep/measurements.hpp"
#include "qsep/personick.hpp"
#include "qsep/priors.hpp"
#include "qsep/sweep.hpp"

namespace qsep {
namespace validation {

/// Every threshold the acceptance suite asserts, pinned in one place.
struct Tolerances {
    double single_source_anchor = 1e-6;
    double gamma2_quadrature = 1e-10;
    double pnr_agreement = 1e-8;
    double ordering_slack = 1e-8;
    double gamma_agreement = 1e-8;
    double parity_numeric = 1e-12;
    double lyapunov = 1e-9;
    int drop_free_cutoff = 40;
    double drop_free_sigma = 3.0;
    double invariance = 1e-7;
    double cutoff_rel_change = 1e-6;
    int cutoff_bound = 64;
    double crossing_lo = 0.8;
    double crossing_hi = 1.4;
    double spade_near_optimal_rel = 0.10;
    double collapse_rel = 0.05;
    double mc_sigma_band = 3.0;
    std::int64_t mc_samples = 1000000;
};

struct CheckResult {
    int id = 0;
    std::string name;
    bool passed = false;
    std::string detail;
};

namespace detail {

struct Ctx {
    Tolerances tol;
    std::uint64_t seed = 1234567;

    std::optional<std::vector<sweep::SweepRow>> fig1, fig2, fig2b, fig3;

    struct SolveRecord {
        double sigma_internal;
        int cutoff;
        int dropped;
        int regularized;
        double lyapunov;
    };
    std::optional<std::vector<SolveRecord>> solves;

    static sweep::SweepConfig base_config(sweep::SweepMode mode, double fixed, double lo, double hi, int n) {
        sweep::SweepConfig cfg;
        cfg.mode = mode;
        cfg.fixed_value = fixed;
        cfg.grid = {lo, hi, n, false};
        cfg.max_cutoff = 64;
        return cfg;
    }

    const std::vector<sweep::SweepRow>& rows_fig1() {
        if (!fig1) fig1 = sweep::run_sweep(base_config(sweep::SweepMode::fig1, 0.0, 0.1, 3.0, 20));
        return *fig1;
    }
    const std::vector<sweep::SweepRow>& rows_fig2() {
        if (!fig2) fig2 = sweep::run_sweep(base_config(sweep::SweepMode::fig2_fixed_mean, 2.0, 0.2, 1.4, 19));
        return *fig2;
    }
    const std::vector<sweep::SweepRow>& rows_fig2b() {
        if (!fig2b) fig2b = sweep::run_sweep(base_config(sweep::SweepMode::fig2_fixed_mean, 1.0, 0.05, 0.2, 5));
        return *fig2b;
    }
    const std::vector<sweep::SweepRow>& rows_fig3() {
        if (!fig3) fig3 = sweep::run_sweep(base_config(sweep::SweepMode::fig3_fixed_variance, 0.05, 0.3, 5.0, 15));
        return *fig3;
    }

    const std::vector<SolveRecord>& solve_records() {
        if (solves) return *solves;
        std::vector<SolveRecord> recs;
        auto add = [&recs](const Prior& prior, double sigma_internal) {
            const auto res = personick::auto_cutoff(prior, {}, 1e-6, 64);
            recs.push_back({sigma_internal, res.cutoff, res.solution.diag.dropped_pairs,
                            res.solution.diag.regularized_pairs, res.solution.diag.lyapunov_residual});
        };
        for (double s : {0.5, 1.0, 2.0}) add(HalfGaussianPrior(s), s);
        for (double st2 : {0.2, 0.5, 0.8, 1.1, 1.4}) {
            const auto p = invert_moments(2.0, st2);
            add(p, p.sigma);
        }
        for (double st2 : {0.05, 0.2}) {
            const auto p = invert_moments(1.0, st2);
            add(p, p.sigma);
        }
        for (double mt : {0.3, 0.6, 1.2, 2.5, 5.0}) {
            const auto p = invert_moments(mt, 0.05);
            add(p, p.sigma);
        }
        solves = std::move(recs);
        return *solves;
    }
};

inline std::string fmt(double v) {
    std::ostringstream os;
    os.precision(3);
    os << v;
    return os.str();
}

inline CheckResult check_single_source(Ctx& ctx) {
    double worst_mmse = 0.0, worst_tr = 0.0;
    for (double sigma : {0.1, 0.5, 1.0, 2.0, 5.0}) {
        const auto res = personick::auto_cutoff(FullGaussianPrior(sigma), {}, 1e-6, 2048);
        const double s2 = sigma * sigma;
        worst_mmse = std::max(worst_mmse, std::abs(res.solution.mmse - s2 / (1.0 + 2.0 * s2)));
        worst_tr = std::max(worst_tr, std::abs(res.solution.trace_B_gamma1 - 2.0 * s2 * s2 / (1.0 + 2.0 * s2)));
    }
    const bool ok = worst_mmse <= ctx.tol.single_source_anchor && worst_tr <= ctx.tol.single_source_anchor;
    return {1, "single-source mmse anchor", ok,
            "max|mmse err|=" + fmt(worst_mmse) + " max|trBG1 err|=" + fmt(worst_tr) + " tol=" +
                fmt(ctx.tol.single_source_anchor)};
}

inline CheckResult check_gamma2(Ctx& ctx) {
    double worst = 0.0;
    bool closed_exact = true;
    for (int i = 0; i < 15; ++i) {
        const double sigma = 0.1 + (3.0 - 0.1) * i / 14.0;
        const HalfGaussianPrior p(sigma);
        if (p.moments().second_moment != sigma * sigma) closed_exact = false;
        QuadratureSpec spec;
        spec.domain_cut = support_cut(Prior(p));
        spec.rel_tol = 1e-13;
        const double quad = integrate_half_line([&](double q) { return q * q * p.pdf(q); }, spec).value;
        worst = std::max(worst, std::abs(quad - sigma * sigma));
    }
    const bool ok = closed_exact && worst <= ctx.tol.gamma2_quadrature;
    return {2, "half-Gaussian trGamma2 anchor", ok,
            std::string("closed path exact=") + (closed_exact ? "yes" : "NO") + " max|quad err|=" + fmt(worst)};
}

inline CheckResult check_pnr_closed_form(Ctx& ctx) {
    double worst = 0.0;
    for (int i = 0; i < 20; ++i) {
        const double sigma = 0.1 + (3.0 - 0.1) * i / 19.0;
        const auto r = measurements::mse_pnr(HalfGaussianPrior(sigma));
        worst = std::max(worst, std::abs(r.mse - measurements::mse_pnr_closed_form(sigma)));
    }
    const double anchor = std::abs(measurements::mse_pnr_closed_form(1.0) - 0.1962884513281732);
    const bool ok = worst <= ctx.tol.pnr_agreement && anchor <= 1e-12;
    return {3, "photon-counting closed form", ok,
            "max|quad-closed|=" + fmt(worst) + " sigma=1 anchor err=" + fmt(anchor)};
}

inline CheckResult check_ordering(Ctx& ctx) {
    double worst = -1e300;
    int rows = 0, errors = 0;
    for (const auto* grid : {&ctx.rows_fig1(), &ctx.rows_fig2(), &ctx.rows_fig2b(), &ctx.rows_fig3()}) {
        for (const auto& r : *grid) {
            if (!r.error.empty()) {
                ++errors;
                continue;
            }
            ++rows;
            worst = std::max({worst, r.mmse - r.mse_spade, r.mmse - r.mse_di});
        }
    }
    const bool ok = errors == 0 && worst <= ctx.tol.ordering_slack;
    return {4, "mmse lower-bounds both measurements", ok,
            "rows=" + std::to_string(rows) + " max(mmse-mse)=" + fmt(worst) + " error rows=" +
                std::to_string(errors)};
}

inline CheckResult check_gamma_agreement(Ctx& ctx) {
    const int cutoff = 30;
    double worst0 = 0.0, worst1 = 0.0;
    for (double sigma : {0.5, 1.0, 2.0}) {
        const auto numeric = personick::build_gamma_numeric(HalfGaussianPrior(sigma), cutoff);
        const auto analytic = personick::build_gamma0_analytic(sigma, cutoff);
        worst0 = std::max(worst0, (numeric.gamma0.entries - analytic.entries).cwiseAbs().maxCoeff());

        const auto sp = fock::squeeze_params(sigma);
        const int big = static_cast<int>(std::ceil((cutoff + 1) * std::exp(2.0 * sp.r))) + 24;
        const auto gbig = personick::build_gamma_numeric(HalfGaussianPrior(sigma), big - 1);
        const auto U = fock::squeeze_matrix(sp.r, big - 1);
        const Eigen::MatrixXd conj =
            (U.entries.transpose() * gbig.gamma1.entries * U.entries).topLeftCorner(cutoff + 1, cutoff + 1);
        const auto M = personick::gamma1_squeezed_frame_analytic(sigma, cutoff);
        worst1 = std::max(worst1, (conj - M).cwiseAbs().maxCoeff());
    }
    const bool ok = worst0 <= ctx.tol.gamma_agreement && worst1 <= ctx.tol.gamma_agreement;
    return {5, "analytic vs numeric Gamma agreement", ok,
            "max|dGamma0|=" + fmt(worst0) + " max|dGamma1|=" + fmt(worst1) + " tol=" + fmt(ctx.tol.gamma_agreement)};
}

inline CheckResult check_parity(Ctx& ctx) {
    const int cutoff = 30;
    bool analytic_exact = true;
    double worst_numeric = 0.0;
    const auto M = personick::gamma1_squeezed_frame_analytic(1.0, cutoff);
    const auto g = personick::build_gamma_numeric(HalfGaussianPrior(1.0), cutoff);
    for (int n = 0; n <= cutoff; ++n) {
        for (int m = 0; m <= cutoff; ++m) {
            if ((n + m) % 2 == 0) continue;
            if (M(n, m) != 0.0) analytic_exact = false;
            worst_numeric = std::max({worst_numeric, std::abs(g.gamma0.entries(n, m)),
                                      std::abs(g.gamma1.entries(n, m))});
        }
    }
    const bool ok = analytic_exact && worst_numeric <= ctx.tol.parity_numeric;
    return {6, "odd-parity elements vanish", ok,
            std::string("analytic zeros exact=") + (analytic_exact ? "yes" : "NO") + " numeric max=" +
                fmt(worst_numeric)};
}

inline CheckResult check_lyapunov(Ctx& ctx) {
    double worst_resid = 0.0;
    int dropped_in_scope = 0, n_dropfree = 0, in_scope = 0;
    for (const auto& rec : ctx.solve_records()) {
        if (rec.dropped == 0) {
            ++n_dropfree;
            worst_resid = std::max(worst_resid, rec.lyapunov);
        }
        if (rec.cutoff <= ctx.tol.drop_free_cutoff && rec.sigma_internal <= ctx.tol.drop_free_sigma) {
            ++in_scope;
            dropped_in_scope += rec.dropped;
        }
    }
    const bool ok = worst_resid <= ctx.tol.lyapunov && dropped_in_scope == 0;
    return {7, "lyapunov residual and drop-free regime", ok,
            "max resid (drop-free)=" + fmt(worst_resid) + " over " + std::to_string(n_dropfree) +
                " solves; info-bearing drops in cutoff<=" + std::to_string(ctx.tol.drop_free_cutoff) +
                ",sigma<=" + fmt(ctx.tol.drop_free_sigma) + ": " + std::to_string(dropped_in_scope) + "/" +
                std::to_string(in_scope) + " solves"};
}

inline CheckResult check_invariance(Ctx& ctx) {
    double worst = 0.0;
    {
        const auto g = personick::build_gamma_single_source(1.0, 26);
        const auto [b, a] = personick::unitary_invariance_check(g, 0.3);
        worst = std::max(worst, std::abs(a - b));
    }
    {
        const auto g = personick::build_gamma_numeric(HalfGaussianPrior(1.0), 26);
        const auto [b, a] = personick::unitary_invariance_check(g, 0.3);
        worst = std::max(worst, std::abs(a - b));
    }
    {
        const auto p = invert_moments(1.0, 0.2);
        const auto g = personick::build_gamma_numeric(p, 26);
        const auto [b, a] = personick::unitary_invariance_check(g, 0.3);
        worst = std::max(worst, std::abs(a - b));
    }
    const bool ok = worst <= ctx.tol.invariance;
    return {8, "mmse invariant under squeezed-frame rotation", ok,
            "max|delta change|=" + fmt(worst) + " tol=" + fmt(ctx.tol.invariance)};
}

inline CheckResult check_cutoff_convergence(Ctx& ctx) {
    int worst_cutoff = 0;
    bool any_capped = false;
    for (const auto* grid : {&ctx.rows_fig1(), &ctx.rows_fig2(), &ctx.rows_fig2b(), &ctx.rows_fig3()}) {
        for (const auto& r : *grid) {
            if (!r.error.empty()) continue;
            worst_cutoff = std::max(worst_cutoff, r.cutoff_used);
            if (r.quadrature_flags.find("cutoff_capped") != std::string::npos) any_capped = true;
        }
    }
    // direct doubling re-check at one point per numeric grid
    double worst_change = 0.0;
    for (const auto& p : {invert_moments(2.0, 1.4), invert_moments(5.0, 0.05)}) {
        const auto res = personick::auto_cutoff(p, {}, 1e-6, 64);
        const double m2c =
            personick::solve_estimator(personick::build_gamma_numeric(p, 2 * res.cutoff), 1e-13, false).mmse;
        worst_change =
            std::max(worst_change, std::abs(m2c - res.solution.mmse) / std::max(std::abs(m2c), 1e-30));
    }
    const bool ok = !any_capped && worst_cutoff <= ctx.tol.cutoff_bound &&
                    worst_change < ctx.tol.cutoff_rel_change;
    return {9, "auto cutoff converges within bound", ok,
            "max cutoff=" + std::to_string(worst_cutoff) + " capped=" + (any_capped ? "yes" : "no") +
                " max doubling change=" + fmt(worst_change)};
}

inline CheckResult check_crossing(Ctx& ctx) {
    // ratio of DI to SPADE risks crosses 1 inside the window at mu_t = 2
    bool crossed = false;
    double at = 0.0;
    const auto& rows = ctx.rows_fig2();
    for (std::size_t i = 1; i < rows.size(); ++i) {
        if (!rows[i - 1].error.empty() || !rows[i].error.empty()) continue;
        const double a = rows[i - 1].ratio_di_over_spade - 1.0;
        const double b = rows[i].ratio_di_over_spade - 1.0;
        const double lo = rows[i - 1].grid_value, hi = rows[i].grid_value;
        if (a <= 0.0 && b >= 0.0 && hi >= ctx.tol.crossing_lo && lo <= ctx.tol.crossing_hi) {
            crossed = true;
            at = lo + (hi - lo) * (-a) / (b - a);
            break;
        }
    }
    // near the optimum at small mean and variance, photon counting is close
    // to the mmse
    double worst_gap = 0.0;
    for (const auto& r : ctx.rows_fig2b()) {
        if (!r.error.empty()) continue;
        worst_gap = std::max(worst_gap, (r.mse_spade - r.mmse) / r.mmse);
    }
    const bool ok = crossed && worst_gap <= ctx.tol.spade_near_optimal_rel;
    return {10, "DI/SPADE ratio crossing and near-optimal SPADE", ok,
            std::string("crossing=") + (crossed ? fmt(at) : "none") + " max SPADE gap=" + fmt(worst_gap) +
                " (tol " + fmt(ctx.tol.spade_near_optimal_rel) + ")"};
}

inline CheckResult check_collapse(Ctx& ctx) {
    const auto& rows = ctx.rows_fig3();
    const auto& last = rows.back();  // mu_t = 5
    double spread = 1e300;
    bool ok = false;
    if (last.error.empty()) {
        const double lo = std::min({last.mmse, last.mse_spade, last.mse_di});
        const double hi = std::max({last.mmse, last.mse_spade, last.mse_di});
        spread = (hi - lo) / lo;
        ok = spread <= ctx.tol.collapse_rel;
    }
    return {11, "large-mean collapse of all risks", ok,
            "relative spread at mu_t=5: " + fmt(spread) + " (tol " + fmt(ctx.tol.collapse_rel) + ")"};
}

inline CheckResult check_monte_carlo(Ctx& ctx) {
    double worst_sigmas = 0.0;
    const Prior priors[2] = {HalfGaussianPrior(1.0), invert_moments(1.0, 0.2)};
    int idx = 0;
    for (const auto& prior : priors) {
        const double quad_pnr = measurements::mse_pnr(prior).mse;
        const double quad_hom = measurements::mse_homodyne(prior).mse;
        const auto mc_pnr = measurements::mc_mse(measurements::Measurement::pnr, prior, ctx.tol.mc_samples,
                                                 ctx.seed + 2 * idx);
        const auto mc_hom = measurements::mc_mse(measurements::Measurement::homodyne, prior,
                                                 ctx.tol.mc_samples, ctx.seed + 2 * idx + 1);
        worst_sigmas = std::max(worst_sigmas, std::abs(mc_pnr.estimate - quad_pnr) / mc_pnr.std_error);
        worst_sigmas = std::max(worst_sigmas, std::abs(mc_hom.estimate - quad_hom) / mc_hom.std_error);
        ++idx;
    }
    const bool ok = worst_sigmas <= ctx.tol.mc_sigma_band;
    return {12, "Monte Carlo agrees with quadrature", ok,
            "max |mc-quad|/se=" + fmt(worst_sigmas) + " (band " + fmt(ctx.tol.mc_sigma_band) + ")"};
}

}  // namespace detail

/// Run the acceptance checks (all of them, or the subset given by `only`).
/// Deterministic for a fixed seed.
inline std::vector<CheckResult> run_acceptance(const Tolerances& tol = {}, std::uint64_t seed = 1234567,
                                               const std::set<int>& only = {}) {
    detail::Ctx ctx;
    ctx.tol = tol;
    ctx.seed = seed;
    std::vector<CheckResult> out;
    auto want = [&](int id) { return only.empty() || only.count(id) > 0; };
    if (want(1)) out.push_back(detail::check_single_source(ctx));
    if (want(2)) out.push_back(detail::check_gamma2(ctx));
    if (want(3)) out.push_back(detail::check_pnr_closed_form(ctx));
    if (want(4)) out.push_back(detail::check_ordering(ctx));
    if (want(5)) out.push_back(detail::check_gamma_agreement(ctx));
    if (want(6)) out.push_back(detail::check_parity(ctx));
    if (want(7)) out.push_back(detail::check_lyapunov(ctx));
    if (want(8)) out.push_back(detail::check_invariance(ctx));
    if (want(9)) out.push_back(detail::check_cutoff_convergence(ctx));
    if (want(10)) out.push_back(detail::check_crossing(ctx));
    if (want(11)) out.push_back(detail::check_collapse(ctx));
    if (want(12)) out.push_back(detail::check_monte_carlo(ctx));
    return out;
}

}  // namespace validation
}  // namespace qsep
