// SPDX-License-Identifier: Apache-2.0
//
// qsep: Bayesian estimation risks for the separation of two weak incoherent
// point sources. Subcommands: point, sweep, validate.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <iostream>
#include <set>
#include <string>

#include "qsep/sweep.hpp"
#include "qsep/validation.hpp"
#include "qsep/version.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitNumeric = 2;
constexpr int kExitValidation = 3;

struct PriorArgs {
    std::string kind = "half-gaussian";
    double sigma = 0.0;
    double mu = 0.0;
    bool has_mu = false;
    double mu_t = 0.0;
    bool has_mu_t = false;
    double sigma_t2 = 0.0;
    bool has_sigma_t2 = false;
};

qsep::Prior make_prior(const PriorArgs& a) {
    if (a.kind == "half-gaussian") {
        return qsep::HalfGaussianPrior(a.sigma);
    }
    if (a.kind != "displaced") throw std::invalid_argument("prior must be half-gaussian or displaced");
    if (a.has_mu_t || a.has_sigma_t2) {
        if (!(a.has_mu_t && a.has_sigma_t2))
            throw std::invalid_argument("displaced prior by targets needs both --mu-t and --sigma-t2");
        return qsep::invert_moments(a.mu_t, a.sigma_t2);
    }
    if (!a.has_mu || !(a.sigma > 0.0))
        throw std::invalid_argument("displaced prior needs --mu and --sigma (or --mu-t and --sigma-t2)");
    return qsep::DisplacedHalfGaussianPrior(a.mu, a.sigma);
}

int parse_cutoff(const std::string& s) {
    if (s == "auto") return 0;
    const int c = std::stoi(s);
    if (c < 4) throw std::invalid_argument("--cutoff must be 'auto' or an integer >= 4");
    return c;
}

int cmd_point(const PriorArgs& pa, const std::string& cutoff_str, int k_max, int max_cutoff) {
    const qsep::Prior prior = make_prior(pa);
    const auto pm = qsep::moments(prior);
    const int cutoff = parse_cutoff(cutoff_str);

    double mmse = 0.0;
    int cutoff_used = 0, dropped = 0;
    std::string flags = "ok";
    if (std::holds_alternative<qsep::HalfGaussianPrior>(prior)) {
        const double sigma = std::get<qsep::HalfGaussianPrior>(prior).sigma;
        cutoff_used = cutoff > 0 ? cutoff : qsep::personick::series_cutoff(sigma, 1e-6, max_cutoff);
        mmse = qsep::personick::mmse_half_gaussian_series(sigma, cutoff_used);
        flags = "analytic_series";
    } else if (cutoff > 0) {
        const auto sol = qsep::personick::solve_estimator(qsep::personick::build_gamma_numeric(prior, cutoff));
        cutoff_used = cutoff;
        mmse = sol.mmse;
        dropped = sol.diag.dropped_pairs;
    } else {
        const auto res = qsep::personick::auto_cutoff(prior, {}, 1e-6, max_cutoff);
        cutoff_used = res.cutoff;
        mmse = res.solution.mmse;
        dropped = res.solution.diag.dropped_pairs;
        if (res.capped) flags = "cutoff_capped";
    }
    const double spade = qsep::measurements::mse_pnr(prior, k_max).mse;
    const double di = qsep::measurements::mse_homodyne(prior).mse;

    std::printf("mu_t               %.17g\n", pm.mean);
    std::printf("sigma_t2           %.17g\n", pm.variance);
    std::printf("cutoff_used        %d\n", cutoff_used);
    std::printf("mmse               %.17g\n", mmse);
    std::printf("mse_spade          %.17g\n", spade);
    std::printf("mse_di             %.17g\n", di);
    std::printf("ratio_di_spade     %.17g\n", di / spade);
    std::printf("dropped_eigenpairs %d\n", dropped);
    std::printf("flags              %s\n", flags.c_str());
    return kExitOk;
}

int cmd_sweep(qsep::sweep::SweepConfig cfg) {
    cfg.validate();
    if (cfg.out_path.empty()) throw std::invalid_argument("sweep needs --out PATH");
    const auto rows = qsep::sweep::run_sweep(cfg);
    qsep::sweep::write_csv_file(cfg.out_path, cfg, rows);
    int failed = 0;
    for (const auto& r : rows)
        if (!r.error.empty()) ++failed;
    std::fprintf(stderr, "qsep: wrote %zu rows (%d with errors) to %s\n", rows.size(), failed,
                 cfg.out_path.c_str());
    return kExitOk;
}

int cmd_validate(std::uint64_t seed, const std::vector<int>& only, bool corrupt) {
    qsep::validation::Tolerances tol;
    if (corrupt) tol.pnr_agreement = -1.0;  // test hook: impossible tolerance must fail
    const std::set<int> subset(only.begin(), only.end());
    const auto results = qsep::validation::run_acceptance(tol, seed, subset);
    nlohmann::json summary = nlohmann::json::array();
    int failures = 0;
    for (const auto& r : results) {
        std::printf("%s  %02d %-45s %s\n", r.passed ? "PASS" : "FAIL", r.id, r.name.c_str(), r.detail.c_str());
        summary.push_back({{"id", r.id}, {"name", r.name}, {"passed", r.passed}, {"detail", r.detail}});
        if (!r.passed) ++failures;
    }
    nlohmann::json report = {{"version", qsep::version},
                             {"seed", seed},
                             {"failures", failures},
                             {"checks", summary}};
    std::printf("%s\n", report.dump().c_str());
    return failures == 0 ? kExitOk : kExitValidation;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Bayesian risks for two-point-source separation estimation"};
    app.set_version_flag("--version", qsep::version);
    app.require_subcommand(1);

    PriorArgs pa;
    std::string cutoff_str = "auto";
    int k_max = 0;
    int max_cutoff = 64;

    auto* point = app.add_subcommand("point", "evaluate one prior configuration");
    point->add_option("--prior", pa.kind, "half-gaussian | displaced")->default_val("half-gaussian");
    point->add_option("--sigma", pa.sigma, "prior scale");
    auto* opt_mu = point->add_option("--mu", pa.mu, "displaced prior location");
    auto* opt_mut = point->add_option("--mu-t", pa.mu_t, "target mean (displaced)");
    auto* opt_st2 = point->add_option("--sigma-t2", pa.sigma_t2, "target variance (displaced)");
    point->add_option("--cutoff", cutoff_str, "auto | integer >= 4");
    point->add_option("--k-max", k_max, "photon-counting outcome cutoff (0 = auto)");
    point->add_option("--max-cutoff", max_cutoff, "cap for the auto cutoff");

    qsep::sweep::SweepConfig cfg;
    std::string mode_str, grid_str, config_path, sweep_cutoff;
    double fixed_mu_t = 0.0, fixed_sigma_t2 = 0.0, fixed_mu = 0.0;
    auto* sw = app.add_subcommand("sweep", "grid sweep, CSV output");
    auto* opt_cfgf = sw->add_option("--config", config_path, "key=value config file (flags override)");
    auto* opt_mode = sw->add_option("--mode", mode_str, "fig1 | fig2-fixed-mean | fig3-fixed-variance | custom");
    auto* opt_grid = sw->add_option("--grid", grid_str, "start:stop:count[:log|:linear]");
    auto* opt_fm = sw->add_option("--mu-t", fixed_mu_t, "fixed mean (fig2 mode)");
    auto* opt_fv = sw->add_option("--sigma-t2", fixed_sigma_t2, "fixed variance (fig3 mode)");
    auto* opt_fmu = sw->add_option("--mu", fixed_mu, "fixed location (custom mode)");
    sw->add_option("--out", cfg.out_path, "output CSV path");
    auto* opt_seed = sw->add_option("--seed", cfg.seed, "master seed for MC validation columns");
    auto* opt_mcn = sw->add_option("--mc-samples", cfg.mc_samples, "MC samples per row (0 = off)");
    auto* opt_cut = sw->add_option("--cutoff", sweep_cutoff, "auto | integer >= 4");
    auto* opt_maxc = sw->add_option("--max-cutoff", cfg.max_cutoff, "cap for the auto cutoff");
    auto* opt_km = sw->add_option("--k-max", cfg.k_max, "photon-counting outcome cutoff (0 = auto)");
    auto* opt_thr = sw->add_option("--threads", cfg.threads, "worker threads (0 = hardware)");

    std::uint64_t seed = 1234567;
    std::vector<int> only;
    bool corrupt = false;
    auto* val = app.add_subcommand("validate", "run the acceptance checks");
    val->add_option("--seed", seed, "Monte Carlo seed");
    val->add_option("--only", only, "run only these criterion numbers");
    val->add_flag("--corrupt-tolerance", corrupt, "self-test hook: inject an impossible tolerance")
        ->group("");  // hidden

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (point->parsed()) {
            pa.has_mu = opt_mu->count() > 0;
            pa.has_mu_t = opt_mut->count() > 0;
            pa.has_sigma_t2 = opt_st2->count() > 0;
            if (pa.kind == "half-gaussian" && pa.has_sigma_t2 && pa.has_mu_t) {
                // allow target parametrization to imply the displaced family
                pa.kind = "displaced";
            }
            return cmd_point(pa, cutoff_str, k_max, max_cutoff);
        }
        if (sw->parsed()) {
            if (opt_cfgf->count() > 0) {
                const auto file_cfg = qsep::sweep::parse_config_file(config_path);
                // flags override file values
                if (opt_seed->count() == 0) cfg.seed = file_cfg.seed;
                if (opt_mcn->count() == 0) cfg.mc_samples = file_cfg.mc_samples;
                if (opt_maxc->count() == 0) cfg.max_cutoff = file_cfg.max_cutoff;
                if (opt_km->count() == 0) cfg.k_max = file_cfg.k_max;
                if (opt_thr->count() == 0) cfg.threads = file_cfg.threads;
                cfg.mode = opt_mode->count() > 0 ? qsep::sweep::mode_from_name(mode_str) : file_cfg.mode;
                cfg.grid = opt_grid->count() > 0 ? qsep::sweep::parse_grid(grid_str) : file_cfg.grid;
                cfg.cutoff = opt_cut->count() > 0 ? parse_cutoff(sweep_cutoff) : file_cfg.cutoff;
                cfg.fixed_value = file_cfg.fixed_value;
                cfg.out_path = cfg.out_path.empty() ? file_cfg.out_path : cfg.out_path;
            } else {
                if (opt_mode->count() == 0) throw std::invalid_argument("sweep needs --mode or --config");
                cfg.mode = qsep::sweep::mode_from_name(mode_str);
                if (opt_grid->count() > 0) cfg.grid = qsep::sweep::parse_grid(grid_str);
                if (opt_cut->count() > 0) cfg.cutoff = parse_cutoff(sweep_cutoff);
            }
            if (opt_fm->count() > 0) cfg.fixed_value = fixed_mu_t;
            if (opt_fv->count() > 0) cfg.fixed_value = fixed_sigma_t2;
            if (opt_fmu->count() > 0) cfg.fixed_value = fixed_mu;
            return cmd_sweep(cfg);
        }
        if (val->parsed()) {
            return cmd_validate(seed, only, corrupt);
        }
    } catch (const std::invalid_argument& e) {
        std::fprintf(stderr, "qsep: %s\n", e.what());
        return kExitUsage;
    } catch (const qsep::UnattainableTargetError& e) {
        std::fprintf(stderr, "qsep: %s\n", e.what());
        return kExitNumeric;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "qsep: numeric failure: %s\n", e.what());
        return kExitNumeric;
    }
    return kExitUsage;
}
