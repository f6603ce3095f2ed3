// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <limits>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

#include "qsep/measurements.hpp"
#include "qsep/personick.hpp"
#include "qsep/priors.hpp"
#include "qsep/version.hpp"

namespace qsep {
namespace sweep {

enum class SweepMode { fig1, fig2_fixed_mean, fig3_fixed_variance, custom };

inline const char* mode_name(SweepMode m) {
    switch (m) {
        case SweepMode::fig1: return "fig1";
        case SweepMode::fig2_fixed_mean: return "fig2-fixed-mean";
        case SweepMode::fig3_fixed_variance: return "fig3-fixed-variance";
        case SweepMode::custom: return "custom";
    }
    return "?";
}

inline SweepMode mode_from_name(const std::string& s) {
    if (s == "fig1") return SweepMode::fig1;
    if (s == "fig2-fixed-mean" || s == "fig2_fixed_mean") return SweepMode::fig2_fixed_mean;
    if (s == "fig3-fixed-variance" || s == "fig3_fixed_variance") return SweepMode::fig3_fixed_variance;
    if (s == "custom") return SweepMode::custom;
    throw std::invalid_argument("unknown sweep mode: " + s);
}

struct GridSpec {
    double start = 0.1;
    double stop = 3.0;
    int count = 50;
    bool log_spacing = false;

    double at(int i) const {
        if (count < 2) return start;
        const double f = static_cast<double>(i) / (count - 1);
        if (log_spacing) return std::exp(std::log(start) + f * (std::log(stop) - std::log(start)));
        return start + f * (stop - start);
    }
};

inline GridSpec parse_grid(const std::string& s) {
    GridSpec g;
    g.log_spacing = false;
    std::istringstream in(s);
    std::string tok;
    std::vector<std::string> parts;
    while (std::getline(in, tok, ':')) parts.push_back(tok);
    if (parts.size() < 3 || parts.size() > 4) throw std::invalid_argument("grid must be start:stop:count[:log]");
    g.start = std::stod(parts[0]);
    g.stop = std::stod(parts[1]);
    g.count = std::stoi(parts[2]);
    if (parts.size() == 4) {
        if (parts[3] == "log") g.log_spacing = true;
        else if (parts[3] == "linear") g.log_spacing = false;
        else throw std::invalid_argument("grid spacing must be 'log' or 'linear'");
    }
    return g;
}

/// What to sweep and how. The swept coordinate is sigma for fig1 and custom,
/// sigma_t^2 for fig2 (mu_t held at fixed_value), mu_t for fig3 (sigma_t^2
/// held at fixed_value).
struct SweepConfig {
    SweepMode mode = SweepMode::fig1;
    double fixed_value = 0.0;
    GridSpec grid;
    int cutoff = 0;        // 0 = auto-converge
    int max_cutoff = 64;   // cap for the auto policy
    std::string out_path;
    std::uint64_t seed = 0;
    std::int64_t mc_samples = 0;  // > 0 enables per-row MC validation columns
    int k_max = 0;                // 0 = auto
    int threads = 0;              // 0 = hardware concurrency

    void validate() const {
        if (grid.count < 2) throw std::invalid_argument("SweepConfig: grid count must be >= 2");
        if (!(grid.start < grid.stop)) throw std::invalid_argument("SweepConfig: grid start must be < stop");
        if (grid.log_spacing && !(grid.start > 0.0))
            throw std::invalid_argument("SweepConfig: log grid requires positive start");
        if (cutoff != 0 && cutoff < 4) throw std::invalid_argument("SweepConfig: fixed cutoff must be >= 4");
        if ((mode == SweepMode::fig2_fixed_mean || mode == SweepMode::fig3_fixed_variance) &&
            !(fixed_value > 0.0))
            throw std::invalid_argument("SweepConfig: fixed value must be positive for fig2/fig3 modes");
        if (mc_samples != 0 && mc_samples < 10000)
            throw std::invalid_argument("SweepConfig: mc_samples must be 0 or >= 1e4");
    }
};

struct SweepRow {
    double grid_value = 0.0;
    double mu_t = std::numeric_limits<double>::quiet_NaN();
    double sigma_t2 = std::numeric_limits<double>::quiet_NaN();
    double mu = std::numeric_limits<double>::quiet_NaN();
    double sigma = std::numeric_limits<double>::quiet_NaN();
    int cutoff_used = 0;
    double mmse = std::numeric_limits<double>::quiet_NaN();
    double mse_spade = std::numeric_limits<double>::quiet_NaN();
    double mse_di = std::numeric_limits<double>::quiet_NaN();
    double ratio_di_over_spade = std::numeric_limits<double>::quiet_NaN();
    int dropped_eigenpairs = 0;
    std::string quadrature_flags = "ok";
    double mc_spade = std::numeric_limits<double>::quiet_NaN();
    double mc_spade_se = std::numeric_limits<double>::quiet_NaN();
    double mc_di = std::numeric_limits<double>::quiet_NaN();
    double mc_di_se = std::numeric_limits<double>::quiet_NaN();
    std::string error;
};

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline void append_flag(std::string& flags, const std::string& f) {
    if (flags == "ok") flags = f;
    else flags += ";" + f;
}

}  // namespace detail

/// Compute one sweep point. Throws on unreachable targets or numeric
/// failures; run_sweep catches those into the row's error column.
inline SweepRow compute_row(const SweepConfig& cfg, int index) {
    SweepRow row;
    row.grid_value = cfg.grid.at(index);

    Prior prior = HalfGaussianPrior(1.0);
    bool analytic_path = false;
    switch (cfg.mode) {
        case SweepMode::fig1: {
            const double sigma = row.grid_value;
            prior = HalfGaussianPrior(sigma);
            row.mu = 0.0;
            row.sigma = sigma;
            analytic_path = true;
            break;
        }
        case SweepMode::fig2_fixed_mean: {
            const auto p = invert_moments(cfg.fixed_value, row.grid_value);
            row.mu = p.mu;
            row.sigma = p.sigma;
            prior = p;
            break;
        }
        case SweepMode::fig3_fixed_variance: {
            const auto p = invert_moments(row.grid_value, cfg.fixed_value);
            row.mu = p.mu;
            row.sigma = p.sigma;
            prior = p;
            break;
        }
        case SweepMode::custom: {
            const DisplacedHalfGaussianPrior p(cfg.fixed_value, row.grid_value);
            row.mu = p.mu;
            row.sigma = p.sigma;
            prior = p;
            break;
        }
    }
    const auto pm = moments(prior);
    row.mu_t = pm.mean;
    row.sigma_t2 = pm.variance;
    if (row.mu < 0.0) detail::append_flag(row.quadrature_flags, "mu_negative");

    if (analytic_path) {
        const double sigma = row.sigma;
        const int c = cfg.cutoff > 0 ? cfg.cutoff : personick::series_cutoff(sigma, 1e-6, cfg.max_cutoff);
        row.cutoff_used = c;
        row.mmse = personick::mmse_half_gaussian_series(sigma, c);
        row.dropped_eigenpairs = 0;
        detail::append_flag(row.quadrature_flags, "analytic_series");
    } else if (cfg.cutoff > 0) {
        const auto g = personick::build_gamma_numeric(prior, cfg.cutoff);
        const auto sol = personick::solve_estimator(g);
        row.cutoff_used = cfg.cutoff;
        row.mmse = sol.mmse;
        row.dropped_eigenpairs = sol.diag.dropped_pairs;
    } else {
        const auto res = personick::auto_cutoff(prior, {}, 1e-6, cfg.max_cutoff);
        row.cutoff_used = res.cutoff;
        row.mmse = res.solution.mmse;
        row.dropped_eigenpairs = res.solution.diag.dropped_pairs;
        if (res.capped) detail::append_flag(row.quadrature_flags, "cutoff_capped");
    }

    row.mse_spade = measurements::mse_pnr(prior, cfg.k_max).mse;
    row.mse_di = measurements::mse_homodyne(prior).mse;
    row.ratio_di_over_spade = row.mse_di / row.mse_spade;

    if (cfg.mc_samples > 0) {
        const std::uint64_t row_seed = detail::splitmix64(cfg.seed ^ static_cast<std::uint64_t>(index));
        const auto mp = measurements::mc_mse(measurements::Measurement::pnr, prior, cfg.mc_samples, row_seed);
        const auto mh =
            measurements::mc_mse(measurements::Measurement::homodyne, prior, cfg.mc_samples, row_seed + 1);
        row.mc_spade = mp.estimate;
        row.mc_spade_se = mp.std_error;
        row.mc_di = mh.estimate;
        row.mc_di_se = mh.std_error;
    }
    return row;
}

/// Run every grid point in a worker pool; rows come back in grid order and
/// per-point failures are recorded in the error column while the run
/// continues.
inline std::vector<SweepRow> run_sweep(const SweepConfig& cfg) {
    cfg.validate();
    std::vector<SweepRow> rows(cfg.grid.count);
    std::atomic<int> next{0};
    unsigned n_threads = cfg.threads > 0 ? static_cast<unsigned>(cfg.threads) : std::thread::hardware_concurrency();
    n_threads = std::max(1u, std::min(n_threads, static_cast<unsigned>(cfg.grid.count)));

    auto worker = [&]() {
        while (true) {
            const int i = next.fetch_add(1);
            if (i >= cfg.grid.count) break;
            try {
                rows[i] = compute_row(cfg, i);
            } catch (const std::exception& e) {
                rows[i] = SweepRow{};
                rows[i].grid_value = cfg.grid.at(i);
                rows[i].quadrature_flags = "error";
                rows[i].error = e.what();
            }
        }
    };
    std::vector<std::thread> pool;
    for (unsigned t = 1; t < n_threads; ++t) pool.emplace_back(worker);
    worker();
    for (auto& t : pool) t.join();
    return rows;
}

namespace detail {

inline std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

inline std::string csv_escape(const std::string& s) {
    if (s.find_first_of(",\"\n") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += "\"\"";
        else if (c == '\n') out += ' ';
        else out += c;
    }
    out += "\"";
    return out;
}

}  // namespace detail

inline std::string config_echo(const SweepConfig& cfg) {
    std::ostringstream os;
    os << "mode=" << mode_name(cfg.mode) << " fixed=" << detail::fmt17(cfg.fixed_value) << " grid="
       << detail::fmt17(cfg.grid.start) << ":" << detail::fmt17(cfg.grid.stop) << ":" << cfg.grid.count << ":"
       << (cfg.grid.log_spacing ? "log" : "linear") << " cutoff=" << (cfg.cutoff > 0 ? std::to_string(cfg.cutoff) : "auto")
       << " max-cutoff=" << cfg.max_cutoff << " k-max=" << (cfg.k_max > 0 ? std::to_string(cfg.k_max) : "auto")
       << " seed=" << cfg.seed << " mc-samples=" << cfg.mc_samples;
    return os.str();
}

/// CSV with a version/config comment header; 17 significant digits, '.'
/// decimal separator, deterministic ordering. Byte-stable for a fixed
/// config and seed.
inline void write_csv(std::ostream& out, const SweepConfig& cfg, const std::vector<SweepRow>& rows) {
    out << "# qsep " << version << "\n";
    out << "# " << config_echo(cfg) << "\n";
    out << "grid_value,mu_t,sigma_t2,mu,sigma,cutoff_used,mmse,mse_spade,mse_di,ratio_di_over_spade,"
           "dropped_eigenpairs,quadrature_flags,mc_spade,mc_spade_se,mc_di,mc_di_se,error\n";
    for (const auto& r : rows) {
        out << detail::fmt17(r.grid_value) << ',' << detail::fmt17(r.mu_t) << ',' << detail::fmt17(r.sigma_t2)
            << ',' << detail::fmt17(r.mu) << ',' << detail::fmt17(r.sigma) << ',' << r.cutoff_used << ','
            << detail::fmt17(r.mmse) << ',' << detail::fmt17(r.mse_spade) << ',' << detail::fmt17(r.mse_di)
            << ',' << detail::fmt17(r.ratio_di_over_spade) << ',' << r.dropped_eigenpairs << ','
            << detail::csv_escape(r.quadrature_flags) << ',' << detail::fmt17(r.mc_spade) << ','
            << detail::fmt17(r.mc_spade_se) << ',' << detail::fmt17(r.mc_di) << ',' << detail::fmt17(r.mc_di_se)
            << ',' << detail::csv_escape(r.error) << '\n';
    }
}

inline void write_csv_file(const std::string& path, const SweepConfig& cfg, const std::vector<SweepRow>& rows) {
    std::ofstream f(path, std::ios::binary);
    if (!f) throw std::runtime_error("cannot open output path: " + path);
    write_csv(f, cfg, rows);
    if (!f.good()) throw std::runtime_error("write failed: " + path);
}

/// key=value configuration, one pair per line, '#' comments. Keys: mode,
/// fixed, grid, cutoff, max-cutoff, out, seed, mc-samples, k-max, threads.
/// Command-line flags override file values.
inline void apply_config_line(SweepConfig& cfg, const std::string& key, const std::string& value) {
    if (key == "mode") cfg.mode = mode_from_name(value);
    else if (key == "fixed") cfg.fixed_value = std::stod(value);
    else if (key == "grid") cfg.grid = parse_grid(value);
    else if (key == "cutoff") cfg.cutoff = (value == "auto") ? 0 : std::stoi(value);
    else if (key == "max-cutoff") cfg.max_cutoff = std::stoi(value);
    else if (key == "out") cfg.out_path = value;
    else if (key == "seed") cfg.seed = std::stoull(value);
    else if (key == "mc-samples") cfg.mc_samples = std::stoll(value);
    else if (key == "k-max") cfg.k_max = (value == "auto") ? 0 : std::stoi(value);
    else if (key == "threads") cfg.threads = std::stoi(value);
    else throw std::invalid_argument("unknown config key: " + key);
}

inline SweepConfig parse_config(std::istream& in) {
    SweepConfig cfg;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line = line.substr(0, hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto eq = line.find('=');
        if (eq == std::string::npos)
            throw std::invalid_argument("config line " + std::to_string(lineno) + ": expected key=value");
        auto trim = [](std::string s) {
            const auto a = s.find_first_not_of(" \t\r");
            const auto b = s.find_last_not_of(" \t\r");
            return a == std::string::npos ? std::string() : s.substr(a, b - a + 1);
        };
        apply_config_line(cfg, trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return cfg;
}

inline SweepConfig parse_config_file(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw std::runtime_error("cannot open config file: " + path);
    return parse_config(f);
}

}  // namespace sweep
}  // namespace qsep
