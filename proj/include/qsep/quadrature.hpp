// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstddef>
#include <functional>
#include <map>
#include <mutex>
#include <queue>
#include <stdexcept>
#include <string>
#include <vector>

namespace qsep {

/// Thrown when an iterative numeric procedure fails to reach its tolerance.
/// Carries the best estimate obtained so far.
class ConvergenceError : public std::runtime_error {
  public:
    ConvergenceError(const std::string& msg, double best, double err)
        : std::runtime_error(msg), best_estimate_(best), error_estimate_(err) {}
    double best_estimate() const { return best_estimate_; }
    double error_estimate() const { return error_estimate_; }

  private:
    double best_estimate_;
    double error_estimate_;
};

enum class QuadRule { gauss_legendre_composite, adaptive };

/// Controls 1-D integration of Gaussian-decay integrands on finite windows.
/// `domain_cut` is the half-line/full-line truncation point L: integration
/// runs on [0, L] or [-L, L]; callers choose L from the slowest decay scale
/// of their integrand (mu + 12 sigma_eff keeps the discarded tail near the
/// underflow floor).
struct QuadratureSpec {
    QuadRule rule = QuadRule::adaptive;
    int nodes_per_panel = 24;
    double domain_cut = 0.0;
    double rel_tol = 1e-12;
    int max_panels = 65536;

    void validate() const {
        if (nodes_per_panel < 2) throw std::invalid_argument("QuadratureSpec: nodes_per_panel must be >= 2");
        if (!(rel_tol > 0.0)) throw std::invalid_argument("QuadratureSpec: rel_tol must be positive");
        if (max_panels < 1) throw std::invalid_argument("QuadratureSpec: max_panels must be >= 1");
    }
};

struct QuadResult {
    double value = 0.0;
    double error_estimate = 0.0;
    int panels_used = 0;
    bool converged = false;
};

/// Gauss-Legendre nodes/weights on [-1, 1], Newton iteration on the Legendre
/// recurrence. Cached per order; safe for concurrent sweep workers (map nodes
/// are stable, so returned references survive later insertions).
inline const std::pair<std::vector<double>, std::vector<double>>& gauss_legendre(int n) {
    if (n < 2) throw std::invalid_argument("gauss_legendre: order must be >= 2");
    static std::mutex cache_mutex;
    static std::map<int, std::pair<std::vector<double>, std::vector<double>>> cache;
    std::lock_guard<std::mutex> lock(cache_mutex);
    auto it = cache.find(n);
    if (it != cache.end()) return it->second;

    std::vector<double> x(n), w(n);
    const int m = (n + 1) / 2;
    for (int i = 0; i < m; ++i) {
        double z = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double pp = 0.0;
        for (int iter = 0; iter < 100; ++iter) {
            double p1 = 1.0, p2 = 0.0;
            for (int j = 0; j < n; ++j) {
                double p3 = p2;
                p2 = p1;
                p1 = ((2.0 * j + 1.0) * z * p2 - j * p3) / (j + 1);
            }
            pp = n * (z * p1 - p2) / (z * z - 1.0);
            double z1 = z;
            z = z1 - p1 / pp;
            if (std::abs(z - z1) < 1e-15) break;
        }
        x[i] = -z;
        x[n - 1 - i] = z;
        w[i] = 2.0 / ((1.0 - z * z) * pp * pp);
        w[n - 1 - i] = w[i];
    }
    return cache.emplace(n, std::make_pair(std::move(x), std::move(w))).first->second;
}

namespace detail {

inline double gl_panel(const std::function<double(double)>& f, double a, double b, int order) {
    const auto& [x, w] = gauss_legendre(order);
    const double mid = 0.5 * (a + b), half = 0.5 * (b - a);
    double acc = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) acc += w[i] * f(mid + half * x[i]);
    return acc * half;
}

}  // namespace detail

/// Integrate f on [a, b]. Composite rule doubles a uniform panel count until
/// the value is stable to rel_tol; the adaptive rule bisects the panel with
/// the largest embedded error estimate. Non-convergence throws
/// ConvergenceError carrying the best estimate.
inline QuadResult integrate(const std::function<double(double)>& f, double a, double b,
                            const QuadratureSpec& spec = {}) {
    spec.validate();
    if (!(std::isfinite(a) && std::isfinite(b))) throw std::invalid_argument("integrate: non-finite bounds");
    if (a == b) return {0.0, 0.0, 0, true};

    const int order = spec.nodes_per_panel;
    if (spec.rule == QuadRule::gauss_legendre_composite) {
        int panels = 4;
        double prev = 0.0;
        bool have_prev = false;
        while (panels <= spec.max_panels) {
            double acc = 0.0;
            const double h = (b - a) / panels;
            for (int i = 0; i < panels; ++i) acc += detail::gl_panel(f, a + i * h, a + (i + 1) * h, order);
            if (have_prev) {
                const double change = std::abs(acc - prev);
                if (change <= spec.rel_tol * std::max(std::abs(acc), 1e-300)) {
                    return {acc, change, panels, true};
                }
            }
            prev = acc;
            have_prev = true;
            panels *= 2;
        }
        throw ConvergenceError("integrate: composite rule did not converge within panel budget", prev,
                               std::abs(prev));
    }

    // adaptive: priority queue on per-panel error |I_n - I_{n/2 split}|.
    // Panel error estimates bottom out at roundoff, so the target is the
    // requested tolerance or the accumulated noise floor, whichever is larger.
    struct Panel {
        double a, b, value, abs_value, err;
        bool operator<(const Panel& o) const { return err < o.err; }
    };
    auto make_panel = [&](double pa, double pb) {
        const double whole = detail::gl_panel(f, pa, pb, order);
        const double mid = 0.5 * (pa + pb);
        const double left = detail::gl_panel(f, pa, mid, order);
        const double right = detail::gl_panel(f, mid, pb, order);
        return Panel{pa, pb, left + right, std::abs(left) + std::abs(right),
                     std::abs(left + right - whole)};
    };
    std::priority_queue<Panel> q;
    const int initial = 8;
    double total = 0.0, total_abs = 0.0, total_err = 0.0;
    for (int i = 0; i < initial; ++i) {
        Panel p = make_panel(a + (b - a) * i / initial, a + (b - a) * (i + 1) / initial);
        total += p.value;
        total_abs += p.abs_value;
        total_err += p.err;
        q.push(p);
    }
    int panels = initial;
    auto target = [&]() {
        const double noise_floor = 64.0 * 2.2e-16 * total_abs;
        return std::max(spec.rel_tol * std::max(std::abs(total), 1e-300), noise_floor);
    };
    while (total_err > target() && panels < spec.max_panels) {
        Panel p = q.top();
        q.pop();
        total -= p.value;
        total_abs -= p.abs_value;
        total_err -= p.err;
        const double mid = 0.5 * (p.a + p.b);
        for (const auto& child : {make_panel(p.a, mid), make_panel(mid, p.b)}) {
            total += child.value;
            total_abs += child.abs_value;
            total_err += child.err;
            q.push(child);
        }
        ++panels;
    }
    if (total_err > target()) {
        throw ConvergenceError("integrate: adaptive rule did not converge within panel budget", total, total_err);
    }
    return {total, total_err, panels, true};
}

/// Integrate on [0, spec.domain_cut].
inline QuadResult integrate_half_line(const std::function<double(double)>& f, const QuadratureSpec& spec) {
    if (!(spec.domain_cut > 0.0)) throw std::invalid_argument("integrate_half_line: domain_cut must be positive");
    return integrate(f, 0.0, spec.domain_cut, spec);
}

/// Integrate on [-spec.domain_cut, spec.domain_cut].
inline QuadResult integrate_full_line(const std::function<double(double)>& f, const QuadratureSpec& spec) {
    if (!(spec.domain_cut > 0.0)) throw std::invalid_argument("integrate_full_line: domain_cut must be positive");
    return integrate(f, -spec.domain_cut, spec.domain_cut, spec);
}

/// Exact half-line Gaussian moment  int_0^inf q^{k+1} e^{-A q^2} dq
///   = Gamma((k+2)/2) / (2 A^{(k+2)/2}),   A > 0.
/// Evaluated in log space so large k and extreme A do not overflow.
inline double halfline_gaussian_moment(int k, double A) {
    if (k < 0) throw std::invalid_argument("halfline_gaussian_moment: k must be non-negative");
    if (!(A > 0.0)) throw std::invalid_argument("halfline_gaussian_moment: A must be positive");
    const double p = 0.5 * (k + 2);
    return 0.5 * std::exp(std::lgamma(p) - p * std::log(A));
}

}  // namespace qsep
