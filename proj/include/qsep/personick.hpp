// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <utility>
#include <vector>

#include "qsep/fock.hpp"
#include "qsep/hermite.hpp"
#include "qsep/priors.hpp"
#include "qsep/quadrature.hpp"

namespace qsep {
namespace personick {

/// Prior-weighted operator moments of the separation-carrying state.
/// gamma2 enters the risk only through its trace, which equals the prior's
/// raw second moment exactly, so the operator is never materialized.
struct GammaTriple {
    fock::FockOperator gamma0;
    fock::FockOperator gamma1;
    double gamma2_trace = 0.0;
};

struct SolveDiagnostics {
    // eigenvalue pairs under the regularization floor, zeroed in the solve
    int regularized_pairs = 0;
    // regularized pairs whose removed weight was not negligible; nonzero
    // means the reported mmse carries a real upward bias
    int dropped_pairs = 0;
    // total estimated upward mmse bias from the zeroed pairs
    double dropped_bias = 0.0;
    double lyapunov_residual = 0.0;
};

/// Optimal Hermitian estimator: eigenvalues are the estimate values and the
/// eigenvectors form the optimal projective measurement.
struct PersonickSolution {
    fock::FockOperator B;
    Eigen::VectorXd estimator_values;
    Eigen::MatrixXd measurement;
    double mmse = 0.0;
    double trace_B_gamma1 = 0.0;
    SolveDiagnostics diag;
};

namespace detail {

using fock::squeeze_params;

/// Coherent amplitude matrix: row i is the Fock expansion of |q_i/sqrt(2)>.
inline Eigen::MatrixXd coherent_rows(const std::vector<double>& q, int cutoff) {
    const int dim = cutoff + 1;
    Eigen::MatrixXd C(q.size(), dim);
    for (std::size_t i = 0; i < q.size(); ++i) {
        const double alpha = q[i] / std::sqrt(2.0);
        C(i, 0) = std::exp(-0.5 * alpha * alpha);
        for (int n = 1; n < dim; ++n) C(i, n) = C(i, n - 1) * alpha / std::sqrt(static_cast<double>(n));
    }
    return C;
}

inline void parity_mask(Eigen::MatrixXd& m) {
    for (int n = 0; n < m.rows(); ++n)
        for (int c = (n % 2 == 0) ? 1 : 0; c < m.cols(); c += 2) m(n, c) = 0.0;
}

struct PanelGrid {
    std::vector<double> q, w;
};

inline PanelGrid panel_grid(double a, double b, int panels, int order) {
    const auto& [x, wts] = gauss_legendre(order);
    PanelGrid g;
    g.q.reserve(panels * order);
    g.w.reserve(panels * order);
    const double h = (b - a) / panels;
    for (int p = 0; p < panels; ++p) {
        const double mid = a + (p + 0.5) * h, half = 0.5 * h;
        for (std::size_t i = 0; i < x.size(); ++i) {
            g.q.push_back(mid + half * x[i]);
            g.w.push_back(half * wts[i]);
        }
    }
    return g;
}

struct GammaPair {
    Eigen::MatrixXd g0, g1;
};

inline GammaPair assemble(const Prior& prior, int cutoff, double a, double b, int panels, int order) {
    const PanelGrid grid = panel_grid(a, b, panels, order);
    const Eigen::MatrixXd C = coherent_rows(grid.q, cutoff);
    Eigen::VectorXd w0(grid.q.size()), w1(grid.q.size());
    for (std::size_t i = 0; i < grid.q.size(); ++i) {
        const double p = pdf(prior, grid.q[i]);
        w0[i] = grid.w[i] * p;
        w1[i] = w0[i] * grid.q[i];
    }
    GammaPair out;
    out.g0 = C.transpose() * w0.asDiagonal() * C;
    out.g1 = C.transpose() * w1.asDiagonal() * C;
    return out;
}

}  // namespace detail

/// Gamma_k = int P(q) q^k rho(q) dq by entrywise panel quadrature, with the
/// panel count doubled until both operators are stable to spec.rel_tol.
/// Half-line priors use the symmetric two-source state (odd-parity entries
/// vanish by construction); the full-line Gaussian prior uses the pure
/// single-source state over the whole line.
inline GammaTriple build_gamma_numeric(const Prior& prior, int cutoff, const QuadratureSpec& spec = {}) {
    if (cutoff < 0) throw std::invalid_argument("build_gamma_numeric: cutoff must be >= 0");
    spec.validate();
    const bool half_line = is_half_line(prior);
    const double L = spec.domain_cut > 0.0 ? spec.domain_cut : support_cut(prior);
    const double a = half_line ? 0.0 : -L;
    const int order = spec.nodes_per_panel;

    int panels = std::max(8, static_cast<int>(std::ceil((L - a) / 1.5)));
    detail::GammaPair cur = detail::assemble(prior, cutoff, a, L, panels, order);
    const double tol = std::max(spec.rel_tol, 1e-14);
    bool converged = false;
    while (2 * panels <= spec.max_panels) {
        detail::GammaPair next = detail::assemble(prior, cutoff, a, L, 2 * panels, order);
        const double change = std::max((next.g0 - cur.g0).cwiseAbs().maxCoeff(),
                                       (next.g1 - cur.g1).cwiseAbs().maxCoeff());
        cur = std::move(next);
        panels *= 2;
        if (change <= tol) {
            converged = true;
            break;
        }
    }
    if (!converged) {
        throw ConvergenceError("build_gamma_numeric: panel doubling did not stabilize the operators",
                               cur.g0.trace(), 0.0);
    }
    if (half_line) {
        detail::parity_mask(cur.g0);
        detail::parity_mask(cur.g1);
    } else {
        // Full-line symmetric prior: Gamma_0's odd-parity and Gamma_1's
        // even-parity entries are antisymmetric integrals, exactly zero.
        detail::parity_mask(cur.g0);
        for (int n = 0; n <= cutoff; ++n)
            for (int m = n % 2; m <= cutoff; m += 2) {
                cur.g1(n, m) = 0.0;
                cur.g1(m, n) = 0.0;
            }
    }
    cur.g0 = 0.5 * (cur.g0 + cur.g0.transpose()).eval();
    cur.g1 = 0.5 * (cur.g1 + cur.g1.transpose()).eval();
    GammaTriple out;
    out.gamma0 = fock::make_operator(std::move(cur.g0), true);
    out.gamma1 = fock::make_operator(std::move(cur.g1), true);
    out.gamma2_trace = moments(prior).second_moment;
    return out;
}

/// Single-source mode: zero-mean Gaussian prior over the full real line.
inline GammaTriple build_gamma_single_source(double sigma, int cutoff, const QuadratureSpec& spec = {}) {
    return build_gamma_numeric(FullGaussianPrior(sigma), cutoff, spec);
}

/// Gamma_0 for the half-Gaussian prior in closed form: a squeezed thermal
/// state (1-s) sum_n s^n U(r)|n><n|U(r)^dag with r = ln(2 sigma^2 + 1)/4 and
/// s = n_bar/(n_bar+1). The thermal sum is truncated where its weight falls
/// below 1e-16 and the squeeze columns are taken from the padded (untruncated)
/// matrix elements, so the result is the exact operator projected onto the
/// window.
inline fock::FockOperator build_gamma0_analytic(double sigma, int cutoff) {
    if (cutoff < 0) throw std::invalid_argument("build_gamma0_analytic: cutoff must be >= 0");
    const auto sp = detail::squeeze_params(sigma);
    int n_levels = 0;
    if (sp.s > 0.0) n_levels = static_cast<int>(std::ceil(std::log(1e-16) / std::log(sp.s)));
    n_levels = std::max(n_levels, 1);
    const int big = std::max(cutoff, n_levels);
    const Eigen::MatrixXd U =
        fock::detail::squeeze_generator_exp(sp.r, fock::detail::squeeze_pad_dim(sp.r, big))
            .block(0, 0, cutoff + 1, n_levels + 1);
    Eigen::VectorXd lam(n_levels + 1);
    for (int n = 0; n <= n_levels; ++n) lam[n] = (1.0 - sp.s) * std::pow(sp.s, n);
    Eigen::MatrixXd g0 = U * lam.asDiagonal() * U.transpose();
    g0 = 0.5 * (g0 + g0.transpose()).eval();
    return fock::make_operator(std::move(g0), true);
}

namespace detail {

/// J_nm = int_0^inf y e^{-y^2} htilde_n(y) htilde_m(y) dy for all n,m <= nmax,
/// evaluated on a shared panel grid with the e^{-y^2/2}-weighted Hermite
/// functions so every intermediate stays O(1).
inline Eigen::MatrixXd hermite_halfline_products(int nmax, const QuadratureSpec& spec) {
    const double Ly = std::sqrt(2.0 * nmax + 1.0) + 8.0;
    const int order = spec.nodes_per_panel;
    int panels = std::max(16, static_cast<int>(std::ceil(Ly / 0.5)));
    auto eval = [&](int p) {
        const PanelGrid grid = panel_grid(0.0, Ly, p, order);
        Eigen::MatrixXd H(grid.q.size(), nmax + 1);
        Eigen::VectorXd wg(grid.q.size());
        for (std::size_t i = 0; i < grid.q.size(); ++i) {
            const double y = grid.q[i];
            const auto h = hermite_normalized(y, nmax);
            const double damp = std::exp(-0.5 * y * y);
            for (int n = 0; n <= nmax; ++n) H(i, n) = h[n] * damp;
            wg[i] = grid.w[i] * y;
        }
        return Eigen::MatrixXd(H.transpose() * wg.asDiagonal() * H);
    };
    Eigen::MatrixXd cur = eval(panels);
    while (2 * panels <= spec.max_panels) {
        Eigen::MatrixXd next = eval(2 * panels);
        const double change = (next - cur).cwiseAbs().maxCoeff();
        cur = std::move(next);
        panels *= 2;
        if (change <= std::max(spec.rel_tol, 1e-14)) return cur;
    }
    throw ConvergenceError("hermite_halfline_products: did not converge", 0.0, 0.0);
}

}  // namespace detail

/// Squeezed-frame matrix elements <n|U(r)^dag Gamma_1 U(r)|m> for the
/// half-Gaussian prior:
///   [sigma sqrt(2 pi n! m!)]^{-1} (cosh r)^{-1} (tanh r / 2)^{(n+m)/2} (I+ + I-),
/// reduced with A = x^2 to the scale-free Hermite products J_nm. Entries with
/// n+m odd vanish identically (the two half-line branches cancel).
inline Eigen::MatrixXd gamma1_squeezed_frame_analytic(double sigma, int cutoff, const QuadratureSpec& spec = {}) {
    if (cutoff < 0) throw std::invalid_argument("gamma1_squeezed_frame_analytic: cutoff must be >= 0");
    const auto sp = detail::squeeze_params(sigma);
    const double t = std::tanh(sp.r);
    const double x2 = 1.0 / (2.0 * std::sinh(2.0 * sp.r));
    const Eigen::MatrixXd J = detail::hermite_halfline_products(cutoff, spec);
    const double pref = 2.0 / (sigma * std::sqrt(2.0 * M_PI) * std::cosh(sp.r));
    Eigen::MatrixXd M = Eigen::MatrixXd::Zero(cutoff + 1, cutoff + 1);
    for (int n = 0; n <= cutoff; ++n) {
        for (int m = n; m <= cutoff; ++m) {
            if ((n + m) % 2 != 0) continue;
            const double v = pref * std::pow(t, 0.5 * (n + m)) * J(n, m) / x2;
            M(n, m) = v;
            M(m, n) = v;
        }
    }
    return M;
}

/// Coefficient-times-moment evaluation of the same matrix element, exact for
/// n+m <= 20; cross-check for the quadrature route above. Larger orders lose
/// all digits to cancellation in the Hermite coefficient sum.
inline double gamma1_element_coefficient_route(double sigma, int n, int m) {
    if ((n + m) % 2 != 0) return 0.0;
    if (n + m > 20) throw std::invalid_argument("gamma1_element_coefficient_route: n+m must be <= 20");
    const auto sp = detail::squeeze_params(sigma);
    const double t = std::tanh(sp.r);
    const double x = 1.0 / std::sqrt(2.0 * std::sinh(2.0 * sp.r));
    const double A = 0.5 * (1.0 / (sigma * sigma) + 1.0 - t);
    const auto cn = hermite_coefficients(n);
    const auto cm = hermite_coefficients(m);
    double iplus = 0.0;
    for (std::size_t j = 0; j < cn.size(); ++j) {
        if (cn[j] == 0.0) continue;
        for (std::size_t l = 0; l < cm.size(); ++l) {
            if (cm[l] == 0.0) continue;
            iplus += cn[j] * cm[l] * std::pow(x, static_cast<double>(j + l)) *
                     halfline_gaussian_moment(static_cast<int>(j + l), A);
        }
    }
    double lgnm = 0.5 * (std::lgamma(n + 1.0) + std::lgamma(m + 1.0));
    const double pref = std::exp(-lgnm) / (sigma * std::sqrt(2.0 * M_PI) * std::cosh(sp.r));
    return pref * std::pow(0.5 * t, 0.5 * (n + m)) * 2.0 * iplus;
}

/// Closed-form MMSE for the half-Gaussian prior,
///   sigma^2 - 2/(1-s) sum_{n,m} |<n|U^dag Gamma_1 U|m>|^2 / (s^n + s^m),
/// with the geometric weights folded in exactly (s = tanh r) so the deep
/// terms neither overflow nor divide by zero.
inline double mmse_half_gaussian_series(double sigma, int cutoff, const QuadratureSpec& spec = {}) {
    const auto sp = detail::squeeze_params(sigma);
    const double t = std::tanh(sp.r);
    const double x2 = 1.0 / (2.0 * std::sinh(2.0 * sp.r));
    const Eigen::MatrixXd J = detail::hermite_halfline_products(cutoff, spec);
    const double pref = 2.0 / (sigma * std::sqrt(2.0 * M_PI) * std::cosh(sp.r));
    // |M_nm|^2 / (s^n + s^m) = C^2 J^2 t^{max(n,m)} / (1 + t^{|n-m|}),  s == t
    double sum = 0.0;
    for (int n = 0; n <= cutoff; ++n) {
        for (int m = n; m <= cutoff; ++m) {
            if ((n + m) % 2 != 0) continue;
            const double c = pref * J(n, m) / x2;
            const double term = c * c * std::pow(t, m) / (1.0 + std::pow(t, m - n));
            sum += (m == n) ? term : 2.0 * term;
        }
    }
    return sigma * sigma - 2.0 / (1.0 - sp.s) * sum;
}

namespace detail {

/// Eigendecomposition that honors an exact even-parity checkerboard: the two
/// parity blocks are diagonalized separately so eigenvectors stay parity-pure
/// (plain dense solvers mix the near-degenerate deep spectrum across blocks).
inline fock::EighResult parity_aware_eigh(const fock::FockOperator& op) {
    const int dim = op.dim();
    bool checkerboard = true;
    for (int n = 0; n < dim && checkerboard; ++n)
        for (int m = (n % 2 == 0) ? 1 : 0; m < dim; m += 2)
            if (op.entries(n, m) != 0.0) {
                checkerboard = false;
                break;
            }
    if (!checkerboard || dim < 2) return fock::eigh(op);

    fock::EighResult out;
    out.eigenvalues.resize(dim);
    out.eigenvectors = Eigen::MatrixXd::Zero(dim, dim);
    int col = 0;
    for (int parity = 0; parity < 2; ++parity) {
        std::vector<int> idx;
        for (int n = parity; n < dim; n += 2) idx.push_back(n);
        Eigen::MatrixXd block(idx.size(), idx.size());
        for (std::size_t i = 0; i < idx.size(); ++i)
            for (std::size_t j = 0; j < idx.size(); ++j) block(i, j) = op.entries(idx[i], idx[j]);
        Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(block);
        if (solver.info() != Eigen::Success) throw std::runtime_error("parity_aware_eigh: solver failed");
        for (std::size_t j = 0; j < idx.size(); ++j, ++col) {
            out.eigenvalues[col] = solver.eigenvalues()[static_cast<int>(j)];
            for (std::size_t i = 0; i < idx.size(); ++i)
                out.eigenvectors(idx[i], col) = solver.eigenvectors()(static_cast<int>(i), static_cast<int>(j));
        }
    }
    return out;
}

}  // namespace detail

/// Spectral solve of Gamma_0 B + B Gamma_0 = 2 Gamma_1: in the Gamma_0
/// eigenbasis B_ij = 2 M_ij / (lambda_i + lambda_j). Pairs whose eigenvalue
/// sum falls under floor_rel * lambda_max are zeroed (the minimal-norm
/// solution on the numerically supported subspace); their removed weight is
/// accumulated so a drop that actually carried information is surfaced in
/// dropped_pairs instead of silently biasing the mmse. `full = false` skips
/// materializing B and its eigensystem and returns the risk alone.
inline PersonickSolution solve_estimator(const GammaTriple& gammas, double floor_rel = 1e-13,
                                         bool full = true) {
    if (!gammas.gamma0.hermitian || !gammas.gamma1.hermitian)
        throw std::invalid_argument("solve_estimator: gamma operators must be hermitian");
    const double tr = gammas.gamma0.entries.trace();
    if (!(tr > 0.5 && tr < 1.5))
        throw std::invalid_argument("solve_estimator: gamma0 trace far from 1; state not normalized");

    const auto eg = detail::parity_aware_eigh(gammas.gamma0);
    Eigen::VectorXd lam = eg.eigenvalues.cwiseMax(0.0);
    const double lam_max = lam.maxCoeff();
    const double floor = floor_rel * lam_max;
    const int dim = static_cast<int>(lam.size());

    const Eigen::MatrixXd M = eg.eigenvectors.transpose() * gammas.gamma1.entries * eg.eigenvectors;
    Eigen::MatrixXd Bp = Eigen::MatrixXd::Zero(dim, dim);
    SolveDiagnostics diag;
    double gain = 0.0;
    const double sig_tol = 1e-10 * std::max(gammas.gamma2_trace, 1e-30);
    for (int i = 0; i < dim; ++i) {
        for (int j = i; j < dim; ++j) {
            const double s = lam[i] + lam[j];
            const double mult = (i == j) ? 1.0 : 2.0;
            if (s >= floor) {
                const double v = 2.0 * M(i, j) / s;
                Bp(i, j) = v;
                Bp(j, i) = v;
                gain += mult * v * M(i, j);
            } else {
                ++diag.regularized_pairs;
                const double lost = mult * 2.0 * M(i, j) * M(i, j) / std::max(s, floor);
                diag.dropped_bias += lost;
                if (lost > sig_tol) ++diag.dropped_pairs;
            }
        }
    }

    PersonickSolution sol;
    sol.diag = diag;
    if (!full) {
        // probe mode: the risk alone, from the eigenbasis sum
        sol.trace_B_gamma1 = gain;
        sol.mmse = gammas.gamma2_trace - gain;
        sol.diag.lyapunov_residual = std::numeric_limits<double>::quiet_NaN();
        return sol;
    }
    Eigen::MatrixXd B = eg.eigenvectors * Bp * eg.eigenvectors.transpose();
    B = 0.5 * (B + B.transpose()).eval();
    sol.trace_B_gamma1 = (B.cwiseProduct(gammas.gamma1.entries)).sum();
    sol.mmse = gammas.gamma2_trace - sol.trace_B_gamma1;
    sol.diag.lyapunov_residual = (gammas.gamma0.entries * B + B * gammas.gamma0.entries -
                                  2.0 * gammas.gamma1.entries)
                                     .cwiseAbs()
                                     .maxCoeff();
    sol.B = fock::make_operator(std::move(B), true);
    const auto eb = fock::eigh(sol.B);
    sol.estimator_values = eb.eigenvalues;
    sol.measurement = eb.eigenvectors;
    return sol;
}

/// Conjugate (Gamma_0, Gamma_1) by U(r_test) on a padded window, re-solve,
/// and return (mmse before, mmse after). The paddings keep the conjugation
/// from clipping squeezed tails.
inline std::pair<double, double> unitary_invariance_check(const GammaTriple& gammas, double r_test) {
    if (!(std::abs(r_test) <= 1.0)) throw std::invalid_argument("unitary_invariance_check: |r_test| must be <= 1");
    const double before = solve_estimator(gammas).mmse;
    if (r_test == 0.0) return {before, before};

    const int dim = gammas.gamma0.dim();
    const int big = static_cast<int>(std::ceil(dim * std::exp(2.0 * std::abs(r_test)))) + 16;
    auto embed = [&](const Eigen::MatrixXd& m) {
        Eigen::MatrixXd out = Eigen::MatrixXd::Zero(big, big);
        out.topLeftCorner(dim, dim) = m;
        return out;
    };
    const fock::FockOperator U = fock::squeeze_matrix(r_test, big - 1);
    GammaTriple rotated;
    Eigen::MatrixXd g0 = U.entries.transpose() * embed(gammas.gamma0.entries) * U.entries;
    Eigen::MatrixXd g1 = U.entries.transpose() * embed(gammas.gamma1.entries) * U.entries;
    g0 = 0.5 * (g0 + g0.transpose()).eval();
    g1 = 0.5 * (g1 + g1.transpose()).eval();
    rotated.gamma0 = fock::make_operator(std::move(g0), true);
    rotated.gamma1 = fock::make_operator(std::move(g1), true);
    rotated.gamma2_trace = gammas.gamma2_trace;
    const double after = solve_estimator(rotated).mmse;
    return {before, after};
}

struct AutoCutoffResult {
    int cutoff = 0;
    PersonickSolution solution;
    bool converged = false;
    bool capped = false;
    double last_relative_change = 0.0;
};

/// Double the cutoff until the MMSE is stable to rel_tol (relative), starting
/// 10 levels above the Fock support of the prior's 3-sigma amplitude. The cap
/// bounds the returned cutoff, not the convergence probe: when the ladder
/// would pass the cap, the cap itself is certified against its own doubling
/// and flagged capped only if that fails.
inline AutoCutoffResult auto_cutoff(const Prior& prior, const QuadratureSpec& spec = {}, double rel_tol = 1e-6,
                                    int max_cutoff = 256) {
    const PriorMoments pm = moments(prior);
    const double alpha = (std::abs(pm.mean) + 3.0 * std::sqrt(pm.variance)) / std::sqrt(2.0);
    int c = static_cast<int>(std::ceil(alpha * alpha + 4.0 * alpha)) + 10;
    c = std::clamp(c, 12, max_cutoff);

    auto probe_mmse = [&](int cutoff) {
        return solve_estimator(build_gamma_numeric(prior, cutoff, spec), 1e-13, false).mmse;
    };

    AutoCutoffResult res;
    double mmse_c = probe_mmse(c);
    while (true) {
        const int c2 = 2 * c;
        if (c2 > max_cutoff) {
            if (c < max_cutoff) {
                c = max_cutoff;
                mmse_c = probe_mmse(c);
            }
            const double probe = probe_mmse(2 * c);
            res.last_relative_change = std::abs(probe - mmse_c) / std::max(std::abs(probe), 1e-30);
            res.converged = res.last_relative_change < rel_tol;
            res.capped = !res.converged;
            break;
        }
        const double probe = probe_mmse(c2);
        res.last_relative_change = std::abs(probe - mmse_c) / std::max(std::abs(probe), 1e-30);
        if (res.last_relative_change < rel_tol) {
            res.converged = true;
            break;
        }
        c = c2;
        mmse_c = probe;
    }
    res.cutoff = c;
    res.solution = solve_estimator(build_gamma_numeric(prior, c, spec));
    return res;
}

/// Series analogue of auto_cutoff for the half-Gaussian closed-form path.
inline int series_cutoff(double sigma, double rel_tol = 1e-6, int max_cutoff = 256) {
    int c = 16;
    double cur = mmse_half_gaussian_series(sigma, c);
    while (2 * c <= max_cutoff) {
        const double next = mmse_half_gaussian_series(sigma, 2 * c);
        if (std::abs(next - cur) / std::max(std::abs(next), 1e-30) < rel_tol) return c;
        c *= 2;
        cur = next;
    }
    return c;
}

}  // namespace personick
}  // namespace qsep
