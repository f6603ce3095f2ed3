// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <Eigen/Dense>
#include <unsupported/Eigen/MatrixFunctions>

#include <cmath>
#include <iostream>
#include <stdexcept>

namespace qsep {
namespace fock {

/// State vector in the photon-number basis truncated at `cutoff`.
/// All states produced here are real (amplitudes along the position
/// quadrature only).
struct FockVector {
    Eigen::VectorXd amplitudes;
    int cutoff = 0;

    int dim() const { return cutoff + 1; }

    /// Probability mass lost to truncation, 1 - sum a_n^2.
    double tail_mass() const { return 1.0 - amplitudes.squaredNorm(); }
};

/// Dense operator on the truncated number basis. `hermitian` records the
/// constructor's claim and is checked against the entries.
struct FockOperator {
    Eigen::MatrixXd entries;
    int cutoff = 0;
    bool hermitian = false;

    int dim() const { return cutoff + 1; }
};

inline void check_finite(const Eigen::MatrixXd& m, const char* where) {
    if (!m.allFinite()) throw std::invalid_argument(std::string(where) + ": non-finite entries");
}

/// Wrap a matrix as a FockOperator, validating the hermitian claim
/// (max |M - M^T| <= 1e-12) and finiteness.
inline FockOperator make_operator(Eigen::MatrixXd m, bool hermitian) {
    check_finite(m, "make_operator");
    if (m.rows() != m.cols()) throw std::invalid_argument("make_operator: matrix must be square");
    if (hermitian) {
        const double asym = (m - m.transpose()).cwiseAbs().maxCoeff();
        if (asym > 1e-12) throw std::invalid_argument("make_operator: hermitian flag set but max|M - M^T| > 1e-12");
    }
    FockOperator op;
    op.cutoff = static_cast<int>(m.rows()) - 1;
    op.entries = std::move(m);
    op.hermitian = hermitian;
    return op;
}

/// Coherent-state amplitudes <n|alpha> with alpha = q_alpha / sqrt(2):
///   a_n = e^{-alpha^2/2} alpha^n / sqrt(n!),
/// built by the ratio recurrence so every intermediate stays <= 1.
inline FockVector coherent_vector(double q_alpha, int cutoff) {
    if (!std::isfinite(q_alpha)) throw std::invalid_argument("coherent_vector: q_alpha must be finite");
    if (cutoff < 0) throw std::invalid_argument("coherent_vector: cutoff must be >= 0");
    const double alpha = q_alpha / std::sqrt(2.0);
    Eigen::VectorXd a(cutoff + 1);
    a[0] = std::exp(-0.5 * alpha * alpha);
    for (int n = 1; n <= cutoff; ++n) a[n] = a[n - 1] * alpha / std::sqrt(static_cast<double>(n));
    return {std::move(a), cutoff};
}

/// Density matrix of the symmetric two-source state
///   rho = 1/2 |alpha><alpha| + 1/2 |-alpha><-alpha|,  alpha = q_alpha/sqrt(2) >= 0.
/// Entries with n+m odd cancel between the two branches and are set to zero
/// exactly; even entries equal a_n a_m.
inline FockOperator two_source_density(double q_alpha, int cutoff) {
    if (!(q_alpha >= 0.0)) throw std::invalid_argument("two_source_density: q_alpha must be >= 0");
    const FockVector c = coherent_vector(q_alpha, cutoff);
    Eigen::MatrixXd rho = c.amplitudes * c.amplitudes.transpose();
    for (int n = 0; n <= cutoff; ++n)
        for (int m = 0; m <= cutoff; ++m)
            if ((n + m) % 2 != 0) rho(n, m) = 0.0;
    return make_operator(std::move(rho), true);
}

/// Ladder operator, entry (n, n+1) = sqrt(n+1). Not hermitian.
inline FockOperator annihilation(int cutoff) {
    if (cutoff < 0) throw std::invalid_argument("annihilation: cutoff must be >= 0");
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(cutoff + 1, cutoff + 1);
    for (int n = 0; n < cutoff; ++n) a(n, n + 1) = std::sqrt(n + 1.0);
    FockOperator op;
    op.entries = std::move(a);
    op.cutoff = cutoff;
    op.hermitian = false;
    return op;
}

namespace detail {

/// exp[(r/2)(adag^2 - a^2)] on an untruncated-window dimension `dim`.
inline Eigen::MatrixXd squeeze_generator_exp(double r, int dim) {
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(dim, dim);
    for (int n = 0; n + 1 < dim; ++n) a(n, n + 1) = std::sqrt(n + 1.0);
    Eigen::MatrixXd K = 0.5 * r * (a.transpose() * a.transpose() - a * a);
    return K.exp();
}

/// Internal working dimension so that the returned window of the truncated
/// exponential carries the untruncated matrix elements to roundoff.
/// A squeezed number state |m> spreads to about m e^{2|r|} + O(e^{|r|} sqrt m)
/// levels; padding past that keeps the window leakage-free.
inline int squeeze_pad_dim(double r, int cutoff) {
    const double ar = std::abs(r);
    const double need = (cutoff + 1) * std::exp(2.0 * ar) + 8.0 * std::exp(ar) * std::sqrt(cutoff + 1.0) + 24.0;
    return static_cast<int>(std::min(need, 4096.0));
}

}  // namespace detail

/// Residual of U^T U = I over the interior block of columns. A squeezed
/// number state |m> spreads to about m e^{2|r|} levels, so the interior ends
/// where that spread still fits the window: m <= (cutoff+1) e^{-2|r|} / 2.
/// For the windowed exact operator the defect measures squeezed-state mass
/// the window cannot hold.
inline double squeeze_unitarity_defect(const FockOperator& U, double r) {
    const int b = std::max(1, static_cast<int>((U.cutoff + 1) * std::exp(-2.0 * std::abs(r)) / 2.0)) + 1;
    const int bb = std::min(b, U.cutoff + 1);
    Eigen::MatrixXd g = U.entries.transpose() * U.entries;
    return (g.topLeftCorner(bb, bb) - Eigen::MatrixXd::Identity(bb, bb)).cwiseAbs().maxCoeff();
}

/// Single-mode squeezing matrix <n|U(r)|m> with Heisenberg action
///   U(r) a U(r)^dag = a cosh r - adag sinh r,
/// i.e. U(r) = exp[(r/2)(adag^2 - a^2)]; U(r)|0> is stretched along the
/// position quadrature for r > 0. Built as the matrix exponential on an
/// internally padded space and cut back, so the returned entries are the
/// untruncated elements up to roundoff. Warns on stderr when the window is
/// too small to hold the squeezed states it claims to represent.
inline FockOperator squeeze_matrix(double r, int cutoff) {
    if (!(std::abs(r) <= 5.0)) throw std::invalid_argument("squeeze_matrix: |r| must be <= 5");
    if (cutoff < 0) throw std::invalid_argument("squeeze_matrix: cutoff must be >= 0");
    const int pad = detail::squeeze_pad_dim(r, cutoff);
    Eigen::MatrixXd U = detail::squeeze_generator_exp(r, pad).topLeftCorner(cutoff + 1, cutoff + 1);
    FockOperator op;
    op.entries = std::move(U);
    op.cutoff = cutoff;
    op.hermitian = false;
    const double defect = squeeze_unitarity_defect(op, r);
    if (defect > 1e-8) {
        std::cerr << "qsep: squeeze_matrix(r=" << r << ", cutoff=" << cutoff
                  << "): interior-block unitarity residual " << defect << " exceeds 1e-8\n";
    }
    return op;
}

/// Rows 0..n_rows of <n|U(r)|m> for m = 0..cutoff, via the column recurrence
/// of U(-r) (rows of U are columns of its transpose):
///   col_m(U) = (cosh r adag - sinh r a) col_{m-1}(U) / sqrt(m),
/// seeded by the squeezed vacuum
///   U(r)|0> = sech^{1/2} r sum_k (tanh r)^k sqrt((2k)!)/(2^k k!) |2k>.
/// The recurrence is exact for the untruncated operator but contaminated by a
/// growing mode after many applications; callers keep n_rows small (~12).
inline Eigen::MatrixXd squeeze_rows(double r, int n_rows, int cutoff) {
    if (n_rows < 0 || cutoff < 0) throw std::invalid_argument("squeeze_rows: negative dimensions");
    const int rows = cutoff + n_rows + 2;  // recurrence pulls one level down per column step
    const double rr = -r;                  // columns of U(-r) are rows of U(r)
    const double t = std::tanh(rr), ch = std::cosh(rr), sh = std::sinh(rr);
    Eigen::MatrixXd C = Eigen::MatrixXd::Zero(rows, n_rows + 1);
    C(0, 0) = 1.0 / std::sqrt(std::cosh(rr));
    for (int k = 1; 2 * k < rows; ++k) C(2 * k, 0) = C(2 * k - 2, 0) * t * std::sqrt((2.0 * k - 1.0) / (2.0 * k));
    for (int m = 1; m <= n_rows; ++m) {
        for (int n = rows - 1; n >= 0; --n) {
            double v = 0.0;
            if (n >= 1) v += ch * std::sqrt(static_cast<double>(n)) * C(n - 1, m - 1);
            if (n + 1 < rows) v -= sh * std::sqrt(n + 1.0) * C(n + 1, m - 1);
            C(n, m) = v / std::sqrt(static_cast<double>(m));
        }
    }
    return C.topRows(cutoff + 1).transpose();  // (n_rows+1) x (cutoff+1)
}

/// Squeezed-thermal parameters of the prior-averaged state for scale sigma:
///   r = ln(2 sigma^2 + 1)/4,  n_bar = (sqrt(2 sigma^2 + 1) - 1)/2,
///   s = n_bar/(n_bar + 1);  cosh r - sinh r = (2 sigma^2 + 1)^{-1/4}.
struct SqueezeParams {
    double r;
    double n_bar;
    double s;
};

inline SqueezeParams squeeze_params(double sigma) {
    if (!(sigma > 0.0)) throw std::invalid_argument("squeeze_params: sigma must be positive");
    const double w = std::sqrt(2.0 * sigma * sigma + 1.0);
    const double n_bar = 0.5 * (w - 1.0);
    return {0.25 * std::log(2.0 * sigma * sigma + 1.0), n_bar, n_bar / (n_bar + 1.0)};
}

struct EighResult {
    Eigen::VectorXd eigenvalues;   // ascending
    Eigen::MatrixXd eigenvectors;  // columns, orthonormal
};

/// Symmetric eigendecomposition. Input must carry the hermitian flag.
inline EighResult eigh(const FockOperator& op) {
    if (!op.hermitian) throw std::invalid_argument("eigh: operator is not flagged hermitian");
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(op.entries);
    if (solver.info() != Eigen::Success) throw std::runtime_error("eigh: eigensolver failed");
    return {solver.eigenvalues(), solver.eigenvectors()};
}

}  // namespace fock
}  // namespace qsep
