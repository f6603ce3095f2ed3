// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <stdexcept>
#include <vector>

namespace qsep {

/// Normalized physicists' Hermite values htilde_n(y) = H_n(y) / sqrt(2^n n!)
/// for n = 0..nmax, by the renormalized three-term recurrence
///   htilde_{n+1} = sqrt(2/(n+1)) y htilde_n - sqrt(n/(n+1)) htilde_{n-1}.
/// Together with the weight e^{-y^2/2} these stay O(1) at any order, which is
/// what makes high-order Hermite integrals evaluable in double precision.
inline std::vector<double> hermite_normalized(double y, int nmax) {
    if (nmax < 0) throw std::invalid_argument("hermite_normalized: nmax must be >= 0");
    std::vector<double> h(nmax + 1);
    h[0] = 1.0;
    if (nmax >= 1) h[1] = std::sqrt(2.0) * y;
    for (int n = 1; n < nmax; ++n) {
        h[n + 1] = std::sqrt(2.0 / (n + 1)) * y * h[n] - std::sqrt(n / (n + 1.0)) * h[n - 1];
    }
    return h;
}

/// Monomial coefficients of the physicists' Hermite polynomial H_n,
/// c[j] = coefficient of y^j. Exact in double for n <= 25; larger orders
/// suffer catastrophic cancellation when summed and are rejected.
inline std::vector<double> hermite_coefficients(int n) {
    if (n < 0) throw std::invalid_argument("hermite_coefficients: n must be >= 0");
    if (n > 25) throw std::invalid_argument("hermite_coefficients: coefficients above n=25 are not exactly representable");
    std::vector<double> prev{1.0};
    if (n == 0) return prev;
    std::vector<double> cur{0.0, 2.0};
    for (int k = 1; k < n; ++k) {
        std::vector<double> next(k + 2, 0.0);
        for (int j = 0; j <= k; ++j) next[j + 1] += 2.0 * cur[j];
        for (int j = 0; j < k; ++j) next[j] -= 2.0 * k * prev[j];
        prev = std::move(cur);
        cur = std::move(next);
    }
    return cur;
}

}  // namespace qsep
