// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <sstream>
#include <stdexcept>
#include <string>
#include <variant>

namespace qsep {

/// Scaled complementary error function erfcx(x) = e^{x^2} erfc(x).
/// Direct product for moderate x, asymptotic continued-fraction tail for
/// large x, reflection for negative x (saturates to +inf once e^{x^2}
/// overflows, which callers treat as h -> 0).
inline double erfcx(double x) {
    if (x >= 8.0) {
        // asymptotic series 1/(x sqrt(pi)) sum_k (-1)^k (2k-1)!!/(2x^2)^k;
        // the direct product degrades past here as erfc loses relative digits
        const double ix2 = 1.0 / (2.0 * x * x);
        double s = 1.0, term = 1.0;
        for (int k = 1; k <= 20; ++k) {
            term *= -(2.0 * k - 1.0) * ix2;
            s += term;
            if (std::abs(term) < 1e-18) break;
        }
        return s / (x * std::sqrt(M_PI));
    }
    if (x >= 0.0) return std::exp(x * x) * std::erfc(x);
    if (x < -26.0) return std::numeric_limits<double>::infinity();
    return 2.0 * std::exp(x * x) - erfcx(-x);
}

namespace detail {
/// Inverse Mills ratio h(z) = phi(z)/Phi(z) for the standard normal,
/// stable over the whole real line via erfcx.
inline double mills_h(double z) {
    return std::sqrt(2.0 / M_PI) / erfcx(-z / std::sqrt(2.0));
}
}  // namespace detail

struct PriorMoments {
    double mean = 0.0;
    double variance = 0.0;
    double second_moment = 0.0;
};

/// P(q) = 2/(sigma sqrt(2 pi)) e^{-q^2/(2 sigma^2)} on q >= 0.
struct HalfGaussianPrior {
    double sigma;

    explicit HalfGaussianPrior(double sigma_) : sigma(sigma_) {
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw std::invalid_argument("HalfGaussianPrior: sigma must be positive and finite");
    }

    double pdf(double q) const {
        if (q < 0.0) throw std::invalid_argument("HalfGaussianPrior::pdf: q must be >= 0");
        return 2.0 / (sigma * std::sqrt(2.0 * M_PI)) * std::exp(-q * q / (2.0 * sigma * sigma));
    }

    PriorMoments moments() const {
        const double mean = sigma * std::sqrt(2.0 / M_PI);
        return {mean, sigma * sigma * (1.0 - 2.0 / M_PI), sigma * sigma};
    }
};

/// P(q) = e^{-(q-mu)^2/(2 sigma^2)} / G on q >= 0 with
/// G = sqrt(pi/2) sigma (1 + erf(mu/(sqrt(2) sigma))). Normalization, mean
/// and variance are cached in the stable log/Mills form so that deeply
/// negative mu (exponential-like truncated tails) stays well-defined.
struct DisplacedHalfGaussianPrior {
    double mu;
    double sigma;
    double log_G;
    double mu_t;
    double sigma_t2;
    double m2;

    DisplacedHalfGaussianPrior(double mu_, double sigma_) : mu(mu_), sigma(sigma_) {
        if (!(sigma > 0.0) || !std::isfinite(sigma) || !std::isfinite(mu))
            throw std::invalid_argument("DisplacedHalfGaussianPrior: invalid parameters");
        const double z = mu / sigma;
        const double h = detail::mills_h(z);
        mu_t = mu + sigma * h;
        sigma_t2 = sigma * sigma * (1.0 - z * h - h * h);
        m2 = sigma * sigma + mu * mu + mu * sigma * h;
        // log G = log(sqrt(pi/2) sigma) + log erfc(-z/sqrt 2); the z < 0 side
        // goes through erfcx to survive deep truncation.
        if (z >= 0.0) {
            log_G = std::log(std::sqrt(M_PI / 2.0) * sigma) + std::log1p(std::erf(z / std::sqrt(2.0)));
        } else {
            log_G = std::log(std::sqrt(M_PI / 2.0) * sigma) + std::log(erfcx(-z / std::sqrt(2.0))) -
                    0.5 * z * z;
        }
        if (!(sigma_t2 > 0.0)) sigma_t2 = std::max(sigma_t2, 1e-300);
    }

    double normalization() const { return std::exp(log_G); }

    double pdf(double q) const {
        if (q < 0.0) throw std::invalid_argument("DisplacedHalfGaussianPrior::pdf: q must be >= 0");
        const double d = (q - mu) / sigma;
        return std::exp(-0.5 * d * d - log_G);
    }

    PriorMoments moments() const { return {mu_t, sigma_t2, m2}; }
};

/// Zero-mean Gaussian on the whole real line (single-source reference prior).
struct FullGaussianPrior {
    double sigma;

    explicit FullGaussianPrior(double sigma_) : sigma(sigma_) {
        if (!(sigma > 0.0) || !std::isfinite(sigma))
            throw std::invalid_argument("FullGaussianPrior: sigma must be positive and finite");
    }

    double pdf(double q) const {
        return std::exp(-q * q / (2.0 * sigma * sigma)) / (sigma * std::sqrt(2.0 * M_PI));
    }

    PriorMoments moments() const { return {0.0, sigma * sigma, sigma * sigma}; }
};

using Prior = std::variant<HalfGaussianPrior, DisplacedHalfGaussianPrior, FullGaussianPrior>;

inline double pdf(const Prior& prior, double q) {
    return std::visit([q](const auto& p) { return p.pdf(q); }, prior);
}

inline PriorMoments moments(const Prior& prior) {
    return std::visit([](const auto& p) { return p.moments(); }, prior);
}

inline bool is_half_line(const Prior& prior) {
    return !std::holds_alternative<FullGaussianPrior>(prior);
}

/// Upper integration cut: mu^+ + 13 sigma + 2 puts the discarded prior tail
/// below the e^{-72} underflow guard with margin for the q^2 weight. Deeply
/// displaced priors (mu << 0) decay on the exponential scale sigma^2/|mu|,
/// not sigma, so the cut is capped at mean + 40 sd there.
inline double support_cut(const Prior& prior) {
    return std::visit(
        [](const auto& p) {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, DisplacedHalfGaussianPrior>) {
                const double gaussian_cut = std::max(p.mu, 0.0) + 13.0 * p.sigma + 2.0;
                const double moment_cut = p.mu_t + 40.0 * std::sqrt(p.sigma_t2) + 2.0;
                return std::min(gaussian_cut, moment_cut);
            } else {
                return 13.0 * p.sigma + 2.0;
            }
        },
        prior);
}

/// Thrown when no (mu, sigma) reproduces the requested (mu_t, sigma_t^2).
class UnattainableTargetError : public std::runtime_error {
  public:
    UnattainableTargetError(const std::string& msg, double res_mean, double res_var)
        : std::runtime_error(msg), residual_mean_(res_mean), residual_variance_(res_var) {}
    double residual_mean() const { return residual_mean_; }
    double residual_variance() const { return residual_variance_; }

  private:
    double residual_mean_;
    double residual_variance_;
};

/// Solve moments(DisplacedHalfGaussian(mu, sigma)) = (target_mu_t, target_sigma_t2)
/// by damped Newton in (mu, log sigma) with a numeric Jacobian. mu may go
/// negative; the family only reaches mean/sd ratios above 1, so targets at or
/// below that ratio are reported as unattainable rather than clamped.
inline DisplacedHalfGaussianPrior invert_moments(double target_mu_t, double target_sigma_t2) {
    if (!(target_mu_t > 0.0) || !(target_sigma_t2 > 0.0))
        throw std::invalid_argument("invert_moments: targets must be positive");
    const double ratio = target_mu_t / std::sqrt(target_sigma_t2);
    if (ratio <= 1.0 + 1e-9) {
        std::ostringstream os;
        os << "invert_moments: target mean/sd ratio " << ratio
           << " is at or below the attainable limit 1 of the displaced half-Gaussian family";
        throw UnattainableTargetError(os.str(), target_mu_t, target_sigma_t2);
    }

    double mu = target_mu_t;
    double ls = 0.5 * std::log(target_sigma_t2);
    auto residual = [&](double m, double l, double& rm, double& rv) {
        const DisplacedHalfGaussianPrior p(m, std::exp(l));
        rm = p.mu_t - target_mu_t;
        rv = p.sigma_t2 - target_sigma_t2;
    };

    double rm, rv;
    residual(mu, ls, rm, rv);
    for (int iter = 0; iter < 200; ++iter) {
        if (std::abs(rm) <= 1e-11 * std::max(1.0, target_mu_t) &&
            std::abs(rv) <= 1e-11 * std::max(1.0, target_sigma_t2)) {
            return DisplacedHalfGaussianPrior(mu, std::exp(ls));
        }
        const double h1 = 1e-7 * std::max(1.0, std::abs(mu));
        const double h2 = 1e-7;
        double rm1, rv1, rm2, rv2;
        residual(mu + h1, ls, rm1, rv1);
        residual(mu, ls + h2, rm2, rv2);
        const double j11 = (rm1 - rm) / h1, j12 = (rm2 - rm) / h2;
        const double j21 = (rv1 - rv) / h1, j22 = (rv2 - rv) / h2;
        const double det = j11 * j22 - j12 * j21;
        if (std::abs(det) < 1e-300) break;
        const double dmu = (j22 * rm - j12 * rv) / det;
        const double dls = (-j21 * rm + j11 * rv) / det;
        double step = 1.0;
        const double r0 = std::hypot(rm, rv);
        bool accepted = false;
        for (int bt = 0; bt < 60; ++bt) {
            double trm, trv;
            const double tls = ls - step * dls;
            if (tls > -700.0 && tls < 700.0) {
                residual(mu - step * dmu, tls, trm, trv);
                if (std::hypot(trm, trv) < r0) {
                    mu -= step * dmu;
                    ls = tls;
                    rm = trm;
                    rv = trv;
                    accepted = true;
                    break;
                }
            }
            step *= 0.5;
        }
        if (!accepted) break;
    }
    if (std::abs(rm) <= 1e-9 * std::max(1.0, target_mu_t) && std::abs(rv) <= 1e-9 * std::max(1.0, target_sigma_t2)) {
        return DisplacedHalfGaussianPrior(mu, std::exp(ls));
    }
    std::ostringstream os;
    os << "invert_moments: Newton iteration stalled; residuals mean=" << rm << " variance=" << rv;
    throw UnattainableTargetError(os.str(), rm, rv);
}

// ---------------------------------------------------------------------------
// Sampling. Explicit algorithms on top of a raw 64-bit generator so seeded
// runs are reproducible independent of standard-library distribution details.

namespace rng {

inline double uniform01(std::mt19937_64& g) {
    return (g() >> 11) * (1.0 / 9007199254740992.0);  // 53-bit mantissa in [0,1)
}

inline double normal(std::mt19937_64& g) {
    // Marsaglia polar method
    while (true) {
        const double u = 2.0 * uniform01(g) - 1.0;
        const double v = 2.0 * uniform01(g) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

inline std::uint64_t poisson(double lambda, std::mt19937_64& g) {
    if (lambda <= 0.0) return 0;
    if (lambda < 30.0) {
        const double L = std::exp(-lambda);
        std::uint64_t k = 0;
        double p = 1.0;
        do {
            ++k;
            p *= uniform01(g);
        } while (p > L);
        return k - 1;
    }
    // split recursively: Poisson(a+b) = Poisson(a) + Poisson(b)
    return poisson(lambda * 0.5, g) + poisson(lambda - lambda * 0.5, g);
}

/// Standard normal truncated to [a, +inf): plain rejection for a <= 0.3,
/// Robert's exponential-rejection otherwise.
inline double truncated_std_normal(double a, std::mt19937_64& g) {
    if (a <= 0.3) {
        while (true) {
            const double x = normal(g);
            if (x >= a) return x;
        }
    }
    const double lam = 0.5 * (a + std::sqrt(a * a + 4.0));
    while (true) {
        const double e = -std::log(1.0 - uniform01(g)) / lam;
        const double x = a + e;
        const double d = x - lam;
        if (uniform01(g) <= std::exp(-0.5 * d * d)) return x;
    }
}

}  // namespace rng

/// Draw one separation sample from the prior.
inline double sample(const Prior& prior, std::mt19937_64& g) {
    return std::visit(
        [&g](const auto& p) -> double {
            using T = std::decay_t<decltype(p)>;
            if constexpr (std::is_same_v<T, HalfGaussianPrior>) {
                return std::abs(p.sigma * rng::normal(g));
            } else if constexpr (std::is_same_v<T, FullGaussianPrior>) {
                return p.sigma * rng::normal(g);
            } else {
                const double a = -p.mu / p.sigma;
                return p.mu + p.sigma * rng::truncated_std_normal(a, g);
            }
        },
        prior);
}

}  // namespace qsep
