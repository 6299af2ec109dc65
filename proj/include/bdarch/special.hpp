#pragma once

#include <array>
#include <cmath>
#include <limits>
#include <numbers>

namespace bdarch::special {

/**
 * Natural log of the gamma function for x > 0.
 *
 * Lanczos approximation (g = 7, 9 terms) evaluated directly in log form, with
 * the reflection formula below 0.5. Never forms Gamma(x) itself, so large
 * arguments do not overflow.
 */
inline double lgamma(double x) {
    static constexpr double g = 7.0;
    static constexpr std::array<double, 9> coef = {
        0.99999999999980993,     676.5203681218851,     -1259.1392167224028,
        771.32342877765313,      -176.61502916214059,   12.507343278686905,
        -0.13857109526572012,    9.9843695780195716e-6, 1.5056327351493116e-7};

    if (std::isnan(x)) return x;
    if (x <= 0.0 && x == std::floor(x)) return std::numeric_limits<double>::infinity();
    if (x < 0.5) {
        // Gamma(x) Gamma(1 - x) = pi / sin(pi x)
        return std::log(std::numbers::pi / std::abs(std::sin(std::numbers::pi * x))) - lgamma(1.0 - x);
    }
    if (x == 1.0 || x == 2.0) return 0.0;
    const double xm1 = x - 1.0;
    double sum = coef[0];
    for (std::size_t i = 1; i < coef.size(); ++i) sum += coef[i] / (xm1 + static_cast<double>(i));
    const double t = xm1 + g + 0.5;
    return 0.5 * std::log(2.0 * std::numbers::pi) + (xm1 + 0.5) * std::log(t) - t + std::log(sum);
}

/// Digamma (derivative of lgamma) for x > 0: upward recurrence then the asymptotic series.
inline double digamma(double x) {
    if (std::isnan(x)) return x;
    if (x <= 0.0) return std::numeric_limits<double>::quiet_NaN();
    double shift = 0.0;
    while (x < 10.0) {
        shift -= 1.0 / x;
        x += 1.0;
    }
    const double inv = 1.0 / x;
    const double inv2 = inv * inv;
    // Bernoulli-number tail: 1/12, 1/120, 1/252, 1/240, 1/132, 691/32760
    const double tail =
        inv2 * (1.0 / 12 - inv2 * (1.0 / 120 - inv2 * (1.0 / 252 - inv2 * (1.0 / 240 - inv2 * (1.0 / 132 - inv2 * 691.0 / 32760)))));
    return shift + std::log(x) - 0.5 * inv - tail;
}

inline double lbeta(double a, double b) { return lgamma(a) + lgamma(b) - lgamma(a + b); }

inline double log_sum_exp(double a, double b) {
    if (a == -std::numeric_limits<double>::infinity()) return b;
    if (b == -std::numeric_limits<double>::infinity()) return a;
    const double hi = std::max(a, b);
    return hi + std::log1p(std::exp(-std::abs(a - b)));
}

inline constexpr double log_sqrt_two_pi = 0.91893853320467274178;

/// Log density of N(mean, sd^2) at x.
inline double normal_lpdf(double x, double mean, double sd) {
    const double z = (x - mean) / sd;
    return -0.5 * z * z - std::log(sd) - log_sqrt_two_pi;
}

}  // namespace bdarch::special
