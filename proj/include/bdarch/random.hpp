#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace bdarch {

using Rng = std::mt19937_64;

namespace detail {
inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}
}  // namespace detail

/// Independent generator for (seed, stream); streams are derived by hashing, so
/// stream k does not depend on how many other streams exist or in what order they run.
inline Rng make_stream(std::uint64_t seed, std::uint64_t stream) {
    const std::uint64_t a = detail::splitmix64(seed ^ detail::splitmix64(stream + 0x632be59bd9b4e019ULL));
    const std::uint64_t b = detail::splitmix64(a);
    std::seed_seq seq{static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(a >> 32),
                      static_cast<std::uint32_t>(b), static_cast<std::uint32_t>(b >> 32)};
    return Rng(seq);
}

/// Uniform on the open interval (0, 1).
inline double uniform01(Rng& rng) {
    for (;;) {
        const double u = std::generate_canonical<double, 53>(rng);
        if (u > 0.0) return u;
    }
}

inline double uniform(Rng& rng, double lo, double hi) { return lo + (hi - lo) * uniform01(rng); }

/// Standard normal via the Marsaglia polar method (stateless: the paired value is discarded).
inline double standard_normal(Rng& rng) {
    for (;;) {
        const double u = 2.0 * uniform01(rng) - 1.0;
        const double v = 2.0 * uniform01(rng) - 1.0;
        const double s = u * u + v * v;
        if (s > 0.0 && s < 1.0) return u * std::sqrt(-2.0 * std::log(s) / s);
    }
}

inline double normal(Rng& rng, double mean, double sd) { return mean + sd * standard_normal(rng); }

/**
 * Log of a Gamma(shape, 1) draw.
 *
 * Marsaglia-Tsang squeeze for shape >= 1. For shape < 1 uses the boost
 * G(a) = G(a + 1) * U^(1/a), kept on the log scale so very small shapes
 * do not underflow to zero.
 */
inline double log_gamma_draw(Rng& rng, double shape) {
    if (shape < 1.0) {
        return log_gamma_draw(rng, shape + 1.0) + std::log(uniform01(rng)) / shape;
    }
    const double d = shape - 1.0 / 3.0;
    const double c = 1.0 / std::sqrt(9.0 * d);
    for (;;) {
        double x = 0.0;
        double v = 0.0;
        do {
            x = standard_normal(rng);
            v = 1.0 + c * x;
        } while (v <= 0.0);
        v = v * v * v;
        const double u = uniform01(rng);
        const double x2 = x * x;
        if (u < 1.0 - 0.0331 * x2 * x2) return std::log(d * v);
        if (std::log(u) < 0.5 * x2 + d * (1.0 - v + std::log(v))) return std::log(d * v);
    }
}

inline double gamma_draw(Rng& rng, double shape) { return std::exp(log_gamma_draw(rng, shape)); }

inline int poisson(Rng& rng, double mean) { return std::poisson_distribution<int>(mean)(rng); }

inline std::size_t uniform_index(Rng& rng, std::size_t lo, std::size_t hi) {
    return std::uniform_int_distribution<std::size_t>(lo, hi)(rng);
}

}  // namespace bdarch
