#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <vector>

#include "bdarch/dirichlet.hpp"
#include "bdarch/inference.hpp"
#include "bdarch/posterior.hpp"
#include "bdarch/random.hpp"

namespace bdarch {

/// Which posterior mean is reported as the point forecast.
enum class PointKind {
    MeanOfMu,       // average over draws of mu_{T+s}
    MeanOfSampled,  // average over draws of the simulated y_{T+s}
};

struct ForecastResult {
    std::size_t horizon = 0;
    std::size_t components = 0;
    /// y[s] and mu[s]: valid draws x J at step T+s+1.
    std::vector<Eigen::MatrixXd> y;
    std::vector<Eigen::MatrixXd> mu;
    Eigen::MatrixXd point;  // S x J
    PointKind point_kind = PointKind::MeanOfMu;
    std::size_t invalid_paths = 0;
    std::size_t resampled_paths = 0;

    [[nodiscard]] std::size_t n_draws() const { return y.empty() ? 0 : static_cast<std::size_t>(y.front().rows()); }
};

struct IntervalBounds {
    Eigen::MatrixXd lower;  // S x J
    Eigen::MatrixXd upper;
    double level = 0.95;
    /// Set when fewer than 100 draws back the quantiles.
    bool few_draws = false;
};

namespace detail {

/// One predictive path for fixed theta. Returns false on a domain failure (log phi out of range).
inline bool simulate_path(const ModelSpec& spec, const ParamVector& p, const DesignMatrices& designs, const PreparedSeries& hist,
                          const LatentPath& fitted, std::size_t S, Rng& rng, Eigen::MatrixXd& y_out, Eigen::MatrixXd& mu_out) {
    const std::size_t T = hist.length();
    const auto d = static_cast<Eigen::Index>(spec.dim());
    const std::size_t J = spec.components;
    const std::size_t ref = hist.reference;
    const auto total = static_cast<Eigen::Index>(T + S);

    Eigen::MatrixXd ytil(d, total), c(d, total), e(d, total);
    Eigen::VectorXd dev = Eigen::VectorXd::Zero(total);
    for (std::size_t t = 0; t < T + S; ++t) designs.mean_offset(t, p.beta, c.col(static_cast<Eigen::Index>(t)).data());
    for (std::size_t t = 0; t < T; ++t) {
        const auto tt = static_cast<Eigen::Index>(t);
        ytil.col(tt) = hist.alr.col(tt);
        e.col(tt) = hist.alr.col(tt) - fitted.eta.row(tt).transpose();
        if (spec.dirichlet()) dev[tt] = fitted.log_phi[tt] - designs.precision_offset(t, p.gamma);
    }
    y_out.resize(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(J));
    mu_out.resize(static_cast<Eigen::Index>(S), static_cast<Eigen::Index>(J));
    Eigen::VectorXd eta(d), mu(static_cast<Eigen::Index>(J)), z(d);
    for (std::size_t s = 0; s < S; ++s) {
        const auto t = static_cast<Eigen::Index>(T + s);
        eta = c.col(t);
        for (std::size_t q = 0; q < p.A.size(); ++q) {
            const Eigen::Index k = t - 1 - static_cast<Eigen::Index>(q);
            eta.noalias() += p.A[q] * (ytil.col(k) - c.col(k));
        }
        for (std::size_t q = 0; q < p.B.size(); ++q) eta.noalias() += p.B[q] * e.col(t - 1 - static_cast<Eigen::Index>(q));
        if (!eta.allFinite()) return false;
        detail::alr_inv_into(eta.data(), spec.dim(), ref, mu.data());
        Composition draw;
        if (spec.dirichlet()) {
            double dv = 0.0;
            for (Eigen::Index l = 0; l < p.alpha.size(); ++l) dv += p.alpha[l] * dev[t - 1 - l];
            for (Eigen::Index k = 0; k < p.tau.size(); ++k) dv += p.tau[k] * e.col(t - 1 - k).squaredNorm();
            dev[t] = dv;
            const double log_phi = designs.precision_offset(static_cast<std::size_t>(t), p.gamma) + dv;
            if (!(std::abs(log_phi) <= kLogPrecisionBound)) return false;
            draw = dirichlet::sample({Composition::trusted(mu), std::exp(log_phi)}, rng);
        } else {
            for (Eigen::Index i = 0; i < d; ++i) z[i] = standard_normal(rng);
            Eigen::VectorXd draw_alr = eta + p.sigma * (p.omega_chol * z);
            draw = alr_inv(AlrVector{draw_alr, ref});
        }
        ytil.col(t) = alr(draw, ref).values;
        e.col(t) = ytil.col(t) - eta;
        y_out.row(static_cast<Eigen::Index>(s)) = draw.values().transpose();
        mu_out.row(static_cast<Eigen::Index>(s)) = mu.transpose();
    }
    return true;
}

}  // namespace detail

/**
 * Joint posterior predictive simulation of the next S compositions.
 *
 * `designs` must cover the history followed by the S future steps (build them with
 * the same time anchor so seasonal phase continues). Each retained draw rolls the
 * mean and precision recursions forward, sampling y at each step and feeding it
 * back into later lags. Draw k uses its own stream derived from one value of `rng`,
 * so results do not depend on evaluation order. A path that fails is retried once
 * with a fresh stream, then excluded and counted.
 */
inline ForecastResult predict(const ModelSpec& spec, const PosteriorDraws& draws, const CompositionalSeries& series,
                              const DesignMatrices& designs, std::size_t S, Rng& rng, PointKind kind = PointKind::MeanOfMu) {
    if (S == 0) throw ConfigError("forecast horizon must be positive");
    const std::size_t T = series.length();
    if (designs.rows() < T + S) throw ConfigError("designs do not cover the forecast horizon");
    const Posterior history(spec, Priors{}, series, designs.slice(0, T));
    const ParamLayout& layout = history.layout();
    if (static_cast<std::size_t>(draws.draws.cols()) != layout.size()) throw ConfigError("draws do not match the model layout");

    const std::uint64_t base = rng();
    const auto n = static_cast<std::size_t>(draws.draws.rows());
    std::vector<Eigen::MatrixXd> ys, mus;
    ForecastResult out;
    out.horizon = S;
    out.components = spec.components;
    out.point_kind = kind;
    for (std::size_t k = 0; k < n; ++k) {
        const ParamVector p = layout.unflatten(draws.draws.row(static_cast<Eigen::Index>(k)).transpose());
        const LatentPath fitted = history.latent_path(p);
        Eigen::MatrixXd y, mu;
        bool ok = false;
        for (std::uint64_t attempt = 0; attempt < 2 && !ok; ++attempt) {
            Rng path_rng = make_stream(base, 2 * k + attempt);
            ok = detail::simulate_path(spec, p, designs, history.data(), fitted, S, path_rng, y, mu);
            if (!ok && attempt == 0) ++out.resampled_paths;
        }
        if (!ok) {
            ++out.invalid_paths;
            continue;
        }
        ys.push_back(std::move(y));
        mus.push_back(std::move(mu));
    }
    if (ys.empty()) throw DomainError("every forecast path failed");
    const auto m = static_cast<Eigen::Index>(ys.size());
    const auto J = static_cast<Eigen::Index>(spec.components);
    out.y.assign(S, Eigen::MatrixXd(m, J));
    out.mu.assign(S, Eigen::MatrixXd(m, J));
    out.point = Eigen::MatrixXd::Zero(static_cast<Eigen::Index>(S), J);
    for (Eigen::Index k = 0; k < m; ++k)
        for (std::size_t s = 0; s < S; ++s) {
            out.y[s].row(k) = ys[static_cast<std::size_t>(k)].row(static_cast<Eigen::Index>(s));
            out.mu[s].row(k) = mus[static_cast<std::size_t>(k)].row(static_cast<Eigen::Index>(s));
        }
    for (std::size_t s = 0; s < S; ++s)
        out.point.row(static_cast<Eigen::Index>(s)) =
            (kind == PointKind::MeanOfMu ? out.mu[s] : out.y[s]).colwise().mean();
    return out;
}

/// 1-based nearest-rank order statistics for a central interval: (lower, n + 1 - lower).
inline std::pair<std::size_t, std::size_t> interval_ranks(std::size_t n, double level) {
    if (!(level > 0.0 && level < 1.0)) throw ConfigError("interval level must lie in (0, 1)");
    const double tail = static_cast<double>(n) * (1.0 - level) / 2.0;
    std::size_t lower = static_cast<std::size_t>(std::max(1.0, std::ceil(tail - 1e-9)));
    lower = std::min(lower, (n + 1) / 2);
    return {lower, n + 1 - lower};
}

/// Equal-tailed empirical interval of the simulated y per (step, component).
inline IntervalBounds interval(const ForecastResult& result, double level) {
    const std::size_t n = result.n_draws();
    if (n == 0) throw DomainError("interval: no draws");
    const auto [lo, hi] = interval_ranks(n, level);
    IntervalBounds b;
    b.level = level;
    b.few_draws = n < 100;
    const auto S = static_cast<Eigen::Index>(result.horizon);
    const auto J = static_cast<Eigen::Index>(result.components);
    b.lower.resize(S, J);
    b.upper.resize(S, J);
    std::vector<double> col(n);
    for (Eigen::Index s = 0; s < S; ++s)
        for (Eigen::Index j = 0; j < J; ++j) {
            for (std::size_t k = 0; k < n; ++k) col[k] = result.y[static_cast<std::size_t>(s)](static_cast<Eigen::Index>(k), j);
            std::sort(col.begin(), col.end());
            b.lower(s, j) = col[lo - 1];
            b.upper(s, j) = col[hi - 1];
        }
    return b;
}

}  // namespace bdarch
