#pragma once

#include <Eigen/Dense>
#include <boost/math/distributions/normal.hpp>

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "bdarch/error.hpp"

namespace bdarch {

/// A diagnostic value with a flag for degenerate input (e.g. a constant parameter).
struct FlaggedValue {
    double value = 0.0;
    bool flagged = false;
};

namespace detail {

inline std::vector<Eigen::VectorXd> split_halves(const std::vector<Eigen::VectorXd>& chains) {
    if (chains.empty()) throw DomainError("diagnostics need at least one chain");
    const Eigen::Index n = chains.front().size();
    for (const auto& c : chains)
        if (c.size() != n) throw DomainError("chains must have equal length");
    if (n < 4) throw DomainError("diagnostics need at least four draws per chain");
    const Eigen::Index half = n / 2;
    std::vector<Eigen::VectorXd> out;
    for (const auto& c : chains) {
        out.emplace_back(c.head(half));
        out.emplace_back(c.tail(half));  // drops the middle draw when n is odd
    }
    return out;
}

/// Average-rank normal scores over the pooled draws: Phi^-1((r - 3/8) / (S + 1/4)).
inline std::vector<Eigen::VectorXd> rank_normalize(const std::vector<Eigen::VectorXd>& chains) {
    std::vector<std::pair<double, std::size_t>> pooled;
    for (std::size_t c = 0; c < chains.size(); ++c)
        for (Eigen::Index i = 0; i < chains[c].size(); ++i)
            pooled.emplace_back(chains[c][i], c * static_cast<std::size_t>(chains[c].size()) + static_cast<std::size_t>(i));
    std::sort(pooled.begin(), pooled.end());
    const double S = static_cast<double>(pooled.size());
    std::vector<double> z(pooled.size());
    const boost::math::normal_distribution<double> std_normal;
    for (std::size_t i = 0; i < pooled.size();) {
        std::size_t j = i;
        while (j < pooled.size() && pooled[j].first == pooled[i].first) ++j;
        const double rank = 0.5 * static_cast<double>(i + 1 + j);  // average of 1-based ranks i+1..j
        const double score = boost::math::quantile(std_normal, (rank - 0.375) / (S + 0.25));
        for (std::size_t k = i; k < j; ++k) z[pooled[k].second] = score;
        i = j;
    }
    std::vector<Eigen::VectorXd> out;
    std::size_t idx = 0;
    for (const auto& c : chains) {
        Eigen::VectorXd v(c.size());
        for (Eigen::Index i = 0; i < c.size(); ++i) v[i] = z[idx++];
        out.push_back(std::move(v));
    }
    return out;
}

/// Multi-chain ESS with Geyer's initial positive and monotone sequence truncation.
inline double ess_multichain(const std::vector<Eigen::VectorXd>& chains) {
    const auto m = static_cast<double>(chains.size());
    const Eigen::Index n = chains.front().size();
    const double nd = static_cast<double>(n);
    std::vector<Eigen::VectorXd> centered;
    Eigen::VectorXd means(static_cast<Eigen::Index>(chains.size()));
    for (std::size_t c = 0; c < chains.size(); ++c) {
        means[static_cast<Eigen::Index>(c)] = chains[c].mean();
        centered.emplace_back(chains[c].array() - chains[c].mean());
    }
    auto mean_acov = [&](Eigen::Index lag) {
        double s = 0.0;
        for (const auto& x : centered) s += x.head(n - lag).dot(x.tail(n - lag)) / nd;
        return s / m;
    };
    const double mean_var = mean_acov(0) * nd / (nd - 1.0);
    double var_plus = mean_var * (nd - 1.0) / nd;
    if (chains.size() > 1) var_plus += (means.array() - means.mean()).square().sum() / (m - 1.0);

    Eigen::VectorXd rho = Eigen::VectorXd::Zero(n);
    double rho_even = 1.0;
    double rho_odd = 1.0 - (mean_var - mean_acov(1)) / var_plus;
    rho[0] = rho_even;
    rho[1] = rho_odd;
    Eigen::Index t = 1, max_t = 1;
    while (t < n - 4 && rho_even + rho_odd > 0.0) {
        rho_even = 1.0 - (mean_var - mean_acov(t + 1)) / var_plus;
        rho_odd = 1.0 - (mean_var - mean_acov(t + 2)) / var_plus;
        if (rho_even + rho_odd >= 0.0) {
            rho[t + 1] = rho_even;
            rho[t + 2] = rho_odd;
        }
        max_t = t + 2;
        t += 2;
    }
    for (Eigen::Index k = 1; k + 3 <= max_t; k += 2) {
        if (rho[k + 1] + rho[k + 2] > rho[k - 1] + rho[k]) {
            rho[k + 1] = 0.5 * (rho[k - 1] + rho[k]);
            rho[k + 2] = rho[k + 1];
        }
    }
    const double total = m * nd;
    double tau = -1.0 + 2.0 * rho.head(max_t).sum() + rho[max_t];
    tau = std::max(tau, 1.0 / std::log10(total));
    return total / tau;
}

inline bool all_constant(const std::vector<Eigen::VectorXd>& chains) {
    const double first = chains.front()[0];
    for (const auto& c : chains)
        if ((c.array() != first).any()) return false;
    return true;
}

}  // namespace detail

/**
 * Split-chain potential scale reduction: each chain is halved, then
 * sqrt(((n-1)/n W + B/n) / W). Zero within-chain variance gives 1, flagged.
 */
inline FlaggedValue split_rhat(const std::vector<Eigen::VectorXd>& chains) {
    const auto halves = detail::split_halves(chains);
    const double n = static_cast<double>(halves.front().size());
    const double m = static_cast<double>(halves.size());
    Eigen::VectorXd means(static_cast<Eigen::Index>(halves.size()));
    double W = 0.0;
    for (std::size_t c = 0; c < halves.size(); ++c) {
        const double mu = halves[c].mean();
        means[static_cast<Eigen::Index>(c)] = mu;
        W += (halves[c].array() - mu).square().sum() / (n - 1.0);
    }
    W /= m;
    if (!(W > 0.0)) return {1.0, true};
    const double B = n * (means.array() - means.mean()).square().sum() / (m - 1.0);
    const double var_plus = (n - 1.0) / n * W + B / n;
    return {std::sqrt(var_plus / W), false};
}

/**
 * Bulk effective sample size: rank-normalized split chains, Geyer-truncated
 * autocorrelation sum. Capped at the total number of draws; a constant parameter
 * gives 0, flagged.
 */
inline FlaggedValue ess_bulk(const std::vector<Eigen::VectorXd>& chains) {
    const auto halves = detail::split_halves(chains);
    if (detail::all_constant(halves)) return {0.0, true};
    const double total = static_cast<double>(halves.size() * static_cast<std::size_t>(halves.front().size()));
    const double ess = detail::ess_multichain(detail::rank_normalize(halves));
    return {std::min(ess, total), false};
}

/// Convenience overload for a single chain.
inline FlaggedValue ess_bulk(const Eigen::VectorXd& draws) { return ess_bulk(std::vector<Eigen::VectorXd>{draws}); }

}  // namespace bdarch
