#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdint>
#include <exception>
#include <string>
#include <thread>
#include <vector>

#include "bdarch/diagnostics.hpp"
#include "bdarch/nuts.hpp"
#include "bdarch/posterior.hpp"
#include "bdarch/random.hpp"

namespace bdarch {

struct SamplerConfig {
    std::size_t n_chains = 4;
    std::size_t n_warmup = 500;
    std::size_t n_keep = 500;
    double target_accept = 0.8;
    int max_tree_depth = 10;
    std::uint64_t base_seed = 1;
    /// Initial values are uniform on [-init_range, init_range] in the unconstrained space.
    double init_range = 1.0;
    /// Run chains on separate threads. Output does not depend on this.
    bool parallel = false;

    /// 4 chains x 1000 iterations, half warm-up.
    static SamplerConfig simulation_default() { return {}; }
    /// 4 chains x 2000 iterations, half warm-up.
    static SamplerConfig data_default() {
        SamplerConfig c;
        c.n_warmup = 1000;
        c.n_keep = 1000;
        return c;
    }

    void validate() const {
        if (n_chains < 1) throw ConfigError("need at least one chain");
        if (n_warmup < 1 || n_keep < 1) throw ConfigError("warm-up and kept iterations must be positive");
        if (!(target_accept > 0.0 && target_accept < 1.0)) throw ConfigError("target_accept must lie in (0, 1)");
        if (max_tree_depth < 1) throw ConfigError("max_tree_depth must be positive");
        if (!(init_range > 0.0)) throw ConfigError("init_range must be positive");
    }
};

struct ChainStats {
    double step_size = 0.0;
    Eigen::VectorXd inv_metric;
    double mean_accept = 0.0;
    std::size_t divergences = 0;
    std::size_t treedepth_saturated = 0;
    std::size_t leapfrog_steps = 0;
    std::size_t init_attempts = 0;
};

/// Per-chain draws on the sampler's own (unconstrained) scale, n_keep x C each.
struct ChainDraws {
    std::vector<Eigen::MatrixXd> chains;
    std::vector<ChainStats> stats;
};

struct Diagnostics {
    Eigen::VectorXd rhat;
    std::vector<bool> rhat_flagged;
    Eigen::VectorXd ess_bulk;
    std::vector<bool> ess_flagged;
    std::size_t divergences = 0;
    std::size_t treedepth_saturated = 0;
    std::size_t total_draws = 0;

    [[nodiscard]] double max_rhat() const { return rhat.size() ? rhat.maxCoeff() : 1.0; }
    [[nodiscard]] double min_ess() const { return ess_bulk.size() ? ess_bulk.minCoeff() : 0.0; }
    [[nodiscard]] bool converged(double rhat_threshold = 1.1) const { return max_rhat() <= rhat_threshold; }
    [[nodiscard]] double divergence_rate() const {
        return total_draws ? static_cast<double>(divergences) / static_cast<double>(total_draws) : 0.0;
    }
};

/// Retained draws on the constrained scale, stacked chain by chain.
struct PosteriorDraws {
    Eigen::MatrixXd draws;             // (n_chains * n_keep) x C
    std::vector<std::size_t> chain_id; // one per row
    std::vector<std::string> names;
    std::vector<ChainStats> chains;
    std::size_t divergences = 0;

    [[nodiscard]] std::size_t size() const noexcept { return static_cast<std::size_t>(draws.rows()); }
    [[nodiscard]] std::size_t n_chains() const noexcept { return chains.size(); }

    /// Column `col` split by chain.
    [[nodiscard]] std::vector<Eigen::VectorXd> by_chain(Eigen::Index col) const {
        std::vector<std::vector<double>> buf(std::max<std::size_t>(1, n_chains()));
        for (Eigen::Index r = 0; r < draws.rows(); ++r) {
            const std::size_t c = chain_id.empty() ? 0 : chain_id[static_cast<std::size_t>(r)];
            if (c >= buf.size()) buf.resize(c + 1);
            buf[c].push_back(draws(r, col));
        }
        std::vector<Eigen::VectorXd> out;
        for (const auto& b : buf)
            if (!b.empty()) out.emplace_back(Eigen::Map<const Eigen::VectorXd>(b.data(), static_cast<Eigen::Index>(b.size())));
        return out;
    }

    [[nodiscard]] Eigen::VectorXd mean() const { return draws.colwise().mean().transpose(); }
};

struct SamplingResult {
    PosteriorDraws draws;
    Diagnostics diagnostics;
};

namespace detail {

template <DifferentiableTarget Target>
void run_one_chain(const Target& target, const SamplerConfig& cfg, std::size_t chain, Eigen::MatrixXd& out, ChainStats& stats) {
    Rng rng = make_stream(cfg.base_seed, chain);
    const auto C = static_cast<Eigen::Index>(target.dimension());
    Eigen::VectorXd u(C), g(C);
    bool found = false;
    for (std::size_t attempt = 1; attempt <= 100 && !found; ++attempt) {
        for (Eigen::Index i = 0; i < C; ++i) u[i] = uniform(rng, -cfg.init_range, cfg.init_range);
        const double lp = target.log_density_gradient(u, g);
        found = std::isfinite(lp) && g.allFinite();
        stats.init_attempts = attempt;
    }
    if (!found) throw InitializationError("no finite initial value after 100 attempts (chain " + std::to_string(chain) + ")");

    nuts::Sampler<Target> sampler(target, rng, cfg.max_tree_depth);
    sampler.set_position(u);
    sampler.init_step_size();
    nuts::StepSizeAdaptation step;
    step.target = cfg.target_accept;
    step.set_mu(std::log(10.0 * sampler.step_size()));
    step.restart();
    nuts::MetricAdaptation metric(cfg.n_warmup, static_cast<std::size_t>(C));

    for (std::size_t it = 0; it < cfg.n_warmup; ++it) {
        const nuts::Transition t = sampler.transition();
        double eps = sampler.step_size();
        step.learn(eps, t.accept_stat);
        sampler.set_step_size(eps);
        if (metric.learn(sampler.inv_metric(), sampler.position())) {
            sampler.init_step_size();
            step.set_mu(std::log(10.0 * sampler.step_size()));
            step.restart();
        }
    }
    sampler.set_step_size(step.final_step_size());

    out.resize(static_cast<Eigen::Index>(cfg.n_keep), C);
    double accept = 0.0;
    for (std::size_t it = 0; it < cfg.n_keep; ++it) {
        const nuts::Transition t = sampler.transition();
        out.row(static_cast<Eigen::Index>(it)) = sampler.position().transpose();
        accept += t.accept_stat;
        stats.divergences += t.divergent ? 1 : 0;
        stats.treedepth_saturated += t.depth >= cfg.max_tree_depth ? 1 : 0;
        stats.leapfrog_steps += static_cast<std::size_t>(t.n_leapfrog);
    }
    stats.mean_accept = accept / static_cast<double>(cfg.n_keep);
    stats.step_size = sampler.step_size();
    stats.inv_metric = sampler.inv_metric();
}

}  // namespace detail

/**
 * Runs cfg.n_chains independent chains on `target`. Chain k draws from
 * make_stream(cfg.base_seed, k), so results are identical whether chains run
 * sequentially or in parallel.
 */
template <DifferentiableTarget Target>
ChainDraws run_chains(const Target& target, const SamplerConfig& cfg) {
    cfg.validate();
    ChainDraws out;
    out.chains.resize(cfg.n_chains);
    out.stats.resize(cfg.n_chains);
    if (cfg.parallel && cfg.n_chains > 1) {
        std::vector<std::exception_ptr> errors(cfg.n_chains);
        std::vector<std::thread> threads;
        for (std::size_t c = 0; c < cfg.n_chains; ++c)
            threads.emplace_back([&, c] {
                try {
                    detail::run_one_chain(target, cfg, c, out.chains[c], out.stats[c]);
                } catch (...) {
                    errors[c] = std::current_exception();
                }
            });
        for (auto& t : threads) t.join();
        for (auto& e : errors)
            if (e) std::rethrow_exception(e);
    } else {
        for (std::size_t c = 0; c < cfg.n_chains; ++c) detail::run_one_chain(target, cfg, c, out.chains[c], out.stats[c]);
    }
    return out;
}

/// R-hat and bulk ESS for every column of per-chain draw matrices.
inline Diagnostics compute_diagnostics(const std::vector<Eigen::MatrixXd>& chains, const std::vector<ChainStats>& stats = {}) {
    Diagnostics d;
    if (chains.empty()) return d;
    const Eigen::Index C = chains.front().cols();
    d.rhat.resize(C);
    d.ess_bulk.resize(C);
    d.rhat_flagged.assign(static_cast<std::size_t>(C), false);
    d.ess_flagged.assign(static_cast<std::size_t>(C), false);
    std::vector<Eigen::VectorXd> cols(chains.size());
    for (Eigen::Index j = 0; j < C; ++j) {
        for (std::size_t c = 0; c < chains.size(); ++c) cols[c] = chains[c].col(j);
        const FlaggedValue r = split_rhat(cols);
        const FlaggedValue e = ess_bulk(cols);
        d.rhat[j] = r.value;
        d.rhat_flagged[static_cast<std::size_t>(j)] = r.flagged;
        d.ess_bulk[j] = e.value;
        d.ess_flagged[static_cast<std::size_t>(j)] = e.flagged;
    }
    for (const auto& s : stats) {
        d.divergences += s.divergences;
        d.treedepth_saturated += s.treedepth_saturated;
    }
    for (const auto& c : chains) d.total_draws += static_cast<std::size_t>(c.rows());
    return d;
}

/// Posterior sampling for one model variant. Draws are returned on the constrained scale.
inline SamplingResult sample_posterior(const Posterior& posterior, const SamplerConfig& cfg) {
    const ChainDraws raw = run_chains(posterior, cfg);
    const ParamLayout& layout = posterior.layout();
    const auto C = static_cast<Eigen::Index>(layout.size());
    std::vector<Eigen::MatrixXd> constrained(raw.chains.size());
    SamplingResult out;
    out.draws.names = layout.names();
    out.draws.chains = raw.stats;
    out.draws.draws.resize(static_cast<Eigen::Index>(cfg.n_chains * cfg.n_keep), C);
    Eigen::Index row = 0;
    for (std::size_t c = 0; c < raw.chains.size(); ++c) {
        constrained[c].resize(raw.chains[c].rows(), C);
        for (Eigen::Index i = 0; i < raw.chains[c].rows(); ++i) {
            const Eigen::VectorXd u = raw.chains[c].row(i).transpose();
            const Eigen::VectorXd v = layout.flatten(layout.constrain(u));
            constrained[c].row(i) = v.transpose();
            out.draws.draws.row(row++) = v.transpose();
            out.draws.chain_id.push_back(c);
        }
        out.draws.divergences += raw.stats[c].divergences;
    }
    out.diagnostics = compute_diagnostics(constrained, raw.stats);
    return out;
}

inline SamplingResult sample_posterior(const ModelSpec& spec, const Priors& priors, const CompositionalSeries& series,
                                       const DesignMatrices& designs, const SamplerConfig& cfg) {
    return sample_posterior(Posterior(spec, priors, series, designs), cfg);
}

}  // namespace bdarch
