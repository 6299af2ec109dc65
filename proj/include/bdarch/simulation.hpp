#pragma once

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bdarch/compositional.hpp"
#include "bdarch/covariates.hpp"
#include "bdarch/dirichlet.hpp"
#include "bdarch/forecast.hpp"
#include "bdarch/inference.hpp"
#include "bdarch/metrics.hpp"
#include "bdarch/model.hpp"
#include "bdarch/posterior.hpp"
#include "bdarch/random.hpp"

namespace bdarch {

/// Data-generating family: studies 1/4 Dirichlet with constant precision, 2/5 DARCH precision, 3/6 Gaussian in ALR space.
enum class DgpFamily { Darma, Darch, Tvarma };

struct StudyConfig {
    int study_id = 1;
    std::size_t n_replicates = 50;
    std::size_t T = 100;
    std::size_t train_len = 60;
    std::size_t J = 5;
    std::uint64_t seed = 1;
    /// Studies 1-3 add shocks, 4-6 a regime shift; false generates the plain DGP.
    bool perturb = true;
    std::size_t pacf_lags = 20;
    std::vector<Variant> models = {Variant::BDarma, Variant::BDarmaDarch, Variant::BTvarma};

    [[nodiscard]] DgpFamily family() const { return static_cast<DgpFamily>((study_id - 1) % 3); }
    [[nodiscard]] bool shocks() const { return perturb && study_id <= 3; }
    [[nodiscard]] bool regime_shift() const { return perturb && study_id >= 4; }

    void validate() const {
        if (study_id < 1 || study_id > 6) throw ConfigError("study id must be 1..6, got " + std::to_string(study_id));
        if (J < 2) throw ConfigError("study needs J >= 2");
        if (train_len >= T) throw ConfigError("train_len must be below T");
        if (train_len < 2) throw ConfigError("train_len too short");
        if (n_replicates < 1) throw ConfigError("need at least one replicate");
        if (models.empty()) throw ConfigError("no models to fit");
    }
};

struct DgpParams {
    Eigen::MatrixXd A;     // (J-1) x (J-1)
    Eigen::VectorXd beta;  // ALR intercept
    double phi0 = 7.0;     // log precision level (Dirichlet families)
    double alpha = 0.8;
    double tau = -0.95;
    double sigma = 0.2;    // Gaussian family
    Eigen::MatrixXd M;     // Sigma = M'M
    std::size_t redraws = 0;

    [[nodiscard]] Eigen::MatrixXd sigma_matrix() const { return M.transpose() * M; }
};

inline DgpFamily family_of(int study) {
    if (study < 1 || study > 6) throw ConfigError("study id must be 1..6, got " + std::to_string(study));
    return static_cast<DgpFamily>((study - 1) % 3);
}

/// Fresh parameters for one replicate: A ~ U(-.75,.75), beta = alr(closed N(.2,.03^2)), phi0 ~ U(6,7.5),
/// sigma ~ U(.05,.5), M ~ U(-.3,.3).
inline DgpParams draw_dgp_params(int study, Rng& rng, std::size_t J = 5) {
    const DgpFamily fam = family_of(study);
    const auto d = static_cast<Eigen::Index>(J - 1);
    DgpParams p;
    p.A.resize(d, d);
    for (Eigen::Index i = 0; i < d * d; ++i) p.A.data()[i] = uniform(rng, -0.75, 0.75);
    Eigen::VectorXd raw(d + 1);
    for (;;) {
        for (auto& v : raw) v = normal(rng, 0.2, 0.03);
        if ((raw.array() > 0.0).all()) break;
        ++p.redraws;
    }
    p.beta = alr(close(raw), J - 1).values;
    if (fam == DgpFamily::Tvarma) {
        p.sigma = uniform(rng, 0.05, 0.5);
        p.M.resize(d, d);
        for (Eigen::Index i = 0; i < d * d; ++i) p.M.data()[i] = uniform(rng, -0.3, 0.3);
    } else {
        p.phi0 = uniform(rng, 6.0, 7.5);
    }
    return p;
}

/// Parameters in force at each time: `base` outside [shift_start, shift_start + length), `shifted` inside.
struct RegimeSchedule {
    DgpParams base;
    std::optional<DgpParams> shifted;
    std::size_t shift_start = 0;  // 1-based
    std::size_t length = 10;

    [[nodiscard]] bool shifted_at(std::size_t t) const {
        return shifted && t >= shift_start && t < shift_start + length;
    }
    [[nodiscard]] const DgpParams& at(std::size_t t) const { return shifted_at(t) ? *shifted : base; }
};

/// Redraws A, beta and the precision parameters for a 10-step window starting uniformly in [10, 50].
inline RegimeSchedule apply_regime_shift(int study, const DgpParams& params, Rng& rng, std::size_t J = 5) {
    RegimeSchedule s;
    s.base = params;
    s.shift_start = 10 + static_cast<std::size_t>(uniform_index(rng, 0, 40));
    DgpParams fresh = draw_dgp_params(study, rng, J);
    fresh.alpha = params.alpha;
    fresh.tau = params.tau;
    s.shifted = std::move(fresh);
    return s;
}

/**
 * Forward simulation of a study DGP. y_1 = close(.2 + N(0, .01^2)); thereafter
 * eta_t = beta + A (alr(y_{t-1}) - beta) with the parameters in force at t.
 * The DARCH level starts at log phi_1 = phi0 with a zero innovation at t = 1.
 * Log precision is clamped to +-30; `clamp_events` counts how often.
 */
inline CompositionalSeries generate_series(int study, const RegimeSchedule& schedule, std::size_t T, Rng& rng,
                                           std::size_t* clamp_events = nullptr) {
    const DgpFamily fam = family_of(study);
    const std::size_t J = static_cast<std::size_t>(schedule.base.beta.size()) + 1;
    const std::size_t ref = J - 1;
    const auto d = static_cast<Eigen::Index>(J - 1);
    std::vector<Composition> rows;
    rows.reserve(T);
    Eigen::VectorXd raw(d + 1);
    for (;;) {
        for (auto& v : raw) v = 0.2 + normal(rng, 0.0, 0.01);
        if ((raw.array() > 0.0).all()) break;
    }
    rows.push_back(close(raw));
    Eigen::VectorXd prev_alr = alr(rows.back(), ref).values;
    Eigen::VectorXd prev_eta = prev_alr;  // zero innovation at t = 1
    double log_phi = schedule.at(1).phi0;
    std::size_t clamps = 0;
    Eigen::VectorXd z(d);
    for (std::size_t t = 2; t <= T; ++t) {
        const DgpParams& p = schedule.at(t);
        const Eigen::VectorXd eta = p.beta + p.A * (prev_alr - p.beta);
        Composition y;
        if (fam == DgpFamily::Tvarma) {
            for (auto& v : z) v = standard_normal(rng);
            y = alr_inv(AlrVector{eta + p.sigma * (p.M.transpose() * z), ref});
        } else {
            if (fam == DgpFamily::Darch)
                log_phi = p.phi0 + p.alpha * (log_phi - p.phi0) + p.tau * (prev_alr - prev_eta).squaredNorm();
            else
                log_phi = p.phi0;
            if (std::abs(log_phi) > kLogPrecisionBound) {
                log_phi = std::clamp(log_phi, -kLogPrecisionBound, kLogPrecisionBound);
                ++clamps;
            }
            y = dirichlet::sample({alr_inv(AlrVector{eta, ref}), std::exp(log_phi)}, rng);
        }
        rows.push_back(y);
        prev_alr = alr(y, ref).values;
        prev_eta = eta;
    }
    if (clamp_events) *clamp_events += clamps;
    return CompositionalSeries(std::move(rows));
}

inline CompositionalSeries generate_series(int study, const DgpParams& params, std::size_t T, Rng& rng,
                                           std::size_t* clamp_events = nullptr) {
    RegimeSchedule s;
    s.base = params;
    return generate_series(study, s, T, rng, clamp_events);
}

struct ShockedSeries {
    CompositionalSeries series;
    std::vector<std::size_t> times;  // 1-based, strictly increasing
};

/// Replaces rows at cumulative Poisson(6) times <= train_len with closed U(0,1) draws.
inline ShockedSeries inject_shocks(const CompositionalSeries& series, std::size_t train_len, Rng& rng) {
    std::vector<Composition> rows = series.rows();
    const std::size_t J = series.components();
    ShockedSeries out;
    std::size_t t = 0;
    for (;;) {
        const std::size_t step = static_cast<std::size_t>(poisson(rng, 6.0));
        if (step == 0) continue;  // a zero gap would repeat the previous time
        t += step;
        if (t > train_len || t > rows.size()) break;
        Eigen::VectorXd raw(static_cast<Eigen::Index>(J));
        for (auto& v : raw) v = uniform01(rng);
        rows[t - 1] = close(raw);
        out.times.push_back(t);
    }
    out.series = CompositionalSeries(std::move(rows), series.time_index(), series.component_names());
    return out;
}

/// The fitted configurations used in the studies: order (1,0), DARCH (1,1), intercept-only designs.
inline ModelSpec study_model(Variant v, std::size_t J) {
    ModelSpec s;
    s.variant = v;
    s.components = J;
    s.ar_order = 1;
    s.ma_order = 0;
    if (v == Variant::BDarmaDarch) {
        s.precision_ar_order = 1;
        s.precision_ma_order = 1;
    }
    return s;
}

struct ModelOutcome {
    Variant variant = Variant::BDarma;
    bool ok = false;
    std::string error;
    MetricsReport metrics;
    Eigen::VectorXd pacf;  // SSR PACF at lags 1..pacf_lags (NaN when unavailable)
    double max_rhat = std::numeric_limits<double>::quiet_NaN();
    std::size_t divergences = 0;
    double init_range = 1.0;  // initialization range that produced the fit
};

struct ReplicateOutcome {
    std::size_t replicate = 0;
    std::vector<std::size_t> shock_times;
    std::size_t shift_start = 0;
    std::vector<ModelOutcome> models;
};

struct StudyResult {
    StudyConfig config;
    std::vector<ReplicateOutcome> replicates;

    /// Mean over successful replicates of a model's across-component FRMSE (or FMAE).
    [[nodiscard]] double mean_frmse(Variant v) const { return mean_of(v, [](const ModelOutcome& m) { return m.metrics.frmse.mean; }); }
    [[nodiscard]] double mean_fmae(Variant v) const { return mean_of(v, [](const ModelOutcome& m) { return m.metrics.fmae.mean; }); }

    [[nodiscard]] std::size_t failures(Variant v) const {
        std::size_t n = 0;
        for (const auto& r : replicates)
            for (const auto& m : r.models)
                if (m.variant == v && !m.ok) ++n;
        return n;
    }

    /// Mean SSR-PACF by lag over successful replicates.
    [[nodiscard]] Eigen::VectorXd mean_pacf(Variant v) const {
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(config.pacf_lags));
        Eigen::VectorXd count = sum;
        for (const auto& r : replicates)
            for (const auto& m : r.models)
                if (m.variant == v && m.ok && m.pacf.size() == sum.size())
                    for (Eigen::Index k = 0; k < sum.size(); ++k)
                        if (std::isfinite(m.pacf[k])) {
                            sum[k] += m.pacf[k];
                            count[k] += 1.0;
                        }
        return sum.cwiseQuotient(count);
    }

    [[nodiscard]] std::string metrics_csv() const {
        std::ostringstream os;
        os.precision(10);
        os << "study,replicate,model,ok,frmse_mean,fmae_mean,frss_total,coverage95_mean,max_rhat,divergences,init_range\n";
        for (const auto& r : replicates)
            for (const auto& m : r.models) {
                os << config.study_id << "," << r.replicate + 1 << "," << to_string(m.variant) << "," << (m.ok ? 1 : 0) << ",";
                if (m.ok)
                    os << m.metrics.frmse.mean << "," << m.metrics.fmae.mean << "," << m.metrics.frss.total << ","
                       << (m.metrics.coverage ? m.metrics.coverage->mean : std::numeric_limits<double>::quiet_NaN()) << ","
                       << m.max_rhat << "," << m.divergences << "," << m.init_range;
                else
                    os << ",,,,,,";
                os << "\n";
            }
        return os.str();
    }

    [[nodiscard]] std::string pacf_csv() const {
        std::ostringstream os;
        os.precision(10);
        os << "model,lag,mean_pacf\n";
        for (Variant v : config.models) {
            const Eigen::VectorXd p = mean_pacf(v);
            for (Eigen::Index k = 0; k < p.size(); ++k) os << to_string(v) << "," << k + 1 << "," << p[k] << "\n";
        }
        return os.str();
    }

private:
    template <class F>
    double mean_of(Variant v, F f) const {
        double s = 0.0;
        std::size_t n = 0;
        for (const auto& r : replicates)
            for (const auto& m : r.models)
                if (m.variant == v && m.ok) {
                    s += f(m);
                    ++n;
                }
        return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
    }
};

/**
 * Fits one model on the training rows and scores the forecast of the remaining rows.
 * When no chain finds a finite starting point, the fit is retried with the
 * initialization range halved (at most twice). Shocked series with near-vertex rows
 * make most wide starts overflow the DARCH precision bound.
 * The SSR series uses the posterior-mean parameters plugged into the recursions
 * and drops the first m conditioned rows.
 */
inline ModelOutcome fit_and_score(Variant v, const CompositionalSeries& full, std::size_t train_len, const Priors& priors,
                                  const SamplerConfig& sampler, std::uint64_t forecast_seed, std::size_t pacf_lags) {
    ModelOutcome out;
    out.variant = v;
    try {
        const std::size_t T = full.length();
        const std::size_t J = full.components();
        const ModelSpec spec = study_model(v, J);
        const DesignMatrices designs = build_designs(spec.mean_covariates, spec.precision_covariates, T, J, 0, train_len);
        const CompositionalSeries train = full.slice(0, train_len);
        const Posterior post(spec, priors, train, designs.slice(0, train_len));
        SamplerConfig sc = sampler;
        std::optional<SamplingResult> attempt;
        for (int shrink = 0; !attempt; ++shrink) {
            try {
                attempt = sample_posterior(post, sc);
            } catch (const InitializationError&) {
                if (shrink == 2) throw;
                sc.init_range /= 2.0;
            }
        }
        const SamplingResult& fit = *attempt;
        out.init_range = sc.init_range;
        out.max_rhat = fit.diagnostics.max_rhat();
        out.divergences = fit.diagnostics.divergences;

        Rng rng = make_stream(forecast_seed, 0);
        const ForecastResult fc = predict(spec, fit.draws, train, designs, T - train_len, rng);
        const IntervalBounds b95 = interval(fc, 0.95);
        const Eigen::MatrixXd actual = full.matrix().bottomRows(static_cast<Eigen::Index>(T - train_len));
        out.metrics = evaluate_forecast(actual, fc.point, full.component_names(), &b95);

        const ParamVector pm = post.layout().unflatten(fit.draws.mean());
        const LatentPath path = post.latent_path(pm);
        const Eigen::VectorXd ssr = ssr_series(train, path, spec, pm);
        const std::size_t m = spec.max_lag();
        out.pacf = Eigen::VectorXd::Constant(static_cast<Eigen::Index>(pacf_lags), std::numeric_limits<double>::quiet_NaN());
        try {
            out.pacf = pacf(ssr.tail(static_cast<Eigen::Index>(train_len - m)), pacf_lags);
        } catch (const DomainError&) {
        }
        out.ok = true;
    } catch (const std::exception& e) {
        out.ok = false;
        out.error = e.what();
    }
    return out;
}

/// Seed for (replicate, purpose) pairs; keeps every stream independent of run order.
inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return detail::splitmix64(detail::splitmix64(seed ^ detail::splitmix64(a + 1)) + b);
}

/// Simulated data for one replicate, before any model is fitted.
struct ReplicateData {
    CompositionalSeries series;
    DgpParams params;
    std::vector<std::size_t> shock_times;
    std::size_t shift_start = 0;
};

/// Draws parameters, generates the series and applies the study's perturbation.
inline ReplicateData simulate_replicate(const StudyConfig& cfg, std::size_t replicate) {
    ReplicateData out;
    Rng rng = make_stream(derive_seed(cfg.seed, replicate), static_cast<std::uint64_t>(cfg.study_id));
    out.params = draw_dgp_params(cfg.study_id, rng, cfg.J);
    RegimeSchedule schedule;
    schedule.base = out.params;
    if (cfg.regime_shift()) {
        schedule = apply_regime_shift(cfg.study_id, out.params, rng, cfg.J);
        out.shift_start = schedule.shift_start;
    }
    out.series = generate_series(cfg.study_id, schedule, cfg.T, rng);
    if (cfg.shocks()) {
        ShockedSeries shocked = inject_shocks(out.series, cfg.train_len, rng);
        out.shock_times = std::move(shocked.times);
        out.series = std::move(shocked.series);
    }
    return out;
}

/// One replicate: simulate, then fit, forecast and score each model.
inline ReplicateOutcome run_replicate(const StudyConfig& cfg, std::size_t replicate, const SamplerConfig& sampler,
                                      const Priors& priors = Priors::simulation()) {
    ReplicateOutcome out;
    out.replicate = replicate;
    ReplicateData data = simulate_replicate(cfg, replicate);
    out.shock_times = std::move(data.shock_times);
    out.shift_start = data.shift_start;
    const CompositionalSeries& series = data.series;
    for (std::size_t k = 0; k < cfg.models.size(); ++k) {
        SamplerConfig sc = sampler;
        sc.base_seed = derive_seed(cfg.seed, replicate, 100 + k);
        out.models.push_back(fit_and_score(cfg.models[k], series, cfg.train_len, priors, sc, derive_seed(cfg.seed, replicate, 200 + k),
                                           cfg.pacf_lags));
    }
    return out;
}

/// Runs all replicates of a study. Replicate-level failures are recorded and excluded from means.
inline StudyResult run_study(const StudyConfig& cfg, const SamplerConfig& sampler, const Priors& priors = Priors::simulation()) {
    cfg.validate();
    sampler.validate();
    StudyResult res;
    res.config = cfg;
    for (std::size_t r = 0; r < cfg.n_replicates; ++r) res.replicates.push_back(run_replicate(cfg, r, sampler, priors));
    return res;
}

}  // namespace bdarch
