#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "bdarch/compositional.hpp"
#include "bdarch/dirichlet.hpp"
#include "bdarch/forecast.hpp"
#include "bdarch/model.hpp"
#include "bdarch/posterior.hpp"

namespace bdarch {

/// One metric per component plus its across-component mean and sum.
struct ComponentMetric {
    Eigen::VectorXd per_component;
    double mean = 0.0;
    double total = 0.0;
};

namespace detail {
inline void check_window(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& other) {
    if (actual.rows() == 0 || actual.cols() == 0) throw DomainError("metrics: empty evaluation window");
    if (actual.rows() != other.rows() || actual.cols() != other.cols())
        throw DomainError("metrics: actuals and forecasts differ in shape");
}

inline ComponentMetric summarize(Eigen::VectorXd v) {
    ComponentMetric m;
    m.mean = v.mean();
    m.total = v.sum();
    m.per_component = std::move(v);
    return m;
}
}  // namespace detail

/// Root mean squared error per component over the window (rows = time, columns = components).
inline ComponentMetric frmse(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& point) {
    detail::check_window(actual, point);
    return detail::summarize(((actual - point).array().square().colwise().mean()).sqrt().transpose());
}

inline ComponentMetric fmae(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& point) {
    detail::check_window(actual, point);
    return detail::summarize((actual - point).array().abs().colwise().mean().transpose());
}

/// Raw sum of squared errors per component; `total` is the sum over components.
inline ComponentMetric frss(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& point) {
    detail::check_window(actual, point);
    return detail::summarize((actual - point).array().square().colwise().sum().transpose());
}

/// Fraction of times with lower <= y <= upper, per component.
inline ComponentMetric empirical_coverage(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& lower, const Eigen::MatrixXd& upper) {
    detail::check_window(actual, lower);
    detail::check_window(actual, upper);
    const Eigen::ArrayXXd inside = ((actual.array() >= lower.array()) && (actual.array() <= upper.array())).cast<double>();
    return detail::summarize(inside.colwise().mean().transpose());
}

inline ComponentMetric empirical_coverage(const Eigen::MatrixXd& actual, const IntervalBounds& b) {
    return empirical_coverage(actual, b.lower, b.upper);
}

/// Evaluation summary. Stored values are always unscaled; `scale` only affects rendering.
struct MetricsReport {
    std::vector<std::string> components;
    ComponentMetric frmse, fmae, frss;
    std::optional<ComponentMetric> coverage;
    double scale = 1.0;

    /// CSV with one row per component, then "mean" and "total" rows. Coverage is never scaled.
    [[nodiscard]] std::string to_csv() const {
        std::ostringstream os;
        os.precision(10);
        os << "component,frmse,fmae,frss" << (coverage ? ",coverage" : "") << "\n";
        const auto row = [&](const std::string& name, double a, double b, double c, std::optional<double> cov) {
            os << name << "," << a * scale << "," << b * scale << "," << c * scale;
            if (coverage) os << "," << *cov;
            os << "\n";
        };
        for (std::size_t j = 0; j < components.size(); ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            row(components[j], frmse.per_component[jj], fmae.per_component[jj], frss.per_component[jj],
                coverage ? std::optional<double>(coverage->per_component[jj]) : std::nullopt);
        }
        row("mean", frmse.mean, fmae.mean, frss.mean, coverage ? std::optional<double>(coverage->mean) : std::nullopt);
        row("total", frmse.total, fmae.total, frss.total, coverage ? std::optional<double>(coverage->total) : std::nullopt);
        return os.str();
    }
};

inline MetricsReport evaluate_forecast(const Eigen::MatrixXd& actual, const Eigen::MatrixXd& point,
                                       std::vector<std::string> components, const IntervalBounds* bounds = nullptr) {
    MetricsReport r;
    if (components.empty())
        for (Eigen::Index j = 0; j < actual.cols(); ++j) components.push_back("c" + std::to_string(j + 1));
    r.components = std::move(components);
    r.frmse = frmse(actual, point);
    r.fmae = fmae(actual, point);
    r.frss = frss(actual, point);
    if (bounds) r.coverage = empirical_coverage(actual, *bounds);
    return r;
}

/**
 * Per-time sum of squared standardized residuals.
 * Dirichlet variants: sum_j ((y_tj - mu_tj) / sd_tj)^2 with sd from mu_t and phi_t.
 * tVARMA: || (sigma L_omega)^-1 (alr(y_t) - eta_t) ||^2.
 */
inline Eigen::VectorXd ssr_series(const CompositionalSeries& series, const LatentPath& fitted, const ModelSpec& spec,
                                  const ParamVector& params) {
    const std::size_t T = series.length();
    if (static_cast<std::size_t>(fitted.eta.rows()) != T) throw DomainError("ssr_series: latent path length mismatch");
    const std::size_t ref = spec.reference_index();
    Eigen::VectorXd out(static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
        const auto tt = static_cast<Eigen::Index>(t);
        const Eigen::VectorXd eta = fitted.eta.row(tt).transpose();
        if (spec.dirichlet()) {
            const dirichlet::DirichletParams dp(alr_inv(AlrVector{eta, ref}), std::exp(fitted.log_phi[tt]));
            out[tt] = dirichlet::standardized_residual(series[t], dp).squaredNorm();
        } else {
            const Eigen::VectorXd r = alr(series[t], ref).values - eta;
            const Eigen::MatrixXd L = params.sigma * params.omega_chol;
            out[tt] = L.triangularView<Eigen::Lower>().solve(r).squaredNorm();
        }
        if (!std::isfinite(out[tt])) throw DomainError("ssr_series: non-finite residual at t=" + std::to_string(t + 1));
    }
    return out;
}

/// Biased (1/n) sample autocorrelations r_0..r_max_lag.
inline Eigen::VectorXd autocorrelation(const Eigen::VectorXd& x, std::size_t max_lag) {
    const Eigen::Index n = x.size();
    const Eigen::VectorXd c = x.array() - x.mean();
    const double c0 = c.squaredNorm() / static_cast<double>(n);
    if (!(c0 > 0.0)) throw DomainError("autocorrelation of a constant series");
    Eigen::VectorXd r(static_cast<Eigen::Index>(max_lag + 1));
    for (Eigen::Index k = 0; k <= static_cast<Eigen::Index>(max_lag); ++k)
        r[k] = c.head(n - k).dot(c.tail(n - k)) / static_cast<double>(n) / c0;
    return r;
}

/// Partial autocorrelations at lags 1..max_lag by the Durbin-Levinson recursion (entry k-1 is lag k).
inline Eigen::VectorXd pacf(const Eigen::VectorXd& x, std::size_t max_lag) {
    if (max_lag == 0) throw DomainError("pacf: max_lag must be positive");
    if (static_cast<std::size_t>(x.size()) <= max_lag + 1) throw DomainError("pacf: series too short for the requested lags");
    const Eigen::VectorXd r = autocorrelation(x, max_lag);
    const auto K = static_cast<Eigen::Index>(max_lag);
    Eigen::VectorXd out(K), phi = Eigen::VectorXd::Zero(K + 1), prev = phi;
    for (Eigen::Index k = 1; k <= K; ++k) {
        double num = r[k], den = 1.0;
        for (Eigen::Index j = 1; j < k; ++j) {
            num -= prev[j] * r[k - j];
            den -= prev[j] * r[j];
        }
        const double pkk = num / den;
        phi[k] = pkk;
        for (Eigen::Index j = 1; j < k; ++j) phi[j] = prev[j] - pkk * prev[k - j];
        out[k - 1] = pkk;
        prev = phi;
    }
    return out;
}

struct PacfReport {
    std::vector<std::string> models;
    Eigen::MatrixXd values;  // models x lags
    double threshold = 0.2;
    /// 1-based lags with |pacf| strictly above the threshold, per model.
    std::vector<std::vector<std::size_t>> flagged;
};

inline PacfReport residual_pacf_report(const std::vector<std::pair<std::string, Eigen::VectorXd>>& ssr, std::size_t max_lag = 20,
                                       double threshold = 0.2) {
    PacfReport rep;
    rep.threshold = threshold;
    rep.values.resize(static_cast<Eigen::Index>(ssr.size()), static_cast<Eigen::Index>(max_lag));
    for (std::size_t i = 0; i < ssr.size(); ++i) {
        rep.models.push_back(ssr[i].first);
        const Eigen::VectorXd v = pacf(ssr[i].second, max_lag);
        rep.values.row(static_cast<Eigen::Index>(i)) = v.transpose();
        std::vector<std::size_t> lags;
        for (Eigen::Index k = 0; k < v.size(); ++k)
            if (std::abs(v[k]) > threshold) lags.push_back(static_cast<std::size_t>(k + 1));
        rep.flagged.push_back(std::move(lags));
    }
    return rep;
}

}  // namespace bdarch
