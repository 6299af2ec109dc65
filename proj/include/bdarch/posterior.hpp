#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <limits>
#include <vector>

#include "bdarch/compositional.hpp"
#include "bdarch/correlation.hpp"
#include "bdarch/covariates.hpp"
#include "bdarch/model.hpp"
#include "bdarch/special.hpp"

namespace bdarch {

/// |log phi_t| beyond this bound rejects the parameter point (log posterior = -inf).
inline constexpr double kLogPrecisionBound = 30.0;

/// alr(y_t) and log(y_t) per time step, stored one column per t.
struct PreparedSeries {
    Eigen::MatrixXd alr;    // (J-1) x T
    Eigen::MatrixXd log_y;  // J x T
    std::size_t reference = 0;

    PreparedSeries() = default;
    PreparedSeries(const CompositionalSeries& series, std::size_t ref) : reference(ref) {
        const auto T = static_cast<Eigen::Index>(series.length());
        const auto J = static_cast<Eigen::Index>(series.components());
        alr.resize(J - 1, T);
        log_y.resize(J, T);
        for (Eigen::Index t = 0; t < T; ++t) {
            const auto& y = series[static_cast<std::size_t>(t)];
            for (Eigen::Index j = 0; j < J; ++j) log_y(j, t) = std::log(std::max(y[static_cast<std::size_t>(j)], kSimplexFloor));
            alr.col(t) = bdarch::alr(y, ref).values;
        }
    }

    [[nodiscard]] std::size_t length() const noexcept { return static_cast<std::size_t>(alr.cols()); }
};

/// eta_t (row t) and log phi_t. log_phi is empty for the tVARMA variant.
struct LatentPath {
    Eigen::MatrixXd eta;
    Eigen::VectorXd log_phi;
};

/**
 * Log posterior of one model variant given a series and its designs.
 *
 * Conditions on the first m = max(P, Q, L, K) observations: eta_t = alr(y_t) and
 * log phi_t = z_t'gamma for t < m, so every innovation indexed before m is zero.
 * The gradient is accumulated in reverse through both recursions, including the
 * VMA feedback of eta and the DARCH feedback of log phi and squared innovations.
 *
 * Evaluation is const and allocates its own buffers, so one instance may be shared
 * across threads.
 */
class Posterior {
public:
    Posterior() = default;

    Posterior(ModelSpec spec, Priors priors, const CompositionalSeries& series, DesignMatrices designs)
        : spec_(std::move(spec)), priors_(std::move(priors)), designs_(std::move(designs)) {
        if (series.components() != spec_.components) throw ConfigError("series J does not match model J");
        spec_.validate(series.length());
        priors_.validate();
        if (designs_.rows() < series.length()) throw ConfigError("designs cover fewer rows than the series");
        data_ = PreparedSeries(series, spec_.reference_index());
        layout_ = ParamLayout(spec_, designs_);
    }

    [[nodiscard]] std::size_t dimension() const noexcept { return layout_.size(); }
    [[nodiscard]] const ParamLayout& layout() const noexcept { return layout_; }
    [[nodiscard]] const ModelSpec& spec() const noexcept { return spec_; }
    [[nodiscard]] const Priors& priors() const noexcept { return priors_; }
    [[nodiscard]] const DesignMatrices& designs() const noexcept { return designs_; }
    [[nodiscard]] const PreparedSeries& data() const noexcept { return data_; }

    [[nodiscard]] LatentPath latent_path(const ParamVector& p) const {
        const Forward f = forward(p);
        LatentPath out;
        out.eta = f.eta.transpose();
        out.log_phi = f.log_phi;
        return out;
    }

    /// Sum over t >= m of the observation log density. Adds d/dparams into *grad when given.
    double log_likelihood(const ParamVector& p, ParamVector* grad = nullptr) const {
        const Forward f = forward(p);
        if (!f.ok) return -std::numeric_limits<double>::infinity();
        const std::size_t T = data_.length();
        const std::size_t m = spec_.max_lag();
        const auto d = static_cast<Eigen::Index>(spec_.dim());
        const auto J = d + 1;

        Eigen::MatrixXd g_eta;
        Eigen::VectorXd g_logphi;
        if (grad) {
            g_eta = Eigen::MatrixXd::Zero(d, static_cast<Eigen::Index>(T));
            g_logphi = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(T));
        }

        double ll = 0.0;
        if (spec_.dirichlet()) {
            Eigen::VectorXd mu(J), g(J);
            for (std::size_t t = m; t < T; ++t) {
                const auto tt = static_cast<Eigen::Index>(t);
                detail::alr_inv_into(f.eta.col(tt).data(), spec_.dim(), data_.reference, mu.data());
                const double phi = std::exp(f.log_phi[tt]);
                double lp = special::lgamma(phi);
                for (Eigen::Index j = 0; j < J; ++j) {
                    const double a = phi * mu[j];
                    lp += -special::lgamma(a) + (a - 1.0) * data_.log_y(j, tt);
                }
                if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
                ll += lp;
                if (grad) {
                    double s = 0.0;
                    for (Eigen::Index j = 0; j < J; ++j) {
                        g[j] = data_.log_y(j, tt) - special::digamma(phi * mu[j]);
                        s += mu[j] * g[j];
                    }
                    g_logphi[tt] = phi * (special::digamma(phi) + s);
                    Eigen::Index k = 0;
                    for (Eigen::Index j = 0; j < J; ++j) {
                        if (static_cast<std::size_t>(j) == data_.reference) continue;
                        g_eta(k++, tt) = phi * mu[j] * (g[j] - s);
                    }
                }
            }
        } else {
            const Eigen::MatrixXd& L = p.omega_chol;
            const double sigma = p.sigma;
            if (!(sigma > 0.0)) return -std::numeric_limits<double>::infinity();
            const double log_det_half = L.diagonal().array().log().sum() + static_cast<double>(d) * std::log(sigma);
            const double norm_const = -static_cast<double>(d) * special::log_sqrt_two_pi - log_det_half;
            Eigen::VectorXd w(d), v(d);
            Eigen::MatrixXd g_L;
            double g_sigma = 0.0;
            if (grad) g_L = Eigen::MatrixXd::Zero(d, d);
            const double inv_s2 = 1.0 / (sigma * sigma);
            for (std::size_t t = m; t < T; ++t) {
                const auto tt = static_cast<Eigen::Index>(t);
                w = L.triangularView<Eigen::Lower>().solve(f.e.col(tt));
                const double q = w.squaredNorm();
                ll += norm_const - 0.5 * q * inv_s2;
                if (grad) {
                    v = L.transpose().triangularView<Eigen::Upper>().solve(w) * inv_s2;
                    g_eta.col(tt) = v;
                    g_sigma += -static_cast<double>(d) / sigma + q * inv_s2 / sigma;
                    g_L.noalias() += v * w.transpose();
                }
            }
            if (grad) {
                const double n = static_cast<double>(T - m);
                for (Eigen::Index i = 0; i < d; ++i) {
                    for (Eigen::Index j = i + 1; j < d; ++j) g_L(i, j) = 0.0;
                    g_L(i, i) -= n / L(i, i);
                }
                grad->sigma += g_sigma;
                grad->omega_chol += g_L;
            }
            if (!std::isfinite(ll)) return -std::numeric_limits<double>::infinity();
        }
        if (grad) backward(p, f, g_eta, g_logphi, *grad);
        return ll;
    }

    /// Sum of independent prior log densities; adds d/dparams into *grad when given.
    double log_prior(const ParamVector& p, ParamVector* grad = nullptr) const {
        double lp = 0.0;
        auto normal = [&](double x, const NormalPrior& pr, double* g) {
            lp += special::normal_lpdf(x, pr.mean, pr.sd);
            if (g) *g += -(x - pr.mean) / (pr.sd * pr.sd);
        };
        auto lag_matrices = [&](const std::vector<Eigen::MatrixXd>& mats, std::vector<Eigen::MatrixXd>* gmats,
                                const NormalPrior& diag, const NormalPrior& off) {
            for (std::size_t q = 0; q < mats.size(); ++q)
                for (Eigen::Index r = 0; r < mats[q].rows(); ++r)
                    for (Eigen::Index s = 0; s < mats[q].cols(); ++s)
                        normal(mats[q](r, s), r == s ? diag : off, gmats ? &(*gmats)[q](r, s) : nullptr);
        };
        lag_matrices(p.A, grad ? &grad->A : nullptr, priors_.ar_diagonal, priors_.ar_off_diagonal);
        lag_matrices(p.B, grad ? &grad->B : nullptr, priors_.ma_diagonal, priors_.ma_off_diagonal);
        for (Eigen::Index i = 0; i < p.beta.size(); ++i)
            normal(p.beta[i], priors_.mean_prior(layout_.beta_kind(static_cast<std::size_t>(i))), grad ? &grad->beta[i] : nullptr);
        for (Eigen::Index i = 0; i < p.gamma.size(); ++i)
            normal(p.gamma[i], priors_.precision_prior(layout_.gamma_kind(static_cast<std::size_t>(i))),
                   grad ? &grad->gamma[i] : nullptr);
        for (Eigen::Index l = 0; l < p.alpha.size(); ++l) normal(p.alpha[l], priors_.precision_ar, grad ? &grad->alpha[l] : nullptr);
        for (Eigen::Index k = 0; k < p.tau.size(); ++k) normal(p.tau[k], priors_.precision_ma, grad ? &grad->tau[k] : nullptr);
        if (layout_.tvarma()) {
            if (!(p.sigma > 0.0)) return -std::numeric_limits<double>::infinity();
            // half-normal: twice the normal density on the positive half-line
            lp += std::log(2.0) + special::normal_lpdf(p.sigma, 0.0, priors_.sigma_scale);
            if (grad) grad->sigma += -p.sigma / (priors_.sigma_scale * priors_.sigma_scale);
            lp += correlation::lkj_cholesky_lpdf(p.omega_chol, priors_.lkj_shape);
            if (grad) correlation::lkj_cholesky_grad(p.omega_chol, priors_.lkj_shape, grad->omega_chol);
        }
        return lp;
    }

    /// Unnormalized log posterior on the constrained scale (no Jacobian).
    double log_posterior(const ParamVector& p) const {
        const double lp = log_prior(p);
        if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
        const double ll = log_likelihood(p);
        return std::isfinite(ll) ? lp + ll : -std::numeric_limits<double>::infinity();
    }

    /// Sampler target on the unconstrained scale: log posterior + log|Jacobian|.
    double log_density(const Eigen::VectorXd& u) const {
        double lj = 0.0;
        const ParamVector p = layout_.constrain(u, &lj);
        const double lp = log_posterior(p);
        return std::isfinite(lp) ? lp + lj : -std::numeric_limits<double>::infinity();
    }

    /// As `log_density`, writing the exact gradient with respect to u into `grad`.
    double log_density_gradient(const Eigen::VectorXd& u, Eigen::VectorXd& grad) const {
        grad.setZero(static_cast<Eigen::Index>(layout_.size()));
        if (!u.allFinite()) return -std::numeric_limits<double>::infinity();
        double lj = 0.0;
        const ParamVector p = layout_.constrain(u, &lj);
        ParamVector g = layout_.zeros();
        double lp = log_prior(p, &g);
        if (!std::isfinite(lp)) return -std::numeric_limits<double>::infinity();
        const double ll = log_likelihood(p, &g);
        if (!std::isfinite(ll)) {
            grad.setZero();
            return -std::numeric_limits<double>::infinity();
        }
        grad = flatten_gradient(g, p, u);
        return lp + ll + lj;
    }

private:
    struct Forward {
        Eigen::MatrixXd c;        // X_t beta, d x T
        Eigen::MatrixXd centered; // alr(y_t) - X_t beta, d x T
        Eigen::MatrixXd eta;      // d x T
        Eigen::MatrixXd e;        // alr(y_t) - eta_t, d x T
        Eigen::VectorXd dev;      // log phi_t - z_t'gamma
        Eigen::VectorXd log_phi;
        bool ok = true;
    };

    Forward forward(const ParamVector& p) const {
        const std::size_t T = data_.length();
        const std::size_t m = spec_.max_lag();
        const auto d = static_cast<Eigen::Index>(spec_.dim());
        const auto TT = static_cast<Eigen::Index>(T);
        Forward f;
        f.c.resize(d, TT);
        for (std::size_t t = 0; t < T; ++t) designs_.mean_offset(t, p.beta, f.c.col(static_cast<Eigen::Index>(t)).data());
        f.centered = data_.alr - f.c;
        f.eta.resize(d, TT);
        f.e.resize(d, TT);
        for (std::size_t t = 0; t < T; ++t) {
            const auto tt = static_cast<Eigen::Index>(t);
            if (t < m) {
                f.eta.col(tt) = data_.alr.col(tt);
                f.e.col(tt).setZero();
                continue;
            }
            f.eta.col(tt) = f.c.col(tt);
            for (std::size_t q = 0; q < p.A.size(); ++q) f.eta.col(tt).noalias() += p.A[q] * f.centered.col(tt - 1 - static_cast<Eigen::Index>(q));
            for (std::size_t q = 0; q < p.B.size(); ++q) f.eta.col(tt).noalias() += p.B[q] * f.e.col(tt - 1 - static_cast<Eigen::Index>(q));
            f.e.col(tt) = data_.alr.col(tt) - f.eta.col(tt);
        }
        if (!f.eta.allFinite()) f.ok = false;
        if (spec_.dirichlet()) {
            f.dev = Eigen::VectorXd::Zero(TT);
            f.log_phi.resize(TT);
            for (std::size_t t = 0; t < T; ++t) {
                const auto tt = static_cast<Eigen::Index>(t);
                if (t >= m) {
                    double dv = 0.0;
                    for (Eigen::Index l = 0; l < p.alpha.size(); ++l) dv += p.alpha[l] * f.dev[tt - 1 - l];
                    for (Eigen::Index k = 0; k < p.tau.size(); ++k) dv += p.tau[k] * f.e.col(tt - 1 - k).squaredNorm();
                    f.dev[tt] = dv;
                }
                f.log_phi[tt] = designs_.precision_offset(t, p.gamma) + f.dev[tt];
                if (t >= m && !(std::abs(f.log_phi[tt]) <= kLogPrecisionBound)) f.ok = false;
            }
        }
        return f;
    }

    void backward(const ParamVector& p, const Forward& f, Eigen::MatrixXd& g_eta, const Eigen::VectorXd& g_logphi,
                  ParamVector& grad) const {
        const std::size_t T = data_.length();
        const std::size_t m = spec_.max_lag();
        const auto d = static_cast<Eigen::Index>(spec_.dim());
        const auto TT = static_cast<Eigen::Index>(T);
        Eigen::MatrixXd g_c = Eigen::MatrixXd::Zero(d, TT);
        Eigen::MatrixXd g_e = Eigen::MatrixXd::Zero(d, TT);
        Eigen::VectorXd g_dev = Eigen::VectorXd::Zero(TT);
        Eigen::VectorXd g(d);
        const auto mm = static_cast<Eigen::Index>(m);
        for (Eigen::Index t = TT - 1; t >= mm; --t) {
            g = g_eta.col(t) - g_e.col(t);
            if (spec_.dirichlet()) {
                if (grad.gamma.size() > 0) grad.gamma.noalias() += designs_.precision_features().row(t).transpose() * g_logphi[t];
                const double gd = g_dev[t] + g_logphi[t];
                for (Eigen::Index l = 0; l < p.alpha.size(); ++l) {
                    const Eigen::Index s = t - 1 - l;
                    grad.alpha[l] += gd * f.dev[s];
                    if (s >= mm) g_dev[s] += p.alpha[l] * gd;
                }
                for (Eigen::Index k = 0; k < p.tau.size(); ++k) {
                    const Eigen::Index s = t - 1 - k;
                    grad.tau[k] += gd * f.e.col(s).squaredNorm();
                    if (s >= mm) g_e.col(s) += (2.0 * p.tau[k] * gd) * f.e.col(s);
                }
            }
            g_c.col(t) += g;
            for (std::size_t q = 0; q < p.A.size(); ++q) {
                const Eigen::Index s = t - 1 - static_cast<Eigen::Index>(q);
                grad.A[q].noalias() += g * f.centered.col(s).transpose();
                g_c.col(s).noalias() -= p.A[q].transpose() * g;
            }
            for (std::size_t q = 0; q < p.B.size(); ++q) {
                const Eigen::Index s = t - 1 - static_cast<Eigen::Index>(q);
                if (s < mm) continue;
                grad.B[q].noalias() += g * f.e.col(s).transpose();
                g_e.col(s).noalias() += p.B[q].transpose() * g;
            }
        }
        for (std::size_t t = 0; t < T; ++t) designs_.add_mean_gradient(t, g_c.col(static_cast<Eigen::Index>(t)).data(), grad.beta);
    }

    Eigen::VectorXd flatten_gradient(const ParamVector& g, const ParamVector& p, const Eigen::VectorXd& u) const {
        ParamVector common = g;
        if (layout_.tvarma()) {
            common.sigma = 1.0;
            common.omega_chol = p.omega_chol;  // placeholders so flatten's shape checks pass
        }
        Eigen::VectorXd out = layout_.flatten(common);
        if (layout_.tvarma()) {
            const auto so = static_cast<Eigen::Index>(layout_.sigma_offset());
            out[so] = g.sigma * p.sigma + 1.0;  // d/du [f(e^u) + u]
            const auto oo = static_cast<Eigen::Index>(layout_.omega_offset());
            const auto nfree = static_cast<Eigen::Index>(correlation::free_size(layout_.dim()));
            out.segment(oo, nfree).setZero();
            correlation::backprop(u.data() + oo, layout_.dim(), g.omega_chol, out.data() + oo);
        }
        return out;
    }

    ModelSpec spec_;
    Priors priors_;
    DesignMatrices designs_;
    PreparedSeries data_;
    ParamLayout layout_;
};

/// eta_t for t = 1..T (rows), under the conditioning convention for t <= m.
inline Eigen::MatrixXd mean_recursion(const ModelSpec& spec, const ParamVector& params, const CompositionalSeries& series,
                                      const DesignMatrices& designs) {
    return Posterior(spec, Priors{}, series, designs).latent_path(params).eta;
}

/// log phi_t given a precomputed eta path (T x (J-1)).
inline Eigen::VectorXd precision_recursion(const ModelSpec& spec, const ParamVector& params, const CompositionalSeries& series,
                                           const DesignMatrices& designs, const Eigen::MatrixXd& eta) {
    const std::size_t T = series.length();
    const std::size_t m = spec.max_lag();
    const PreparedSeries data(series, spec.reference_index());
    Eigen::VectorXd dev = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(T));
    Eigen::VectorXd log_phi(static_cast<Eigen::Index>(T));
    for (std::size_t t = 0; t < T; ++t) {
        const auto tt = static_cast<Eigen::Index>(t);
        if (t >= m && spec.variant == Variant::BDarmaDarch) {
            for (Eigen::Index l = 0; l < params.alpha.size(); ++l) dev[tt] += params.alpha[l] * dev[tt - 1 - l];
            for (Eigen::Index k = 0; k < params.tau.size(); ++k)
                dev[tt] += params.tau[k] * (data.alr.col(tt - 1 - k) - eta.row(tt - 1 - k).transpose()).squaredNorm();
        }
        log_phi[tt] = designs.precision_offset(t, params.gamma) + dev[tt];
    }
    return log_phi;
}

inline double log_likelihood(const ModelSpec& spec, const ParamVector& params, const CompositionalSeries& series,
                             const DesignMatrices& designs) {
    return Posterior(spec, Priors{}, series, designs).log_likelihood(params);
}

inline double log_prior(const ModelSpec& spec, const Priors& priors, const ParamVector& params, const CompositionalSeries& series,
                        const DesignMatrices& designs) {
    return Posterior(spec, priors, series, designs).log_prior(params);
}

inline double log_posterior(const ModelSpec& spec, const Priors& priors, const ParamVector& params,
                            const CompositionalSeries& series, const DesignMatrices& designs) {
    return Posterior(spec, priors, series, designs).log_posterior(params);
}

/// Gradient of the unconstrained-scale target (log posterior + log Jacobian) at u.
inline Eigen::VectorXd grad_log_posterior(const ModelSpec& spec, const Priors& priors, const Eigen::VectorXd& u,
                                          const CompositionalSeries& series, const DesignMatrices& designs) {
    Eigen::VectorXd g;
    (void)Posterior(spec, priors, series, designs).log_density_gradient(u, g);
    return g;
}

}  // namespace bdarch
