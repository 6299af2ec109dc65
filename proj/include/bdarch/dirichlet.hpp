#pragma once

#include <Eigen/Dense>

#include <cmath>

#include "bdarch/compositional.hpp"
#include "bdarch/random.hpp"
#include "bdarch/special.hpp"

namespace bdarch::dirichlet {

/// Mean/precision parameterization: y ~ Dirichlet(phi * mu).
struct DirichletParams {
    Composition mu;
    double phi = 1.0;

    DirichletParams() = default;
    DirichletParams(Composition mean, double precision) : mu(std::move(mean)), phi(precision) {
        if (!(phi > 0.0) || !std::isfinite(phi)) throw DomainError("Dirichlet precision must be positive and finite");
    }
};

/// lgamma(phi) - sum_j lgamma(phi mu_j) + sum_j (phi mu_j - 1) log y_j, y clamped at kSimplexFloor.
inline double log_pdf(const Composition& y, const DirichletParams& p) {
    const std::size_t J = y.size();
    if (p.mu.size() != J) throw DomainError("log_pdf: dimension mismatch");
    double lp = special::lgamma(p.phi);
    for (std::size_t j = 0; j < J; ++j) {
        const double a = p.phi * p.mu[j];
        if (!(a > 0.0)) throw DomainError("log_pdf: non-positive concentration");
        lp += -special::lgamma(a) + (a - 1.0) * std::log(std::max(y[j], kSimplexFloor));
    }
    return lp;
}

/// Var[y_j] = mu_j (1 - mu_j) / (phi + 1).
inline double component_var(double mu_j, double phi) { return mu_j * (1.0 - mu_j) / (phi + 1.0); }

inline double component_var(const DirichletParams& p, std::size_t j) { return component_var(p.mu[j], p.phi); }

/// One draw via normalized Gamma variates, normalized on the log scale.
inline Composition sample(const DirichletParams& p, Rng& rng) {
    const std::size_t J = p.mu.size();
    Eigen::VectorXd logs(static_cast<Eigen::Index>(J));
    for (std::size_t j = 0; j < J; ++j) logs[static_cast<Eigen::Index>(j)] = log_gamma_draw(rng, p.phi * p.mu[j]);
    const double hi = logs.maxCoeff();
    Eigen::VectorXd v = (logs.array() - hi).exp().matrix();
    v /= v.sum();
    for (Eigen::Index j = 0; j < v.size(); ++j) v[j] = std::clamp(v[j], kSimplexFloor, 1.0 - kSimplexFloor);
    return Composition::trusted(v / v.sum());
}

/// (y_j - mu_j) / sd_j for each component.
inline Eigen::VectorXd standardized_residual(const Composition& y, const DirichletParams& p) {
    const std::size_t J = y.size();
    if (p.mu.size() != J) throw DomainError("standardized_residual: dimension mismatch");
    Eigen::VectorXd r(static_cast<Eigen::Index>(J));
    for (std::size_t j = 0; j < J; ++j)
        r[static_cast<Eigen::Index>(j)] = (y[j] - p.mu[j]) / std::sqrt(component_var(p, j));
    return r;
}

}  // namespace bdarch::dirichlet
