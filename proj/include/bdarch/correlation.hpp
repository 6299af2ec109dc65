#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <vector>

#include "bdarch/error.hpp"
#include "bdarch/special.hpp"

/// Cholesky factors of correlation matrices: the unconstrained map and the LKJ prior.
namespace bdarch::correlation {

inline std::size_t free_size(std::size_t K) { return K * (K - 1) / 2; }

/**
 * Maps K(K-1)/2 reals to a lower-triangular L with unit-norm rows and positive
 * diagonal (LL' is a correlation matrix). Each y is squashed through tanh to a
 * canonical partial correlation z, then row i is filled left to right:
 *   L(i,j) = z * sqrt(1 - sum_{k<j} L(i,k)^2),   L(i,i) = sqrt(1 - sum_{k<i} L(i,k)^2).
 * Entries are consumed row by row (i = 1..K-1, j = 0..i-1).
 * Returns log |dL/dy|.
 */
inline double constrain(const double* y, std::size_t K, Eigen::MatrixXd& L) {
    L.setZero(static_cast<Eigen::Index>(K), static_cast<Eigen::Index>(K));
    if (K == 0) return 0.0;
    L(0, 0) = 1.0;
    double log_jac = 0.0;
    std::size_t idx = 0;
    for (Eigen::Index i = 1; i < static_cast<Eigen::Index>(K); ++i) {
        double sum_sq = 0.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double z = std::tanh(y[idx++]);
            log_jac += std::log1p(-z * z);
            if (j > 0) log_jac += 0.5 * std::log1p(-sum_sq);
            L(i, j) = z * std::sqrt(1.0 - sum_sq);
            sum_sq += L(i, j) * L(i, j);
        }
        L(i, i) = std::sqrt(std::max(0.0, 1.0 - sum_sq));
    }
    return log_jac;
}

/// Inverse of `constrain`. Rows are renormalized first, so near-valid factors are accepted.
inline Eigen::VectorXd unconstrain(const Eigen::MatrixXd& L_in) {
    const auto K = L_in.rows();
    if (L_in.cols() != K) throw DomainError("correlation factor must be square");
    Eigen::VectorXd y(static_cast<Eigen::Index>(free_size(static_cast<std::size_t>(K))));
    std::size_t idx = 0;
    for (Eigen::Index i = 1; i < K; ++i) {
        const double norm = L_in.row(i).head(i + 1).norm();
        if (!(norm > 0.0)) throw DomainError("correlation factor row has zero norm");
        double sum_sq = 0.0;
        for (Eigen::Index j = 0; j < i; ++j) {
            const double lij = L_in(i, j) / norm;
            const double z = lij / std::sqrt(1.0 - sum_sq);
            if (!(std::abs(z) < 1.0)) throw DomainError("correlation factor entry at the boundary");
            y[static_cast<Eigen::Index>(idx++)] = std::atanh(z);
            sum_sq += lij * lij;
        }
    }
    return y;
}

/**
 * Reverse-mode step through `constrain`: given dF/dL in `grad_L` (lower triangle,
 * diagonal included), adds d/dy [F(L(y)) + log|dL/dy|] to `grad_y`.
 */
inline void backprop(const double* y, std::size_t K, const Eigen::MatrixXd& grad_L, double* grad_y) {
    if (K < 2) return;
    std::size_t row_start = 0;
    std::vector<double> z, s, l;
    for (Eigen::Index i = 1; i < static_cast<Eigen::Index>(K); ++i) {
        const auto n = static_cast<std::size_t>(i);
        z.assign(n, 0.0);
        s.assign(n + 1, 0.0);  // s[j] = sum of squares of L(i, 0..j-1)
        l.assign(n, 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            z[j] = std::tanh(y[row_start + j]);
            l[j] = z[j] * std::sqrt(1.0 - s[j]);
            s[j + 1] = s[j] + l[j] * l[j];
        }
        const double l_ii = std::sqrt(std::max(1e-300, 1.0 - s[n]));
        double gs = -grad_L(i, i) / (2.0 * l_ii);  // adjoint of s[n]
        for (std::size_t jj = n; jj-- > 0;) {
            const double gl = grad_L(i, static_cast<Eigen::Index>(jj)) + gs * 2.0 * l[jj];
            const double root = std::sqrt(1.0 - s[jj]);
            const double gz = gl * root;
            gs += -gl * z[jj] / (2.0 * root);
            if (jj > 0) gs += -0.5 / (1.0 - s[jj]);  // Jacobian term 0.5 log(1 - s[j])
            grad_y[row_start + jj] += gz * (1.0 - z[jj] * z[jj]) - 2.0 * z[jj];  // tanh chain + log(1 - z^2)
        }
        row_start += n;
    }
}

/// log c_K(eta): the LKJ normalizing constant, integral of det(Omega)^(eta-1) over K x K correlation matrices.
inline double lkj_log_normalizer(std::size_t K, double eta) {
    double out = 0.0;
    for (std::size_t k = 1; k < K; ++k) {
        const double km = static_cast<double>(K - k);
        const double b = eta + (km - 1.0) / 2.0;
        out += (2.0 * eta - 2.0 + km) * km * std::log(2.0) + km * special::lbeta(b, b);
    }
    return out;
}

/**
 * LKJ(eta) log density expressed on the Cholesky factor L of Omega, i.e. the
 * density of Omega times |dOmega/dL|:  sum_{i>=1} (K - i - 1 + 2 eta - 2) log L(i,i) - log c_K(eta).
 */
inline double lkj_cholesky_lpdf(const Eigen::MatrixXd& L, double eta) {
    const auto K = static_cast<std::size_t>(L.rows());
    double lp = -lkj_log_normalizer(K, eta);
    for (std::size_t i = 1; i < K; ++i) {
        const double coef = static_cast<double>(K - i - 1) + 2.0 * eta - 2.0;
        lp += coef * std::log(L(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(i)));
    }
    return lp;
}

/// Adds d lkj_cholesky_lpdf / dL to `grad_L` (diagonal only).
inline void lkj_cholesky_grad(const Eigen::MatrixXd& L, double eta, Eigen::MatrixXd& grad_L) {
    const auto K = static_cast<std::size_t>(L.rows());
    for (std::size_t i = 1; i < K; ++i) {
        const auto ii = static_cast<Eigen::Index>(i);
        grad_L(ii, ii) += (static_cast<double>(K - i - 1) + 2.0 * eta - 2.0) / L(ii, ii);
    }
}

}  // namespace bdarch::correlation
