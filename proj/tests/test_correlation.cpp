#include <gtest/gtest.h>

#include <bdarch/correlation.hpp>
#include <bdarch/random.hpp>

#include <cmath>

using namespace bdarch;

namespace {

Eigen::MatrixXd factor(const Eigen::VectorXd& y, std::size_t K, double* log_jac = nullptr) {
    Eigen::MatrixXd L;
    const double lj = correlation::constrain(y.data(), K, L);
    if (log_jac) *log_jac = lj;
    return L;
}

// Strictly-lower entries, row by row: the free coordinates of the factor.
Eigen::VectorXd strict_lower(const Eigen::MatrixXd& L) {
    Eigen::VectorXd v(L.rows() * (L.rows() - 1) / 2);
    Eigen::Index k = 0;
    for (Eigen::Index i = 1; i < L.rows(); ++i)
        for (Eigen::Index j = 0; j < i; ++j) v[k++] = L(i, j);
    return v;
}

}  // namespace

TEST(CorrelationFactor, RowsHaveUnitNormAndPositiveDiagonal) {
    Rng rng = make_stream(31, 0);
    for (std::size_t K : {1u, 2u, 3u, 6u}) {
        Eigen::VectorXd y(static_cast<Eigen::Index>(correlation::free_size(K)));
        for (int rep = 0; rep < 50; ++rep) {
            for (auto& v : y) v = normal(rng, 0.0, 2.0);
            const Eigen::MatrixXd L = factor(y, K);
            for (Eigen::Index i = 0; i < L.rows(); ++i) {
                EXPECT_NEAR(L.row(i).norm(), 1.0, 1e-12);
                EXPECT_GT(L(i, i), 0.0);
                for (Eigen::Index j = i + 1; j < L.cols(); ++j) EXPECT_EQ(L(i, j), 0.0);
            }
            const Eigen::MatrixXd Omega = L * L.transpose();
            EXPECT_LT((Omega.diagonal().array() - 1.0).abs().maxCoeff(), 1e-12);
        }
    }
}

TEST(CorrelationFactor, ZeroMapsToIdentity) {
    EXPECT_TRUE(factor(Eigen::VectorXd::Zero(6), 4).isApprox(Eigen::MatrixXd::Identity(4, 4)));
    EXPECT_EQ(correlation::free_size(4), 6u);
}

TEST(CorrelationFactor, UnconstrainInvertsConstrain) {
    Rng rng = make_stream(32, 0);
    for (int rep = 0; rep < 200; ++rep) {
        Eigen::VectorXd y(10);
        for (auto& v : y) v = normal(rng, 0.0, 1.0);
        EXPECT_LT((correlation::unconstrain(factor(y, 5)) - y).cwiseAbs().maxCoeff(), 1e-9);
    }
    Eigen::MatrixXd bad = Eigen::MatrixXd::Identity(2, 2);
    bad(1, 1) = 0.0;
    bad(1, 0) = 1.0;
    EXPECT_THROW(correlation::unconstrain(bad), DomainError);
}

TEST(CorrelationFactor, LogJacobianMatchesFiniteDifferenceDeterminant) {
    Rng rng = make_stream(33, 0);
    for (std::size_t K : {2u, 3u, 4u}) {
        const auto n = static_cast<Eigen::Index>(correlation::free_size(K));
        Eigen::VectorXd y(n);
        for (auto& v : y) v = normal(rng, 0.0, 0.8);
        double lj = 0.0;
        (void)factor(y, K, &lj);
        Eigen::MatrixXd Jac(n, n);
        const double h = 1e-6;
        for (Eigen::Index c = 0; c < n; ++c) {
            Eigen::VectorXd up = y, dn = y;
            up[c] += h;
            dn[c] -= h;
            Jac.col(c) = (strict_lower(factor(up, K)) - strict_lower(factor(dn, K))) / (2.0 * h);
        }
        EXPECT_NEAR(lj, std::log(std::abs(Jac.determinant())), 1e-6) << K;
    }
}

TEST(CorrelationFactor, BackpropMatchesFiniteDifferences) {
    Rng rng = make_stream(34, 0);
    const std::size_t K = 4;
    Eigen::VectorXd y(6);
    for (auto& v : y) v = normal(rng, 0.0, 0.7);
    Eigen::MatrixXd W(4, 4);
    for (auto& v : W.reshaped()) v = normal(rng, 0.0, 1.0);
    auto objective = [&](const Eigen::VectorXd& yy) {
        double lj = 0.0;
        const Eigen::MatrixXd L = factor(yy, K, &lj);
        return (W.array() * L.array()).sum() + lj;
    };
    Eigen::MatrixXd grad_L = W.triangularView<Eigen::Lower>();
    Eigen::VectorXd g = Eigen::VectorXd::Zero(6);
    correlation::backprop(y.data(), K, grad_L, g.data());
    for (Eigen::Index c = 0; c < 6; ++c) {
        Eigen::VectorXd up = y, dn = y;
        up[c] += 1e-6;
        dn[c] -= 1e-6;
        EXPECT_NEAR(g[c], (objective(up) - objective(dn)) / 2e-6, 1e-6) << c;
    }
}

TEST(Lkj, TwoByTwoDensityIntegratesToOne) {
    for (double eta : {1.0, 2.0, 3.0, 7.5}) {
        const int n = 200000;
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double r = -1.0 + 2.0 * (i + 0.5) / n;
            Eigen::Matrix2d L;
            L << 1.0, 0.0, r, std::sqrt(1.0 - r * r);
            total += std::exp(correlation::lkj_cholesky_lpdf(L, eta)) * 2.0 / n;
        }
        EXPECT_NEAR(total, 1.0, 1e-6) << eta;
    }
}

TEST(Lkj, ThreeByThreeIntegratesToOneOverUnconstrainedSpace) {
    // integrand exp(lpdf(L(y)) + log|dL/dy|) over y in R^3, truncated where it is negligible
    for (double eta : {1.0, 3.0}) {
        const int n = 90;
        const double lo = -7.0, h = 14.0 / n;
        double total = 0.0;
        Eigen::Vector3d y;
        for (int a = 0; a < n; ++a)
            for (int b = 0; b < n; ++b)
                for (int c = 0; c < n; ++c) {
                    y << lo + (a + 0.5) * h, lo + (b + 0.5) * h, lo + (c + 0.5) * h;
                    double lj = 0.0;
                    const Eigen::MatrixXd L = factor(y, 3, &lj);
                    total += std::exp(correlation::lkj_cholesky_lpdf(L, eta) + lj) * h * h * h;
                }
        EXPECT_NEAR(total, 1.0, 2e-3) << eta;
    }
}

TEST(Lkj, UniformShapeIsFlatOverCorrelation) {
    Eigen::Matrix2d a, b;
    a << 1, 0, 0.9, std::sqrt(1 - 0.81);
    b << 1, 0, -0.2, std::sqrt(1 - 0.04);
    EXPECT_NEAR(correlation::lkj_cholesky_lpdf(a, 1.0), correlation::lkj_cholesky_lpdf(b, 1.0), 1e-14);
    EXPECT_NEAR(correlation::lkj_cholesky_lpdf(a, 1.0), -std::log(2.0), 1e-14);
}

TEST(Lkj, GradientMatchesFiniteDifferencesOnDiagonal) {
    Eigen::Matrix3d L;
    L << 1, 0, 0, 0.3, std::sqrt(1 - 0.09), 0, -0.2, 0.4, std::sqrt(1 - 0.2);
    Eigen::MatrixXd g = Eigen::MatrixXd::Zero(3, 3);
    correlation::lkj_cholesky_grad(L, 2.5, g);
    for (Eigen::Index i = 1; i < 3; ++i) {
        Eigen::MatrixXd up = L, dn = L;
        up(i, i) += 1e-6;
        dn(i, i) -= 1e-6;
        const double fd = (correlation::lkj_cholesky_lpdf(up, 2.5) - correlation::lkj_cholesky_lpdf(dn, 2.5)) / 2e-6;
        EXPECT_NEAR(g(i, i), fd, 1e-6);
    }
}
