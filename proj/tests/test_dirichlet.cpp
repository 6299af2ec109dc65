#include <gtest/gtest.h>

#include <bdarch/dirichlet.hpp>

#include <boost/math/special_functions/beta.hpp>

#include <algorithm>
#include <cmath>

using namespace bdarch;
using dirichlet::DirichletParams;

namespace {

// Closed-form log density using std::lgamma, kept apart from the library's own special functions.
double oracle_log_pdf(const Eigen::VectorXd& y, const Eigen::VectorXd& alpha) {
    double lp = std::lgamma(alpha.sum());
    for (Eigen::Index j = 0; j < y.size(); ++j) lp += -std::lgamma(alpha[j]) + (alpha[j] - 1.0) * std::log(y[j]);
    return lp;
}

}  // namespace

TEST(DirichletDensity, UniformIsLogGammaOfJ) {
    for (std::size_t J : {2u, 3u, 5u}) {
        const Composition mu = close(Eigen::VectorXd::Ones(static_cast<Eigen::Index>(J)));
        const DirichletParams p(mu, static_cast<double>(J));  // all shapes equal one
        Eigen::VectorXd y = Eigen::VectorXd::LinSpaced(static_cast<Eigen::Index>(J), 1.0, 2.0);
        EXPECT_NEAR(dirichlet::log_pdf(close(y), p), std::lgamma(static_cast<double>(J)), 1e-12);
    }
}

TEST(DirichletDensity, MatchesIndependentFormula) {
    Rng rng = make_stream(21, 0);
    for (int i = 0; i < 500; ++i) {
        Eigen::VectorXd raw(4), yraw(4);
        for (auto& v : raw) v = uniform(rng, 0.05, 1.0);
        for (auto& v : yraw) v = uniform(rng, 0.05, 1.0);
        const Composition mu = close(raw), y = close(yraw);
        const double phi = std::exp(uniform(rng, -1.0, 8.0));
        const double want = oracle_log_pdf(y.values(), phi * mu.values());
        EXPECT_NEAR(dirichlet::log_pdf(y, {mu, phi}), want, 1e-9 * std::max(1.0, std::abs(want)));
    }
}

TEST(DirichletDensity, TwoComponentCaseIntegratesToOne) {
    const int n = 200000;
    for (auto [a, b] : {std::pair{1.0, 1.0}, {2.0, 5.0}, {1.5, 1.2}, {30.0, 12.0}}) {
        const DirichletParams p(Composition{a / (a + b), b / (a + b)}, a + b);
        double total = 0.0;
        for (int i = 0; i < n; ++i) {
            const double x = (i + 0.5) / n;  // midpoint rule
            total += std::exp(dirichlet::log_pdf(Composition{x, 1.0 - x}, p)) / n;
        }
        EXPECT_NEAR(total, 1.0, 1e-6) << a << "," << b;
    }
}

TEST(DirichletDensity, RejectsBadParameters) {
    EXPECT_THROW(DirichletParams(Composition{0.5, 0.5}, 0.0), DomainError);
    EXPECT_THROW(DirichletParams(Composition{0.5, 0.5}, -1.0), DomainError);
    EXPECT_THROW(DirichletParams(Composition{0.5, 0.5}, std::numeric_limits<double>::infinity()), DomainError);
    EXPECT_THROW(dirichlet::log_pdf(Composition{0.2, 0.3, 0.5}, {Composition{0.5, 0.5}, 2.0}), DomainError);
}

TEST(DirichletMoments, ComponentVarianceExamples) {
    EXPECT_DOUBLE_EQ(dirichlet::component_var(0.5, 1.0), 0.125);
    EXPECT_NEAR(dirichlet::component_var(0.25, 99.0), 0.1875 / 100.0, 1e-16);
    const DirichletParams p(Composition{0.2, 0.8}, 4.0);
    EXPECT_DOUBLE_EQ(dirichlet::component_var(p, 0), dirichlet::component_var(p, 1));
}

TEST(DirichletSampling, MeanAndVarianceWithinMonteCarloError) {
    Rng rng = make_stream(22, 0);
    const Composition mu{0.1, 0.2, 0.3, 0.4};
    for (double phi : {0.7, 10.0, 500.0}) {
        const DirichletParams p(mu, phi);
        const int n = 40000;
        Eigen::VectorXd sum = Eigen::VectorXd::Zero(4), sum_sq = Eigen::VectorXd::Zero(4);
        for (int i = 0; i < n; ++i) {
            const Composition y = dirichlet::sample(p, rng);
            EXPECT_NEAR(y.values().sum(), 1.0, 1e-14);
            sum += y.values();
            sum_sq += y.values().cwiseAbs2();
        }
        for (std::size_t j = 0; j < 4; ++j) {
            const auto jj = static_cast<Eigen::Index>(j);
            const double var = dirichlet::component_var(p, j);
            const double mean = sum[jj] / n;
            EXPECT_NEAR(mean, mu[j], 3.0 * std::sqrt(var / n)) << phi;
            const double sample_var = sum_sq[jj] / n - mean * mean;
            // fourth moment bound for a [0,1] variable: Var(y^2) <= E[y^2]
            EXPECT_NEAR(sample_var, var, 4.0 * std::sqrt(sum_sq[jj] / n / n)) << phi;
        }
    }
}

TEST(DirichletSampling, MarginalPassesKolmogorovSmirnovAgainstBeta) {
    Rng rng = make_stream(23, 0);
    const Composition mu{0.15, 0.35, 0.5};
    const double phi = 6.0;
    const int n = 100000;
    std::vector<double> x(n);
    for (auto& v : x) v = dirichlet::sample({mu, phi}, rng)[1];
    std::sort(x.begin(), x.end());
    const double a = phi * mu[1], b = phi * (1.0 - mu[1]);
    double D = 0.0;
    for (int i = 0; i < n; ++i) {
        const double F = boost::math::ibeta(a, b, x[static_cast<std::size_t>(i)]);
        D = std::max({D, F - static_cast<double>(i) / n, static_cast<double>(i + 1) / n - F});
    }
    EXPECT_LT(D, 0.01);
}

TEST(DirichletSampling, TinyShapesStayOnTheOpenSimplex) {
    Rng rng = make_stream(24, 0);
    const DirichletParams p(Composition{0.01, 0.01, 0.98}, 0.5);
    for (int i = 0; i < 5000; ++i) {
        const Composition y = dirichlet::sample(p, rng);
        ASSERT_TRUE(y.values().allFinite());
        ASSERT_GE(y.values().minCoeff(), kSimplexFloor * 0.5);
        ASSERT_NEAR(y.values().sum(), 1.0, 1e-14);
    }
}

TEST(DirichletSampling, HugePrecisionConcentratesOnTheMean) {
    Rng rng = make_stream(25, 0);
    const Composition mu{0.3, 0.3, 0.4};
    const Composition y = dirichlet::sample({mu, 1e8}, rng);
    EXPECT_LT((y.values() - mu.values()).cwiseAbs().maxCoeff(), 1e-3);
}

TEST(StandardizedResidual, ZeroAtMeanAndScaledBySd) {
    const DirichletParams p(Composition{0.25, 0.75}, 3.0);
    EXPECT_LT(dirichlet::standardized_residual(Composition{0.25, 0.75}, p).cwiseAbs().maxCoeff(), 1e-15);
    const Eigen::VectorXd r = dirichlet::standardized_residual(Composition{0.5, 0.5}, p);
    const double sd = std::sqrt(0.25 * 0.75 / 4.0);
    EXPECT_NEAR(r[0], 0.25 / sd, 1e-12);
    EXPECT_NEAR(r[1], -0.25 / sd, 1e-12);
}
