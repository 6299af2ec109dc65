#include <gtest/gtest.h>

#include <bdarch/posterior.hpp>

#include "test_support.hpp"

using namespace bdarch;
using testing_support::make_spec;
using testing_support::random_series;

namespace {

// Random unconstrained point with a sensible precision level so log phi stays in range.
Eigen::VectorXd random_point(const Posterior& post, Rng& rng) {
    const auto& layout = post.layout();
    Eigen::VectorXd u(static_cast<Eigen::Index>(layout.size()));
    for (auto& v : u) v = uniform(rng, -0.4, 0.4);
    if (post.spec().dirichlet() && post.designs().r_gamma() > 0)
        u[static_cast<Eigen::Index>(layout.gamma_offset())] = uniform(rng, 3.0, 6.0);
    if (layout.tvarma()) u[static_cast<Eigen::Index>(layout.sigma_offset())] = uniform(rng, -2.0, -0.5);
    return u;
}

// max over entries of |analytic - central difference| / max(1, |analytic|)
double worst_fd_error(const Posterior& post, const Eigen::VectorXd& u, double h = 1e-5) {
    Eigen::VectorXd g;
    const double f0 = post.log_density_gradient(u, g);
    EXPECT_TRUE(std::isfinite(f0));
    EXPECT_NEAR(f0, post.log_density(u), 1e-10 * std::max(1.0, std::abs(f0)));
    double worst = 0.0;
    for (Eigen::Index i = 0; i < u.size(); ++i) {
        Eigen::VectorXd up = u, dn = u;
        up[i] += h;
        dn[i] -= h;
        const double fd = (post.log_density(up) - post.log_density(dn)) / (2.0 * h);
        worst = std::max(worst, std::abs(g[i] - fd) / std::max(1.0, std::abs(g[i])));
    }
    return worst;
}

Posterior build(const ModelSpec& spec, std::size_t T, std::uint64_t seed, Priors priors = Priors::simulation()) {
    auto series = random_series(spec.components, T, seed);
    auto designs = build_designs(spec.mean_covariates, spec.precision_covariates, T, spec.components);
    return Posterior(spec, priors, series, designs);
}

void check_variant(ModelSpec spec, int points, std::uint64_t seed) {
    const Posterior post = build(spec, 40, seed);
    Rng rng = make_stream(seed, 99);
    for (int k = 0; k < points; ++k) {
        const Eigen::VectorXd u = random_point(post, rng);
        EXPECT_LT(worst_fd_error(post, u), 1e-5) << to_string(spec.variant) << " point " << k;
    }
}

}  // namespace

TEST(Gradient, BdarmaMatchesFiniteDifferences) {
    check_variant(make_spec(Variant::BDarma, 4, 2, 1), 10, 1);
}

TEST(Gradient, DarchMatchesFiniteDifferences) {
    check_variant(make_spec(Variant::BDarmaDarch, 4, 1, 1, 2, 1), 10, 2);
}

TEST(Gradient, TvarmaMatchesFiniteDifferences) {
    check_variant(make_spec(Variant::BTvarma, 4, 1, 2), 10, 3);
}

TEST(Gradient, SeasonalCovariatesAndCurrencyPriors) {
    for (Variant v : {Variant::BDarma, Variant::BDarmaDarch, Variant::BTvarma}) {
        ModelSpec spec = make_spec(v, 3, 1, 1, v == Variant::BDarmaDarch ? 1 : 0, v == Variant::BDarmaDarch ? 1 : 0);
        spec.mean_covariates.include_trend = true;
        spec.mean_covariates.seasonal_blocks = {{7.0, 2}};
        spec.precision_covariates.include_trend = true;
        spec.precision_covariates.seasonal_blocks = {{7.0, 1}};
        const Posterior post = build(spec, 50, 11, Priors::currency());
        Rng rng = make_stream(5, 5);
        for (int k = 0; k < 5; ++k) EXPECT_LT(worst_fd_error(post, random_point(post, rng)), 1e-5) << to_string(v);
    }
}

TEST(Gradient, SharedMeanCoefficients) {
    ModelSpec spec = make_spec(Variant::BDarmaDarch, 4, 1, 0, 1, 1);
    spec.mean_covariates.share_across_components = true;
    spec.mean_covariates.include_trend = true;
    const Posterior post = build(spec, 30, 4);
    Rng rng = make_stream(4, 4);
    for (int k = 0; k < 5; ++k) EXPECT_LT(worst_fd_error(post, random_point(post, rng)), 1e-5);
}

TEST(Gradient, ZeroCovariateColumnHasZeroLikelihoodGradient) {
    ModelSpec spec = make_spec(Variant::BDarma, 3, 1, 0);
    const std::size_t T = 20;
    auto series = random_series(3, T, 8);
    Eigen::MatrixXd mean(T, 2);
    mean.col(0).setOnes();
    mean.col(1).setZero();
    Eigen::MatrixXd prec = Eigen::MatrixXd::Ones(T, 1);
    DesignMatrices designs(2, mean, {ColumnKind::Intercept, ColumnKind::Other}, prec, {ColumnKind::Intercept});
    const Posterior post(spec, Priors::simulation(), series, designs);
    ParamVector p = post.layout().zeros();
    p.gamma[0] = 4.0;
    p.beta[1] = 0.7;
    ParamVector g = post.layout().zeros();
    ASSERT_TRUE(std::isfinite(post.log_likelihood(p, &g)));
    EXPECT_EQ(g.beta[1], 0.0);
    EXPECT_EQ(g.beta[3], 0.0);
}

TEST(Gradient, PriorGradientIsGaussianScore) {
    ModelSpec spec = make_spec(Variant::BDarmaDarch, 3, 1, 1, 1, 1);
    const Posterior post = build(spec, 20, 9);
    const Priors pr = Priors::simulation();
    Rng rng = make_stream(9, 1);
    ParamVector p = post.layout().unflatten(random_point(post, rng));
    ParamVector g = post.layout().zeros();
    post.log_prior(p, &g);
    EXPECT_NEAR(g.alpha[0], -(p.alpha[0] - pr.precision_ar.mean) / (pr.precision_ar.sd * pr.precision_ar.sd), 1e-14);
    EXPECT_NEAR(g.tau[0], -(p.tau[0] - pr.precision_ma.mean) / (pr.precision_ma.sd * pr.precision_ma.sd), 1e-14);
    EXPECT_NEAR(g.A[0](0, 1), -(p.A[0](0, 1) - pr.ar_off_diagonal.mean) / std::pow(pr.ar_off_diagonal.sd, 2), 1e-14);
    EXPECT_NEAR(g.gamma[0], -(p.gamma[0] - pr.precision_intercept.mean) / std::pow(pr.precision_intercept.sd, 2), 1e-14);
}
