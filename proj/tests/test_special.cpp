#include <gtest/gtest.h>

#include <bdarch/special.hpp>

#include <boost/math/distributions/normal.hpp>
#include <boost/math/special_functions/digamma.hpp>

#include <cmath>
#include <limits>
#include <numbers>
#include <random>

using namespace bdarch;

TEST(Lgamma, MatchesStandardLibraryAcrossScales) {
    std::mt19937_64 gen(11);
    std::uniform_real_distribution<double> log10x(-6.0, 8.0);
    double worst = 0.0;
    for (int i = 0; i < 20000; ++i) {
        const double x = std::pow(10.0, log10x(gen));
        const double want = std::lgamma(x);
        const double err = std::abs(special::lgamma(x) - want) / std::max(1.0, std::abs(want));
        worst = std::max(worst, err);
    }
    EXPECT_LT(worst, 1e-13);
}

TEST(Lgamma, KnownValuesAndPoles) {
    EXPECT_EQ(special::lgamma(1.0), 0.0);
    EXPECT_EQ(special::lgamma(2.0), 0.0);
    EXPECT_NEAR(special::lgamma(0.5), 0.5 * std::log(std::numbers::pi), 1e-14);
    EXPECT_NEAR(special::lgamma(3.0), std::log(2.0), 1e-14);
    EXPECT_NEAR(special::lgamma(11.0), std::log(3628800.0), 1e-12);
    EXPECT_TRUE(std::isinf(special::lgamma(0.0)));
    EXPECT_TRUE(std::isnan(special::lgamma(std::numeric_limits<double>::quiet_NaN())));
    EXPECT_TRUE(std::isfinite(special::lgamma(1e300)));
}

TEST(Digamma, MatchesBoost) {
    std::mt19937_64 gen(12);
    std::uniform_real_distribution<double> log10x(-4.0, 6.0);
    for (int i = 0; i < 5000; ++i) {
        const double x = std::pow(10.0, log10x(gen));
        const double want = boost::math::digamma(x);
        EXPECT_NEAR(special::digamma(x), want, 1e-12 * std::max(1.0, std::abs(want))) << x;
    }
    EXPECT_NEAR(special::digamma(1.0), -std::numbers::egamma, 1e-14);
    EXPECT_NEAR(special::digamma(0.5), -std::numbers::egamma - 2.0 * std::log(2.0), 1e-14);
    EXPECT_TRUE(std::isnan(special::digamma(0.0)));
}

TEST(Digamma, IsTheDerivativeOfLgamma) {
    for (double x : {0.05, 0.3, 1.7, 4.0, 25.0, 900.0}) {
        const double h = 1e-6 * std::max(1.0, x);
        const double fd = (std::lgamma(x + h) - std::lgamma(x - h)) / (2.0 * h);
        EXPECT_NEAR(special::digamma(x), fd, 1e-6 * std::max(1.0, std::abs(fd))) << x;
    }
}

TEST(Lbeta, MatchesGammaIdentity) {
    for (double a : {0.1, 1.0, 3.5, 200.0})
        for (double b : {0.2, 2.0, 50.0})
            EXPECT_NEAR(special::lbeta(a, b), std::lgamma(a) + std::lgamma(b) - std::lgamma(a + b), 1e-11);
}

TEST(LogSumExp, StableAndHandlesNegativeInfinity) {
    const double ninf = -std::numeric_limits<double>::infinity();
    EXPECT_NEAR(special::log_sum_exp(std::log(2.0), std::log(3.0)), std::log(5.0), 1e-15);
    EXPECT_NEAR(special::log_sum_exp(1000.0, 1000.0), 1000.0 + std::log(2.0), 1e-12);
    EXPECT_EQ(special::log_sum_exp(ninf, 4.0), 4.0);
    EXPECT_EQ(special::log_sum_exp(4.0, ninf), 4.0);
}

TEST(NormalLpdf, MatchesBoostDensity) {
    for (double mean : {-2.0, 0.0, 7.0})
        for (double sd : {0.03, 1.0, 1.5})
            for (double x : {-3.0, 0.1, 6.5}) {
                const double want = std::log(boost::math::pdf(boost::math::normal(mean, sd), x));
                if (std::isfinite(want)) EXPECT_NEAR(special::normal_lpdf(x, mean, sd), want, 1e-10 * std::max(1.0, std::abs(want)));
            }
}
