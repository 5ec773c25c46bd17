#include "mixforge/transforms.hpp"

#include <gtest/gtest.h>

#include <cmath>

using namespace mixforge;

TEST(Carryover, ImpulseHalfDecay) {
    const std::vector<double> x{1, 0, 0};
    const auto c = carryover(x, 0.5);
    EXPECT_NEAR(c[0], 1.0, 1e-12);
    EXPECT_NEAR(c[1], 1.0 / 3.0, 1e-12);
    EXPECT_NEAR(c[2], 1.0 / 7.0, 1e-12);
}

TEST(Carryover, ConstantSeriesUnchanged) {
    const std::vector<double> x(20, 2.5);
    for (double a : {0.0, 0.3, 0.9}) {
        for (double v : carryover(x, a)) EXPECT_NEAR(v, 2.5, 1e-12);
    }
}

TEST(Carryover, ZeroAlphaIsIdentity) {
    const std::vector<double> x{3, 0, 1, 7, 2};
    EXPECT_EQ(carryover(x, 0.0), x);
}

TEST(Carryover, MaxLagMatchesDirectSum) {
    const std::vector<double> x{1, 2, 0, 5, 3, 0, 0, 4};
    const double a = 0.6;
    const std::size_t L = 2;
    const auto c = carryover(x, a, L);
    for (std::size_t t = 0; t < x.size(); ++t) {
        double num = 0, den = 0;
        for (std::size_t l = 0; l <= std::min(t, L); ++l) {
            num += std::pow(a, double(l)) * x[t - l];
            den += std::pow(a, double(l));
        }
        EXPECT_NEAR(c[t], num / den, 1e-12);
    }
    // an uncapped window equals a cap at least as long as the series
    EXPECT_EQ(carryover(x, a), carryover(x, a, std::nullopt));
    const auto full = carryover(x, a);
    const auto capped = carryover(x, a, x.size());
    for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(full[t], capped[t], 1e-12);
}

TEST(Carryover, SeededHistoryEqualsJoinedSeries) {
    const std::vector<double> h{1, 2, 3}, s{0, 4};
    const auto seeded = carryover_seeded(h, s, 0.4);
    const auto joined = carryover(std::vector<double>{1, 2, 3, 0, 4}, 0.4);
    EXPECT_DOUBLE_EQ(seeded[0], joined[3]);
    EXPECT_DOUBLE_EQ(seeded[1], joined[4]);
}

TEST(Carryover, AlphaOutsideRangeIsParameterError) {
    const std::vector<double> x{1, 2};
    for (double a : {-0.1, 1.0, 1.5}) {
        try {
            carryover(x, a);
            FAIL();
        } catch (const Error& e) {
            EXPECT_EQ(e.kind(), ErrorKind::parameter);
        }
    }
}

TEST(Reach, Examples) {
    EXPECT_EQ(reach(0.0, 3.0), 0.0);
    EXPECT_NEAR(reach(4.0, 4.0), std::tanh(0.5), 1e-12);
    EXPECT_NEAR(reach(4.0, 4.0), 0.462117, 1e-6);
    EXPECT_GT(reach(2.0, 3.0), reach(2.0, 4.0));
    EXPECT_THROW(reach(1.0, 0.0), Error);
    EXPECT_THROW(reach(1.0, -1.0), Error);
}

TEST(Reach, DerivativeMatchesFiniteDifference) {
    for (double x : {0.0, 0.3, 2.0}) {
        const double h = 1e-6;
        EXPECT_NEAR(reach_derivative(x, 1.7), (reach(x + h, 1.7) - reach(x - h, 1.7)) / (2 * h), 1e-8);
    }
}

TEST(Adstock, ZeroAlphaIsReachAlone) {
    const std::vector<double> x{0.1, 0.5, 1.0, 0.0};
    EXPECT_EQ(adstock(x, 0.0, 4.0), reach(x, 4.0));
}

TEST(Adstock, ImpulseComposesTheOracles) {
    const std::vector<double> x{1, 0, 0};
    const auto f = adstock(x, 0.5, 1.0);
    EXPECT_NEAR(f[0], reach(1.0, 1.0), 1e-12);
    EXPECT_NEAR(f[1], reach(1.0 / 3.0, 1.0), 1e-12);
    EXPECT_NEAR(f[2], reach(1.0 / 7.0, 1.0), 1e-12);
}

TEST(Adstock, OrderIsReachAfterCarryover) {
    // a saturating impulse separates the two orders clearly
    const std::vector<double> x{4, 0, 0, 0};
    const auto adstocked = adstock(x, 0.5, 0.5);
    const auto reach_of_carry = reach(carryover(x, 0.5), 0.5);
    const auto carry_of_reach = carryover(reach(x, 0.5), 0.5);
    for (std::size_t t = 0; t < x.size(); ++t) EXPECT_NEAR(adstocked[t], reach_of_carry[t], 1e-15);
    double gap = 0.0;
    for (std::size_t t = 0; t < x.size(); ++t) gap = std::max(gap, std::abs(reach_of_carry[t] - carry_of_reach[t]));
    EXPECT_GT(gap, 0.05);
}
