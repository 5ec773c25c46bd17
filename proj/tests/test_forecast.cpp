#include "fixtures.hpp"

#include "mixforge/forecast.hpp"

#include <gtest/gtest.h>

using namespace mixforge;

namespace {

std::pair<Date, Date> next_quarter(const FittedModel& m) {
    const Date s = m.data.dates().back() + 7;
    return {s, s + 7 * 12};
}

} // namespace

TEST(EvenSpread, FixedShares) {
    const auto& d = fixtures::reference_data().dataset;
    const Date s = Date::from_ymd(2024, 1, 1);
    const auto plan = even_spread(100, s, s + 63, d, std::vector<double>{0.6, 0.4});
    ASSERT_EQ(plan.horizon(), 10u);
    for (std::size_t t = 0; t < 10; ++t) {
        EXPECT_NEAR(plan.allocation(t, 0), 6.0, 1e-12);
        EXPECT_NEAR(plan.allocation(t, 1), 4.0, 1e-12);
    }
}

TEST(EvenSpread, ZeroBudgetAndBadShares) {
    const auto& d = fixtures::reference_data().dataset;
    const Date s = Date::from_ymd(2024, 1, 1);
    const auto zero = even_spread(0, s, s + 7, d);
    for (double v : zero.allocation.data()) EXPECT_EQ(v, 0.0);
    EXPECT_NO_THROW(zero.validate());
    try {
        even_spread(10, s, s + 7, d, std::vector<double>{0.6, 0.5});
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parameter);
    }
}

TEST(EvenSpread, DefaultSharesFollowColumnSums) {
    const auto& d = fixtures::reference_data().dataset;
    const Date s = Date::from_ymd(2024, 1, 1);
    const auto plan = even_spread(1000, s, s + 7, d);
    double a = 0, b = 0;
    for (std::size_t t = 0; t < d.length(); ++t) {
        a += d.spend()(t, 0);
        b += d.spend()(t, 1);
    }
    const auto tot = plan.channel_totals();
    EXPECT_NEAR(tot[0] / 1000.0, a / (a + b), 1e-12);
    EXPECT_NEAR(tot[1] / 1000.0, b / (a + b), 1e-12);
}

TEST(Horizon, StartMustPrecedeEnd) {
    const Date s = Date::from_ymd(2024, 1, 1);
    EXPECT_THROW(horizon_length(s, s, Cadence::weekly), Error);
    EXPECT_THROW(horizon_length(s, s + 3, Cadence::weekly), Error);
    EXPECT_EQ(horizon_length(s, s + 14, Cadence::weekly), 3u);
}

TEST(Predict, ZeroBudgetIsBaselineOnly) {
    const auto& m = fixtures::quick_model();
    const auto [s, e] = next_quarter(m);
    const auto plan = even_spread(0, s, e, m.data);
    // carryover from the training spend still reaches the first steps; far enough ahead it has decayed
    const auto r = predict(plan, m, 100);
    for (std::size_t h = 0; h < r.dates.size(); ++h) {
        for (std::size_t p = 0; p < 2; ++p) EXPECT_GE(r.per_channel_mean(h, p), 0.0);
    }
    const Date far = e + 7 * 200;
    const auto late = predict(even_spread(0, far, far + 7 * 4, m.data), m, 100);
    for (std::size_t h = 0; h < late.dates.size(); ++h) {
        for (std::size_t p = 0; p < 2; ++p) EXPECT_NEAR(late.per_channel_mean(h, p), 0.0, 1e-12);
        EXPECT_LE(late.lo80[h], late.mean[h]);
        EXPECT_GE(late.hi80[h], late.mean[h]);
    }
}

TEST(Predict, DoublingBudgetNeverLowersThePrediction) {
    const auto& m = fixtures::quick_model();
    const auto [s, e] = next_quarter(m);
    const auto a = predict(even_spread(500, s, e, m.data), m, 200);
    const auto b = predict(even_spread(1000, s, e, m.data), m, 200);
    for (std::size_t h = 0; h < a.mean.size(); ++h) EXPECT_GE(b.mean[h], a.mean[h]);
}

TEST(Predict, Deterministic) {
    const auto& m = fixtures::quick_model();
    const auto [s, e] = next_quarter(m);
    const auto plan = even_spread(800, s, e, m.data);
    EXPECT_EQ(to_json(predict(plan, m, 150)).dump(), to_json(predict(plan, m, 150)).dump());
}

TEST(Predict, InSampleMatchesTrainingFitClosely) {
    const auto& m = fixtures::quick_model();
    const auto r = predict_in_sample(m, 200);
    double ss = 0, st = 0;
    const double mean = stats::mean(m.data.target());
    for (std::size_t t = 0; t < m.length(); ++t) {
        ss += (m.data.target()[t] - r.mean[t]) * (m.data.target()[t] - r.mean[t]);
        st += (m.data.target()[t] - mean) * (m.data.target()[t] - mean);
    }
    EXPECT_GT(1 - ss / st, 0.9);
}

TEST(Predict, ColdStartBeforeTrainingWarns) {
    const auto& m = fixtures::quick_model();
    const Date s = m.data.dates().front() + (-7 * 20);
    const auto r = predict(even_spread(100, s, s + 7 * 4, m.data), m, 50);
    EXPECT_FALSE(r.warnings.empty());
}
