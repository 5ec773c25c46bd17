#include "fixtures.hpp"

#include "mixforge/decomposition.hpp"
#include "mixforge/layer1.hpp"
#include "mixforge/stats.hpp"

#include <gtest/gtest.h>

#include <numbers>

using namespace mixforge;

TEST(Decompose, PureSinusoid) {
    const int m = 12;
    const double amp = 3.0;
    std::vector<double> y(120);
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = amp * std::sin(2 * std::numbers::pi * double(t) / m);
    const auto d = decompose(y, m, default_trend_window(m));
    for (std::size_t t = 0; t < y.size(); ++t) {
        EXPECT_NEAR(d.seasonal[t], y[t], 0.05 * amp);
        EXPECT_NEAR(d.trend[t], 0.0, 0.05 * amp);
        EXPECT_NEAR(d.residual[t], 0.0, 0.05 * amp);
    }
}

TEST(Decompose, ConstantSeries) {
    const std::vector<double> y(40, 7.25);
    const auto d = decompose(y, 4, 5);
    for (std::size_t t = 0; t < y.size(); ++t) {
        EXPECT_NEAR(d.trend[t], 7.25, 1e-12);
        EXPECT_NEAR(d.seasonal[t], 0.0, 1e-12);
        EXPECT_NEAR(d.residual[t], 0.0, 1e-12);
    }
}

TEST(Decompose, LinearRampAwayFromEdges) {
    std::vector<double> y(104);
    for (std::size_t t = 0; t < y.size(); ++t) y[t] = 2.0 * double(t + 1);
    const int m = 13;
    const auto d = decompose(y, m, default_trend_window(m));
    for (std::size_t t = m; t + m < y.size(); ++t) EXPECT_NEAR(d.trend[t], y[t], 0.01 * y[t]);
}

TEST(Decompose, SeasonalSumsToZeroOverAPeriod) {
    const auto& y = fixtures::reference_data().dataset.target();
    const auto d = decompose(y, 52, 53);
    double s = 0.0, scale = 0.0;
    for (int k = 0; k < 52; ++k) s += d.seasonal[static_cast<std::size_t>(k)];
    for (double v : y) scale = std::max(scale, std::abs(v));
    EXPECT_LE(std::abs(s / 52.0), 1e-9 * scale);
}

TEST(Decompose, ReconstructionIsBitExact) {
    const auto& y = fixtures::reference_data().dataset.target();
    const auto d = decompose(y, 52, 53);
    for (std::size_t t = 0; t < y.size(); ++t) EXPECT_EQ(d.trend[t] + d.seasonal[t] + d.residual[t], y[t]);
    EXPECT_EQ(recompose(detrend(y, d), d), y);
}

TEST(Decompose, TooShortIsInsufficientData) {
    const std::vector<double> y(50, 1.0);
    try {
        decompose(y, 52, 53);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::insufficient_data);
    }
}

TEST(Detrend, ZeroComponentsIsIdentity) {
    const std::vector<double> y{1.5, -2, 3, 4};
    Decomposition d;
    d.trend.assign(4, 0.0);
    d.seasonal.assign(4, 0.0);
    d.residual = y;
    EXPECT_EQ(detrend(y, d), y);
}

TEST(Detrend, LengthMismatchIsDimensionError) {
    const std::vector<double> y{1, 2, 3};
    Decomposition d;
    d.trend.assign(4, 0.0);
    d.seasonal.assign(4, 0.0);
    try {
        detrend(y, d);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::dimension);
    }
}

TEST(Detrend, ResidualTracksTransformedSpendBetterThanRawTarget) {
    // holds when trend and seasonality dominate the target; with a baseline no larger
    // than the marketing signal the moving-average trend also absorbs slow spend effects
    auto gt = GroundTruth::reference(7);
    gt.seasonal.amplitude = 30.0;
    gt.trend.slope = 0.5;
    gt.trend.bend_height = 60.0;
    const auto data = generate(gt, 130, 2);
    const auto& d = data.dataset;
    const auto dec = decompose(d.target(), 52, 53);
    const auto r = detrend(d.target(), dec);
    for (std::size_t p = 0; p < 2; ++p) {
        const auto scaled = max_abs_scale(d.spend().column(p)).values;
        const auto f = adstock(scaled, gt.carryover[p], gt.saturation[p]);
        EXPECT_GT(stats::correlation(r, f), stats::correlation(d.target(), f)) << "channel " << p;
    }
}

TEST(Decompose, LinearInTheInput) {
    const auto& y = fixtures::reference_data().dataset.target();
    const auto x = fixtures::reference_data().dataset.spend().column(0);
    std::vector<double> z(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) z[t] = y[t] + 2.0 * x[t];
    const DecompositionFilter f{52, 53, 2.0};
    const auto ry = f.apply(y), rx = f.apply(x), rz = f.apply(z);
    for (std::size_t t = 0; t < y.size(); ++t) EXPECT_NEAR(rz[t], ry[t] + 2.0 * rx[t], 1e-9 * (1 + std::abs(z[t])));
}

TEST(ResolveDecomposition, ShortSeriesFallbacks) {
    ModelConfig cfg;
    const auto full = resolve_decomposition(cfg, Cadence::weekly, 130);
    EXPECT_EQ(full.period, 52);
    EXPECT_EQ(full.trend_window, 53);
    const auto partial = resolve_decomposition(cfg, Cadence::weekly, 100);
    EXPECT_EQ(partial.period, 52);
    EXPECT_DOUBLE_EQ(partial.min_cycles, 1.5);
    const auto none = resolve_decomposition(cfg, Cadence::weekly, 60);
    EXPECT_EQ(none.period, 1);
    EXPECT_EQ(none.trend_window, 13);
}
