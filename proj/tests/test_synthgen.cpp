#include "mixforge/synthgen.hpp"

#include <gtest/gtest.h>

using namespace mixforge;

TEST(Generate, ReferenceConfiguration) {
    const auto gt = GroundTruth::reference();
    EXPECT_EQ(gt.saturation, (std::vector<double>{4.0, 3.0}));
    EXPECT_EQ(gt.carryover, (std::vector<double>{0.4, 0.2}));
    EXPECT_EQ(gt.coefficients, (std::vector<double>{3.0, 2.0}));
    const auto data = generate(gt, 130, 2);
    EXPECT_EQ(data.dataset.length(), 130u);
    EXPECT_EQ(data.dataset.channels(), 2u);
    EXPECT_EQ(data.dataset.cadence(), Cadence::weekly);
}

TEST(Generate, NoNoiseNoEffectIsTrendPlusSeason) {
    auto gt = GroundTruth::reference(3);
    gt.coefficients = {0.0, 0.0};
    gt.noise_scale = 0.0;
    const auto data = generate(gt, 110, 2);
    for (std::size_t t = 0; t < 110; ++t) {
        EXPECT_EQ(data.dataset.target()[t], data.components.trend[t] + data.components.seasonal[t]);
    }
}

TEST(Generate, FixedSeedIsBitIdentical) {
    const auto a = generate(GroundTruth::reference(11), 130, 2);
    const auto b = generate(GroundTruth::reference(11), 130, 2);
    EXPECT_EQ(a.dataset, b.dataset);
    const auto c = generate(GroundTruth::reference(12), 130, 2);
    EXPECT_NE(a.dataset.target(), c.dataset.target());
}

TEST(Generate, DimensionMismatchIsParameterError) {
    try {
        generate(GroundTruth::reference(), 130, 3);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::parameter);
    }
}

TEST(Generate, ComponentsAddUp) {
    const auto data = generate(GroundTruth::reference(5), 130, 2);
    const auto& c = data.components;
    for (std::size_t t = 0; t < 130; ++t) {
        const double sum = c.trend[t] + c.seasonal[t] + c.contributions(t, 0) + c.contributions(t, 1) + c.noise[t];
        EXPECT_NEAR(sum, data.dataset.target()[t], 1e-9);
    }
}
