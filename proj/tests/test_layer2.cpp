#include "fixtures.hpp"

#include "mixforge/layer2.hpp"

#include <gtest/gtest.h>

using namespace mixforge;

namespace {

ModelConfig four_knots() {
    auto cfg = fixtures::quick_config();
    cfg.layer2.knots = 4;
    return cfg;
}

/// Coefficient path multiplier 1 + t / (T - 1), applied to every channel's contribution.
SyntheticData ramped(const SyntheticData& base) {
    SyntheticData out = base;
    const auto& c = base.components;
    const std::size_t T = base.dataset.length();
    std::vector<double> y(T);
    for (std::size_t t = 0; t < T; ++t) {
        y[t] = c.trend[t] + c.seasonal[t] + c.noise[t];
        const double ramp = 1.0 + static_cast<double>(t) / static_cast<double>(T - 1);
        for (std::size_t p = 0; p < base.dataset.channels(); ++p) y[t] += ramp * c.contributions(t, p);
    }
    out.dataset = base.dataset.with_target(std::move(y));
    return out;
}

/// The generator's own trend and seasonality as a decomposition.
Decomposition true_baseline(const SyntheticData& s) {
    Decomposition dec;
    dec.trend = s.components.trend;
    dec.seasonal = s.components.seasonal;
    dec.residual.resize(dec.trend.size());
    for (std::size_t t = 0; t < dec.trend.size(); ++t) dec.residual[t] = s.dataset.target()[t] - dec.trend[t] - dec.seasonal[t];
    dec.trend_end = dec.trend.back();
    return dec;
}

/// A posterior concentrated on the generator's adstock parameters.
AdstockPosterior true_adstock(const GroundTruth& gt, const SyntheticData& s) {
    const std::size_t P = gt.channels(), N = 4;
    AdstockPosterior post;
    post.alpha_draws = Matrix(N, P);
    post.mu_draws = Matrix(N, P);
    post.beta_draws = Matrix(N, P);
    for (std::size_t n = 0; n < N; ++n) {
        for (std::size_t p = 0; p < P; ++p) {
            post.alpha_draws(n, p) = gt.carryover[p];
            post.mu_draws(n, p) = gt.saturation[p];
            post.beta_draws(n, p) = gt.coefficients[p];
        }
    }
    post.intercept_draws.assign(N, 0.0);
    const double scale = max_abs_scale(s.dataset).second.target_scale;
    post.sigma_draws.assign(N, std::max(s.components.noise_scale, 0.5) / scale);
    return post;
}

} // namespace

TEST(Kernel, RowsSumToOne) {
    const auto K = build_kernel(50, KnotGrid::uniform(50, 6));
    for (std::size_t t = 0; t < 50; ++t) {
        double s = 0.0;
        for (std::size_t j = 0; j < 6; ++j) s += K(t, j);
        EXPECT_NEAR(s, 1.0, 1e-12);
    }
}

TEST(Kernel, SingleKnotIsConstant) {
    const auto K = build_kernel(7, KnotGrid::uniform(7, 1));
    for (std::size_t t = 0; t < 7; ++t) EXPECT_EQ(K(t, 0), 1.0);
}

TEST(Kernel, NarrowBandwidthApproachesIdentity) {
    const auto K = build_kernel(6, KnotGrid::uniform(6, 6, 1e-3));
    for (std::size_t t = 0; t < 6; ++t) {
        for (std::size_t j = 0; j < 6; ++j) EXPECT_NEAR(K(t, j), t == j ? 1.0 : 0.0, 1e-12);
    }
}

TEST(Kernel, SymmetricMidpoint) {
    const KnotGrid g{{0.0, 4.0}, 2.0};
    const auto K = build_kernel(5, g);
    EXPECT_NEAR(K(2, 0), 0.5, 1e-15);
    EXPECT_NEAR(K(2, 1), 0.5, 1e-15);
}

TEST(Kernel, GridValidation) {
    EXPECT_THROW((KnotGrid{{1.0, 1.0}, 1.0}.validate(5)), Error);
    EXPECT_THROW((KnotGrid{{1.0}, 0.0}.validate(5)), Error);
    EXPECT_THROW(KnotGrid::uniform(5, 6), Error);
}

TEST(CoefficientsAt, MidpointAndFarFuture) {
    KtrModel m;
    m.grid = {{0.0, 10.0}, 3.0};
    m.kernel = build_kernel(11, m.grid);
    Matrix b(2, 1);
    b(0, 0) = 1.0;
    b(1, 0) = 3.0;
    m.knot_draws = {b};
    m.coefficient_mean = Matrix(11, 1);
    EXPECT_NEAR(m.coefficients_at(5.0)(0, 0), 2.0, 1e-12);
    double prev = m.coefficients_at(10.0)(0, 0);
    for (double t : {12.0, 15.0, 20.0, 40.0}) {
        const double v = m.coefficients_at(t)(0, 0);
        EXPECT_GE(v, prev);
        EXPECT_LE(v, 3.0);
        prev = v;
    }
    EXPECT_NEAR(prev, 3.0, 1e-9);
}

TEST(Layer2Objective, GradientMatchesFiniteDifferences) {
    const std::size_t T = 20;
    const KnotGrid g = KnotGrid::uniform(T, 3);
    Matrix F(T, 2);
    std::vector<double> r(T);
    for (std::size_t t = 0; t < T; ++t) {
        F(t, 0) = 0.5 + 0.3 * std::sin(double(t));
        F(t, 1) = 0.2 + 0.1 * double(t % 4);
        r[t] = 0.7 * F(t, 0) + 0.4 * F(t, 1) + 0.01 * std::cos(3.0 * double(t));
    }
    const Layer2Objective obj(build_kernel(T, g), F, r, 0.05, {0.5, 0.5}, {0.2, 0.3});
    std::vector<double> v{-0.3, -0.8, -0.2, -1.0, -0.4, -0.9}, grad;
    obj.value_and_gradient(v, grad);
    for (std::size_t i = 0; i < v.size(); ++i) {
        auto up = v, dn = v;
        up[i] += 1e-6;
        dn[i] -= 1e-6;
        const double fd = (obj.value(up) - obj.value(dn)) / 2e-6;
        EXPECT_NEAR(grad[i], fd, 1e-5 * std::max(1.0, std::abs(fd)));
    }
}

TEST(FitLayer2, DrawsNonnegativeAndTraceMonotone) {
    const auto& m = fixtures::quick_model();
    for (const auto& b : m.ktr.knot_draws) {
        for (double v : b.data()) EXPECT_GE(v, 0.0);
    }
    EXPECT_EQ(m.ktr.size(), m.draws());
    for (std::size_t i = 1; i < m.ktr.objective_trace.size(); ++i) {
        EXPECT_GE(m.ktr.objective_trace[i], m.ktr.objective_trace[i - 1]);
    }
}

TEST(FitLayer2, ConstantCoefficientsRecoveredFlat) {
    auto gt = GroundTruth::reference(7);
    gt.noise_scale = 0.0;
    const auto data = generate(gt, 130, 2);
    const auto& d = data.dataset;
    const auto k = fit_layer2(d, true_baseline(data), true_adstock(gt, data), KnotGrid::uniform(d.length(), 4),
                              four_knots().layer2);
    const double scale = max_abs_scale(d).second.target_scale;
    for (std::size_t p = 0; p < 2; ++p) {
        const auto path = k.coefficient_mean.column(p);
        const double lo = *std::min_element(path.begin(), path.end());
        const double hi = *std::max_element(path.begin(), path.end());
        EXPECT_LE(hi - lo, 0.15 * stats::mean(path)) << "channel " << p;
        // scaled truth: beta * generator scale / target scale
        EXPECT_NEAR(stats::mean(path), gt.coefficients[p] * gt.target_scale / scale, 0.15 * stats::mean(path));
    }
}

TEST(FitLayer2, DoublingRampRecovered) {
    auto gt = GroundTruth::reference(9);
    gt.noise_scale = 0.0;
    const auto data = ramped(generate(gt, 130, 2));
    const auto& d = data.dataset;
    const auto k = fit_layer2(d, true_baseline(data), true_adstock(gt, data), KnotGrid::uniform(d.length(), 4),
                              four_knots().layer2);
    for (std::size_t p = 0; p < 2; ++p) {
        const double ratio = k.coefficient_mean(d.length() - 1, p) / k.coefficient_mean(0, p);
        EXPECT_GE(ratio, 1.5) << "channel " << p;
        EXPECT_LE(ratio, 2.5) << "channel " << p;
    }
}

TEST(FitLayer2, NonConvergenceIsFitError) {
    auto cfg = fixtures::quick_config();
    cfg.layer2.max_iter = 1;
    try {
        fit_model(fixtures::reference_data().dataset, cfg);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::fit);
        EXPECT_NE(std::string(e.what()).find("best log posterior"), std::string::npos);
    }
}

TEST(FitKtrOnly, ProducesCoefficientsWithoutAdstock) {
    const auto& d = fixtures::reference_data().dataset;
    const auto dec = decompose(d.target(), 52, 53);
    const auto k = fit_ktr_only(d, dec, KnotGrid::uniform(d.length(), 4), Layer2Config{}, 50);
    EXPECT_EQ(k.size(), 50u);
    EXPECT_EQ(k.coefficient_mean.rows(), d.length());
}
