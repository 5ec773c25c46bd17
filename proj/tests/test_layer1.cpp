#include "fixtures.hpp"

#include "mixforge/layer1.hpp"

#include <gtest/gtest.h>

using namespace mixforge;

namespace {

Layer1Config quick_layer1(std::uint64_t seed = 1) {
    auto cfg = fixtures::quick_config().layer1;
    cfg.seed = seed;
    cfg.segments = {FunnelSegment::defaults(FunnelLabel::upper), FunnelSegment::defaults(FunnelLabel::lower)};
    return cfg;
}

Layer1Problem reference_problem() {
    const auto& d = fixtures::reference_data().dataset;
    const auto dec = decompose(d.target(), 52, 53);
    return make_layer1_problem(prepare_layer1(d, dec), quick_layer1());
}

std::vector<std::vector<double>> by_chain(const AdstockPosterior& post, const Matrix& draws, std::size_t p) {
    std::vector<std::vector<double>> out(post.chains);
    for (std::size_t n = 0; n < post.size(); ++n) out[n / post.draws_per_chain].push_back(draws(n, p));
    return out;
}

} // namespace

TEST(BetaPrior, HandComputedOracle) {
    const Dataset d = fixtures::tiny_dataset({{1}, {2}}, {2, 4});
    const auto prior = compute_beta_prior(d);
    // mean of x*y/sum(x) = (2 + 4) / 2 = 3, normalized by max|y| * max|x| = 8
    EXPECT_NEAR(prior.location[0], 3.0 * half_normal_correction() / 8.0, 1e-15);
}

TEST(BetaPrior, IdenticalChannelsGetIdenticalPriors) {
    const Dataset d = fixtures::tiny_dataset({{1, 1}, {0.5, 0.5}, {0.2, 0.2}}, {1, 0.7, 0.3});
    const auto prior = compute_beta_prior(d);
    EXPECT_EQ(prior.location[0], prior.location[1]);
    EXPECT_EQ(prior.scale[0], prior.scale[1]);
}

TEST(BetaPrior, LargerSpendShareLargerLocation) {
    // 20% versus 3% of spend with equal maxima and the same target
    std::vector<std::vector<double>> rows;
    std::vector<double> y;
    for (int t = 0; t < 30; ++t) {
        rows.push_back({t % 3 == 0 ? 1.0 : 0.2, t == 0 ? 1.0 : 0.02});
        y.push_back(1.0);
    }
    const auto prior = compute_beta_prior(fixtures::tiny_dataset(rows, y));
    EXPECT_GT(prior.location[0], prior.location[1]);
}

TEST(BetaPrior, AllZeroSpendStepsIsPriorError) {
    const Dataset d = fixtures::tiny_dataset({{0}, {0}}, {1, 2});
    try {
        compute_beta_prior(d);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::prior);
    }
}

TEST(LogPosterior, OutOfSupportIsNegativeInfinity) {
    const auto problem = reference_problem();
    Layer1Params q{{1.0, 0.2}, {4, 3}, {1, 1}, 0.0, 0.1};
    EXPECT_EQ(problem.log_posterior(q), -std::numeric_limits<double>::infinity());
    q.alpha[0] = 0.4;
    EXPECT_TRUE(std::isfinite(problem.log_posterior(q)));
    q.mu[1] = -1.0;
    EXPECT_EQ(problem.log_posterior(q), -std::numeric_limits<double>::infinity());
}

TEST(LogPosterior, GradientMatchesFiniteDifferences) {
    const auto problem = reference_problem();
    const Layer1Params q{{0.35, 0.25}, {3.5, 2.5}, {0.8, 0.4}, 0.05, 0.08};
    const auto u = problem.unconstrain(q);
    const auto g = problem.log_density_gradient(u);
    for (std::size_t i = 0; i < u.size(); ++i) {
        const double h = 1e-6;
        auto up = u, dn = u;
        up[i] += h;
        dn[i] -= h;
        const double fd = (problem.log_density(up) - problem.log_density(dn)) / (2 * h);
        EXPECT_NEAR(g[i], fd, 1e-4 * std::max(1.0, std::abs(fd))) << "coordinate " << i;
    }
}

TEST(LogPosterior, TruthBeatsPerturbationsOnNoiselessData) {
    auto gt = GroundTruth::reference(4);
    gt.noise_scale = 0.0;
    const auto data = generate(gt, 130, 2);
    const auto& d = data.dataset;
    // remove the known baseline exactly so only the channel signal is left
    std::vector<double> signal(d.length());
    const auto scale = max_abs_scale(d).second.target_scale;
    for (std::size_t t = 0; t < d.length(); ++t) {
        signal[t] = (data.components.contributions(t, 0) + data.components.contributions(t, 1)) / scale;
    }
    Layer1Priors priors;
    priors.segments.assign(2, FunnelSegment::defaults(FunnelLabel::mid));
    priors.beta_scale = {10.0, 10.0};
    const Layer1Problem problem(max_abs_scale(d).first.spend(), signal, priors);
    const double k = gt.target_scale / scale;
    const Layer1Params truth{gt.carryover, gt.saturation, {gt.coefficients[0] * k, gt.coefficients[1] * k}, 0.0, 1e-3};
    const Matrix f = problem.transformed(truth.alpha, truth.mu);
    const double best = problem.log_likelihood(f, truth.beta, 0.0, truth.sigma);
    for (double da : {-0.05, 0.05}) {
        auto q = truth;
        q.alpha[0] += da;
        EXPECT_LT(problem.log_likelihood(problem.transformed(q.alpha, q.mu), q.beta, 0.0, q.sigma), best);
        q = truth;
        q.mu[1] *= 1.0 + da;
        EXPECT_LT(problem.log_likelihood(problem.transformed(q.alpha, q.mu), q.beta, 0.0, q.sigma), best);
    }
}

TEST(FitLayer1, DrawsRespectSupportAndCount) {
    const auto& d = fixtures::reference_data().dataset;
    const auto cfg = quick_layer1();
    const auto post = fit_layer1(d, decompose(d.target(), 52, 53), cfg);
    EXPECT_EQ(post.size(), cfg.chains * cfg.draws);
    for (std::size_t n = 0; n < post.size(); ++n) {
        for (std::size_t p = 0; p < 2; ++p) {
            EXPECT_GE(post.alpha_draws(n, p), 0.0);
            EXPECT_LT(post.alpha_draws(n, p), 1.0);
            EXPECT_GT(post.mu_draws(n, p), 0.0);
            EXPECT_GE(post.beta_draws(n, p), 0.0);
        }
        EXPECT_GT(post.sigma_draws[n], 0.0);
    }
    EXPECT_EQ(post.diagnostics.size(), 3 * 2 + 2u);
}

TEST(FitLayer1, SameSeedIdenticalDifferentSeedConsistent) {
    const auto& d = fixtures::reference_data().dataset;
    const auto dec = decompose(d.target(), 52, 53);
    const auto a = fit_layer1(d, dec, quick_layer1(5));
    const auto b = fit_layer1(d, dec, quick_layer1(5));
    EXPECT_EQ(a, b);
    auto cfg = quick_layer1(99);
    cfg.draws = 400;
    auto cfg_a = quick_layer1(5);
    cfg_a.draws = 400;
    const auto x = fit_layer1(d, dec, cfg_a);
    const auto y = fit_layer1(d, dec, cfg);
    for (std::size_t p = 0; p < 2; ++p) {
        for (const Matrix AdstockPosterior::*field :
             {&AdstockPosterior::alpha_draws, &AdstockPosterior::mu_draws, &AdstockPosterior::beta_draws}) {
            const auto cx = by_chain(x, x.*field, p), cy = by_chain(y, y.*field, p);
            const auto vx = (x.*field).column(p), vy = (y.*field).column(p);
            const double se = std::sqrt(stats::variance(vx) / stats::effective_sample_size(cx) +
                                        stats::variance(vy) / stats::effective_sample_size(cy));
            EXPECT_LE(std::abs(stats::mean(vx) - stats::mean(vy)), 3.0 * se) << "channel " << p;
        }
    }
}

TEST(FitLayer1, ZeroCoefficientChannelConcentratesNearZero) {
    auto gt = GroundTruth::reference(21);
    gt.coefficients = {0.0, 4.0};
    const auto data = generate(gt, 130, 2);
    const auto& d = data.dataset;
    // default sampler length: shorter chains do not cross the beta/mu ridge of a null channel
    Layer1Config cfg;
    cfg.segments = {FunnelSegment::defaults(FunnelLabel::upper), FunnelSegment::defaults(FunnelLabel::lower)};
    const auto post = fit_layer1(d, decompose(d.target(), 52, 53), cfg);
    const auto b0 = post.beta_draws.column(0), b1 = post.beta_draws.column(1);
    EXPECT_LT(stats::quantile(b0, 0.025), 0.1 * stats::mean(b1));
}
