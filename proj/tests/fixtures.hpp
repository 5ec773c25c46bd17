#pragma once

#include "mixforge/model.hpp"
#include "mixforge/synthgen.hpp"

namespace mixforge::fixtures {

/// Reduced sampler settings that keep unit tests fast.
inline ModelConfig quick_config() {
    ModelConfig cfg;
    cfg.funnel = {{"tv", FunnelLabel::upper}, {"search", FunnelLabel::lower}};
    cfg.layer1.draws = 100;
    cfg.layer1.warmup = 600;
    cfg.layer1.chains = 2;
    cfg.layer1.thin = 2;
    cfg.layer2.restarts = 2;
    return cfg;
}

inline const SyntheticData& reference_data() {
    static const SyntheticData data = generate(GroundTruth::reference(7), 130, 2);
    return data;
}

/// One quick fit of the reference data, shared within a test binary.
inline const FittedModel& quick_model() {
    static const FittedModel m = fit_model(reference_data().dataset, quick_config());
    return m;
}

inline Dataset tiny_dataset(std::vector<std::vector<double>> spend_rows, std::vector<double> target) {
    const std::size_t T = target.size();
    const std::size_t P = spend_rows.front().size();
    Matrix spend(T, P);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t p = 0; p < P; ++p) spend(t, p) = spend_rows[t][p];
    }
    std::vector<Date> dates;
    for (std::size_t t = 0; t < T; ++t) dates.push_back(Date::from_ymd(2021, 1, 4) + static_cast<std::int64_t>(7 * t));
    std::vector<std::string> names;
    for (std::size_t p = 0; p < P; ++p) names.push_back("c" + std::to_string(p));
    return Dataset(std::move(dates), std::move(spend), std::move(target), std::move(names));
}

/**
 * A fitted model assembled by hand: constant baseline, no seasonality, one knot,
 * and every posterior draw equal to the given parameters. Training spend is 1
 * per step in every channel, so all spend scales are 1.
 */
inline FittedModel synthetic_model(std::vector<double> alpha, std::vector<double> mu, std::vector<double> beta,
                                   std::size_t T = 52, std::size_t draws = 4, double level = 100.0) {
    const std::size_t P = alpha.size();
    std::vector<std::vector<double>> rows(T, std::vector<double>(P, 1.0));
    std::vector<double> y(T, level);
    Dataset d = tiny_dataset(rows, y);
    ScalePair scales{std::vector<double>(P, 1.0), level};
    Decomposition dec;
    dec.trend.assign(T, level);
    dec.seasonal.assign(T, 0.0);
    dec.residual.assign(T, 0.0);
    dec.trend_end = level;
    AdstockPosterior post;
    post.alpha_draws = Matrix(draws, P);
    post.mu_draws = Matrix(draws, P);
    post.beta_draws = Matrix(draws, P);
    for (std::size_t n = 0; n < draws; ++n) {
        for (std::size_t p = 0; p < P; ++p) {
            post.alpha_draws(n, p) = alpha[p];
            post.mu_draws(n, p) = mu[p];
            post.beta_draws(n, p) = beta[p];
        }
    }
    post.intercept_draws.assign(draws, 0.0);
    post.sigma_draws.assign(draws, 0.01);
    post.chains = 2;
    post.draws_per_chain = draws / 2;
    KtrModel k;
    k.grid = KnotGrid::uniform(T, 1);
    k.kernel = build_kernel(T, k.grid);
    Matrix b(1, P);
    for (std::size_t p = 0; p < P; ++p) b(0, p) = beta[p];
    k.knot_draws.assign(draws, b);
    k.sigma_p.assign(P, 1.0);
    k.anchor = beta;
    k.coefficient_mean = Matrix(T, P);
    k.coefficient_std = Matrix(T, P);
    for (std::size_t t = 0; t < T; ++t) {
        for (std::size_t p = 0; p < P; ++p) k.coefficient_mean(t, p) = beta[p];
    }
    ModelConfig cfg;
    return FittedModel{std::move(d), std::move(scales), dec, dec, std::move(post), std::move(k), cfg, std::nullopt};
}

} // namespace mixforge::fixtures
