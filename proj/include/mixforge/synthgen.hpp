#pragma once

#include "mixforge/core.hpp"
#include "mixforge/transforms.hpp"

#include <cmath>
#include <cstdint>
#include <numbers>
#include <optional>
#include <random>
#include <string>
#include <vector>

namespace mixforge {

/// Smooth baseline trend: level + slope * t + a logistic step of height `bend_height`.
struct TrendSpec {
    double level = 200.0;
    double slope = 0.1;
    double bend_height = 20.0;
    double bend_center = 0.3; // fraction of the series length
    double bend_width = 12.0; // steps

    double at(std::size_t t, std::size_t T) const {
        const double x = (static_cast<double>(t) - bend_center * static_cast<double>(T)) / bend_width;
        return level + slope * static_cast<double>(t) + bend_height / (1.0 + std::exp(-x));
    }
};

struct SeasonalSpec {
    double amplitude = 6.0;
    int period = 52;

    double at(std::size_t t) const {
        return amplitude * std::sin(2.0 * std::numbers::pi * static_cast<double>(t) / static_cast<double>(period));
    }
};

/// Shape of a generated spend process.
enum class SpendShape { tv_like, search_like };

/**
 * Known parameters of a synthetic dataset. With the same seed, generate()
 * reproduces the same data bit for bit.
 */
struct GroundTruth {
    std::vector<double> saturation;
    std::vector<double> carryover;
    std::vector<double> coefficients;
    TrendSpec trend;
    SeasonalSpec seasonal;
    /// Standard deviation of additive noise; unset means 5% of the noiseless target's sd.
    std::optional<double> noise_scale;
    /// Multiplier turning beta * f*(x) into target units.
    double target_scale = 100.0;
    std::uint64_t seed = 7;
    Date start = Date::from_ymd(2020, 1, 6);

    std::size_t channels() const noexcept { return coefficients.size(); }

    void validate() const {
        require(saturation.size() == carryover.size() && carryover.size() == coefficients.size(),
                ErrorKind::parameter, "ground truth vectors must have one entry per channel");
        AdstockParams{carryover, saturation, std::nullopt}.validate();
        for (double b : coefficients) {
            require(b >= 0.0, ErrorKind::parameter, "ground truth coefficients must be nonnegative");
        }
        require(!noise_scale || *noise_scale >= 0.0, ErrorKind::parameter, "noise scale must be nonnegative");
        require(seasonal.period >= 1, ErrorKind::parameter, "seasonal period must be positive");
    }

    /// The two-channel configuration: long-carryover TV-like and short-carryover search-like channels.
    static GroundTruth reference(std::uint64_t seed = 7) {
        GroundTruth gt;
        gt.saturation = {4.0, 3.0};
        gt.carryover = {0.4, 0.2};
        gt.coefficients = {3.0, 2.0};
        gt.seed = seed;
        return gt;
    }
};

/// Per-component breakdown of a generated target.
struct SyntheticComponents {
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<double> noise;
    Matrix contributions; // T x P, target units
    double noise_scale = 0.0;

    /// Share of total target attributable to each channel.
    std::vector<double> contribution_shares(std::span<const double> target) const {
        double total = 0.0;
        for (double v : target) total += v;
        std::vector<double> shares(contributions.cols(), 0.0);
        for (std::size_t t = 0; t < contributions.rows(); ++t) {
            for (std::size_t p = 0; p < contributions.cols(); ++p) {
                shares[p] += contributions(t, p);
            }
        }
        for (auto& s : shares) s /= total;
        return shares;
    }
};

struct SyntheticData {
    Dataset dataset;
    SyntheticComponents components;
};

namespace detail {

inline std::vector<double> tv_like_spend(std::size_t T, std::mt19937_64& rng) {
    // Flighted campaigns: a log-level random walk held constant within blocks, then lightly smoothed.
    std::normal_distribution<double> step(0.0, 0.35);
    std::uniform_int_distribution<int> block_len(3, 8);
    std::bernoulli_distribution dark(0.15);
    std::vector<double> raw(T);
    double log_level = std::log(50.0);
    std::size_t t = 0;
    while (t < T) {
        log_level += step(rng);
        log_level = std::clamp(log_level, std::log(10.0), std::log(250.0));
        const bool off = dark(rng);
        const auto len = static_cast<std::size_t>(block_len(rng));
        for (std::size_t k = 0; k < len && t < T; ++k, ++t) {
            raw[t] = off ? 0.0 : std::exp(log_level);
        }
    }
    std::vector<double> out(T);
    for (std::size_t i = 0; i < T; ++i) {
        const double prev = raw[i > 0 ? i - 1 : i];
        const double next = raw[i + 1 < T ? i + 1 : i];
        out[i] = 0.25 * prev + 0.5 * raw[i] + 0.25 * next;
    }
    return out;
}

inline std::vector<double> search_like_spend(std::size_t T, std::mt19937_64& rng) {
    std::lognormal_distribution<double> base(std::log(30.0), 0.45);
    std::bernoulli_distribution burst(0.12);
    std::uniform_real_distribution<double> burst_size(2.0, 4.0);
    std::vector<double> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        double v = base(rng);
        if (burst(rng)) {
            v *= burst_size(rng);
        }
        out[t] = v;
    }
    return out;
}

} // namespace detail

inline SpendShape default_shape(std::size_t p) { return p % 2 == 0 ? SpendShape::tv_like : SpendShape::search_like; }

/**
 * Generates T weekly observations for the channels in `gt`.
 *
 * target_t = target_scale * sum_p beta_p f*(x_tp / max x_p; mu_p, alpha_p) + trend_t + seasonal_t + noise_t.
 * Even-indexed channels are TV-like, odd-indexed ones search-like.
 */
inline SyntheticData generate(const GroundTruth& gt, std::size_t T, std::size_t P) {
    gt.validate();
    require(gt.channels() == P, ErrorKind::parameter,
            "ground truth has " + std::to_string(gt.channels()) + " channels, requested " + std::to_string(P));
    require(P >= 1, ErrorKind::parameter, "at least one channel is required");
    require(T >= 2 * static_cast<std::size_t>(gt.seasonal.period), ErrorKind::parameter,
            "T must cover at least two seasonal periods");

    std::mt19937_64 rng(gt.seed);
    Matrix spend(T, P);
    for (std::size_t p = 0; p < P; ++p) {
        std::vector<double> col;
        // redraw the (rare) all-dark column so every channel has spend
        do {
            col = default_shape(p) == SpendShape::tv_like ? detail::tv_like_spend(T, rng)
                                                         : detail::search_like_spend(T, rng);
        } while (*std::max_element(col.begin(), col.end()) <= 0.0);
        spend.set_column(p, col);
    }

    SyntheticComponents comp;
    comp.trend.resize(T);
    comp.seasonal.resize(T);
    comp.noise.assign(T, 0.0);
    comp.contributions = Matrix(T, P);
    std::vector<double> noiseless(T);
    for (std::size_t t = 0; t < T; ++t) {
        comp.trend[t] = gt.trend.at(t, T);
        comp.seasonal[t] = gt.seasonal.at(t);
    }
    for (std::size_t p = 0; p < P; ++p) {
        const auto scaled = max_abs_scale(spend.column(p)).values;
        const auto f = adstock(scaled, gt.carryover[p], gt.saturation[p]);
        for (std::size_t t = 0; t < T; ++t) {
            comp.contributions(t, p) = gt.target_scale * gt.coefficients[p] * f[t];
        }
    }
    for (std::size_t t = 0; t < T; ++t) {
        double v = comp.trend[t] + comp.seasonal[t];
        for (std::size_t p = 0; p < P; ++p) {
            v += comp.contributions(t, p);
        }
        noiseless[t] = v;
    }
    if (gt.noise_scale) {
        comp.noise_scale = *gt.noise_scale;
    } else {
        double mean = 0.0;
        for (double v : noiseless) mean += v;
        mean /= static_cast<double>(T);
        double var = 0.0;
        for (double v : noiseless) var += (v - mean) * (v - mean);
        comp.noise_scale = 0.05 * std::sqrt(var / static_cast<double>(T - 1));
    }
    std::vector<double> target = noiseless;
    if (comp.noise_scale > 0.0) {
        std::normal_distribution<double> noise(0.0, comp.noise_scale);
        for (std::size_t t = 0; t < T; ++t) {
            comp.noise[t] = noise(rng);
            target[t] += comp.noise[t];
        }
    }

    std::vector<Date> dates(T);
    for (std::size_t t = 0; t < T; ++t) {
        dates[t] = gt.start + static_cast<std::int64_t>(7 * t);
    }
    std::vector<std::string> names;
    for (std::size_t p = 0; p < P; ++p) {
        if (P == 2) {
            names.push_back(p == 0 ? "tv" : "search");
        } else {
            names.push_back((default_shape(p) == SpendShape::tv_like ? "tv_" : "search_") + std::to_string(p));
        }
    }
    return {Dataset(std::move(dates), std::move(spend), std::move(target), std::move(names)), std::move(comp)};
}

} // namespace mixforge
