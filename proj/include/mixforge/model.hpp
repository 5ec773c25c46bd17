#pragma once

#include "mixforge/core.hpp"
#include "mixforge/decomposition.hpp"
#include "mixforge/layer1.hpp"
#include "mixforge/layer2.hpp"
#include "mixforge/transforms.hpp"

#include <map>
#include <optional>
#include <string>
#include <vector>

namespace mixforge {

/// Settings of the full two-layer fit.
struct ModelConfig {
    /// Seasonal period in steps; 0 selects the cadence's nominal period.
    int period = 0;
    /// Odd trend window; 0 selects the smallest odd window covering one period.
    int trend_window = 0;
    /// Series covering fewer than two but at least this many seasonal periods
    /// keep a seasonal component estimated from the periods available.
    double min_seasonal_cycles = 1.5;
    /// Trend window used when the series is too short for any seasonal component.
    int short_series_trend_window = 13;
    /// Funnel position per channel name; channels not listed are mid-funnel.
    std::map<std::string, FunnelLabel> funnel;
    Layer1Config layer1;
    Layer2Config layer2;

    friend bool operator==(const ModelConfig&, const ModelConfig&) = default;
};

/// The decomposition settings actually used for a series of length T.
inline DecompositionFilter resolve_decomposition(const ModelConfig& cfg, Cadence cadence, std::size_t T) {
    int period = cfg.period > 0 ? cfg.period : nominal_period(cadence);
    int window = cfg.trend_window > 0 ? cfg.trend_window : default_trend_window(period);
    double cycles = 2.0;
    if (static_cast<double>(T) < 2.0 * period) {
        if (period > 1 && static_cast<double>(T) >= cfg.min_seasonal_cycles * period) {
            cycles = std::max(1.0, cfg.min_seasonal_cycles);
        } else {
            period = 1;
            window = cfg.short_series_trend_window;
        }
    }
    window = std::min<int>(window, static_cast<int>(T % 2 == 1 ? T : T - 1));
    return {period, window, cycles};
}

/**
 * A fitted two-layer model.
 *
 * `baseline` is the trend and seasonality of the target with the layer-1
 * marketing effect removed; prediction is
 *   trend + seasonal + target_scale * (intercept + sum_p beta_tp f*(x_tp)).
 */
struct FittedModel {
    Dataset data;
    ScalePair scales;
    Decomposition initial;  // decomposition of the raw target, used by layer 1
    Decomposition baseline; // decomposition of the target net of layer-1 marketing effects
    AdstockPosterior posterior;
    KtrModel ktr;
    ModelConfig config;
    std::optional<std::size_t> max_lag;

    std::size_t channels() const noexcept { return data.channels(); }
    std::size_t length() const noexcept { return data.length(); }
    std::size_t draws() const noexcept { return posterior.size(); }

    std::size_t channel_index(std::string_view name) const { return data.channel_index(name); }

    void check_channel(std::size_t p) const {
        require(p < channels(), ErrorKind::bounds,
                "channel index " + std::to_string(p) + " out of range for " + std::to_string(channels()) + " channels");
    }

    /// Layer-2 coefficient draws (N x P) at time index t relative to the training start.
    Matrix coefficients_at(double t) const { return ktr.coefficients_at(t); }

    friend bool operator==(const FittedModel&, const FittedModel&) = default;
};

inline std::vector<FunnelSegment> funnel_segments(const ModelConfig& cfg, const std::vector<std::string>& channels) {
    for (const auto& [name, label] : cfg.funnel) {
        require(std::find(channels.begin(), channels.end(), name) != channels.end(), ErrorKind::configuration,
                "funnel entry for unknown channel '" + name + "'");
    }
    std::vector<FunnelSegment> out;
    for (const auto& c : channels) {
        auto it = cfg.funnel.find(c);
        out.push_back(FunnelSegment::defaults(it == cfg.funnel.end() ? FunnelLabel::mid : it->second));
    }
    return out;
}

/// Decomposes y - offset and returns components against y itself.
inline Decomposition decompose_net_of(std::span<const double> y, std::span<const double> offset,
                                      const DecompositionFilter& f) {
    std::vector<double> net(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) net[t] = y[t] - offset[t];
    Decomposition dec = f(net);
    for (std::size_t t = 0; t < y.size(); ++t) {
        dec.residual[t] = exact_difference(y[t], dec.trend[t] + dec.seasonal[t]);
    }
    return dec;
}

/// Layer-1 posterior-mean marketing effect in target units.
inline std::vector<double> layer1_marketing_effect(const Dataset& d, const AdstockPosterior& post,
                                                   std::optional<std::size_t> max_lag) {
    const auto [scaled, scales] = max_abs_scale(d);
    const auto m = post.mean();
    const Matrix f = adstocked_spend(scaled, m.alpha, m.mu, max_lag);
    std::vector<double> out(d.length(), 0.0);
    for (std::size_t t = 0; t < d.length(); ++t) {
        for (std::size_t p = 0; p < d.channels(); ++p) out[t] += m.beta[p] * f(t, p);
        out[t] *= scales.target_scale;
    }
    return out;
}

/// Decompose, fit layer 1 on the detrended target, re-extract the baseline net of
/// the layer-1 marketing effect, then fit layer 2 on it.
inline FittedModel fit_model(const Dataset& d, const ModelConfig& cfg) {
    const auto filter = resolve_decomposition(cfg, d.cadence(), d.length());
    Decomposition initial = filter(d.target());
    Layer1Config l1 = cfg.layer1;
    if (l1.segments.empty()) l1.segments = funnel_segments(cfg, d.channel_names());
    AdstockPosterior post = fit_layer1(d, initial, l1);
    Decomposition baseline = decompose_net_of(d.target(), layer1_marketing_effect(d, post, l1.max_lag), filter);
    const std::size_t J = cfg.layer2.knots > 0 ? cfg.layer2.knots : KnotGrid::default_count(d.length());
    const KnotGrid grid = KnotGrid::uniform(d.length(), J, cfg.layer2.bandwidth);
    KtrModel ktr = fit_layer2(d, baseline, post, grid, cfg.layer2, l1.max_lag);
    auto scales = max_abs_scale(d).second;
    ModelConfig stored = cfg;
    stored.layer1.segments = l1.segments;
    return FittedModel{d,       std::move(scales), std::move(initial), std::move(baseline), std::move(post),
                       std::move(ktr), std::move(stored), l1.max_lag};
}

} // namespace mixforge
