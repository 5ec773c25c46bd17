#pragma once

#include "mixforge/error.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace mixforge {

/// Additive split y = trend + seasonal + residual.
struct Decomposition {
    std::vector<double> trend;
    std::vector<double> seasonal;
    std::vector<double> residual;
    int period = 1;
    int trend_window = 1;
    /// Trend level held beyond the fitted range: a straight line fitted to the
    /// deseasonalized last trend window, evaluated at the final step.
    double trend_end = 0.0;
    /// Minimum number of full periods the series had to cover.
    double min_cycles = 2.0;

    std::size_t length() const noexcept { return trend.size(); }

    /// Trend held at its last value, seasonal continued periodically; `steps_ahead` counts from the
    /// first step after the fitted range.
    double baseline_ahead(std::size_t steps_ahead) const {
        const std::size_t T = trend.size();
        return trend_end + seasonal_at(T + steps_ahead);
    }

    /// Baseline g + s at absolute index t (may lie beyond the fitted range).
    double baseline_at(std::size_t t) const {
        return t < trend.size() ? trend[t] + seasonal[t] : baseline_ahead(t - trend.size());
    }

    double seasonal_at(std::size_t t) const {
        if (t < seasonal.size()) {
            return seasonal[t];
        }
        const auto m = static_cast<std::size_t>(period);
        // the fitted range covers at least one full period, so this phase exists
        const std::size_t phase = t % m;
        return seasonal[phase];
    }

    friend bool operator==(const Decomposition&, const Decomposition&) = default;
};

/// y - base, nudged by ulps so that base + result == y in floating point.
inline double exact_difference(double y, double base) {
    double r = y - base;
    for (int i = 0; i < 8 && r + base != y; ++i) {
        r = std::nextafter(r, (r + base < y) ? HUGE_VAL : -HUGE_VAL);
    }
    return r;
}

/// Centered moving average. Near the ends the window shrinks symmetrically, so it stays centered
/// (and reproduces linear trends exactly) down to a single point at each end.
inline std::vector<double> moving_average(std::span<const double> y, int window) {
    const auto T = static_cast<std::ptrdiff_t>(y.size());
    const std::ptrdiff_t half = window / 2;
    std::vector<double> out(y.size());
    for (std::ptrdiff_t t = 0; t < T; ++t) {
        const std::ptrdiff_t h = std::min({half, t, T - 1 - t});
        double sum = 0.0;
        for (std::ptrdiff_t i = t - h; i <= t + h; ++i) {
            sum += y[static_cast<std::size_t>(i)];
        }
        out[static_cast<std::size_t>(t)] = sum / static_cast<double>(2 * h + 1);
    }
    return out;
}

/// Least-squares line through the last `window` points of `v`, evaluated at the final point.
inline double linear_endpoint(std::span<const double> v, std::size_t window) {
    const std::size_t w = std::min(window, v.size());
    const std::size_t first = v.size() - w;
    if (w == 1) return v.back();
    double mx = 0.0, my = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
        mx += static_cast<double>(i);
        my += v[first + i];
    }
    mx /= static_cast<double>(w);
    my /= static_cast<double>(w);
    double sxy = 0.0, sxx = 0.0;
    for (std::size_t i = 0; i < w; ++i) {
        const double dx = static_cast<double>(i) - mx;
        sxy += dx * (v[first + i] - my);
        sxx += dx * dx;
    }
    return my + sxy / sxx * (static_cast<double>(w - 1) - mx);
}

/// Trend refinement passes on the deseasonalized series.
inline constexpr int decomposition_passes = 3;

/**
 * Classical decomposition: moving-average trend, then per-phase means of the
 * detrended series re-centered to zero, with the trend re-smoothed on the
 * deseasonalized series. Linear in y and deterministic.
 *
 * period = 1 yields a zero seasonal component. The series must cover
 * `min_cycles` periods (at least one); below two, some phases rest on a single
 * observation.
 */
inline Decomposition decompose(std::span<const double> y, int period, int trend_window, double min_cycles = 2.0) {
    require(period >= 1, ErrorKind::parameter, "period must be positive");
    require(trend_window >= 1 && trend_window % 2 == 1 && trend_window >= period, ErrorKind::parameter,
            "trend window must be odd and at least the period");
    require(min_cycles >= 1.0, ErrorKind::parameter, "min_cycles must be at least 1");
    const auto needed = std::max<std::size_t>(2, static_cast<std::size_t>(std::ceil(min_cycles * period)));
    require(y.size() >= needed, ErrorKind::insufficient_data,
            "decomposition with period " + std::to_string(period) + " needs at least " + std::to_string(needed) +
                " points, got " + std::to_string(y.size()));
    Decomposition d;
    d.period = period;
    d.trend_window = trend_window;
    d.min_cycles = min_cycles;
    const auto m = static_cast<std::size_t>(period);
    auto phase_means = [&](const std::vector<double>& trend) {
        std::vector<double> sum(m, 0.0), count(m, 0.0);
        for (std::size_t t = 0; t < y.size(); ++t) {
            sum[t % m] += y[t] - trend[t];
            count[t % m] += 1.0;
        }
        std::vector<double> mean(m);
        double grand = 0.0;
        for (std::size_t k = 0; k < m; ++k) {
            mean[k] = sum[k] / count[k];
            grand += mean[k];
        }
        grand /= static_cast<double>(m);
        for (auto& v : mean) v -= grand;
        return mean;
    };

    d.trend = moving_average(y, trend_window);
    d.seasonal.assign(y.size(), 0.0);
    if (m > 1) {
        // near the ends the shrunken window no longer averages out the season, so
        // re-smooth the deseasonalized series a few times (the inner loop of STL)
        std::vector<double> adjusted(y.size());
        for (int pass = 0; pass < decomposition_passes; ++pass) {
            const auto phase = phase_means(d.trend);
            for (std::size_t t = 0; t < y.size(); ++t) adjusted[t] = y[t] - phase[t % m];
            d.trend = moving_average(adjusted, trend_window);
        }
        const auto phase = phase_means(d.trend);
        for (std::size_t t = 0; t < y.size(); ++t) d.seasonal[t] = phase[t % m];
    }
    d.residual.resize(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) {
        d.residual[t] = exact_difference(y[t], d.trend[t] + d.seasonal[t]);
    }
    std::vector<double> deseasonalized(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) deseasonalized[t] = y[t] - d.seasonal[t];
    d.trend_end = linear_endpoint(deseasonalized, static_cast<std::size_t>(trend_window));
    return d;
}

/// y - trend - seasonal. recompose(detrend(y, dec), dec) == y exactly.
inline std::vector<double> detrend(std::span<const double> y, const Decomposition& dec) {
    require(y.size() == dec.length(), ErrorKind::dimension,
            "decomposition length " + std::to_string(dec.length()) + " does not match target length " +
                std::to_string(y.size()));
    std::vector<double> out(y.size());
    for (std::size_t t = 0; t < y.size(); ++t) {
        out[t] = exact_difference(y[t], dec.trend[t] + dec.seasonal[t]);
    }
    return out;
}

/// Adds trend and seasonal back onto a residual series.
inline std::vector<double> recompose(std::span<const double> residual, const Decomposition& dec) {
    require(residual.size() == dec.length(), ErrorKind::dimension, "residual length does not match decomposition");
    std::vector<double> out(residual.size());
    for (std::size_t t = 0; t < residual.size(); ++t) {
        out[t] = residual[t] + (dec.trend[t] + dec.seasonal[t]);
    }
    return out;
}

/// Settings of a decomposition, reusable as a linear filter on other series.
struct DecompositionFilter {
    int period = 1;
    int trend_window = 1;
    double min_cycles = 2.0;

    /// The residual the decomposition would leave on `x`. Linear in x.
    std::vector<double> apply(std::span<const double> x) const {
        return decompose(x, period, trend_window, min_cycles).residual;
    }

    Decomposition operator()(std::span<const double> y) const { return decompose(y, period, trend_window, min_cycles); }
};

inline DecompositionFilter filter_of(const Decomposition& dec) { return {dec.period, dec.trend_window, dec.min_cycles}; }

/// Smallest odd window covering one period.
inline int default_trend_window(int period) { return period % 2 == 1 ? period : period + 1; }

} // namespace mixforge
