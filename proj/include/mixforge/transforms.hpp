#pragma once

#include "mixforge/error.hpp"

#include <cmath>
#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mixforge {

/// Per-channel adstock parameters: carryover decay alpha in [0, 1), saturation mu > 0.
struct AdstockParams {
    std::vector<double> carryover;
    std::vector<double> saturation;
    std::optional<std::size_t> max_lag;

    void validate() const {
        require(carryover.size() == saturation.size(), ErrorKind::dimension,
                "carryover and saturation must have one entry per channel");
        for (std::size_t p = 0; p < carryover.size(); ++p) {
            require(carryover[p] >= 0.0 && carryover[p] < 1.0, ErrorKind::parameter,
                    "carryover for channel " + std::to_string(p) + " must lie in [0, 1)");
            require(saturation[p] > 0.0 && std::isfinite(saturation[p]), ErrorKind::parameter,
                    "saturation for channel " + std::to_string(p) + " must be positive");
        }
        require(!max_lag || *max_lag > 0, ErrorKind::parameter, "max_lag must be positive");
    }
};

/**
 * Geometric-decay carryover: a normalized weighted average of the current and
 * past values with weight alpha^l at lag l.
 *
 * The window at step t covers lags 0..min(t, max_lag). Without a cap this is
 * O(T) per step via the recursions numerator_t = x_t + alpha * numerator_{t-1}
 * and denominator_t = 1 + alpha * denominator_{t-1}.
 */
inline std::vector<double> carryover(std::span<const double> series, double alpha,
                                     std::optional<std::size_t> max_lag = std::nullopt) {
    require(alpha >= 0.0 && alpha < 1.0, ErrorKind::parameter, "carryover alpha must lie in [0, 1)");
    require(!max_lag || *max_lag > 0, ErrorKind::parameter, "max_lag must be positive");
    std::vector<double> out(series.size());
    if (!max_lag) {
        double num = 0.0;
        double den = 0.0;
        for (std::size_t t = 0; t < series.size(); ++t) {
            num = series[t] + alpha * num;
            den = 1.0 + alpha * den;
            out[t] = num / den;
        }
        return out;
    }
    const std::size_t cap = *max_lag;
    for (std::size_t t = 0; t < series.size(); ++t) {
        const std::size_t lags = std::min(t, cap);
        double num = 0.0;
        double den = 0.0;
        double w = 1.0;
        for (std::size_t l = 0; l <= lags; ++l) {
            num += w * series[t - l];
            den += w;
            w *= alpha;
        }
        out[t] = num / den;
    }
    return out;
}

/// Carryover over `series` preceded by `history` (older values first); returns only the series part.
inline std::vector<double> carryover_seeded(std::span<const double> history, std::span<const double> series,
                                            double alpha, std::optional<std::size_t> max_lag = std::nullopt) {
    std::vector<double> joined(history.begin(), history.end());
    joined.insert(joined.end(), series.begin(), series.end());
    auto full = carryover(joined, alpha, max_lag);
    return {full.begin() + static_cast<std::ptrdiff_t>(history.size()), full.end()};
}

/// Reach (saturation) curve (1 - e^{-x/mu}) / (1 + e^{-x/mu}), evaluated as tanh(x / 2mu).
inline double reach(double x, double mu) {
    require(mu > 0.0, ErrorKind::parameter, "reach saturation mu must be positive");
    return std::tanh(x / (2.0 * mu));
}

/// d reach / dx.
inline double reach_derivative(double x, double mu) {
    const double c = std::cosh(x / (2.0 * mu));
    return 1.0 / (2.0 * mu * c * c);
}

/// d reach / d mu.
inline double reach_dmu(double x, double mu) {
    const double c = std::cosh(x / (2.0 * mu));
    return -x / (2.0 * mu * mu * c * c);
}

inline std::vector<double> reach(std::span<const double> series, double mu) {
    require(mu > 0.0, ErrorKind::parameter, "reach saturation mu must be positive");
    std::vector<double> out(series.size());
    for (std::size_t t = 0; t < series.size(); ++t) {
        out[t] = std::tanh(series[t] / (2.0 * mu));
    }
    return out;
}

/// Full adstock transform: carryover first, then reach.
inline std::vector<double> adstock(std::span<const double> series, double alpha, double mu,
                                   std::optional<std::size_t> max_lag = std::nullopt) {
    return reach(carryover(series, alpha, max_lag), mu);
}

inline std::vector<double> adstock(std::span<const double> column, const AdstockParams& params, std::size_t p) {
    params.validate();
    require(p < params.carryover.size(), ErrorKind::bounds, "channel index out of range");
    return adstock(column, params.carryover[p], params.saturation[p], params.max_lag);
}

} // namespace mixforge
