#pragma once

#include "mixforge/model.hpp"
#include "mixforge/stats.hpp"

#include <json.hpp>

#include <string>
#include <vector>

namespace mixforge {

/// Spend per date and channel over an inclusive date range on the model's grid.
struct BudgetPlan {
    Date start;
    Date end;
    Matrix allocation; // H x P
    std::vector<std::string> channels;

    std::size_t horizon() const noexcept { return allocation.rows(); }

    double total() const {
        double s = 0.0;
        for (double v : allocation.data()) s += v;
        return s;
    }

    std::vector<double> channel_totals() const {
        std::vector<double> out(allocation.cols(), 0.0);
        for (std::size_t t = 0; t < allocation.rows(); ++t) {
            for (std::size_t p = 0; p < allocation.cols(); ++p) out[p] += allocation(t, p);
        }
        return out;
    }

    void validate() const {
        require(start < end, ErrorKind::parameter, "horizon start must be strictly before its end");
        require(channels.size() == allocation.cols(), ErrorKind::dimension, "one channel name per allocation column");
        for (double v : allocation.data()) {
            require(std::isfinite(v) && v >= 0.0, ErrorKind::domain, "allocations must be finite and >= 0");
        }
    }

    friend bool operator==(const BudgetPlan&, const BudgetPlan&) = default;
};

/// Number of grid steps in the inclusive range [start, end] for the given cadence.
inline std::size_t horizon_length(Date start, Date end, Cadence cadence) {
    require(start < end, ErrorKind::parameter, "horizon start " + start.iso() + " must be before end " + end.iso());
    const std::int64_t step = cadence_days(cadence);
    require((end - start) % step == 0, ErrorKind::parameter, "horizon end is not on the " +
                                                                 std::string(to_string(cadence)) + " grid of its start");
    return static_cast<std::size_t>((end - start) / step) + 1;
}

/// Historical spend shares per channel.
inline std::vector<double> historical_shares(const Dataset& d) {
    std::vector<double> s(d.channels(), 0.0);
    double total = 0.0;
    for (std::size_t t = 0; t < d.length(); ++t) {
        for (std::size_t p = 0; p < d.channels(); ++p) {
            s[p] += d.spend()(t, p);
            total += d.spend()(t, p);
        }
    }
    for (auto& v : s) v /= total;
    return s;
}

/// Spreads B evenly over the horizon, split across channels by `shares` (default: historical shares).
inline BudgetPlan even_spread(double B, Date start, Date end, const Dataset& history,
                              std::optional<std::vector<double>> shares = std::nullopt) {
    require(std::isfinite(B) && B >= 0.0, ErrorKind::parameter, "budget must be finite and >= 0");
    const std::size_t H = horizon_length(start, end, history.cadence());
    const std::vector<double> w = shares ? *shares : historical_shares(history);
    require(w.size() == history.channels(), ErrorKind::parameter, "one share per channel is required");
    double sum = 0.0;
    for (double v : w) {
        require(v >= 0.0, ErrorKind::parameter, "shares must be nonnegative");
        sum += v;
    }
    require(std::abs(sum - 1.0) <= 1e-9, ErrorKind::parameter, "shares must sum to 1");
    BudgetPlan plan{start, end, Matrix(H, w.size()), history.channel_names()};
    for (std::size_t t = 0; t < H; ++t) {
        for (std::size_t p = 0; p < w.size(); ++p) plan.allocation(t, p) = B * w[p] / static_cast<double>(H);
    }
    return plan;
}

/// Time index of `date` relative to the model's first training date (may be negative).
inline std::int64_t time_index(const FittedModel& m, Date date) {
    const std::int64_t step = cadence_days(m.data.cadence());
    const std::int64_t diff = date - m.data.dates().front();
    require(diff % step == 0, ErrorKind::parameter, "date " + date.iso() + " is not on the model's " +
                                                        std::string(to_string(m.data.cadence())) + " grid");
    return diff / step;
}

/// Trend plus seasonal at a time index; the trend is held flat outside the training range.
inline double baseline_value(const Decomposition& dec, std::int64_t t) {
    if (t >= 0) return dec.baseline_at(static_cast<std::size_t>(t));
    const auto m = static_cast<std::int64_t>(dec.period);
    const std::int64_t phase = ((t % m) + m) % m;
    return dec.trend.front() + dec.seasonal_at(static_cast<std::size_t>(phase));
}

/// Indices of N draws taken evenly across the stored draws (cycling when N exceeds them).
inline std::vector<std::size_t> select_draws(std::size_t available, std::size_t N, std::vector<std::string>& warnings) {
    require(N >= 1, ErrorKind::parameter, "at least one draw is required");
    require(available >= 1, ErrorKind::parameter, "model has no posterior draws");
    std::vector<std::size_t> idx(N);
    if (N > available) {
        warnings.push_back("requested " + std::to_string(N) + " draws but only " + std::to_string(available) +
                           " are stored; draws are reused");
        for (std::size_t n = 0; n < N; ++n) idx[n] = n % available;
    } else {
        for (std::size_t n = 0; n < N; ++n) idx[n] = n * available / N;
    }
    return idx;
}

/// Per-draw simulation of a spend window.
struct Simulation {
    std::vector<std::int64_t> time;        // time index of each row
    std::vector<Matrix> contributions;     // per draw: H x P, target units
    std::vector<double> intercept;         // per draw, target units
    std::vector<double> baseline;          // trend + seasonal per row
    std::vector<std::string> warnings;

    std::size_t draws() const noexcept { return contributions.size(); }
    std::size_t rows() const noexcept { return time.size(); }

    /// Per-draw prediction at row h.
    double prediction(std::size_t n, std::size_t h) const {
        double v = baseline[h] + intercept[n];
        const Matrix& c = contributions[n];
        for (std::size_t p = 0; p < c.cols(); ++p) v += c(h, p);
        return v;
    }
};

/**
 * Simulates draws over `spend` (H x P, raw units) starting at time index `t0`.
 *
 * Carryover is seeded with the training spend before t0; steps between the end
 * of training and t0 are taken as zero spend. Draw n pairs layer-1 draw k_n
 * with layer-2 draw k_n.
 */
inline Simulation simulate(const FittedModel& m, const Matrix& spend, std::int64_t t0, std::size_t N) {
    const std::size_t H = spend.rows();
    const std::size_t P = m.channels();
    require(spend.cols() == P, ErrorKind::dimension, "spend window needs one column per model channel");
    Simulation sim;
    const auto idx = select_draws(std::min(m.posterior.size(), m.ktr.size()), N, sim.warnings);
    const auto T = static_cast<std::int64_t>(m.length());
    if (t0 < 0) sim.warnings.push_back("horizon starts before the training data; carryover assumes no prior spend");

    // history rows [0, t0) with zeros after the training range
    const std::size_t hist = t0 > 0 ? static_cast<std::size_t>(t0) : 0;
    std::vector<std::vector<double>> series(P);
    for (std::size_t p = 0; p < P; ++p) {
        auto& s = series[p];
        s.reserve(hist + H);
        for (std::size_t t = 0; t < hist; ++t) {
            s.push_back(static_cast<std::int64_t>(t) < T ? m.data.spend()(t, p) / m.scales.spend_scales[p] : 0.0);
        }
        for (std::size_t h = 0; h < H; ++h) s.push_back(spend(h, p) / m.scales.spend_scales[p]);
    }
    for (std::size_t h = 0; h < H; ++h) {
        sim.time.push_back(t0 + static_cast<std::int64_t>(h));
        sim.baseline.push_back(baseline_value(m.baseline, t0 + static_cast<std::int64_t>(h)));
    }
    // coefficient draws per row: rows x (stored draws x P)
    std::vector<Matrix> coef;
    coef.reserve(H);
    for (std::size_t h = 0; h < H; ++h) coef.push_back(m.ktr.coefficients_at(static_cast<double>(sim.time[h])));

    const double S = m.scales.target_scale;
    sim.contributions.reserve(N);
    for (std::size_t n = 0; n < N; ++n) {
        const std::size_t k = idx[n];
        Matrix c(H, P);
        for (std::size_t p = 0; p < P; ++p) {
            const auto car = carryover(series[p], m.posterior.alpha_draws(k, p), m.max_lag);
            const double mu = m.posterior.mu_draws(k, p);
            for (std::size_t h = 0; h < H; ++h) {
                c(h, p) = coef[h](k, p) * reach(car[hist + h], mu) * S;
            }
        }
        sim.contributions.push_back(std::move(c));
        sim.intercept.push_back(m.posterior.intercept_draws[k] * S);
    }
    return sim;
}

/// Predictive summary of a plan.
struct ScenarioResult {
    std::vector<Date> dates;
    std::vector<double> mean;
    std::vector<double> lo80;
    std::vector<double> hi80;
    Matrix per_channel_mean; // H x P
    std::vector<std::string> channels;
    std::vector<std::string> warnings;

    double total_mean() const {
        double s = 0.0;
        for (double v : mean) s += v;
        return s;
    }
};

inline ScenarioResult predict(const BudgetPlan& plan, const FittedModel& m, std::size_t N) {
    plan.validate();
    require(plan.channels == m.data.channel_names(), ErrorKind::key, "plan channels do not match the model's channels");
    const std::size_t H = horizon_length(plan.start, plan.end, m.data.cadence());
    require(H == plan.horizon(), ErrorKind::dimension, "allocation rows do not match the horizon length");
    const std::int64_t t0 = time_index(m, plan.start);
    const Simulation sim = simulate(m, plan.allocation, t0, N);

    ScenarioResult r;
    r.channels = plan.channels;
    r.warnings = sim.warnings;
    r.per_channel_mean = Matrix(H, m.channels());
    const std::int64_t step = cadence_days(m.data.cadence());
    std::vector<double> y(N);
    for (std::size_t h = 0; h < H; ++h) {
        r.dates.push_back(plan.start + static_cast<std::int64_t>(h) * step);
        for (std::size_t n = 0; n < N; ++n) y[n] = sim.prediction(n, h);
        r.mean.push_back(stats::mean(y));
        r.lo80.push_back(stats::quantile(y, 0.1));
        r.hi80.push_back(stats::quantile(y, 0.9));
        for (std::size_t p = 0; p < m.channels(); ++p) {
            double s = 0.0;
            for (std::size_t n = 0; n < N; ++n) s += sim.contributions[n](h, p);
            r.per_channel_mean(h, p) = s / static_cast<double>(N);
        }
    }
    return r;
}

/// Predictive means for the model's own training spend (in-sample fit).
inline ScenarioResult predict_in_sample(const FittedModel& m, std::size_t N) {
    const BudgetPlan plan{m.data.dates().front(), m.data.dates().back(), m.data.spend(), m.data.channel_names()};
    return predict(plan, m, N);
}

inline nlohmann::json to_json(const ScenarioResult& r) {
    nlohmann::json j;
    j["channels"] = r.channels;
    auto& dates = j["dates"] = nlohmann::json::array();
    for (const auto& d : r.dates) dates.push_back(d.iso());
    j["mean"] = r.mean;
    j["lo80"] = r.lo80;
    j["hi80"] = r.hi80;
    auto& pc = j["per_channel_mean"] = nlohmann::json::array();
    for (std::size_t h = 0; h < r.per_channel_mean.rows(); ++h) {
        auto row = r.per_channel_mean.row(h);
        pc.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["warnings"] = r.warnings;
    return j;
}

inline nlohmann::json to_json(const BudgetPlan& plan) {
    nlohmann::json j;
    j["start"] = plan.start.iso();
    j["end"] = plan.end.iso();
    j["channels"] = plan.channels;
    auto& rows = j["allocation"] = nlohmann::json::array();
    for (std::size_t h = 0; h < plan.allocation.rows(); ++h) {
        auto row = plan.allocation.row(h);
        rows.push_back(std::vector<double>(row.begin(), row.end()));
    }
    j["total"] = plan.total();
    return j;
}

} // namespace mixforge
