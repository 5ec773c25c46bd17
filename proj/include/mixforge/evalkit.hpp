#pragma once

#include "mixforge/config.hpp"
#include "mixforge/forecast.hpp"

#include <exception>
#include <functional>
#include <iomanip>
#include <sstream>
#include <thread>

namespace mixforge {

namespace detail {

inline void check_pair(std::span<const double> actual, std::span<const double> predicted, std::size_t min_len) {
    require(actual.size() == predicted.size(), ErrorKind::dimension, "actual and predicted lengths differ");
    require(actual.size() >= min_len, ErrorKind::insufficient_data,
            "at least " + std::to_string(min_len) + " points are required");
}

} // namespace detail

/// Coefficient of determination, 1 - SSres/SStot.
inline double r2(std::span<const double> actual, std::span<const double> predicted) {
    detail::check_pair(actual, predicted, 2);
    const double m = stats::mean(actual);
    double ss_res = 0.0, ss_tot = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        ss_res += (actual[i] - predicted[i]) * (actual[i] - predicted[i]);
        ss_tot += (actual[i] - m) * (actual[i] - m);
    }
    require(ss_tot > 0.0, ErrorKind::undefined_metric, "r2 is undefined for a constant actual series");
    return 1.0 - ss_res / ss_tot;
}

struct MapeResult {
    double value = 0.0;
    /// Points with a zero actual, left out of the mean.
    std::size_t skipped = 0;
};

/// Mean absolute percentage error. Zero actuals are skipped and counted while at least 90% are nonzero.
inline MapeResult mape_detail(std::span<const double> actual, std::span<const double> predicted) {
    detail::check_pair(actual, predicted, 1);
    MapeResult r;
    double s = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) {
        if (actual[i] == 0.0) {
            ++r.skipped;
            continue;
        }
        s += std::abs((actual[i] - predicted[i]) / actual[i]);
    }
    const std::size_t used = actual.size() - r.skipped;
    require(used > 0 && static_cast<double>(used) >= 0.9 * static_cast<double>(actual.size()),
            ErrorKind::undefined_metric,
            "mape is undefined: " + std::to_string(r.skipped) + " of " + std::to_string(actual.size()) +
                " actual values are zero");
    r.value = s / static_cast<double>(used);
    return r;
}

inline double mape(std::span<const double> actual, std::span<const double> predicted) {
    return mape_detail(actual, predicted).value;
}

/// Mean absolute error scaled by the in-sample MAE of the lag-1 naive forecast on `train_actual`.
inline double mase(std::span<const double> actual, std::span<const double> predicted,
                   std::span<const double> train_actual) {
    detail::check_pair(actual, predicted, 1);
    require(train_actual.size() >= 2, ErrorKind::insufficient_data, "mase needs at least 2 training points");
    double naive = 0.0;
    for (std::size_t t = 1; t < train_actual.size(); ++t) naive += std::abs(train_actual[t] - train_actual[t - 1]);
    naive /= static_cast<double>(train_actual.size() - 1);
    require(naive > 0.0, ErrorKind::undefined_metric, "mase is undefined for a constant training series");
    double mae = 0.0;
    for (std::size_t i = 0; i < actual.size(); ++i) mae += std::abs(actual[i] - predicted[i]);
    mae /= static_cast<double>(actual.size());
    return mae / naive;
}

/// Half-open index ranges of one cross-validation fold.
struct Fold {
    std::size_t train_begin = 0;
    std::size_t train_end = 0;
    std::size_t test_begin = 0;
    std::size_t test_end = 0;

    friend bool operator==(const Fold&, const Fold&) = default;
};

/// Folds with origins window, window + stride, ... while origin + horizon <= T; each trains on the preceding `window` points.
inline std::vector<Fold> sliding_folds(std::size_t T, std::size_t window, std::size_t horizon, std::size_t stride) {
    require(window >= 2 && horizon >= 1, ErrorKind::configuration, "window must be >= 2 and horizon >= 1");
    require(stride >= 1 && stride <= T, ErrorKind::configuration, "stride must lie in [1, T]");
    require(window + horizon <= T, ErrorKind::configuration, "window + horizon exceeds the series length");
    std::vector<Fold> folds;
    for (std::size_t o = window; o + horizon <= T; o += stride) folds.push_back({o - window, o, o, o + horizon});
    require(folds.size() >= 2, ErrorKind::configuration,
            "cross-validation needs at least 2 folds; these settings give " + std::to_string(folds.size()));
    return folds;
}

/// Point forecast of one fold plus the scale factors its model was fitted with.
struct FoldForecast {
    std::vector<double> prediction;
    ScalePair scales;
};

/// Fits on `train` and forecasts the spend plan that follows it. Never sees the test targets.
using Forecaster = std::function<FoldForecast(const Dataset& train, const BudgetPlan& test_spend)>;

struct FoldMetrics {
    Fold fold;
    double r2 = 0.0;
    double mape = 0.0;
    double mase = 0.0;
    std::size_t mape_skipped = 0;
    ScalePair scales;
    std::vector<std::string> warnings;
};

struct MetricReport {
    double r2 = 0.0;
    double mape = 0.0;
    double mase = 0.0;
    std::size_t mape_skipped = 0;
    std::vector<FoldMetrics> per_fold;
    std::vector<std::string> warnings;
};

/// The stacked model: fit_model on the training window, posterior-mean forecast over the plan.
inline Forecaster model_forecaster(const ModelConfig& cfg, std::size_t draws = 500) {
    return [cfg, draws](const Dataset& train, const BudgetPlan& plan) {
        const FittedModel m = fit_model(train, cfg);
        return FoldForecast{predict(plan, m, draws).mean, m.scales};
    };
}

namespace detail {

/// Metrics of one fold; an undefined metric becomes NaN with a warning.
inline FoldMetrics score_fold(const Fold& f, std::span<const double> y, std::span<const double> pred) {
    FoldMetrics out;
    out.fold = f;
    const auto actual = y.subspan(f.test_begin, f.test_end - f.test_begin);
    const auto train = y.subspan(f.train_begin, f.train_end - f.train_begin);
    auto guarded = [&](const char* name, auto&& fn) {
        try {
            return fn();
        } catch (const Error& e) {
            if (e.kind() != ErrorKind::undefined_metric && e.kind() != ErrorKind::insufficient_data) throw;
            out.warnings.push_back(std::string(name) + ": " + e.what());
            return std::numeric_limits<double>::quiet_NaN();
        }
    };
    out.r2 = guarded("r2", [&] { return r2(actual, pred); });
    out.mape = guarded("mape", [&] {
        const auto m = mape_detail(actual, pred);
        out.mape_skipped = m.skipped;
        return m.value;
    });
    out.mase = guarded("mase", [&] { return mase(actual, pred, train); });
    return out;
}

inline double defined_mean(const std::vector<FoldMetrics>& folds, double FoldMetrics::*field) {
    double s = 0.0;
    std::size_t n = 0;
    for (const auto& f : folds) {
        if (std::isfinite(f.*field)) {
            s += f.*field;
            ++n;
        }
    }
    return n ? s / static_cast<double>(n) : std::numeric_limits<double>::quiet_NaN();
}

inline MetricReport aggregate(std::vector<FoldMetrics> folds) {
    MetricReport r;
    r.r2 = defined_mean(folds, &FoldMetrics::r2);
    r.mape = defined_mean(folds, &FoldMetrics::mape);
    r.mase = defined_mean(folds, &FoldMetrics::mase);
    for (const auto& f : folds) {
        r.mape_skipped += f.mape_skipped;
        for (const auto& w : f.warnings) {
            r.warnings.push_back("fold at " + std::to_string(f.fold.test_begin) + ": " + w);
        }
    }
    r.per_fold = std::move(folds);
    return r;
}

inline BudgetPlan test_plan(const Dataset& d, std::size_t begin, std::size_t end) {
    Matrix spend(end - begin, d.channels());
    for (std::size_t t = begin; t < end; ++t) {
        for (std::size_t p = 0; p < d.channels(); ++p) spend(t - begin, p) = d.spend()(t, p);
    }
    return {d.dates()[begin], d.dates()[end - 1], std::move(spend), d.channel_names()};
}

} // namespace detail

/**
 * Sliding-window cross-validation. Every fold refits from its own training
 * slice only. Folds run concurrently; results are collected in fold order.
 */
inline MetricReport sliding_window_cv(const Dataset& d, const Forecaster& forecaster, std::size_t window,
                                      std::size_t horizon, std::size_t stride) {
    require(horizon >= 2, ErrorKind::configuration, "cross-validation horizon must be >= 2 for r2");
    const auto folds = sliding_folds(d.length(), window, horizon, stride);
    std::vector<FoldMetrics> results(folds.size());
    std::vector<std::exception_ptr> errors(folds.size());
    {
        std::vector<std::jthread> workers;
        for (std::size_t k = 0; k < folds.size(); ++k) {
            workers.emplace_back([&, k] {
                try {
                    const Fold& f = folds[k];
                    const Dataset train = d.slice(f.train_begin, f.train_end);
                    const auto fc = forecaster(train, detail::test_plan(d, f.test_begin, f.test_end));
                    require(fc.prediction.size() == f.test_end - f.test_begin, ErrorKind::dimension,
                            "forecaster returned the wrong number of points");
                    results[k] = detail::score_fold(f, d.target(), fc.prediction);
                    results[k].scales = fc.scales;
                } catch (...) {
                    errors[k] = std::current_exception();
                }
            });
        }
    }
    for (auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return detail::aggregate(std::move(results));
}

/// Single split: train on the first T - horizon points, score the last `horizon`.
inline MetricReport holdout_evaluation(const Dataset& d, const Forecaster& forecaster, std::size_t horizon) {
    require(horizon >= 2 && horizon + 2 <= d.length(), ErrorKind::configuration,
            "holdout horizon must leave at least 2 training points and be >= 2");
    const Fold f{0, d.length() - horizon, d.length() - horizon, d.length()};
    const auto fc = forecaster(d.slice(f.train_begin, f.train_end), detail::test_plan(d, f.test_begin, f.test_end));
    auto m = detail::score_fold(f, d.target(), fc.prediction);
    m.scales = fc.scales;
    return detail::aggregate({m});
}

inline json to_json(const MetricReport& r) {
    json folds = json::array();
    for (const auto& f : r.per_fold) {
        folds.push_back({{"train", {f.fold.train_begin, f.fold.train_end}},
                         {"test", {f.fold.test_begin, f.fold.test_end}},
                         {"r2", jsonio::number(f.r2)},
                         {"mape", jsonio::number(f.mape)},
                         {"mase", jsonio::number(f.mase)},
                         {"mape_skipped", f.mape_skipped}});
    }
    return {{"r2", jsonio::number(r.r2)},     {"mape", jsonio::number(r.mape)}, {"mase", jsonio::number(r.mase)},
            {"mape_skipped", r.mape_skipped}, {"per_fold", folds},             {"warnings", r.warnings}};
}

/// Aligned-column text table: one row per fold, then the mean.
inline std::string metric_table(const MetricReport& r) {
    std::ostringstream out;
    auto num = [&](double v) {
        std::ostringstream s;
        if (std::isfinite(v)) s << std::fixed << std::setprecision(4) << v;
        else s << "n/a";
        return s.str();
    };
    out << std::left << std::setw(14) << "train" << std::setw(14) << "test" << std::right << std::setw(10) << "r2"
        << std::setw(10) << "mape" << std::setw(10) << "mase" << '\n';
    for (const auto& f : r.per_fold) {
        const auto range = [](std::size_t a, std::size_t b) { return std::to_string(a) + "-" + std::to_string(b); };
        out << std::left << std::setw(14) << range(f.fold.train_begin, f.fold.train_end) << std::setw(14)
            << range(f.fold.test_begin, f.fold.test_end) << std::right << std::setw(10) << num(f.r2) << std::setw(10)
            << num(f.mape) << std::setw(10) << num(f.mase) << '\n';
    }
    out << std::left << std::setw(28) << "mean" << std::right << std::setw(10) << num(r.r2) << std::setw(10)
        << num(r.mape) << std::setw(10) << num(r.mase) << '\n';
    return out.str();
}

} // namespace mixforge
