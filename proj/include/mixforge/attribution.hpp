#pragma once

#include "mixforge/config.hpp"
#include "mixforge/csv.hpp"
#include "mixforge/forecast.hpp"

#include <fstream>
#include <sstream>

namespace mixforge {

/// Posterior channel contributions over a date range, in target units.
struct ContributionReport {
    std::vector<Date> dates;
    std::vector<std::string> channels;
    Matrix mean;     // T x P
    Matrix variance; // T x P, sample variance over draws
    Matrix std;      // T x P, its square root
    std::vector<double> baseline; // trend + seasonal + intercept
    Matrix share;                 // T x P
    std::vector<double> baseline_share;
    std::size_t draws = 0;
    /// False when a single draw was used; spreads are then reported as 0.
    bool spread_defined = true;
    std::vector<std::string> warnings;

    std::size_t length() const noexcept { return dates.size(); }

    /// Each channel's share of total performance over the whole range.
    std::vector<double> total_shares() const {
        std::vector<double> out(channels.size(), 0.0);
        double total = 0.0;
        for (std::size_t t = 0; t < length(); ++t) {
            total += baseline[t];
            for (std::size_t p = 0; p < channels.size(); ++p) {
                out[p] += mean(t, p);
                total += mean(t, p);
            }
        }
        for (auto& v : out) v = total != 0.0 ? v / total : 0.0;
        return out;
    }

    friend bool operator==(const ContributionReport&, const ContributionReport&) = default;
};

namespace detail {

inline ContributionReport summarize(const Simulation& sim, const std::vector<Date>& dates,
                                    const std::vector<std::string>& channels) {
    const std::size_t T = sim.rows();
    const std::size_t P = channels.size();
    const std::size_t N = sim.draws();
    ContributionReport r;
    r.dates = dates;
    r.channels = channels;
    r.draws = N;
    r.spread_defined = N > 1;
    r.warnings = sim.warnings;
    if (!r.spread_defined) r.warnings.emplace_back("a single draw has no spread; std reported as 0");
    r.mean = Matrix(T, P);
    r.variance = Matrix(T, P);
    r.std = Matrix(T, P);
    r.share = Matrix(T, P);
    const double intercept = stats::mean(sim.intercept);
    for (std::size_t t = 0; t < T; ++t) {
        r.baseline.push_back(sim.baseline[t] + intercept);
        double total = r.baseline[t];
        for (std::size_t p = 0; p < P; ++p) {
            double s = 0.0;
            for (std::size_t n = 0; n < N; ++n) s += sim.contributions[n](t, p);
            const double m = s / static_cast<double>(N);
            double ss = 0.0;
            for (std::size_t n = 0; n < N; ++n) {
                const double d = sim.contributions[n](t, p) - m;
                ss += d * d;
            }
            r.mean(t, p) = m;
            r.variance(t, p) = N > 1 ? ss / static_cast<double>(N - 1) : 0.0;
            r.std(t, p) = std::sqrt(r.variance(t, p));
            total += m;
        }
        for (std::size_t p = 0; p < P; ++p) r.share(t, p) = total > 0.0 ? r.mean(t, p) / total : 0.0;
        r.baseline_share.push_back(total > 0.0 ? r.baseline[t] / total : 0.0);
    }
    return r;
}

} // namespace detail

/// Contributions of `d`'s spend, which must lie on the model's date grid and share its channels.
inline ContributionReport contributions(const FittedModel& m, const Dataset& d, std::size_t N) {
    require(d.channel_names() == m.data.channel_names(), ErrorKind::key, "dataset channels do not match the model");
    const Simulation sim = simulate(m, d.spend(), time_index(m, d.dates().front()), N);
    return detail::summarize(sim, d.dates(), d.channel_names());
}

/// Contributions over the training data.
inline ContributionReport contributions(const FittedModel& m, std::size_t N) { return contributions(m, m.data, N); }

/**
 * Largest gap, relative to max|y|, between the predictive mean and the sum of
 * mean contributions plus baseline, with prediction and report from the same draws.
 */
inline double additivity_check(const ContributionReport& report, const FittedModel& m, const Dataset& d) {
    const Simulation sim = simulate(m, d.spend(), time_index(m, d.dates().front()), report.draws);
    double max_y = 0.0;
    for (double v : d.target()) max_y = std::max(max_y, std::abs(v));
    require(max_y > 0.0, ErrorKind::undefined_metric, "target is identically zero");
    double gap = 0.0;
    for (std::size_t t = 0; t < sim.rows(); ++t) {
        double pred = 0.0;
        for (std::size_t n = 0; n < sim.draws(); ++n) pred += sim.prediction(n, t);
        pred /= static_cast<double>(sim.draws());
        double parts = report.baseline[t];
        for (std::size_t p = 0; p < report.channels.size(); ++p) parts += report.mean(t, p);
        gap = std::max(gap, std::abs(pred - parts) / max_y);
    }
    return gap;
}

/// Externally measured incremental share of one channel over an inclusive date range.
struct ExperimentReference {
    std::string channel;
    Date start;
    Date end;
    double share = 0.0;
};

struct CalibrationRow {
    std::string channel;
    Date start;
    Date end;
    double model_share = 0.0;
    double reference_share = 0.0;
    double gap = 0.0;
};

/// Model share (mean of per-date shares over the range) against each reference.
inline std::vector<CalibrationRow> compare_to_experiment(const ContributionReport& report,
                                                         const std::vector<ExperimentReference>& refs) {
    std::vector<CalibrationRow> rows;
    for (const auto& ref : refs) {
        auto it = std::find(report.channels.begin(), report.channels.end(), ref.channel);
        require(it != report.channels.end(), ErrorKind::key, "unknown channel '" + ref.channel + "' in reference");
        require(ref.share >= 0.0 && ref.share <= 1.0, ErrorKind::parameter, "reference shares must lie in [0, 1]");
        require(ref.start <= ref.end, ErrorKind::parameter, "reference range start is after its end");
        const auto p = static_cast<std::size_t>(it - report.channels.begin());
        double s = 0.0;
        std::size_t n = 0;
        for (std::size_t t = 0; t < report.length(); ++t) {
            if (report.dates[t] < ref.start || report.dates[t] > ref.end) continue;
            s += report.share(t, p);
            ++n;
        }
        require(n > 0, ErrorKind::parameter, "reference range for '" + ref.channel + "' covers no report dates");
        const double model = s / static_cast<double>(n);
        rows.push_back({ref.channel, ref.start, ref.end, model, ref.share, std::abs(model - ref.share)});
    }
    return rows;
}

/// Long-format CSV: date, channel, mean, std, share; the baseline appears as channel "baseline".
inline std::string contributions_csv(const ContributionReport& r) {
    std::ostringstream out;
    out << "date,channel,mean,std,share\n";
    for (std::size_t t = 0; t < r.length(); ++t) {
        const std::string date = r.dates[t].iso();
        for (std::size_t p = 0; p < r.channels.size(); ++p) {
            out << date << ',' << csv::quote(r.channels[p]) << ',' << csv::format_number(r.mean(t, p)) << ','
                << csv::format_number(r.std(t, p)) << ',' << csv::format_number(r.share(t, p)) << '\n';
        }
        out << date << ",baseline," << csv::format_number(r.baseline[t]) << ",0,"
            << csv::format_number(r.baseline_share[t]) << '\n';
    }
    return out.str();
}

inline json to_json(const ContributionReport& r) {
    json j;
    json dates = json::array();
    for (const auto& d : r.dates) dates.push_back(d.iso());
    j["dates"] = dates;
    j["channels"] = r.channels;
    j["draws"] = r.draws;
    j["spread_defined"] = r.spread_defined;
    j["mean"] = jsonio::matrix(r.mean);
    j["std"] = jsonio::matrix(r.std);
    j["variance"] = jsonio::matrix(r.variance);
    j["share"] = jsonio::matrix(r.share);
    j["baseline"] = jsonio::vector(r.baseline);
    j["baseline_share"] = jsonio::vector(r.baseline_share);
    j["total_shares"] = jsonio::vector(r.total_shares());
    j["warnings"] = r.warnings;
    return j;
}

inline json to_json(const std::vector<CalibrationRow>& rows) {
    json a = json::array();
    for (const auto& r : rows) {
        a.push_back({{"channel", r.channel},
                     {"start", r.start.iso()},
                     {"end", r.end.iso()},
                     {"model_share", r.model_share},
                     {"reference_share", r.reference_share},
                     {"gap", r.gap}});
    }
    return a;
}

} // namespace mixforge
