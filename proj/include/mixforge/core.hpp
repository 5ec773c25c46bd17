#pragma once

#include "mixforge/csv.hpp"
#include "mixforge/date.hpp"
#include "mixforge/error.hpp"
#include "mixforge/matrix.hpp"

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <fstream>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mixforge {

enum class Cadence { daily, weekly };

inline std::string_view to_string(Cadence c) { return c == Cadence::daily ? "daily" : "weekly"; }

inline Cadence cadence_from_string(std::string_view s) {
    if (s == "daily") return Cadence::daily;
    if (s == "weekly") return Cadence::weekly;
    fail(ErrorKind::parse, "unknown cadence '" + std::string(s) + "'");
}

inline int cadence_days(Cadence c) { return c == Cadence::daily ? 1 : 7; }

/// Nominal seasonal period in steps: a week of days or a year of weeks.
inline int nominal_period(Cadence c) { return c == Cadence::daily ? 7 : 52; }

/**
 * Spend and performance history for P channels over T uniformly spaced dates.
 *
 * Construction validates everything; a Dataset that exists is valid. Instances
 * are immutable.
 */
class Dataset {
public:
    Dataset(std::vector<Date> dates, Matrix spend, std::vector<double> target,
            std::vector<std::string> channel_names)
        : dates_(std::move(dates)), spend_(std::move(spend)), target_(std::move(target)),
          channel_names_(std::move(channel_names)) {
        const std::size_t T = dates_.size();
        require(T >= 2, ErrorKind::cadence, "a dataset needs at least 2 dates, got " + std::to_string(T));
        require(spend_.rows() == T && target_.size() == T, ErrorKind::dimension,
                "spend rows and target length must match the date count");
        require(spend_.cols() >= 1, ErrorKind::schema, "at least one spend column is required");
        require(channel_names_.size() == spend_.cols(), ErrorKind::dimension,
                "channel name count does not match spend columns");
        const std::int64_t step = dates_[1] - dates_[0];
        require(step == 1 || step == 7, ErrorKind::cadence,
                "date spacing of " + std::to_string(step) + " days is neither daily nor weekly");
        for (std::size_t t = 1; t < T; ++t) {
            const std::int64_t gap = dates_[t] - dates_[t - 1];
            if (gap != step) {
                fail(ErrorKind::cadence, (gap == 0 ? "duplicate date " : "irregular spacing at ") + dates_[t].iso());
            }
        }
        cadence_ = step == 1 ? Cadence::daily : Cadence::weekly;
        for (std::size_t t = 0; t < T; ++t) {
            require(std::isfinite(target_[t]), ErrorKind::domain, "non-finite target at " + dates_[t].iso());
            for (std::size_t p = 0; p < spend_.cols(); ++p) {
                const double v = spend_(t, p);
                require(std::isfinite(v) && v >= 0.0, ErrorKind::domain,
                        "spend for '" + channel_names_[p] + "' at " + dates_[t].iso() + " must be finite and >= 0");
            }
        }
    }

    std::size_t length() const noexcept { return dates_.size(); }
    std::size_t channels() const noexcept { return spend_.cols(); }
    Cadence cadence() const noexcept { return cadence_; }
    const std::vector<Date>& dates() const noexcept { return dates_; }
    const Matrix& spend() const noexcept { return spend_; }
    const std::vector<double>& target() const noexcept { return target_; }
    const std::vector<std::string>& channel_names() const noexcept { return channel_names_; }

    std::size_t channel_index(std::string_view name) const {
        auto it = std::find(channel_names_.begin(), channel_names_.end(), name);
        require(it != channel_names_.end(), ErrorKind::key, "unknown channel '" + std::string(name) + "'");
        return static_cast<std::size_t>(it - channel_names_.begin());
    }

    /// Rows [begin, end) as a new dataset.
    Dataset slice(std::size_t begin, std::size_t end) const {
        require(begin < end && end <= length(), ErrorKind::bounds, "invalid dataset slice");
        Matrix spend(end - begin, channels());
        for (std::size_t t = begin; t < end; ++t) {
            for (std::size_t p = 0; p < channels(); ++p) {
                spend(t - begin, p) = spend_(t, p);
            }
        }
        return Dataset({dates_.begin() + begin, dates_.begin() + end}, std::move(spend),
                       {target_.begin() + begin, target_.begin() + end}, channel_names_);
    }

    /// Same dates and channels with a different target series.
    Dataset with_target(std::vector<double> target) const {
        return Dataset(dates_, spend_, std::move(target), channel_names_);
    }

    Dataset with_spend(Matrix spend) const { return Dataset(dates_, std::move(spend), target_, channel_names_); }

    friend bool operator==(const Dataset&, const Dataset&) = default;

private:
    std::vector<Date> dates_;
    Matrix spend_;
    std::vector<double> target_;
    std::vector<std::string> channel_names_;
    Cadence cadence_ = Cadence::weekly;
};

/// Column mapping for CSV input. Empty spend_columns means every other column.
struct ColumnSchema {
    std::string date_column = "date";
    std::string target_column = "target";
    std::vector<std::string> spend_columns;
};

inline Dataset dataset_from_rows(const std::vector<csv::Row>& rows, const ColumnSchema& schema) {
    require(!rows.empty(), ErrorKind::schema, "input has no header row");
    const csv::Row& header = rows.front();
    auto find = [&](const std::string& name) -> std::size_t {
        auto it = std::find(header.begin(), header.end(), name);
        require(it != header.end(), ErrorKind::schema, "missing column '" + name + "'");
        return static_cast<std::size_t>(it - header.begin());
    };
    const std::size_t date_col = find(schema.date_column);
    const std::size_t target_col = find(schema.target_column);
    std::vector<std::string> names = schema.spend_columns;
    if (names.empty()) {
        for (std::size_t c = 0; c < header.size(); ++c) {
            if (c != date_col && c != target_col) {
                names.push_back(header[c]);
            }
        }
    }
    require(!names.empty(), ErrorKind::schema, "schema names no spend column");
    std::vector<std::size_t> spend_cols;
    for (const auto& n : names) {
        spend_cols.push_back(find(n));
    }

    struct Record {
        Date date;
        std::vector<double> spend;
        double target;
    };
    std::vector<Record> records;
    for (std::size_t r = 1; r < rows.size(); ++r) {
        const csv::Row& row = rows[r];
        require(row.size() == header.size(), ErrorKind::parse,
                "row " + std::to_string(r + 1) + " has " + std::to_string(row.size()) + " fields, expected " +
                    std::to_string(header.size()));
        Record rec{Date::parse(row[date_col]), {}, csv::parse_number(row[target_col], schema.target_column)};
        for (std::size_t i = 0; i < spend_cols.size(); ++i) {
            const double v = csv::parse_number(row[spend_cols[i]], names[i]);
            require(v >= 0.0, ErrorKind::domain,
                    "negative spend " + csv::format_number(v) + " in '" + names[i] + "' at " + rec.date.iso());
            rec.spend.push_back(v);
        }
        records.push_back(std::move(rec));
    }
    require(records.size() >= 2, ErrorKind::cadence,
            "cannot infer cadence from " + std::to_string(records.size()) + " row(s)");
    std::stable_sort(records.begin(), records.end(), [](const Record& a, const Record& b) { return a.date < b.date; });

    std::vector<Date> dates;
    std::vector<double> target;
    Matrix spend(records.size(), names.size());
    for (std::size_t t = 0; t < records.size(); ++t) {
        dates.push_back(records[t].date);
        target.push_back(records[t].target);
        for (std::size_t p = 0; p < names.size(); ++p) {
            spend(t, p) = records[t].spend[p];
        }
    }
    Dataset d(std::move(dates), std::move(spend), std::move(target), std::move(names));
    for (std::size_t p = 0; p < d.channels(); ++p) {
        const auto col = d.spend().column(p);
        require(std::any_of(col.begin(), col.end(), [](double v) { return v != 0.0; }), ErrorKind::scale,
                "channel '" + d.channel_names()[p] + "' has no spend");
    }
    return d;
}

/// Reads and validates a CSV dataset. Dates are sorted ascending.
inline Dataset load_dataset(const std::string& path, const ColumnSchema& schema = {}) {
    return dataset_from_rows(csv::read_file(path), schema);
}

inline void write_dataset_csv(const Dataset& d, std::ostream& out, const std::string& date_column = "date",
                              const std::string& target_column = "target") {
    out << csv::quote(date_column);
    for (const auto& n : d.channel_names()) {
        out << ',' << csv::quote(n);
    }
    out << ',' << csv::quote(target_column) << '\n';
    for (std::size_t t = 0; t < d.length(); ++t) {
        out << d.dates()[t].iso();
        for (std::size_t p = 0; p < d.channels(); ++p) {
            out << ',' << csv::format_number(d.spend()(t, p));
        }
        out << ',' << csv::format_number(d.target()[t]) << '\n';
    }
}

inline void save_dataset(const Dataset& d, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write '" + path + "'");
    write_dataset_csv(d, out);
}

// ---------------------------------------------------------------------------
// Max-abs scaling

struct ScaledColumn {
    std::vector<double> values;
    double scale;
};

/// Divides by max |v|. Throws scale error when the column is all zero.
inline ScaledColumn max_abs_scale(std::span<const double> column, std::string_view name = "column") {
    double m = 0.0;
    for (double v : column) {
        m = std::max(m, std::abs(v));
    }
    require(m > 0.0, ErrorKind::scale, "'" + std::string(name) + "' is all zero and cannot be scaled");
    ScaledColumn out{std::vector<double>(column.begin(), column.end()), m};
    for (double& v : out.values) {
        v /= m;
    }
    return out;
}

/// Divisors applied to spend columns and target. All strictly positive.
struct ScalePair {
    std::vector<double> spend_scales;
    double target_scale = 1.0;

    double scale_spend(std::size_t p, double v) const { return v / spend_at(p); }
    double rescale_spend(std::size_t p, double v) const { return v * spend_at(p); }
    double scale_target(double v) const { return v / target_scale; }
    double rescale_target(double v) const { return v * target_scale; }

    double spend_at(std::size_t p) const {
        require(p < spend_scales.size(), ErrorKind::bounds,
                "channel index " + std::to_string(p) + " out of range for " + std::to_string(spend_scales.size()) +
                    " channels");
        return spend_scales[p];
    }

    friend bool operator==(const ScalePair&, const ScalePair&) = default;
};

/// Scales every spend column and the target by its maximum absolute value.
inline std::pair<Dataset, ScalePair> max_abs_scale(const Dataset& d) {
    ScalePair scales;
    Matrix spend(d.length(), d.channels());
    for (std::size_t p = 0; p < d.channels(); ++p) {
        auto col = max_abs_scale(d.spend().column(p), d.channel_names()[p]);
        spend.set_column(p, col.values);
        scales.spend_scales.push_back(col.scale);
    }
    auto target = max_abs_scale(d.target(), "target");
    scales.target_scale = target.scale;
    return {Dataset(d.dates(), std::move(spend), std::move(target.values), d.channel_names()), scales};
}

/// Inverse of max_abs_scale.
inline Dataset rescale(const Dataset& scaled, const ScalePair& scales) {
    require(scales.spend_scales.size() == scaled.channels(), ErrorKind::dimension, "scale count mismatch");
    Matrix spend(scaled.length(), scaled.channels());
    std::vector<double> target(scaled.length());
    for (std::size_t t = 0; t < scaled.length(); ++t) {
        for (std::size_t p = 0; p < scaled.channels(); ++p) {
            spend(t, p) = scales.rescale_spend(p, scaled.spend()(t, p));
        }
        target[t] = scales.rescale_target(scaled.target()[t]);
    }
    return Dataset(scaled.dates(), std::move(spend), std::move(target), scaled.channel_names());
}

// ---------------------------------------------------------------------------
// Funnel segments

enum class FunnelLabel { upper, mid, lower };

inline std::string_view to_string(FunnelLabel f) {
    switch (f) {
    case FunnelLabel::upper: return "upper";
    case FunnelLabel::mid: return "mid";
    case FunnelLabel::lower: return "lower";
    }
    return "mid";
}

inline FunnelLabel funnel_from_string(std::string_view s) {
    if (s == "upper") return FunnelLabel::upper;
    if (s == "mid") return FunnelLabel::mid;
    if (s == "lower") return FunnelLabel::lower;
    fail(ErrorKind::parse, "unknown funnel segment '" + std::string(s) + "'");
}

struct BetaPrior {
    double a;
    double b;
    double mean() const { return a / (a + b); }
    double sd() const { return std::sqrt(a * b / ((a + b) * (a + b) * (a + b + 1.0))); }

    friend bool operator==(const BetaPrior&, const BetaPrior&) = default;
};

/// Gamma(shape, scale).
struct GammaPrior {
    double shape;
    double scale;
    double mean() const { return shape * scale; }
    double sd() const { return std::sqrt(shape) * scale; }

    friend bool operator==(const GammaPrior&, const GammaPrior&) = default;
};

/// Carryover and saturation priors for one position in the marketing funnel.
struct FunnelSegment {
    FunnelLabel label = FunnelLabel::mid;
    BetaPrior carryover_prior{4.0, 4.0};
    GammaPrior saturation_prior{3.0, 1.0};

    /// Upper funnel channels (TV) carry over longer than lower funnel ones (search).
    static FunnelSegment defaults(FunnelLabel label) {
        switch (label) {
        case FunnelLabel::upper: return {label, {6.0, 2.0}, {3.0, 1.0}};
        case FunnelLabel::lower: return {label, {2.0, 6.0}, {3.0, 1.0}};
        case FunnelLabel::mid: break;
        }
        return {FunnelLabel::mid, {4.0, 4.0}, {3.0, 1.0}};
    }

    friend bool operator==(const FunnelSegment&, const FunnelSegment&) = default;
};

} // namespace mixforge
