#pragma once

#include "mixforge/allocator.hpp"
#include "mixforge/attribution.hpp"
#include "mixforge/config.hpp"
#include "mixforge/forecast.hpp"

namespace mixforge {

/// Largest draw count a scenario request may ask for.
inline constexpr std::size_t max_request_draws = 4000;

namespace detail {

inline Date request_date(const json& j, const char* key) {
    require(j.contains(key), ErrorKind::configuration, std::string("missing field '") + key + "'");
    require(j.at(key).is_string(), ErrorKind::configuration, std::string("field '") + key + "' must be a date string");
    try {
        return Date::parse(j.at(key).get<std::string>());
    } catch (const Error& e) {
        fail(ErrorKind::parameter, std::string("field '") + key + "': " + e.what());
    }
}

inline double request_number(const json& j, const char* key) {
    require(j.at(key).is_number(), ErrorKind::configuration, std::string("field '") + key + "' must be a number");
    const double v = j.at(key).get<double>();
    require(std::isfinite(v), ErrorKind::parameter, std::string("field '") + key + "' must be finite");
    return v;
}

/// Per-channel values from an object keyed by channel name; missing channels get `fill`.
inline std::vector<double> channel_map(const json& j, const char* key, const std::vector<std::string>& channels,
                                       double fill) {
    const json& m = j.at(key);
    require(m.is_object(), ErrorKind::configuration, std::string("field '") + key + "' must map channel names to numbers");
    std::vector<double> out(channels.size(), fill);
    for (const auto& [name, value] : m.items()) {
        auto it = std::find(channels.begin(), channels.end(), name);
        require(it != channels.end(), ErrorKind::key, std::string("field '") + key + "': unknown channel '" + name + "'");
        require(value.is_number() && std::isfinite(value.get<double>()), ErrorKind::configuration,
                std::string("field '") + key + "': value for '" + name + "' must be a finite number");
        out[static_cast<std::size_t>(it - channels.begin())] = value.get<double>();
    }
    return out;
}

inline std::size_t request_draws(const json& j, std::size_t fallback) {
    if (!j.contains("draws")) return fallback;
    require(j.at("draws").is_number_unsigned(), ErrorKind::configuration, "field 'draws' must be a positive integer");
    const auto n = j.at("draws").get<std::size_t>();
    require(n >= 1 && n <= max_request_draws, ErrorKind::parameter,
            "field 'draws' must lie in [1, " + std::to_string(max_request_draws) + "]");
    return n;
}

} // namespace detail

struct ScenarioRequest {
    BudgetPlan plan;
    std::size_t draws = 500;
};

/**
 * Scenario request JSON:
 *   {"start", "end", "draws"?, and one of
 *    "budgets": {channel: total}           spread evenly over the horizon,
 *    "total": B, "shares"?: {channel: s}    split by shares (default historical), spread evenly,
 *    "allocation": [[...], ...]             explicit H x P spend}
 */
inline ScenarioRequest parse_scenario_request(const json& j, const FittedModel& m) {
    jsonio::check_keys(j, {"start", "end", "draws", "budgets", "total", "shares", "allocation"}, "scenario request");
    ScenarioRequest r;
    const Date start = detail::request_date(j, "start");
    const Date end = detail::request_date(j, "end");
    const std::size_t H = horizon_length(start, end, m.data.cadence());
    const auto& channels = m.data.channel_names();
    r.draws = detail::request_draws(j, r.draws);
    const int forms = int(j.contains("budgets")) + int(j.contains("total")) + int(j.contains("allocation"));
    require(forms == 1, ErrorKind::configuration, "give exactly one of 'budgets', 'total' or 'allocation'");
    require(!j.contains("shares") || j.contains("total"), ErrorKind::configuration, "'shares' requires 'total'");
    if (j.contains("allocation")) {
        r.plan = {start, end, jsonio::to_matrix(j.at("allocation"), channels.size()), channels};
        require(r.plan.allocation.rows() == H && r.plan.allocation.cols() == channels.size(), ErrorKind::dimension,
                "'allocation' must be " + std::to_string(H) + " x " + std::to_string(channels.size()));
    } else if (j.contains("budgets")) {
        const auto totals = detail::channel_map(j, "budgets", channels, 0.0);
        r.plan = {start, end, Matrix(H, channels.size()), channels};
        for (std::size_t p = 0; p < channels.size(); ++p) {
            require(totals[p] >= 0.0, ErrorKind::domain, "budget for '" + channels[p] + "' must be >= 0");
            for (std::size_t h = 0; h < H; ++h) r.plan.allocation(h, p) = totals[p] / static_cast<double>(H);
        }
    } else {
        const double total = detail::request_number(j, "total");
        std::optional<std::vector<double>> shares;
        if (j.contains("shares")) shares = detail::channel_map(j, "shares", channels, 0.0);
        r.plan = even_spread(total, start, end, m.data, shares);
    }
    r.plan.validate();
    return r;
}

struct OptimizeRequest {
    Date start;
    Date end;
    AllocationMethod method = AllocationMethod::sqp;
    AllocationMode mode = AllocationMode::aggregate;
    AllocationConstraints constraints;
    /// Decision variables of the reference plan; the optimizer's starting point.
    std::vector<double> reference;
};

/**
 * Optimize request JSON:
 *   {"start", "end", "total", "method"?: "sqp"|"greedy", "mode"?: "aggregate"|"full",
 *    "deviation"?: d  or  "lower"?/"upper"?: {channel: bound},
 *    "reference"?: {channel: total}, "step"?, "max_iter"?, "tolerance"?}
 * The reference plan defaults to the total split by historical shares. Per-channel
 * bounds apply to channel totals in aggregate mode and to every cell in full mode.
 */
inline OptimizeRequest parse_optimize_request(const json& j, const FittedModel& m, std::size_t max_iter_cap) {
    jsonio::check_keys(j,
                       {"start", "end", "total", "method", "mode", "deviation", "lower", "upper", "reference", "step",
                        "max_iter", "tolerance"},
                       "optimize request");
    OptimizeRequest r;
    r.start = detail::request_date(j, "start");
    r.end = detail::request_date(j, "end");
    const std::size_t H = horizon_length(r.start, r.end, m.data.cadence());
    const auto& channels = m.data.channel_names();
    const std::size_t P = channels.size();
    require(j.contains("total"), ErrorKind::configuration, "missing field 'total'");
    const double total = detail::request_number(j, "total");
    require(total >= 0.0, ErrorKind::domain, "'total' must be >= 0");
    if (j.contains("method")) r.method = allocation_method_from_string(j.at("method").get<std::string>());
    if (j.contains("mode")) r.mode = allocation_mode_from_string(j.at("mode").get<std::string>());

    std::optional<std::vector<double>> shares;
    if (j.contains("reference")) {
        auto ref = detail::channel_map(j, "reference", channels, 0.0);
        double s = 0.0;
        for (double v : ref) {
            require(v >= 0.0, ErrorKind::domain, "reference totals must be >= 0");
            s += v;
        }
        require(s > 0.0, ErrorKind::domain, "reference totals must not all be zero");
        for (auto& v : ref) v /= s;
        shares = ref;
    }
    const BudgetPlan reference = even_spread(total, r.start, r.end, m.data, shares);
    r.reference = r.mode == AllocationMode::aggregate ? reference.channel_totals() : reference.allocation.data();

    const bool explicit_bounds = j.contains("lower") || j.contains("upper");
    require(!(explicit_bounds && j.contains("deviation")), ErrorKind::configuration,
            "give either 'deviation' or explicit 'lower'/'upper' bounds, not both");
    if (j.contains("deviation")) {
        r.constraints = deviation_constraints(total, r.reference, detail::request_number(j, "deviation"));
    } else {
        const std::size_t n = r.mode == AllocationMode::aggregate ? P : H * P;
        r.constraints = budget_only_constraints(total, n);
        if (explicit_bounds) {
            const auto lo = j.contains("lower") ? detail::channel_map(j, "lower", channels, 0.0) : std::vector<double>(P, 0.0);
            const auto hi = j.contains("upper") ? detail::channel_map(j, "upper", channels, total) : std::vector<double>(P, total);
            for (std::size_t i = 0; i < n; ++i) {
                r.constraints.lower[i] = lo[i % P];
                r.constraints.upper[i] = hi[i % P];
            }
        }
    }
    r.constraints.step = total / 1000.0;
    if (j.contains("step")) r.constraints.step = detail::request_number(j, "step");
    if (j.contains("tolerance")) r.constraints.tolerance = detail::request_number(j, "tolerance");
    if (j.contains("max_iter")) {
        require(j.at("max_iter").is_number_unsigned(), ErrorKind::configuration, "'max_iter' must be a positive integer");
        r.constraints.max_iter = j.at("max_iter").get<std::size_t>();
    }
    r.constraints.max_iter = std::min(r.constraints.max_iter, max_iter_cap);
    return r;
}

inline AllocationResult run_optimize(const OptimizeRequest& req, const FittedModel& m) {
    req.constraints.check_feasible();
    const PlanObjective objective(m, req.start, req.end, req.mode);
    if (req.method == AllocationMethod::greedy) return optimize_greedy(objective, req.constraints);
    return optimize_sqp(objective, req.constraints, req.reference);
}

/// Headline posterior quantities of a fitted model.
inline json model_summary(const FittedModel& m) {
    const auto mean = m.posterior.mean();
    const auto avg = m.ktr.average_coefficients();
    json channels = json::array();
    for (std::size_t p = 0; p < m.channels(); ++p) {
        const auto a = m.posterior.alpha_draws.column(p);
        const auto u = m.posterior.mu_draws.column(p);
        channels.push_back({{"name", m.data.channel_names()[p]},
                            {"alpha_mean", mean.alpha[p]},
                            {"alpha_sd", stats::sd(a)},
                            {"mu_mean", mean.mu[p]},
                            {"mu_sd", stats::sd(u)},
                            {"beta_layer1_mean", mean.beta[p]},
                            {"beta_time_average", avg[p]},
                            {"spend_scale", m.scales.spend_scales[p]}});
    }
    json diag = json::array();
    for (const auto& d : m.posterior.diagnostics) {
        diag.push_back({{"name", d.name}, {"rhat", jsonio::number(d.rhat)}, {"ess", jsonio::number(d.ess)}});
    }
    return {{"channels", channels},
            {"cadence", std::string(to_string(m.data.cadence()))},
            {"training_range", {m.data.dates().front().iso(), m.data.dates().back().iso()}},
            {"observations", m.length()},
            {"draws", m.draws()},
            {"knots", m.ktr.grid.count()},
            {"target_scale", m.scales.target_scale},
            {"intercept_mean", mean.intercept},
            {"sigma_mean", mean.sigma},
            {"diagnostics", diag},
            {"warnings", m.posterior.warnings},
            {"fingerprint", config_fingerprint(m.config)}};
}

} // namespace mixforge
