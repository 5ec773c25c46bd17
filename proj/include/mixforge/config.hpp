#pragma once

#include "mixforge/model.hpp"

#include <json.hpp>

#include <cstdint>
#include <set>
#include <string>

namespace mixforge {

using json = nlohmann::json;

namespace jsonio {

/// Rejects keys of `j` outside `allowed`; `where` names the object in the message.
inline void check_keys(const json& j, const std::set<std::string>& allowed, const std::string& where) {
    require(j.is_object(), ErrorKind::configuration, where + " must be a JSON object");
    for (const auto& [key, value] : j.items()) {
        require(allowed.contains(key), ErrorKind::configuration, "unknown key '" + key + "' in " + where);
    }
}

template <class T>
void read(const json& j, const char* key, T& out, const std::string& where) {
    if (!j.contains(key)) return;
    try {
        out = j.at(key).get<T>();
    } catch (const json::exception& e) {
        fail(ErrorKind::configuration, "invalid value for '" + std::string(key) + "' in " + where + ": " + e.what());
    }
}

/// Doubles as JSON numbers; non-finite values become null.
inline json number(double v) { return std::isfinite(v) ? json(v) : json(nullptr); }

inline double to_double(const json& j) {
    if (j.is_null()) return std::numeric_limits<double>::quiet_NaN();
    require(j.is_number(), ErrorKind::parse, "expected a number");
    return j.get<double>();
}

inline json vector(std::span<const double> v) {
    json a = json::array();
    for (double x : v) a.push_back(number(x));
    return a;
}

inline std::vector<double> to_vector(const json& j) {
    require(j.is_array(), ErrorKind::parse, "expected an array of numbers");
    std::vector<double> out;
    out.reserve(j.size());
    for (const auto& v : j) out.push_back(to_double(v));
    return out;
}

/// Row-major nested arrays.
inline json matrix(const Matrix& m) {
    json a = json::array();
    for (std::size_t r = 0; r < m.rows(); ++r) a.push_back(vector(m.row(r)));
    return a;
}

inline Matrix to_matrix(const json& j, std::size_t cols_if_empty = 0) {
    require(j.is_array(), ErrorKind::parse, "expected a matrix");
    if (j.empty()) return Matrix(0, cols_if_empty);
    const std::size_t cols = j.front().size();
    Matrix m(j.size(), cols);
    for (std::size_t r = 0; r < j.size(); ++r) {
        const auto row = to_vector(j[r]);
        require(row.size() == cols, ErrorKind::parse, "ragged matrix rows");
        for (std::size_t c = 0; c < cols; ++c) m(r, c) = row[c];
    }
    return m;
}

} // namespace jsonio

// ---------------------------------------------------------------------------
// Config

inline json to_json(const FunnelSegment& s) {
    return {{"label", std::string(to_string(s.label))},
            {"carryover", {s.carryover_prior.a, s.carryover_prior.b}},
            {"saturation", {s.saturation_prior.shape, s.saturation_prior.scale}}};
}

inline FunnelSegment funnel_segment_from_json(const json& j) {
    jsonio::check_keys(j, {"label", "carryover", "saturation"}, "funnel segment");
    FunnelSegment s = FunnelSegment::defaults(j.contains("label") ? funnel_from_string(j.at("label").get<std::string>())
                                                                  : FunnelLabel::mid);
    if (j.contains("carryover")) {
        const auto v = jsonio::to_vector(j.at("carryover"));
        require(v.size() == 2 && v[0] > 0 && v[1] > 0, ErrorKind::configuration, "carryover prior needs two positive values");
        s.carryover_prior = {v[0], v[1]};
    }
    if (j.contains("saturation")) {
        const auto v = jsonio::to_vector(j.at("saturation"));
        require(v.size() == 2 && v[0] > 0 && v[1] > 0, ErrorKind::configuration,
                "saturation prior needs two positive values");
        s.saturation_prior = {v[0], v[1]};
    }
    return s;
}

inline json to_json(const Layer1Config& c) {
    json segs = json::array();
    for (const auto& s : c.segments) segs.push_back(to_json(s));
    return {{"draws", c.draws},
            {"warmup", c.warmup},
            {"chains", c.chains},
            {"thin", c.thin},
            {"seed", c.seed},
            {"max_lag", c.max_lag ? json(*c.max_lag) : json(nullptr)},
            {"segments", segs},
            {"beta_prior_multiplier", c.beta_prior_multiplier},
            {"intercept_sd", c.intercept_sd},
            {"sigma_scale", c.sigma_scale},
            {"target_acceptance", c.target_acceptance}};
}

inline Layer1Config layer1_config_from_json(const json& j) {
    const std::string w = "layer1 config";
    jsonio::check_keys(j,
                       {"draws", "warmup", "chains", "thin", "seed", "max_lag", "segments", "beta_prior_multiplier",
                        "intercept_sd", "sigma_scale", "target_acceptance"},
                       w);
    Layer1Config c;
    jsonio::read(j, "draws", c.draws, w);
    jsonio::read(j, "warmup", c.warmup, w);
    jsonio::read(j, "chains", c.chains, w);
    jsonio::read(j, "thin", c.thin, w);
    jsonio::read(j, "seed", c.seed, w);
    if (j.contains("max_lag") && !j.at("max_lag").is_null()) {
        std::size_t lag = 0;
        jsonio::read(j, "max_lag", lag, w);
        c.max_lag = lag;
    }
    if (j.contains("segments")) {
        require(j.at("segments").is_array(), ErrorKind::configuration, "segments must be an array");
        for (const auto& s : j.at("segments")) c.segments.push_back(funnel_segment_from_json(s));
    }
    jsonio::read(j, "beta_prior_multiplier", c.beta_prior_multiplier, w);
    jsonio::read(j, "intercept_sd", c.intercept_sd, w);
    jsonio::read(j, "sigma_scale", c.sigma_scale, w);
    jsonio::read(j, "target_acceptance", c.target_acceptance, w);
    return c;
}

inline json to_json(const Layer2Config& c) {
    return {{"knots", c.knots},         {"bandwidth", c.bandwidth}, {"restarts", c.restarts},
            {"max_iter", c.max_iter},   {"tolerance", c.tolerance}, {"jitter", c.jitter},
            {"max_log_sd", c.max_log_sd}, {"seed", c.seed},         {"random_walk_scale", c.random_walk_scale}};
}

inline Layer2Config layer2_config_from_json(const json& j) {
    const std::string w = "layer2 config";
    jsonio::check_keys(
        j, {"knots", "bandwidth", "restarts", "max_iter", "tolerance", "jitter", "max_log_sd", "seed", "random_walk_scale"},
        w);
    Layer2Config c;
    jsonio::read(j, "knots", c.knots, w);
    jsonio::read(j, "bandwidth", c.bandwidth, w);
    jsonio::read(j, "restarts", c.restarts, w);
    jsonio::read(j, "max_iter", c.max_iter, w);
    jsonio::read(j, "tolerance", c.tolerance, w);
    jsonio::read(j, "jitter", c.jitter, w);
    jsonio::read(j, "max_log_sd", c.max_log_sd, w);
    jsonio::read(j, "seed", c.seed, w);
    jsonio::read(j, "random_walk_scale", c.random_walk_scale, w);
    return c;
}

inline json to_json(const ModelConfig& c) {
    json funnel = json::object();
    for (const auto& [name, label] : c.funnel) funnel[name] = std::string(to_string(label));
    return {{"period", c.period},
            {"trend_window", c.trend_window},
            {"min_seasonal_cycles", c.min_seasonal_cycles},
            {"short_series_trend_window", c.short_series_trend_window},
            {"funnel", funnel},
            {"layer1", to_json(c.layer1)},
            {"layer2", to_json(c.layer2)}};
}

inline ModelConfig model_config_from_json(const json& j) {
    const std::string w = "model config";
    jsonio::check_keys(j,
                       {"period", "trend_window", "min_seasonal_cycles", "short_series_trend_window", "funnel", "layer1",
                        "layer2"},
                       w);
    ModelConfig c;
    jsonio::read(j, "period", c.period, w);
    jsonio::read(j, "trend_window", c.trend_window, w);
    jsonio::read(j, "min_seasonal_cycles", c.min_seasonal_cycles, w);
    jsonio::read(j, "short_series_trend_window", c.short_series_trend_window, w);
    if (j.contains("funnel")) {
        require(j.at("funnel").is_object(), ErrorKind::configuration, "funnel must map channel names to segments");
        for (const auto& [name, label] : j.at("funnel").items()) {
            require(label.is_string(), ErrorKind::configuration, "funnel segment for '" + name + "' must be a string");
            c.funnel[name] = funnel_from_string(label.get<std::string>());
        }
    }
    if (j.contains("layer1")) c.layer1 = layer1_config_from_json(j.at("layer1"));
    if (j.contains("layer2")) c.layer2 = layer2_config_from_json(j.at("layer2"));
    return c;
}

/// 64-bit FNV-1a of a byte string, as 16 hex digits.
inline std::string fnv1a_hex(std::string_view bytes) {
    std::uint64_t h = 14695981039346656037ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 1099511628211ULL;
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline std::string config_fingerprint(const ModelConfig& c) { return fnv1a_hex(to_json(c).dump()); }

} // namespace mixforge
