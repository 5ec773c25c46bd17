#pragma once

#include "mixforge/attribution.hpp"
#include "mixforge/config.hpp"
#include "mixforge/model.hpp"

#include <fstream>
#include <sstream>

namespace mixforge {

inline constexpr std::string_view snapshot_magic = "mixforge-snapshot/";
inline constexpr std::string_view snapshot_version = "mixforge-snapshot/1";

namespace detail {

inline json to_json(const Decomposition& d) {
    return {{"period", d.period},
            {"trend_window", d.trend_window},
            {"min_cycles", d.min_cycles},
            {"trend_end", jsonio::number(d.trend_end)},
            {"trend", jsonio::vector(d.trend)},
            {"seasonal", jsonio::vector(d.seasonal)},
            {"residual", jsonio::vector(d.residual)}};
}

inline Decomposition decomposition_from_json(const json& j) {
    Decomposition d;
    d.period = j.at("period").get<int>();
    d.trend_window = j.at("trend_window").get<int>();
    d.min_cycles = jsonio::to_double(j.at("min_cycles"));
    d.trend_end = jsonio::to_double(j.at("trend_end"));
    d.trend = jsonio::to_vector(j.at("trend"));
    d.seasonal = jsonio::to_vector(j.at("seasonal"));
    d.residual = jsonio::to_vector(j.at("residual"));
    return d;
}

inline json to_json(const AdstockPosterior& p) {
    json diag = json::array();
    for (const auto& d : p.diagnostics) {
        diag.push_back({{"name", d.name}, {"rhat", jsonio::number(d.rhat)}, {"ess", jsonio::number(d.ess)}});
    }
    return {{"chains", p.chains},
            {"draws_per_chain", p.draws_per_chain},
            {"alpha", jsonio::matrix(p.alpha_draws)},
            {"mu", jsonio::matrix(p.mu_draws)},
            {"beta", jsonio::matrix(p.beta_draws)},
            {"intercept", jsonio::vector(p.intercept_draws)},
            {"sigma", jsonio::vector(p.sigma_draws)},
            {"diagnostics", diag},
            {"acceptance", jsonio::vector(p.acceptance)},
            {"warnings", p.warnings}};
}

inline AdstockPosterior posterior_from_json(const json& j, std::size_t P) {
    AdstockPosterior p;
    p.chains = j.at("chains").get<std::size_t>();
    p.draws_per_chain = j.at("draws_per_chain").get<std::size_t>();
    p.alpha_draws = jsonio::to_matrix(j.at("alpha"), P);
    p.mu_draws = jsonio::to_matrix(j.at("mu"), P);
    p.beta_draws = jsonio::to_matrix(j.at("beta"), P);
    p.intercept_draws = jsonio::to_vector(j.at("intercept"));
    p.sigma_draws = jsonio::to_vector(j.at("sigma"));
    for (const auto& d : j.at("diagnostics")) {
        p.diagnostics.push_back(
            {d.at("name").get<std::string>(), jsonio::to_double(d.at("rhat")), jsonio::to_double(d.at("ess"))});
    }
    p.acceptance = jsonio::to_vector(j.at("acceptance"));
    p.warnings = j.at("warnings").get<std::vector<std::string>>();
    const std::size_t N = p.intercept_draws.size();
    require(p.alpha_draws.rows() == N && p.mu_draws.rows() == N && p.beta_draws.rows() == N &&
                p.sigma_draws.size() == N && N == p.chains * p.draws_per_chain,
            ErrorKind::parse, "posterior draw counts are inconsistent");
    require(p.alpha_draws.cols() == P && p.mu_draws.cols() == P && p.beta_draws.cols() == P, ErrorKind::parse,
            "posterior channel counts are inconsistent");
    return p;
}

inline json to_json(const KtrModel& k, const std::vector<Date>& dates, const std::vector<std::string>& channels) {
    json draws = json::array();
    for (const auto& b : k.knot_draws) draws.push_back(jsonio::matrix(b));
    json summary = json::object();
    json iso = json::array();
    for (const auto& d : dates) iso.push_back(d.iso());
    summary["dates"] = iso;
    json per_channel = json::object();
    for (std::size_t p = 0; p < channels.size(); ++p) {
        per_channel[channels[p]] = {{"mean", jsonio::vector(k.coefficient_mean.column(p))},
                                    {"std", jsonio::vector(k.coefficient_std.column(p))}};
    }
    summary["channels"] = per_channel;
    return {{"grid", {{"positions", jsonio::vector(k.grid.positions)}, {"bandwidth", k.grid.bandwidth}}},
            {"kernel", jsonio::matrix(k.kernel)},
            {"knot_draws", draws},
            {"sigma_p", jsonio::vector(k.sigma_p)},
            {"anchor", jsonio::vector(k.anchor)},
            {"coefficients", summary},
            {"objective_trace", jsonio::vector(k.objective_trace)},
            {"restart_objectives", jsonio::vector(k.restart_objectives)}};
}

inline KtrModel ktr_from_json(const json& j, const std::vector<std::string>& channels, std::size_t T) {
    KtrModel k;
    k.grid.positions = jsonio::to_vector(j.at("grid").at("positions"));
    k.grid.bandwidth = jsonio::to_double(j.at("grid").at("bandwidth"));
    k.kernel = jsonio::to_matrix(j.at("kernel"), k.grid.count());
    for (const auto& b : j.at("knot_draws")) k.knot_draws.push_back(jsonio::to_matrix(b, channels.size()));
    k.sigma_p = jsonio::to_vector(j.at("sigma_p"));
    k.anchor = jsonio::to_vector(j.at("anchor"));
    const auto& per_channel = j.at("coefficients").at("channels");
    k.coefficient_mean = Matrix(T, channels.size());
    k.coefficient_std = Matrix(T, channels.size());
    for (std::size_t p = 0; p < channels.size(); ++p) {
        require(per_channel.contains(channels[p]), ErrorKind::parse, "coefficient summary misses '" + channels[p] + "'");
        k.coefficient_mean.set_column(p, jsonio::to_vector(per_channel.at(channels[p]).at("mean")));
        k.coefficient_std.set_column(p, jsonio::to_vector(per_channel.at(channels[p]).at("std")));
    }
    k.objective_trace = jsonio::to_vector(j.at("objective_trace"));
    k.restart_objectives = jsonio::to_vector(j.at("restart_objectives"));
    require(k.kernel.rows() == T && k.kernel.cols() == k.grid.count(), ErrorKind::parse, "kernel shape is inconsistent");
    for (const auto& b : k.knot_draws) {
        require(b.rows() == k.grid.count() && b.cols() == channels.size(), ErrorKind::parse,
                "knot draw shape is inconsistent");
    }
    return k;
}

} // namespace detail

/// Draw count used for the contribution summary stored in snapshots.
inline constexpr std::size_t snapshot_contribution_draws = 500;

inline json snapshot_json(const FittedModel& m) {
    const Dataset& d = m.data;
    json dates = json::array();
    for (const auto& date : d.dates()) dates.push_back(date.iso());
    json j;
    j["format"] = std::string(snapshot_version);
    j["fingerprint"] = config_fingerprint(m.config);
    j["config"] = to_json(m.config);
    j["dataset"] = {{"dates", dates},
                    {"channels", d.channel_names()},
                    {"spend", jsonio::matrix(d.spend())},
                    {"target", jsonio::vector(d.target())}};
    j["scales"] = {{"spend", jsonio::vector(m.scales.spend_scales)}, {"target", m.scales.target_scale}};
    j["max_lag"] = m.max_lag ? json(*m.max_lag) : json(nullptr);
    j["decomposition"] = {{"initial", detail::to_json(m.initial)}, {"baseline", detail::to_json(m.baseline)}};
    j["posterior"] = detail::to_json(m.posterior);
    j["ktr"] = detail::to_json(m.ktr, d.dates(), d.channel_names());
    // derived from the fields above; carries both the variance and its square root
    j["contributions"] = to_json(contributions(m, snapshot_contribution_draws));
    return j;
}

inline std::string snapshot_string(const FittedModel& m) { return snapshot_json(m).dump(1) + "\n"; }

inline FittedModel snapshot_from_string(const std::string& text) {
    json j;
    try {
        j = json::parse(text);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::parse, std::string("snapshot is not valid JSON: ") + e.what());
    }
    require(j.is_object() && j.contains("format") && j.at("format").is_string(), ErrorKind::parse,
            "not a mixforge snapshot (missing format header)");
    const auto format = j.at("format").get<std::string>();
    require(format.starts_with(snapshot_magic), ErrorKind::parse, "not a mixforge snapshot (format '" + format + "')");
    require(format == snapshot_version, ErrorKind::version,
            "snapshot version '" + format + "' is not supported; expected '" + std::string(snapshot_version) + "'");
    try {
        ModelConfig cfg = model_config_from_json(j.at("config"));
        require(j.at("fingerprint").get<std::string>() == config_fingerprint(cfg), ErrorKind::parse,
                "config fingerprint does not match the stored config");
        const auto& jd = j.at("dataset");
        std::vector<Date> dates;
        for (const auto& s : jd.at("dates")) dates.push_back(Date::parse(s.get<std::string>()));
        auto channels = jd.at("channels").get<std::vector<std::string>>();
        Dataset data(std::move(dates), jsonio::to_matrix(jd.at("spend"), channels.size()),
                     jsonio::to_vector(jd.at("target")), channels);
        ScalePair scales{jsonio::to_vector(j.at("scales").at("spend")), jsonio::to_double(j.at("scales").at("target"))};
        require(scales.spend_scales.size() == data.channels(), ErrorKind::parse, "scale count does not match channels");
        std::optional<std::size_t> max_lag;
        if (!j.at("max_lag").is_null()) max_lag = j.at("max_lag").get<std::size_t>();
        auto initial = detail::decomposition_from_json(j.at("decomposition").at("initial"));
        auto baseline = detail::decomposition_from_json(j.at("decomposition").at("baseline"));
        require(initial.length() == data.length() && baseline.length() == data.length(), ErrorKind::parse,
                "decomposition length does not match the dataset");
        auto post = detail::posterior_from_json(j.at("posterior"), data.channels());
        auto ktr = detail::ktr_from_json(j.at("ktr"), channels, data.length());
        return FittedModel{std::move(data),  std::move(scales), std::move(initial), std::move(baseline),
                           std::move(post), std::move(ktr),     std::move(cfg),     max_lag};
    } catch (const json::exception& e) {
        fail(ErrorKind::parse, std::string("malformed snapshot: ") + e.what());
    }
}

inline void save_model(const FittedModel& m, const std::string& path) {
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write '" + path + "'");
    out << snapshot_string(m);
    require(static_cast<bool>(out), ErrorKind::io, "failed writing '" + path + "'");
}

inline FittedModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot read '" + path + "'");
    std::ostringstream buf;
    buf << in.rdbuf();
    return snapshot_from_string(buf.str());
}

} // namespace mixforge
