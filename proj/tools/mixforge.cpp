// mixforge command-line driver.

#include "mixforge/evalkit.hpp"
#include "mixforge/service.hpp"
#include "mixforge/synthgen.hpp"

#include <CLI11.hpp>

#include <csignal>
#include <fstream>
#include <iostream>
#include <sstream>

using namespace mixforge;

namespace {

constexpr int exit_input = 2;
constexpr int exit_numeric = 3;

json read_json_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorKind::io, "cannot read '" + path + "'");
    try {
        return json::parse(in);
    } catch (const json::parse_error& e) {
        fail(ErrorKind::parse, "'" + path + "' is not valid JSON: " + e.what());
    }
}

void write_text(const std::string& path, const std::string& text) {
    if (path.empty() || path == "-") {
        std::cout << text;
        return;
    }
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorKind::io, "cannot write '" + path + "'");
    out << text;
    require(static_cast<bool>(out), ErrorKind::io, "failed writing '" + path + "'");
}

void write_json(const std::string& path, const json& j) { write_text(path, j.dump(2) + "\n"); }

/// Reference truth cycled to P channels.
GroundTruth truth_for(std::size_t P, std::uint64_t seed) {
    const GroundTruth ref = GroundTruth::reference(seed);
    GroundTruth gt = ref;
    gt.saturation.clear();
    gt.carryover.clear();
    gt.coefficients.clear();
    for (std::size_t p = 0; p < P; ++p) {
        gt.saturation.push_back(ref.saturation[p % 2]);
        gt.carryover.push_back(ref.carryover[p % 2]);
        gt.coefficients.push_back(ref.coefficients[p % 2]);
    }
    return gt;
}

/// Model settings shared by fit and evaluate: config file first, then flags.
struct ModelFlags {
    std::string config_path;
    std::optional<std::uint64_t> seed;
    std::optional<std::size_t> draws, warmup, chains, thin, knots;
    std::optional<int> period;
    std::vector<std::string> funnel; // name=label

    void attach(CLI::App* cmd) {
        cmd->add_option("--config", config_path, "model config JSON (strict)")->check(CLI::ExistingFile);
        cmd->add_option("--seed", seed, "seed for both layers");
        cmd->add_option("--draws", draws, "retained layer-1 draws per chain");
        cmd->add_option("--warmup", warmup, "layer-1 warmup iterations");
        cmd->add_option("--chains", chains, "layer-1 chains");
        cmd->add_option("--thin", thin, "layer-1 thinning");
        cmd->add_option("--knots", knots, "layer-2 knot count");
        cmd->add_option("--period", period, "seasonal period in steps");
        cmd->add_option("--funnel", funnel, "channel=upper|mid|lower (repeatable)");
    }

    ModelConfig resolve() const {
        ModelConfig cfg = config_path.empty() ? ModelConfig{} : model_config_from_json(read_json_file(config_path));
        if (seed) {
            cfg.layer1.seed = *seed;
            cfg.layer2.seed = *seed;
        }
        if (draws) cfg.layer1.draws = *draws;
        if (warmup) cfg.layer1.warmup = *warmup;
        if (chains) cfg.layer1.chains = *chains;
        if (thin) cfg.layer1.thin = *thin;
        if (knots) cfg.layer2.knots = *knots;
        if (period) cfg.period = *period;
        for (const auto& f : funnel) {
            const auto eq = f.find('=');
            require(eq != std::string::npos && eq > 0, ErrorKind::configuration,
                    "--funnel expects channel=label, got '" + f + "'");
            cfg.funnel[f.substr(0, eq)] = funnel_from_string(f.substr(eq + 1));
        }
        return cfg;
    }
};

/// Default horizon: the 13 steps after the training data.
std::pair<Date, Date> horizon_or_default(const FittedModel& m, const std::string& start, const std::string& end) {
    const std::int64_t step = cadence_days(m.data.cadence());
    const Date s = start.empty() ? m.data.dates().back() + step : Date::parse(start);
    const Date e = end.empty() ? s + 12 * step : Date::parse(end);
    return {s, e};
}

std::string contribution_table(const ContributionReport& r) {
    std::ostringstream out;
    const auto shares = r.total_shares();
    out << std::left << std::setw(16) << "channel" << std::right << std::setw(16) << "total" << std::setw(10)
        << "share" << '\n';
    double base = 0.0;
    for (double v : r.baseline) base += v;
    for (std::size_t p = 0; p < r.channels.size(); ++p) {
        double total = 0.0;
        for (std::size_t t = 0; t < r.length(); ++t) total += r.mean(t, p);
        out << std::left << std::setw(16) << r.channels[p] << std::right << std::setw(16) << std::fixed
            << std::setprecision(2) << total << std::setw(10) << std::setprecision(4) << shares[p] << '\n';
    }
    double share_sum = 0.0;
    for (double s : shares) share_sum += s;
    out << std::left << std::setw(16) << "baseline" << std::right << std::setw(16) << std::fixed
        << std::setprecision(2) << base << std::setw(10) << std::setprecision(4) << 1.0 - share_sum << '\n';
    return out.str();
}

ServiceOptions service_options;
ScenarioService* running_service = nullptr;

extern "C" void on_signal(int) {
    if (running_service) running_service->stop();
}

} // namespace

int main(int argc, char** argv) {
    CLI::App app{"mixforge: Bayesian marketing-mix modelling"};
    app.require_subcommand(1);

    // generate
    auto* gen = app.add_subcommand("generate", "write a synthetic dataset and its ground truth");
    std::size_t weeks = 130, channels = 2;
    std::uint64_t gen_seed = 7;
    std::optional<double> noise;
    std::string gen_out = "data.csv", truth_out = "truth.json";
    gen->add_option("--weeks", weeks, "series length in weeks");
    gen->add_option("--channels", channels, "number of channels");
    gen->add_option("--seed", gen_seed, "generator seed");
    gen->add_option("--noise", noise, "noise sd (default 5% of the noiseless target sd; 0 for none)");
    gen->add_option("--out", gen_out, "dataset CSV path");
    gen->add_option("--truth", truth_out, "ground-truth JSON path");

    // fit
    auto* fit = app.add_subcommand("fit", "fit the stacked model and write a snapshot");
    ModelFlags fit_flags;
    std::string fit_data, fit_out = "model.json";
    fit->add_option("--data", fit_data, "dataset CSV")->required();
    fit->add_option("--out", fit_out, "snapshot path");
    fit_flags.attach(fit);

    // evaluate
    auto* eval = app.add_subcommand("evaluate", "holdout or sliding-window evaluation");
    ModelFlags eval_flags;
    std::string eval_data, eval_out;
    std::size_t holdout = 30, window = 0, horizon = 0, stride = 0, eval_draws = 500;
    bool cv = false;
    eval->add_option("--data", eval_data, "dataset CSV")->required();
    eval->add_option("--holdout", holdout, "test length of the single holdout split");
    eval->add_flag("--cv", cv, "sliding-window cross-validation instead of one holdout");
    eval->add_option("--window", window, "cv training window");
    eval->add_option("--horizon", horizon, "cv test horizon");
    eval->add_option("--stride", stride, "cv stride");
    eval->add_option("--predict-draws", eval_draws, "posterior draws per forecast");
    eval->add_option("--out", eval_out, "report JSON path");
    eval_flags.attach(eval);

    // contrib
    auto* contrib = app.add_subcommand("contrib", "channel contributions over the training data");
    std::string contrib_model, contrib_out = "contributions.csv", contrib_json;
    std::size_t contrib_draws = 500;
    contrib->add_option("--model", contrib_model, "snapshot path")->required();
    contrib->add_option("--out", contrib_out, "contribution CSV path");
    contrib->add_option("--json", contrib_json, "full report JSON path");
    contrib->add_option("--draws", contrib_draws, "posterior draws");

    // forecast
    auto* fc = app.add_subcommand("forecast", "predict a budget scenario");
    std::string fc_model, fc_request, fc_out, fc_start, fc_end;
    std::optional<double> fc_total;
    std::vector<std::string> fc_budgets;
    std::size_t fc_draws = 500;
    fc->add_option("--model", fc_model, "snapshot path")->required();
    fc->add_option("--request", fc_request, "scenario request JSON");
    fc->add_option("--start", fc_start, "horizon start (default: step after training)");
    fc->add_option("--end", fc_end, "horizon end, inclusive (default: start + 12 steps)");
    fc->add_option("--total", fc_total, "total budget split by historical shares");
    fc->add_option("--budget", fc_budgets, "channel=total (repeatable)");
    fc->add_option("--draws", fc_draws, "posterior draws");
    fc->add_option("--out", fc_out, "scenario JSON path (default stdout)");

    // optimize
    auto* opt = app.add_subcommand("optimize", "allocate a budget across channels");
    std::string opt_model, opt_request, opt_out, opt_start, opt_end, opt_method, opt_mode;
    std::optional<double> opt_total, opt_deviation, opt_step;
    std::optional<std::size_t> opt_max_iter;
    opt->add_option("--model", opt_model, "snapshot path")->required();
    opt->add_option("--request", opt_request, "optimize request JSON");
    opt->add_option("--total", opt_total, "total budget");
    opt->add_option("--deviation", opt_deviation, "max fractional deviation from the reference plan per channel");
    opt->add_option("--start", opt_start, "horizon start (default: step after training)");
    opt->add_option("--end", opt_end, "horizon end, inclusive (default: start + 12 steps)");
    opt->add_option("--method", opt_method, "sqp or greedy");
    opt->add_option("--mode", opt_mode, "aggregate or full");
    opt->add_option("--step", opt_step, "greedy budget quantum");
    opt->add_option("--max-iter", opt_max_iter, "iteration limit");
    opt->add_option("--out", opt_out, "result JSON path (default stdout)");

    // serve
    auto* serve = app.add_subcommand("serve", "start the scenario service");
    std::string serve_model, serve_host = "127.0.0.1";
    std::optional<int> serve_port;
    serve->add_option("--model", serve_model, "snapshot path")->required();
    serve->add_option("--host", serve_host, "bind address");
    serve->add_option("--port", serve_port, "port (default MIXFORGE_PORT or 8080)");
    serve->add_option("--max-iter-cap", service_options.max_iter_cap, "server-side optimizer iteration cap");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : exit_input;
    }

    try {
        if (*gen) {
            const GroundTruth gt = [&] {
                GroundTruth g = truth_for(channels, gen_seed);
                g.noise_scale = noise;
                return g;
            }();
            const auto data = generate(gt, weeks, channels);
            save_dataset(data.dataset, gen_out);
            const auto shares = data.components.contribution_shares(data.dataset.target());
            json chans = json::array();
            for (std::size_t p = 0; p < channels; ++p) {
                chans.push_back({{"name", data.dataset.channel_names()[p]},
                                 {"saturation", gt.saturation[p]},
                                 {"carryover", gt.carryover[p]},
                                 {"coefficient", gt.coefficients[p]},
                                 {"contribution_share", shares[p]}});
            }
            write_json(truth_out, {{"seed", gen_seed},
                                   {"weeks", weeks},
                                   {"start", gt.start.iso()},
                                   {"target_scale", gt.target_scale},
                                   {"noise_scale", data.components.noise_scale},
                                   {"seasonal", {{"amplitude", gt.seasonal.amplitude}, {"period", gt.seasonal.period}}},
                                   {"trend",
                                    {{"level", gt.trend.level},
                                     {"slope", gt.trend.slope},
                                     {"bend_height", gt.trend.bend_height},
                                     {"bend_center", gt.trend.bend_center},
                                     {"bend_width", gt.trend.bend_width}}},
                                   {"channels", chans}});
            std::cout << "wrote " << gen_out << " and " << truth_out << '\n';
        } else if (*fit) {
            const ModelConfig cfg = fit_flags.resolve();
            const FittedModel m = fit_model(load_dataset(fit_data), cfg);
            save_model(m, fit_out);
            for (const auto& w : m.posterior.warnings) std::cerr << "warning: " << w << '\n';
            std::cout << model_summary(m).dump(2) << '\n';
        } else if (*eval) {
            const ModelConfig cfg = eval_flags.resolve();
            const Dataset d = load_dataset(eval_data);
            const auto forecaster = model_forecaster(cfg, eval_draws);
            MetricReport report;
            if (cv) {
                require(window > 0 && horizon > 0 && stride > 0, ErrorKind::configuration,
                        "--cv needs --window, --horizon and --stride");
                report = sliding_window_cv(d, forecaster, window, horizon, stride);
            } else {
                report = holdout_evaluation(d, forecaster, holdout);
            }
            std::cout << metric_table(report);
            for (const auto& w : report.warnings) std::cerr << "warning: " << w << '\n';
            if (!eval_out.empty()) write_json(eval_out, to_json(report));
        } else if (*contrib) {
            const FittedModel m = load_model(contrib_model);
            const auto report = contributions(m, contrib_draws);
            write_text(contrib_out, contributions_csv(report));
            if (!contrib_json.empty()) write_json(contrib_json, to_json(report));
            std::cout << contribution_table(report);
        } else if (*fc) {
            const FittedModel m = load_model(fc_model);
            json req = fc_request.empty() ? json::object() : read_json_file(fc_request);
            const auto [s, e] = horizon_or_default(m, fc_start, fc_end);
            if (!fc_request.empty()) {
                require(fc_start.empty() && fc_end.empty() && !fc_total && fc_budgets.empty(), ErrorKind::configuration,
                        "--request cannot be combined with --start/--end/--total/--budget");
            } else {
                req["start"] = s.iso();
                req["end"] = e.iso();
                if (fc_total) req["total"] = *fc_total;
                if (!fc_budgets.empty()) {
                    json b = json::object();
                    for (const auto& kv : fc_budgets) {
                        const auto eq = kv.find('=');
                        require(eq != std::string::npos, ErrorKind::configuration, "--budget expects channel=total");
                        b[kv.substr(0, eq)] = csv::parse_number(kv.substr(eq + 1), "--budget");
                    }
                    req["budgets"] = b;
                }
                if (!req.contains("total") && !req.contains("budgets")) {
                    // the training-period average spend per step, continued
                    double total = 0.0;
                    for (double v : m.data.spend().data()) total += v;
                    req["total"] = total / static_cast<double>(m.length()) *
                                   static_cast<double>(horizon_length(s, e, m.data.cadence()));
                }
            }
            if (!req.contains("draws")) req["draws"] = fc_draws;
            const auto scenario = parse_scenario_request(req, m);
            const auto result = predict(scenario.plan, m, scenario.draws);
            for (const auto& w : result.warnings) std::cerr << "warning: " << w << '\n';
            write_json(fc_out, to_json(result));
        } else if (*opt) {
            const FittedModel m = load_model(opt_model);
            json req = opt_request.empty() ? json::object() : read_json_file(opt_request);
            if (!opt_request.empty() && (opt_total || opt_deviation || !opt_start.empty() || !opt_end.empty())) {
                fail(ErrorKind::configuration, "--request cannot be combined with --total/--deviation/--start/--end");
            }
            if (opt_request.empty()) {
                require(opt_total.has_value(), ErrorKind::configuration, "--total is required without --request");
                const auto [s, e] = horizon_or_default(m, opt_start, opt_end);
                req["start"] = s.iso();
                req["end"] = e.iso();
                req["total"] = *opt_total;
                if (opt_deviation) req["deviation"] = *opt_deviation;
            }
            if (!opt_method.empty()) req["method"] = opt_method;
            if (!opt_mode.empty()) req["mode"] = opt_mode;
            if (opt_step) req["step"] = *opt_step;
            if (opt_max_iter) req["max_iter"] = *opt_max_iter;
            const auto request = parse_optimize_request(req, m, std::numeric_limits<std::size_t>::max());
            json out = to_json(run_optimize(request, m));
            out["reference"] = jsonio::vector(request.reference);
            write_json(opt_out, out);
        } else if (*serve) {
            ScenarioService service(service_options);
            const int port = serve_port ? *serve_port : service_port_from_env();
            const int bound = service.bind(serve_host, port);
            require(bound >= 0, ErrorKind::io, "cannot bind " + serve_host + ":" + std::to_string(port));
            // the listener answers 503 until the snapshot is published
            std::jthread loader([&] {
                try {
                    service.load(serve_model);
                    std::cerr << "model loaded from " << serve_model << '\n';
                } catch (const std::exception& e) {
                    std::cerr << "error: " << e.what() << '\n';
                    service.stop();
                }
            });
            running_service = &service;
            std::signal(SIGINT, on_signal);
            std::signal(SIGTERM, on_signal);
            std::cerr << "listening on " << serve_host << ':' << bound << '\n';
            service.listen_after_bind();
            running_service = nullptr;
            if (!service.ready()) return exit_input;
        }
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << '\n';
        return e.is_input_error() ? exit_input : exit_numeric;
    } catch (const json::exception& e) {
        std::cerr << "error: configuration error: " << e.what() << '\n';
        return exit_input;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return exit_numeric;
    }
    return 0;
}
