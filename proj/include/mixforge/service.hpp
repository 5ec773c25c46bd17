#pragma once

#include "mixforge/scenario.hpp"
#include "mixforge/snapshot.hpp"

#include <httplib.h>

#include <cstdlib>
#include <memory>
#include <mutex>

namespace mixforge {

/// Port from MIXFORGE_PORT, else 8080.
inline int service_port_from_env() {
    const char* v = std::getenv("MIXFORGE_PORT");
    if (!v || !*v) return 8080;
    try {
        std::size_t used = 0;
        const int port = std::stoi(v, &used);
        require(used == std::strlen(v) && port >= 0 && port <= 65535, ErrorKind::configuration,
                "MIXFORGE_PORT must be an integer in [0, 65535]");
        return port;
    } catch (const std::logic_error&) {
        fail(ErrorKind::configuration, "MIXFORGE_PORT must be an integer in [0, 65535]");
    }
}

struct ServiceOptions {
    /// Server-side ceiling on optimizer iterations.
    std::size_t max_iter_cap = 20000;
    std::size_t default_draws = 500;
};

/// Read-only HTTP facade over one fitted model, which is immutable once published.
class ScenarioService {
public:
    explicit ScenarioService(ServiceOptions options = {}) : options_(options) { routes(); }

    ScenarioService(const ScenarioService&) = delete;
    ScenarioService& operator=(const ScenarioService&) = delete;

    /// Publishes the model; requests before this answer 503. Only the first call takes effect.
    void publish(FittedModel m) {
        json summary = model_summary(m);
        json contrib = to_json(contributions(m, options_.default_draws));
        auto state = std::make_shared<const State>(State{std::move(m), std::move(summary), std::move(contrib)});
        std::lock_guard lock(state_mutex_);
        if (!state_) state_ = std::move(state);
    }

    void load(const std::string& snapshot_path) { publish(load_model(snapshot_path)); }

    bool ready() const { return static_cast<bool>(current()); }

    httplib::Server& server() { return server_; }

    /// Binds `host:port` (port 0 picks a free one) and returns the bound port, or -1.
    int bind(const std::string& host, int port) {
        if (port == 0) return server_.bind_to_any_port(host);
        return server_.bind_to_port(host, port) ? port : -1;
    }

    /// Serves until stop(); call after bind().
    bool listen_after_bind() { return server_.listen_after_bind(); }

    void stop() { server_.stop(); }

    void wait_until_running() const { server_.wait_until_ready(); }

private:
    struct State {
        FittedModel model;
        json summary;
        json contributions;
    };

    std::shared_ptr<const State> current() const {
        std::lock_guard lock(state_mutex_);
        return state_;
    }

    static void send_json(httplib::Response& res, int status, const json& body) {
        res.status = status;
        res.set_content(body.dump(), "application/json");
    }

    static void send_error(httplib::Response& res, int status, const std::string& code, const std::string& message,
                           json extra = json::object()) {
        json body = {{"code", code}, {"message", message}};
        for (auto& [k, v] : extra.items()) body[k] = v;
        send_json(res, status, body);
    }

    /// Runs `fn` against the published state, mapping failures to status codes.
    template <class Fn>
    void guarded(httplib::Response& res, Fn&& fn) {
        const auto state = current();
        if (!state) {
            send_error(res, 503, "not_ready", "the model snapshot is still loading");
            return;
        }
        try {
            fn(*state);
        } catch (const Error& e) {
            json extra = json::object();
            if (e.kind() == ErrorKind::feasibility) extra["feasibility"] = {{"message", e.what()}};
            send_error(res, e.is_input_error() ? 422 : 500, std::string(to_string(e.kind())), e.what(), extra);
        } catch (const json::exception& e) {
            send_error(res, 422, "configuration", e.what());
        } catch (const std::exception& e) {
            send_error(res, 500, "internal", e.what());
        }
    }

    static json parse_body(const httplib::Request& req) {
        try {
            return json::parse(req.body);
        } catch (const json::parse_error& e) {
            fail(ErrorKind::parse, std::string("request body is not valid JSON: ") + e.what());
        }
    }

    void routes() {
        server_.Get("/healthz", [this](const httplib::Request&, httplib::Response& res) {
            if (!ready()) {
                send_error(res, 503, "not_ready", "the model snapshot is still loading");
                return;
            }
            send_json(res, 200, {{"status", "ok"}});
        });
        server_.Get("/model/summary", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&](const State& s) { send_json(res, 200, s.summary); });
        });
        server_.Get("/contributions", [this](const httplib::Request&, httplib::Response& res) {
            guarded(res, [&](const State& s) { send_json(res, 200, s.contributions); });
        });
        server_.Post("/forecast", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&](const State& s) {
                json body = parse_body(req);
                if (body.is_object() && !body.contains("draws")) body["draws"] = options_.default_draws;
                const auto scenario = parse_scenario_request(body, s.model);
                send_json(res, 200, to_json(predict(scenario.plan, s.model, scenario.draws)));
            });
        });
        server_.Post("/optimize", [this](const httplib::Request& req, httplib::Response& res) {
            guarded(res, [&](const State& s) {
                const auto request = parse_optimize_request(parse_body(req), s.model, options_.max_iter_cap);
                json out = to_json(run_optimize(request, s.model));
                out["reference"] = jsonio::vector(request.reference);
                send_json(res, 200, out);
            });
        });
    }

    ServiceOptions options_;
    httplib::Server server_;
    mutable std::mutex state_mutex_;
    std::shared_ptr<const State> state_;
};

} // namespace mixforge
