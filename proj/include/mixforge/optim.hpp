#pragma once

#include <cmath>
#include <cstddef>
#include <deque>
#include <functional>
#include <limits>
#include <vector>

namespace mixforge::optim {

struct MaximizeResult {
    std::vector<double> x;
    double value = -std::numeric_limits<double>::infinity();
    std::size_t iterations = 0;
    bool converged = false;
    /// Objective at every accepted iterate, starting with the initial point.
    std::vector<double> trace;
};

struct LbfgsOptions {
    std::size_t max_iter = 1000;
    std::size_t memory = 8;
    /// Stop when the relative objective improvement falls below this.
    double tolerance = 1e-10;
    double gradient_tolerance = 1e-8;
};

/**
 * Limited-memory BFGS ascent with Armijo backtracking. Only iterates that do
 * not decrease the objective are accepted, so the trace is non-decreasing.
 * `fg` returns the objective and writes the gradient.
 */
inline MaximizeResult lbfgs_maximize(const std::function<double(const std::vector<double>&, std::vector<double>&)>& fg,
                                     std::vector<double> x, const LbfgsOptions& opt = {}) {
    const std::size_t n = x.size();
    std::vector<double> g(n);
    double f = fg(x, g);
    MaximizeResult res;
    res.trace.push_back(f);
    if (!std::isfinite(f)) {
        res.x = std::move(x);
        res.value = f;
        return res;
    }
    std::deque<std::vector<double>> s_hist, y_hist;
    std::deque<double> rho_hist;
    auto dot = [](const std::vector<double>& a, const std::vector<double>& b) {
        double s = 0.0;
        for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
        return s;
    };

    for (std::size_t it = 0; it < opt.max_iter; ++it) {
        res.iterations = it + 1;
        const double gnorm = std::sqrt(dot(g, g));
        if (gnorm <= opt.gradient_tolerance * std::max(1.0, std::abs(f))) {
            res.converged = true;
            break;
        }
        // two-loop recursion on the negated problem; d is an ascent direction
        std::vector<double> q = g;
        std::vector<double> alpha(s_hist.size());
        for (std::size_t k = s_hist.size(); k-- > 0;) {
            alpha[k] = rho_hist[k] * dot(s_hist[k], q);
            for (std::size_t i = 0; i < n; ++i) q[i] -= alpha[k] * y_hist[k][i];
        }
        double gamma = 1.0;
        if (!s_hist.empty()) {
            gamma = dot(s_hist.back(), y_hist.back()) / dot(y_hist.back(), y_hist.back());
        } else {
            gamma = 1.0 / std::max(gnorm, 1e-12);
        }
        for (auto& v : q) v *= gamma;
        for (std::size_t k = 0; k < s_hist.size(); ++k) {
            const double beta = rho_hist[k] * dot(y_hist[k], q);
            for (std::size_t i = 0; i < n; ++i) q[i] += s_hist[k][i] * (alpha[k] - beta);
        }
        std::vector<double> d = q;
        double slope = dot(g, d);
        if (!(slope > 0.0)) {
            d = g;
            for (auto& v : d) v /= std::max(gnorm, 1e-12);
            slope = dot(g, d);
            s_hist.clear();
            y_hist.clear();
            rho_hist.clear();
        }

        double step = 1.0;
        bool accepted = false;
        std::vector<double> x_new(n), g_new(n);
        double f_new = f;
        for (int ls = 0; ls < 60; ++ls) {
            for (std::size_t i = 0; i < n; ++i) x_new[i] = x[i] + step * d[i];
            f_new = fg(x_new, g_new);
            if (std::isfinite(f_new) && f_new >= f + 1e-4 * step * slope) {
                accepted = true;
                break;
            }
            step *= 0.5;
        }
        if (!accepted) {
            // no ascent possible along any tried step: at a (numerical) stationary point
            res.converged = true;
            break;
        }
        std::vector<double> s(n), yv(n);
        for (std::size_t i = 0; i < n; ++i) {
            s[i] = x_new[i] - x[i];
            yv[i] = g[i] - g_new[i]; // gradient change of the negated objective
        }
        const double sy = dot(s, yv);
        if (sy > 1e-12) {
            s_hist.push_back(std::move(s));
            y_hist.push_back(std::move(yv));
            rho_hist.push_back(1.0 / sy);
            if (s_hist.size() > opt.memory) {
                s_hist.pop_front();
                y_hist.pop_front();
                rho_hist.pop_front();
            }
        }
        const double improvement = f_new - f;
        x = x_new;
        g = g_new;
        f = f_new;
        res.trace.push_back(f);
        if (improvement <= opt.tolerance * std::max(1.0, std::abs(f))) {
            res.converged = true;
            break;
        }
    }
    res.x = std::move(x);
    res.value = f;
    return res;
}

} // namespace mixforge::optim
