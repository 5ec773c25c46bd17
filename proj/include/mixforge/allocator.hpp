#pragma once

#include "mixforge/config.hpp"
#include "mixforge/forecast.hpp"

#include <algorithm>
#include <numeric>

namespace mixforge {

/// Decision variables: one total per channel spread evenly over the horizon, or one value per cell.
enum class AllocationMode { aggregate, full };
enum class AllocationMethod { greedy, sqp };

inline std::string_view to_string(AllocationMode m) { return m == AllocationMode::aggregate ? "aggregate" : "full"; }
inline std::string_view to_string(AllocationMethod m) { return m == AllocationMethod::greedy ? "greedy" : "sqp"; }

inline AllocationMethod allocation_method_from_string(std::string_view s) {
    if (s == "greedy") return AllocationMethod::greedy;
    if (s == "sqp") return AllocationMethod::sqp;
    fail(ErrorKind::parameter, "unknown allocation method '" + std::string(s) + "' (expected greedy or sqp)");
}

inline AllocationMode allocation_mode_from_string(std::string_view s) {
    if (s == "aggregate") return AllocationMode::aggregate;
    if (s == "full") return AllocationMode::full;
    fail(ErrorKind::parameter, "unknown allocation mode '" + std::string(s) + "' (expected aggregate or full)");
}

/**
 * Predicted total performance over a horizon as a function of the decision
 * variables, using posterior-mean parameters (plug-in).
 *
 * Carryover is linear, so each channel's carried-over scaled spend is
 * seed + sum_i v_i r_i over that channel's variables, where the seed comes from
 * training history and r_i is the response of the carryover to one unit of v_i.
 */
class PlanObjective {
public:
    PlanObjective(const FittedModel& m, Date start, Date end, AllocationMode mode)
        : mode_(mode), start_(start), end_(end), channels_(m.data.channel_names()) {
        H_ = horizon_length(start, end, m.data.cadence());
        P_ = m.channels();
        S_ = m.scales.target_scale;
        const std::int64_t t0 = time_index(m, start);
        const auto params = m.posterior.mean();
        mu_ = params.mu;

        // mean knot values give the mean coefficient path (the kernel is linear)
        Matrix knots(m.ktr.grid.count(), P_);
        for (const auto& b : m.ktr.knot_draws) {
            for (std::size_t i = 0; i < knots.data().size(); ++i) knots.data()[i] += b.data()[i];
        }
        for (auto& v : knots.data()) v /= static_cast<double>(m.ktr.size());
        beta_ = Matrix(H_, P_);
        constant_ = 0.0;
        for (std::size_t h = 0; h < H_; ++h) {
            const auto t = t0 + static_cast<std::int64_t>(h);
            const auto row = kernel_row(static_cast<double>(t), m.ktr.grid);
            for (std::size_t p = 0; p < P_; ++p) {
                double b = 0.0;
                for (std::size_t j = 0; j < row.size(); ++j) b += row[j] * knots(j, p);
                beta_(h, p) = b;
            }
            constant_ += baseline_value(m.baseline, t) + params.intercept * S_;
        }

        // seeds from history and unit responses of each cell
        const std::size_t hist = t0 > 0 ? static_cast<std::size_t>(t0) : 0;
        seed_ = Matrix(H_, P_);
        cell_response_.assign(P_, Matrix(H_, H_));
        for (std::size_t p = 0; p < P_; ++p) {
            std::vector<double> series(hist + H_, 0.0);
            for (std::size_t t = 0; t < hist && t < m.length(); ++t) series[t] = m.data.spend()(t, p) / m.scales.spend_scales[p];
            const auto seeded = carryover(series, params.alpha[p], m.max_lag);
            for (std::size_t h = 0; h < H_; ++h) seed_(h, p) = seeded[hist + h];
            // carryover is linear: feed unit impulses at each horizon cell
            for (std::size_t s = 0; s < H_; ++s) {
                std::vector<double> impulse(hist + H_, 0.0);
                impulse[hist + s] = 1.0 / m.scales.spend_scales[p];
                const auto resp = carryover(impulse, params.alpha[p], m.max_lag);
                for (std::size_t h = s; h < H_; ++h) cell_response_[p](h, s) = resp[hist + h];
            }
        }
    }

    std::size_t horizon() const noexcept { return H_; }
    std::size_t channels() const noexcept { return P_; }
    AllocationMode mode() const noexcept { return mode_; }
    std::size_t variables() const noexcept { return mode_ == AllocationMode::aggregate ? P_ : H_ * P_; }
    std::size_t channel_of(std::size_t i) const noexcept { return mode_ == AllocationMode::aggregate ? i : i % P_; }

    /// Carryover response (length H) of variable i's channel to one unit of variable i.
    std::vector<double> response(std::size_t i) const {
        const std::size_t p = channel_of(i);
        std::vector<double> r(H_, 0.0);
        if (mode_ == AllocationMode::full) {
            const std::size_t s = i / P_;
            for (std::size_t h = s; h < H_; ++h) r[h] = cell_response_[p](h, s);
        } else {
            for (std::size_t s = 0; s < H_; ++s) {
                for (std::size_t h = s; h < H_; ++h) r[h] += cell_response_[p](h, s) / static_cast<double>(H_);
            }
        }
        return r;
    }

    /// Carried-over scaled spend, H x P.
    Matrix carried(std::span<const double> v) const {
        Matrix c = seed_;
        for (std::size_t i = 0; i < variables(); ++i) {
            if (v[i] == 0.0) continue;
            const auto r = response(i);
            const std::size_t p = channel_of(i);
            for (std::size_t h = 0; h < H_; ++h) c(h, p) += v[i] * r[h];
        }
        return c;
    }

    double value_from_carried(const Matrix& c) const {
        double total = constant_;
        for (std::size_t h = 0; h < H_; ++h) {
            for (std::size_t p = 0; p < P_; ++p) total += beta_(h, p) * S_ * reach(c(h, p), mu_[p]);
        }
        return total;
    }

    double value(std::span<const double> v) const { return value_from_carried(carried(v)); }

    std::vector<double> gradient(std::span<const double> v) const {
        const Matrix c = carried(v);
        std::vector<double> g(variables(), 0.0);
        for (std::size_t i = 0; i < variables(); ++i) {
            const std::size_t p = channel_of(i);
            const auto r = response(i);
            for (std::size_t h = 0; h < H_; ++h) {
                if (r[h] != 0.0) g[i] += beta_(h, p) * S_ * reach_derivative(c(h, p), mu_[p]) * r[h];
            }
        }
        return g;
    }

    /// Change in value from adding `delta` to variable i, given the current carried spend.
    double gain(const Matrix& c, std::size_t i, double delta) const {
        const std::size_t p = channel_of(i);
        const auto r = response(i);
        double g = 0.0;
        for (std::size_t h = 0; h < H_; ++h) {
            if (r[h] == 0.0) continue;
            g += beta_(h, p) * S_ * (reach(c(h, p) + delta * r[h], mu_[p]) - reach(c(h, p), mu_[p]));
        }
        return g;
    }

    BudgetPlan plan(std::span<const double> v) const {
        BudgetPlan out{start_, end_, Matrix(H_, P_), channels_};
        for (std::size_t i = 0; i < variables(); ++i) {
            if (mode_ == AllocationMode::full) {
                out.allocation(i / P_, i % P_) = v[i];
            } else {
                for (std::size_t h = 0; h < H_; ++h) out.allocation(h, i) = v[i] / static_cast<double>(H_);
            }
        }
        return out;
    }

    /// Decision variables of a plan (per-channel totals in aggregate mode).
    std::vector<double> variables_of(const BudgetPlan& plan) const {
        require(plan.horizon() == H_ && plan.allocation.cols() == P_, ErrorKind::dimension,
                "plan shape does not match the horizon");
        if (mode_ == AllocationMode::full) return plan.allocation.data();
        return plan.channel_totals();
    }

    const Matrix& coefficients() const noexcept { return beta_; }

private:
    AllocationMode mode_;
    Date start_;
    Date end_;
    std::vector<std::string> channels_;
    std::size_t H_ = 0;
    std::size_t P_ = 0;
    double S_ = 1.0;
    std::vector<double> mu_;
    Matrix beta_;
    Matrix seed_;
    std::vector<Matrix> cell_response_;
    double constant_ = 0.0;
};

struct AllocationConstraints {
    double total = 0.0;
    std::vector<double> lower; // one per decision variable
    std::vector<double> upper;
    /// Greedy budget quantum.
    double step = 0.0;
    std::size_t max_iter = 5000;
    double tolerance = 1e-12;

    std::size_t size() const noexcept { return lower.size(); }

    /// Rejects constraint sets no plan can satisfy.
    void check_feasible() const {
        require(std::isfinite(total) && total >= 0.0, ErrorKind::feasibility, "total budget must be finite and >= 0");
        require(lower.size() == upper.size(), ErrorKind::feasibility, "lower and upper bounds differ in length");
        double lo = 0.0, hi = 0.0;
        for (std::size_t i = 0; i < lower.size(); ++i) {
            require(lower[i] >= 0.0 && lower[i] <= upper[i], ErrorKind::feasibility,
                    "bound " + std::to_string(i) + " has lower > upper or a negative lower bound");
            lo += lower[i];
            hi += upper[i];
        }
        require(lo <= total * (1.0 + 1e-12), ErrorKind::feasibility,
                "infeasible: sum of lower bounds " + std::to_string(lo) + " exceeds the budget " + std::to_string(total));
        require(hi >= total * (1.0 - 1e-12), ErrorKind::feasibility,
                "infeasible: sum of upper bounds " + std::to_string(hi) + " is below the budget " + std::to_string(total));
    }
};

/// Bounds within +-deviation of a reference value per variable.
inline AllocationConstraints deviation_constraints(double total, std::span<const double> reference, double deviation) {
    require(deviation >= 0.0 && deviation <= 1.0, ErrorKind::parameter, "deviation must lie in [0, 1]");
    AllocationConstraints c;
    c.total = total;
    for (double r : reference) {
        c.lower.push_back(r * (1.0 - deviation));
        c.upper.push_back(r * (1.0 + deviation));
    }
    return c;
}

/// Bounds [0, total] per variable.
inline AllocationConstraints budget_only_constraints(double total, std::size_t variables) {
    AllocationConstraints c;
    c.total = total;
    c.lower.assign(variables, 0.0);
    c.upper.assign(variables, total);
    return c;
}

struct FeasibilityReport {
    double total = 0.0;
    double allocated = 0.0;
    double budget_gap = 0.0;
    double max_lower_violation = 0.0;
    double max_upper_violation = 0.0;
    bool feasible = true;
};

struct AllocationResult {
    BudgetPlan plan;
    std::vector<double> variables;
    double objective = 0.0;
    double initial_objective = 0.0;
    AllocationMethod method = AllocationMethod::sqp;
    AllocationMode mode = AllocationMode::aggregate;
    std::size_t iterations = 0;
    bool converged = false;
    std::vector<double> trace;
    AllocationConstraints constraints;
    FeasibilityReport feasibility;
};

inline FeasibilityReport feasibility_of(std::span<const double> v, const AllocationConstraints& c) {
    FeasibilityReport r;
    r.total = c.total;
    r.allocated = std::accumulate(v.begin(), v.end(), 0.0);
    r.budget_gap = std::abs(r.allocated - c.total);
    for (std::size_t i = 0; i < v.size(); ++i) {
        r.max_lower_violation = std::max(r.max_lower_violation, c.lower[i] - v[i]);
        r.max_upper_violation = std::max(r.max_upper_violation, v[i] - c.upper[i]);
    }
    r.feasible = r.budget_gap <= 1e-6 * std::max(c.total, 1.0) && r.max_lower_violation <= 0.0 &&
                 r.max_upper_violation <= 0.0;
    return r;
}

/**
 * Euclidean projection of z onto {sum v = total, lower <= v <= upper}: v = clip(z - lambda),
 * with lambda found by bisection, then the rounding remainder spread over interior entries.
 */
inline std::vector<double> project_budget(std::span<const double> z, const AllocationConstraints& c) {
    const std::size_t n = z.size();
    auto clipped = [&](double lambda) {
        std::vector<double> v(n);
        for (std::size_t i = 0; i < n; ++i) v[i] = std::clamp(z[i] - lambda, c.lower[i], c.upper[i]);
        return v;
    };
    auto sum = [](const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); };
    double lo = std::numeric_limits<double>::infinity(), hi = -std::numeric_limits<double>::infinity();
    for (std::size_t i = 0; i < n; ++i) {
        lo = std::min(lo, z[i] - c.upper[i]); // every entry at its upper bound
        hi = std::max(hi, z[i] - c.lower[i]); // every entry at its lower bound
    }
    for (int it = 0; it < 200 && lo < hi; ++it) {
        const double mid = 0.5 * (lo + hi);
        if (mid == lo || mid == hi) break;
        if (sum(clipped(mid)) > c.total) lo = mid;
        else hi = mid;
    }
    std::vector<double> v = clipped(0.5 * (lo + hi));
    for (int it = 0; it < 20; ++it) {
        const double rem = c.total - sum(v);
        if (std::abs(rem) <= 1e-13 * std::max(c.total, 1.0)) break;
        std::vector<std::size_t> room;
        for (std::size_t i = 0; i < n; ++i) {
            if ((rem > 0.0 && v[i] < c.upper[i]) || (rem < 0.0 && v[i] > c.lower[i])) room.push_back(i);
        }
        require(!room.empty(), ErrorKind::feasibility, "projection failed: no variable can absorb the budget remainder");
        for (auto i : room) v[i] = std::clamp(v[i] + rem / static_cast<double>(room.size()), c.lower[i], c.upper[i]);
    }
    return v;
}

namespace detail {

inline AllocationResult finish(const PlanObjective& obj, std::vector<double> v, const AllocationConstraints& c,
                               AllocationMethod method) {
    AllocationResult r;
    r.plan = obj.plan(v);
    r.objective = obj.value(v);
    r.method = method;
    r.mode = obj.mode();
    r.constraints = c;
    r.feasibility = feasibility_of(v, c);
    r.variables = std::move(v);
    return r;
}

} // namespace detail

/**
 * Step-greedy allocation: start at the lower bounds and repeatedly give one
 * budget quantum to the variable with the largest gain until the budget is
 * spent. Ties go to the lowest (channel, date) index.
 */
inline AllocationResult optimize_greedy(const PlanObjective& obj, const AllocationConstraints& c) {
    c.check_feasible();
    require(c.size() == obj.variables(), ErrorKind::dimension, "one bound per decision variable is required");
    require(c.step > 0.0, ErrorKind::parameter, "greedy step must be positive");
    std::vector<double> v = c.lower;
    Matrix carried = obj.carried(v);
    double value = obj.value_from_carried(carried);
    const double initial = value;
    std::vector<double> trace{value};
    double remaining = c.total - std::accumulate(v.begin(), v.end(), 0.0);
    // visiting order: channel-major, then date
    std::vector<std::size_t> order(obj.variables());
    std::iota(order.begin(), order.end(), 0);
    if (obj.mode() == AllocationMode::full) {
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
            return std::pair(obj.channel_of(a), a) < std::pair(obj.channel_of(b), b);
        });
    }
    std::size_t iterations = 0;
    const double eps = 1e-12 * std::max(c.total, 1.0);
    while (remaining > eps) {
        const double quantum = std::min(c.step, remaining);
        std::size_t best = obj.variables();
        double best_gain = -1.0, best_amount = 0.0;
        for (std::size_t i : order) {
            const double amount = std::min(quantum, c.upper[i] - v[i]);
            if (amount <= 0.0) continue;
            const double g = obj.gain(carried, i, amount);
            if (g > best_gain) {
                best_gain = g;
                best = i;
                best_amount = amount;
            }
        }
        require(best < obj.variables(), ErrorKind::feasibility, "no variable has room for the remaining budget");
        v[best] += best_amount;
        remaining -= best_amount;
        const auto r = obj.response(best);
        const std::size_t p = obj.channel_of(best);
        for (std::size_t h = 0; h < obj.horizon(); ++h) carried(h, p) += best_amount * r[h];
        value = obj.value_from_carried(carried);
        trace.push_back(value);
        ++iterations;
    }
    auto out = detail::finish(obj, std::move(v), c, AllocationMethod::greedy);
    out.initial_objective = initial;
    out.iterations = iterations;
    out.converged = true;
    out.trace = std::move(trace);
    return out;
}

/**
 * Projected gradient ascent on the budget simplex with box bounds, starting
 * from `initial` (projected onto the feasible set). Steps grow after success
 * and halve after failure; only improving steps are accepted.
 */
inline AllocationResult optimize_sqp(const PlanObjective& obj, const AllocationConstraints& c,
                                     std::span<const double> initial) {
    c.check_feasible();
    require(c.size() == obj.variables() && initial.size() == obj.variables(), ErrorKind::dimension,
            "one bound and one starting value per decision variable are required");
    std::vector<double> x = project_budget(initial, c);
    double f = obj.value(x);
    const double f0 = f;
    std::vector<double> trace{f};
    auto g = obj.gradient(x);
    double gnorm = 0.0;
    for (double v : g) gnorm += v * v;
    gnorm = std::sqrt(gnorm);
    double eta = gnorm > 0.0 ? 0.1 * std::max(c.total, 1.0) / gnorm : 1.0;
    bool converged = false;
    std::size_t it = 0;
    for (; it < c.max_iter; ++it) {
        bool accepted = false;
        std::vector<double> y;
        double fy = f;
        for (int ls = 0; ls < 60; ++ls) {
            std::vector<double> z(x.size());
            for (std::size_t i = 0; i < x.size(); ++i) z[i] = x[i] + eta * g[i];
            y = project_budget(z, c);
            fy = obj.value(y);
            if (fy > f) {
                accepted = true;
                break;
            }
            eta *= 0.5;
        }
        if (!accepted) {
            converged = true; // no improving projected step at any tried length
            break;
        }
        const double improvement = fy - f;
        x = std::move(y);
        f = fy;
        trace.push_back(f);
        g = obj.gradient(x);
        eta *= 2.0;
        if (improvement <= c.tolerance * std::max(1.0, std::abs(f))) {
            converged = true;
            ++it;
            break;
        }
    }
    auto out = detail::finish(obj, std::move(x), c, AllocationMethod::sqp);
    out.initial_objective = f0;
    out.iterations = it;
    out.converged = converged;
    out.trace = std::move(trace);
    return out;
}

struct MarginalPoint {
    double budget = 0.0;
    double marginal = 0.0;
};

/// d(objective)/d(budget) of one channel's horizon total, spread evenly, at each budget level.
inline std::vector<MarginalPoint> marginal_return_curve(const FittedModel& m, std::size_t channel, Date start, Date end,
                                                        std::span<const double> budgets) {
    m.check_channel(channel);
    const PlanObjective obj(m, start, end, AllocationMode::aggregate);
    std::vector<MarginalPoint> out;
    std::vector<double> v(m.channels(), 0.0);
    for (double b : budgets) {
        require(std::isfinite(b) && b >= 0.0, ErrorKind::parameter, "budgets must be finite and >= 0");
        v[channel] = b;
        out.push_back({b, obj.gradient(v)[channel]});
    }
    return out;
}

inline json to_json(const AllocationResult& r) {
    json j;
    j["method"] = std::string(to_string(r.method));
    j["mode"] = std::string(to_string(r.mode));
    j["plan"] = to_json(r.plan);
    j["channel_totals"] = jsonio::vector(r.plan.channel_totals());
    j["objective"] = r.objective;
    j["initial_objective"] = r.initial_objective;
    j["iterations"] = r.iterations;
    j["converged"] = r.converged;
    j["lower"] = jsonio::vector(r.constraints.lower);
    j["upper"] = jsonio::vector(r.constraints.upper);
    j["feasibility"] = {{"total", r.feasibility.total},
                        {"allocated", r.feasibility.allocated},
                        {"budget_gap", r.feasibility.budget_gap},
                        {"max_lower_violation", r.feasibility.max_lower_violation},
                        {"max_upper_violation", r.feasibility.max_upper_violation},
                        {"feasible", r.feasibility.feasible}};
    return j;
}

} // namespace mixforge
