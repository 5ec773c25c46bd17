#include "fixtures.hpp"

#include "mixforge/allocator.hpp"

#include <gtest/gtest.h>

using namespace mixforge;
using mixforge::fixtures::synthetic_model;

namespace {

struct Horizon {
    Date start;
    Date end;
};

Horizon next_steps(const FittedModel& m, std::int64_t steps) {
    const Date last = m.data.dates().back();
    return {last + 7, last + 7 * steps};
}

double sum(const std::vector<double>& v) { return std::accumulate(v.begin(), v.end(), 0.0); }

void expect_monotone(const std::vector<double>& trace) {
    for (std::size_t i = 1; i < trace.size(); ++i) EXPECT_GE(trace[i], trace[i - 1] - 1e-9) << "at " << i;
}

} // namespace

TEST(Allocator, SymmetricChannelsSplitEvenly) {
    const auto m = synthetic_model({0.5, 0.5}, {1.0, 1.0}, {0.2, 0.2});
    const auto h = next_steps(m, 4);
    const PlanObjective obj(m, h.start, h.end, AllocationMode::aggregate);
    auto c = budget_only_constraints(8.0, 2);
    c.step = 8.0 / 1000.0;
    const auto sqp = optimize_sqp(obj, c, std::vector<double>{6.0, 2.0});
    EXPECT_NEAR(sqp.variables[0] / 8.0, 0.5, 0.01);
    const auto greedy = optimize_greedy(obj, c);
    EXPECT_NEAR(greedy.variables[0] / 8.0, 0.5, 0.01);
    EXPECT_LE(std::abs(greedy.variables[0] - greedy.variables[1]), c.step + 1e-12);
}

TEST(Allocator, ZeroEffectChannelKeepsOnlyItsLowerBound) {
    const auto m = synthetic_model({0.3, 0.3}, {1.0, 1.0}, {0.2, 0.0});
    const auto h = next_steps(m, 4);
    const PlanObjective obj(m, h.start, h.end, AllocationMode::aggregate);
    auto c = budget_only_constraints(8.0, 2);
    c.lower = {0.0, 1.5};
    c.step = 0.01;
    const auto greedy = optimize_greedy(obj, c);
    EXPECT_NEAR(greedy.variables[1], 1.5, 1e-12);
    const auto sqp = optimize_sqp(obj, c, std::vector<double>{4.0, 4.0});
    EXPECT_NEAR(sqp.variables[1], 1.5, 1e-6);
}

TEST(Allocator, BudgetEqualToLowerBoundsNeedsNoIterations) {
    const auto m = synthetic_model({0.3, 0.6}, {1.0, 2.0}, {0.2, 0.1});
    const auto h = next_steps(m, 4);
    const PlanObjective obj(m, h.start, h.end, AllocationMode::aggregate);
    auto c = budget_only_constraints(5.0, 2);
    c.lower = {2.0, 3.0};
    c.step = 0.01;
    const auto greedy = optimize_greedy(obj, c);
    EXPECT_EQ(greedy.iterations, 0u);
    EXPECT_EQ(greedy.variables, c.lower);
    const auto sqp = optimize_sqp(obj, c, std::vector<double>{2.5, 2.5});
    EXPECT_NEAR(sqp.variables[0], 2.0, 1e-9);
    EXPECT_NEAR(sqp.variables[1], 3.0, 1e-9);
}

TEST(Allocator, InfeasibleBoundsAreRejected) {
    const auto m = synthetic_model({0.3, 0.3}, {1.0, 1.0}, {0.2, 0.2});
    const auto h = next_steps(m, 4);
    const PlanObjective obj(m, h.start, h.end, AllocationMode::aggregate);
    auto c = budget_only_constraints(5.0, 2);
    c.lower = {3.0, 3.0};
    c.step = 0.1;
    try {
        optimize_greedy(obj, c);
        FAIL() << "expected a feasibility error";
    } catch (const Error& e) {
        EXPECT_EQ(e.kind(), ErrorKind::feasibility);
        EXPECT_NE(std::string(e.what()).find("6.0"), std::string::npos);
    }
    EXPECT_THROW(optimize_sqp(obj, c, std::vector<double>{2.5, 2.5}), Error);
    c.lower = {0.0, 0.0};
    c.upper = {2.0, 2.0};
    EXPECT_THROW(c.check_feasible(), Error);
}

TEST(Allocator, BudgetConservedAndDeviationBoundsRespected) {
    const auto& m = mixforge::fixtures::quick_model();
    const auto h = next_steps(m, 13);
    const double B = 1000.0;
    for (auto mode : {AllocationMode::aggregate, AllocationMode::full}) {
        const PlanObjective obj(m, h.start, h.end, mode);
        const auto reference = obj.variables_of(even_spread(B, h.start, h.end, m.data));
        auto c = deviation_constraints(B, reference, 0.2);
        c.step = B / 1000.0;
        for (const auto& r : {optimize_greedy(obj, c), optimize_sqp(obj, c, reference)}) {
            EXPECT_LE(std::abs(sum(r.variables) - B), 1e-6 * B);
            EXPECT_LE(std::abs(sum(r.plan.allocation.data()) - B), 1e-6 * B);
            for (std::size_t i = 0; i < r.variables.size(); ++i) {
                EXPECT_GE(r.variables[i], reference[i] * 0.8 - 1e-12);
                EXPECT_LE(r.variables[i], reference[i] * 1.2 + 1e-12);
            }
            EXPECT_TRUE(r.feasibility.feasible);
            EXPECT_GE(r.objective, r.initial_objective - 1e-9);
        }
    }
}

TEST(Allocator, DominantChannelHitsItsUpperBound) {
    const auto m = synthetic_model({0.3, 0.3}, {5.0, 5.0}, {1.0, 0.1});
    const auto h = next_steps(m, 4);
    const PlanObjective obj(m, h.start, h.end, AllocationMode::aggregate);
    const std::vector<double> reference{5.0, 5.0};
    auto c = deviation_constraints(10.0, reference, 0.2);
    c.step = 0.01;
    const auto sqp = optimize_sqp(obj, c, reference);
    EXPECT_NEAR(sqp.variables[0], 6.0, 1e-9);
    EXPECT_NEAR(sqp.variables[1], 4.0, 1e-9);
    const auto greedy = optimize_greedy(obj, c);
    EXPECT_NEAR(greedy.variables[0], 6.0, 1e-9);
}

TEST(Allocator, SqpAtLeastAsGoodAsGreedy) {
    const auto m = synthetic_model({0.2, 0.6, 0.4}, {1.0, 0.5, 2.0}, {0.3, 0.2, 0.25});
    const auto h = next_steps(m, 6);
    for (auto mode : {AllocationMode::aggregate, AllocationMode::full}) {
        const PlanObjective obj(m, h.start, h.end, mode);
        auto c = budget_only_constraints(12.0, obj.variables());
        c.step = 12.0 / 2000.0;
        const auto greedy = optimize_greedy(obj, c);
        const std::vector<double> start(obj.variables(), 12.0 / static_cast<double>(obj.variables()));
        const auto sqp = optimize_sqp(obj, c, start);
        EXPECT_GE(sqp.objective, greedy.objective - 1e-6) << to_string(mode);
        expect_monotone(greedy.trace);
        expect_monotone(sqp.trace);
    }
}

TEST(Allocator, MatchesGridOracleWithoutCarryover) {
    // no carryover: each period is independent, so two channel totals are the only unknowns
    const auto m = synthetic_model({0.0, 0.0}, {1.0, 3.0}, {0.4, 0.7});
    const auto h = next_steps(m, 2);
    const PlanObjective obj(m, h.start, h.end, AllocationMode::aggregate);
    const double B = 6.0;
    const double base = obj.value(std::vector<double>{0.0, 0.0});
    double best = -1.0;
    for (int k = 0; k <= 10000; ++k) {
        const double x = B * k / 10000.0;
        best = std::max(best, obj.value(std::vector<double>{x, B - x}) - base);
    }
    auto c = budget_only_constraints(B, 2);
    c.step = B / 1000.0;
    const auto sqp = optimize_sqp(obj, c, std::vector<double>{3.0, 3.0});
    EXPECT_NEAR((sqp.objective - base) / best, 1.0, 1e-3);
    EXPECT_GE(sqp.objective - base, best - 1e-9 * best);
    const auto greedy = optimize_greedy(obj, c);
    EXPECT_NEAR((greedy.objective - base) / best, 1.0, 1e-3);
}

TEST(Allocator, GradientMatchesFiniteDifferences) {
    const auto m = synthetic_model({0.4, 0.7}, {1.0, 2.0}, {0.3, 0.2});
    const auto h = next_steps(m, 3);
    for (auto mode : {AllocationMode::aggregate, AllocationMode::full}) {
        const PlanObjective obj(m, h.start, h.end, mode);
        std::vector<double> v(obj.variables());
        for (std::size_t i = 0; i < v.size(); ++i) v[i] = 0.5 + 0.3 * static_cast<double>(i);
        const auto g = obj.gradient(v);
        for (std::size_t i = 0; i < v.size(); ++i) {
            auto up = v, dn = v;
            up[i] += 1e-5;
            dn[i] -= 1e-5;
            EXPECT_NEAR(g[i], (obj.value(up) - obj.value(dn)) / 2e-5, 1e-6 * std::max(1.0, std::abs(g[i])));
        }
    }
}

TEST(Allocator, MarginalReturnCurveIsNonIncreasing) {
    const auto m = synthetic_model({0.5, 0.5}, {1.0, 1.0}, {0.3, 0.0});
    const auto h = next_steps(m, 4);
    std::vector<double> budgets;
    for (int k = 0; k <= 40; ++k) budgets.push_back(0.5 * k);
    const auto curve = marginal_return_curve(m, 0, h.start, h.end, budgets);
    ASSERT_EQ(curve.size(), budgets.size());
    EXPECT_GT(curve.front().marginal, 0.0);
    for (std::size_t i = 1; i < curve.size(); ++i) EXPECT_LE(curve[i].marginal, curve[i - 1].marginal + 1e-12);
    for (const auto& pt : marginal_return_curve(m, 1, h.start, h.end, budgets)) EXPECT_EQ(pt.marginal, 0.0);
    EXPECT_THROW(marginal_return_curve(m, 5, h.start, h.end, budgets), Error);
}

TEST(Allocator, ProjectionOntoBudgetBox) {
    auto c = budget_only_constraints(10.0, 3);
    c.upper = {4.0, 10.0, 10.0};
    const auto v = project_budget(std::vector<double>{9.0, 3.0, -2.0}, c);
    EXPECT_NEAR(sum(v), 10.0, 1e-12);
    EXPECT_DOUBLE_EQ(v[0], 4.0);
    // clip(z - lambda) with lambda = -2.5
    EXPECT_NEAR(v[1], 5.5, 1e-9);
    EXPECT_NEAR(v[2], 0.5, 1e-9);
    // an interior point is its own projection
    const std::vector<double> inside{3.0, 3.0, 4.0};
    const auto same = project_budget(inside, c);
    for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(same[i], inside[i], 1e-9);
}

TEST(Allocator, ModeAndMethodNames) {
    EXPECT_EQ(allocation_mode_from_string("full"), AllocationMode::full);
    EXPECT_EQ(allocation_method_from_string("greedy"), AllocationMethod::greedy);
    EXPECT_THROW(allocation_method_from_string("newton"), Error);
    const auto m = synthetic_model({0.3}, {1.0}, {0.2});
    const auto h = next_steps(m, 2);
    const PlanObjective obj(m, h.start, h.end, AllocationMode::full);
    auto c = budget_only_constraints(2.0, obj.variables());
    c.step = 0.1;
    const auto j = to_json(optimize_greedy(obj, c));
    EXPECT_EQ(j.at("method"), "greedy");
    EXPECT_EQ(j.at("mode"), "full");
    EXPECT_TRUE(j.at("feasibility").at("feasible").get<bool>());
}
