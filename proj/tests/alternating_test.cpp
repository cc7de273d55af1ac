#include "dtsync/alternating.hpp"
#include "dtsync/config_io.hpp"
#include "dtsync/oracles.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

using namespace dtsync;
using dtsync::testing::small_config;

TEST(InitializeFeasible, NoDemandCostsNothing) {
    auto cfg = small_config(4, 1, 4);
    cfg.A.setZero();
    const auto ch = generate_channels(cfg, 1);
    const auto a = initialize_feasible(cfg, ch);
    EXPECT_EQ(a.d.cwiseAbs().maxCoeff(), 0.0);
    EXPECT_EQ(total_delay(a), 0.0);
    EXPECT_TRUE(evaluate(a, cfg, ch).report.feasible());
}

TEST(InitializeFeasible, ReferenceScenarioPassesChecker) {
    const auto cfg = reference_scenario();
    for (std::uint64_t seed = 0; seed < 10; ++seed) {
        const auto ch = generate_channels(cfg, seed);
        const auto ev = evaluate(initialize_feasible(cfg, ch), cfg, ch);
        EXPECT_TRUE(ev.report.feasible()) << "seed " << seed << ": " << ev.report.first_failure();
    }
}

TEST(InitializeFeasible, WindowOverloadIsInfeasible) {
    auto cfg = reference_scenario();
    cfg.K0 = 1;
    cfg.tau = 1;
    cfg.beta.setOnes();
    EXPECT_THROW(initialize_feasible(cfg, generate_channels(cfg, 0)), InfeasibleError);
}

TEST(Alternating, SingleSlotReachesAnalyticMinimum) {
    auto cfg = small_config(1, 1);
    cfg.A.setConstant(0.5);
    const auto ch = generate_channels(cfg, 3);
    const auto sol = solve(cfg, ch);
    // One link: send exactly the required bits at full power.
    const double need = cfg.required_delivery(0) / success_probability(cfg.P(0), ch.h(0, 0), cfg);
    const double best = need / rate(cfg.P(0), ch.h(0, 0), cfg);
    EXPECT_NEAR(sol.result.total_delay, best, 1e-6 * best);

    oracles::SingleHop hop;
    hop.data_bits = need;
    hop.gain = ch.h(0, 0);
    hop.energy_budget = cfg.Q(0);
    hop.max_power = cfg.P(0);
    const auto grid = oracles::grid_search_single_hop(hop, cfg, 400);
    ASSERT_TRUE(grid.has_value());
    EXPECT_LE(std::abs(sol.result.total_delay - *grid), 0.02 * *grid);
}

TEST(Alternating, TraceFallsAndResultIsFeasible) {
    const auto cfg = reference_scenario();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto ch = generate_channels(cfg, seed);
        const auto sol = solve(cfg, ch);
        const auto& tr = sol.trace.objective;
        ASSERT_EQ(static_cast<int>(tr.size()), sol.trace.iterations + 1);
        for (std::size_t i = 1; i < tr.size(); ++i) EXPECT_LE(tr[i], tr[i - 1] + 1e-9);
        EXPECT_LE(sol.trace.iterations, 50);
        EXPECT_TRUE(sol.result.report.feasible()) << sol.result.report.first_failure();
        EXPECT_DOUBLE_EQ(sol.result.total_delay, tr.back());
    }
}

TEST(Alternating, ZeroOuterIterationsReturnsTheStart) {
    const auto cfg = reference_scenario();
    const auto ch = generate_channels(cfg, 4);
    AlternatingOptions opt;
    opt.max_outer = 0;
    const auto sol = solve(cfg, ch, opt);
    const auto init = initialize_feasible(cfg, ch);
    EXPECT_TRUE(sol.allocation.x == init.x);
    EXPECT_TRUE(sol.allocation.p == init.p);
    EXPECT_TRUE(sol.allocation.d == init.d);
    EXPECT_EQ(sol.trace.objective.size(), 1u);
}

TEST(Alternating, RepeatRunsAreBitIdentical) {
    const auto cfg = reference_scenario();
    const auto ch = generate_channels(cfg, 5);
    const auto a = solve(cfg, ch), b = solve(cfg, ch);
    EXPECT_EQ(a.trace.objective, b.trace.objective);
    EXPECT_TRUE(a.allocation.p == b.allocation.p);
    EXPECT_TRUE(a.allocation.d == b.allocation.d);
}
