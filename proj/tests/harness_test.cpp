#include "dtsync/harness.hpp"

#include <gtest/gtest.h>

#include <sstream>

using namespace dtsync;

namespace {

SweepSpec one_cell(const std::string& algo = "proposed") {
    SweepSpec s;
    s.parameter = SweepParameter::max_power_dbm;
    s.values = {1.0};
    s.seeds = {7};
    s.algorithms = {algo};
    return s;
}

} // namespace

TEST(BaselineRandom, UnconstrainedCaseIsFeasible) {
    auto cfg = reference_scenario(4, 3);
    cfg.K0 = 4;
    cfg.tau = 3;  // tau >= N: no windows
    const auto ch = generate_channels(cfg, 1);
    const auto a = baseline_random(cfg, ch, 5);
    EXPECT_TRUE(evaluate(a, cfg, ch).report.feasible());
}

TEST(BaselineRandom, SameSeedSameSchedule) {
    const auto cfg = reference_scenario();
    const auto ch = generate_channels(cfg, 2);
    const auto a = baseline_random(cfg, ch, 11), b = baseline_random(cfg, ch, 11);
    EXPECT_EQ(a.x, b.x);
    EXPECT_EQ(a.p, b.p);
    EXPECT_EQ(a.d, b.d);
}

TEST(BaselineRandom, DrawsDifferWithSeed) {
    const auto cfg = reference_scenario();
    const auto ch = generate_channels(cfg, 2);
    int differ = 0;
    for (std::uint64_t s = 0; s < 5; ++s)
        differ += baseline_random(cfg, ch, s).x != baseline_random(cfg, ch, s + 100).x;
    EXPECT_GE(differ, 4);
}

TEST(BaselineEqualPower, HugeBudgetGivesFullPower) {
    auto cfg = reference_scenario();
    cfg.Q.setConstant(1e3);
    const auto ch = generate_channels(cfg, 3);
    const auto a = baseline_equal_power(cfg, ch);
    for (int n = 0; n < cfg.N; ++n)
        for (int k = 0; k < cfg.K; ++k)
            if (a.x(n, k)) {
                EXPECT_DOUBLE_EQ(a.p(n, k), cfg.P(k));
            }
}

TEST(BaselineEqualPower, EnergyWithinBudgetByConstruction) {
    const auto cfg = reference_scenario();
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto ch = generate_channels(cfg, seed);
        const auto a = baseline_equal_power(cfg, ch);
        const auto ev = evaluate(a, cfg, ch);
        EXPECT_TRUE(ev.report.feasible()) << ev.report.first_failure();
        for (int k = 0; k < cfg.K; ++k) EXPECT_LE(ev.device_energy(k), cfg.Q(k) * (1 + 1e-9));
    }
}

TEST(Baselines, ProposedIsNoWorseOnAverage) {
    const auto cfg = reference_scenario();
    double prop = 0, rnd = 0, eq = 0;
    for (std::uint64_t seed = 0; seed < 5; ++seed) {
        const auto ch = generate_channels(cfg, seed);
        prop += solve(cfg, ch).result.total_delay;
        rnd += evaluate(baseline_random(cfg, ch, seed), cfg, ch).total_delay;
        eq += evaluate(baseline_equal_power(cfg, ch), cfg, ch).total_delay;
    }
    EXPECT_LE(prop, rnd);
    EXPECT_LE(prop, eq);
}

TEST(WithParameter, DeviceCountClipsResourceBlocks) {
    const auto cfg = with_parameter(reference_scenario(), SweepParameter::device_count, 4);
    EXPECT_EQ(cfg.K, 4);
    EXPECT_EQ(cfg.K0, 4);
    EXPECT_EQ(cfg.D.cols(), 4);
}

TEST(WithParameter, RejectsFractionalCounts) {
    EXPECT_THROW(with_parameter(reference_scenario(), SweepParameter::resource_blocks, 2.5), std::invalid_argument);
}

TEST(WithParameter, PowerIsGivenInDbm) {
    const auto cfg = with_parameter(reference_scenario(), SweepParameter::max_power_dbm, 30.0);
    EXPECT_DOUBLE_EQ(cfg.P(0), 1.0);
}

TEST(RunSweep, OneCellOneRow) {
    const auto rows = run_sweep(one_cell(), reference_scenario());
    ASSERT_EQ(rows.size(), 1u);
    EXPECT_EQ(rows[0].status, "ok");
    EXPECT_EQ(rows[0].seed, 7u);
    EXPECT_EQ(rows[0].param, "max_power_dbm");
    EXPECT_GE(rows[0].total_delay_s, 0.0);
    EXPECT_GE(rows[0].min_accuracy, 0.6 - 1e-6);
    EXPECT_EQ(rows[0].wall_ms, 0.0);
}

TEST(RunSweep, FailuresBecomeStatusRows) {
    SweepSpec s = one_cell("single_device");
    s.parameter = SweepParameter::resource_blocks;
    s.values = {1.0, 5.0};
    const auto rows = run_sweep(s, reference_scenario());
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0].status.rfind("error:", 0), 0u) << rows[0].status;  // K0 = 1 cannot hold 10 devices
    EXPECT_EQ(rows[1].status.rfind("error:", 0), 0u) << rows[1].status;  // K = 10
}

TEST(RunSweep, ResourceBlockTrendOnFewSeeds) {
    SweepSpec s;
    s.parameter = SweepParameter::resource_blocks;
    s.values = {3, 5, 8};
    s.seeds = {0, 1, 2, 3};
    s.algorithms = {"proposed"};
    const auto rows = run_sweep(s, reference_scenario());
    std::vector<double> mean(3, 0.0);
    for (std::size_t i = 0; i < rows.size(); ++i) {
        ASSERT_EQ(rows[i].status, "ok");
        mean[i / 4] += rows[i].total_delay_s / 4;
    }
    EXPECT_LE(mean[1], mean[0] * (1 + 1e-9));
    EXPECT_LE(mean[2], mean[1] * (1 + 1e-9));
}

TEST(Csv, HeaderFormattingAndQuoting) {
    ResultRow r{3, "proposed", "accuracy_target", 0.6, 1.0 / 3.0, 2e-4, 0.6, 4, true, "error: a, b", 0.0};
    const std::string csv = to_csv({r});
    EXPECT_EQ(csv, std::string(kCsvHeader) + "\n3,proposed,accuracy_target,0.6,0.333333333,0.0002,0.6,4,1,\"error: a, b\",0\n");
    EXPECT_EQ(csv.find('\r'), std::string::npos);
}

TEST(Csv, RepeatSweepIsByteIdentical) {
    SweepSpec s = one_cell();
    s.algorithms = {"proposed", "random", "equal_power"};
    s.seeds = {1, 2};
    EXPECT_EQ(to_csv(run_sweep(s, reference_scenario())), to_csv(run_sweep(s, reference_scenario())));
}

TEST(SweepJson, ParsesSeedRangeAndRejectsUnknownKeys) {
    const auto s = sweep_from_json(json::parse(
        R"({"parameter": "device_count", "values": [4, 6], "seeds": {"first": 10, "count": 3}, "algorithms": ["random"]})"));
    EXPECT_EQ(s.parameter, SweepParameter::device_count);
    EXPECT_EQ(s.seeds, (std::vector<std::uint64_t>{10, 11, 12}));
    EXPECT_THROW(sweep_from_json(json::parse(R"({"parameter": "K", "values": [1], "seeds": [1], "algorithms": ["random"]})")),
                 std::invalid_argument);
    EXPECT_THROW(sweep_from_json(json::parse(
                     R"({"parameter": "device_count", "values": [1], "seeds": [1], "algorithms": ["aea"]})")),
                 std::invalid_argument);
    EXPECT_THROW(sweep_from_json(json::parse(
                     R"({"parameter": "device_count", "values": [], "seeds": [1], "algorithms": ["random"]})")),
                 std::invalid_argument);
}

TEST(ConfigJson, RoundTripAndUnknownKey) {
    const auto cfg = reference_scenario(3, 4);
    const auto back = config_from_json(config_to_json(cfg));
    EXPECT_EQ(back.K, 3);
    EXPECT_EQ(back.N, 4);
    EXPECT_NEAR(back.P(0), cfg.P(0), 1e-15);
    EXPECT_NEAR(back.sigma2, cfg.sigma2, 1e-30);
    EXPECT_EQ(back.D, cfg.D);
    EXPECT_THROW(config_from_json(json::parse(R"({"K": 3, "bogus": 1})")), std::invalid_argument);
}
