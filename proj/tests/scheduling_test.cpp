#include "dtsync/oracles.hpp"
#include "dtsync/scheduling.hpp"
#include "test_support.hpp"

#include <gtest/gtest.h>

#include <algorithm>
#include <numeric>
#include <random>

using namespace dtsync;
using dtsync::testing::small_config;

namespace {

MatrixXd random_costs(int N, int K, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.05, 1.0);
    return MatrixXd::NullaryExpr(N, K, [&] { return u(rng); });
}

DualState random_duals(const ScenarioConfig& cfg, std::mt19937_64& rng) {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    auto d = DualState::zeros(cfg);
    for (int n = 0; n < cfg.N; ++n) {
        d.lambda2(n) = u(rng);
        for (int k = 0; k < cfg.K; ++k) {
            if (n < cfg.window_count()) d.lambda1(n, k) = 1.5 * u(rng);
            d.lambda3(n, k) = u(rng);
        }
    }
    return d;
}

} // namespace

TEST(Lemma1, ZeroDualsScheduleNothing) {
    const auto cfg = small_config(4, 3);
    const MatrixXd t = MatrixXd::Constant(4, 3, 0.5);
    const auto pt = lemma1_primal(DualState::zeros(cfg), t, cfg);
    EXPECT_EQ(pt.x.sum(), 0);
    EXPECT_EQ(pt.y.sum(), 0.0);
}

TEST(Lemma1, NegativeCoefficientActivates) {
    const auto cfg = small_config(3, 1, 1);
    const MatrixXd t = MatrixXd::Constant(3, 1, 0.5);
    auto dual = DualState::zeros(cfg);
    // Slot 1 lies in windows 0 and 1.
    dual.lambda1(0, 0) = 1.0;
    dual.lambda1(1, 0) = 1.0;
    dual.lambda2(1) = 1.0;
    EXPECT_DOUBLE_EQ(lagrangian_coefficient(dual, t, cfg, 1, 0), -1.0);
    const auto pt = lemma1_primal(dual, t, cfg);
    EXPECT_EQ(pt.x(1, 0), 1);
    EXPECT_DOUBLE_EQ(pt.y(1), 0.5);
}

TEST(Lemma1, LiteralFormDropsDurationFactor) {
    const auto cfg = small_config(2, 1, 1);
    const MatrixXd t = MatrixXd::Constant(2, 1, 0.25);
    auto dual = DualState::zeros(cfg);
    dual.lambda3(0, 0) = 1.0;
    EXPECT_DOUBLE_EQ(lagrangian_coefficient(dual, t, cfg, 0, 0, CoefficientForm::derived), 0.25);
    EXPECT_DOUBLE_EQ(lagrangian_coefficient(dual, t, cfg, 0, 0, CoefficientForm::literal), 1.0);
}

TEST(Lemma1, MinimisesLagrangianOverAllBinaryMatrices) {
    std::mt19937_64 rng(11);
    for (int trial = 0; trial < 50; ++trial) {
        const auto cfg = small_config(3, 2, 1, 1.0, 1);
        const MatrixXd t = random_costs(3, 2, rng);
        const auto dual = random_duals(cfg, rng);
        // The Lagrangian is affine in x once y is held fixed; enumerate.
        const VectorXd y0 = VectorXd::Zero(3);
        double best = std::numeric_limits<double>::infinity();
        MatrixXi arg;
        for (int mask = 0; mask < 64; ++mask) {
            MatrixXi x(3, 2);
            for (int i = 0; i < 6; ++i) x(i / 2, i % 2) = (mask >> i) & 1;
            const double L = lagrangian(dual, x, y0, t, cfg);
            if (L < best) {
                best = L;
                arg = x;
            }
        }
        const auto pt = lemma1_primal(dual, t, cfg);
        EXPECT_TRUE(pt.x == arg) << "trial " << trial;
    }
}

TEST(DualStep, ZeroSubgradientIsAFixedPoint) {
    const auto cfg = small_config(2, 1, 1, 1.0, 1);
    const MatrixXd t = MatrixXd::Constant(2, 1, 0.3);
    auto dual = DualState::zeros(cfg);
    dual.lambda1(0, 0) = 0.7;
    dual.lambda3 << 0.2, 0.4;
    MatrixXi x(2, 1);
    x << 1, 0;
    const VectorXd y = (VectorXd(2) << 0.3, 0.0).finished();
    const auto next = dual_step(dual, x, y, t, cfg);
    EXPECT_TRUE(next.lambda1 == dual.lambda1);
    EXPECT_TRUE(next.lambda2 == dual.lambda2);
    EXPECT_TRUE(next.lambda3 == dual.lambda3);
    EXPECT_EQ(next.iteration, 1);
}

TEST(DualStep, Lambda3ClipsAtOne) {
    const auto cfg = small_config(1, 1, 1);
    MatrixXd t(1, 1);
    t << 5.0;
    auto dual = DualState::zeros(cfg);
    dual.lambda3(0, 0) = 0.9;
    MatrixXi x(1, 1);
    x << 1;
    const auto next = dual_step(dual, x, VectorXd::Zero(1), t, cfg);
    EXPECT_EQ(next.lambda3(0, 0), 1.0);
}

TEST(DualStep, DualValueStaysBoundedAndRunningBestSettles) {
    const auto cfg = small_config(4, 2, 1, 1.0, 1);
    std::mt19937_64 rng(3);
    const MatrixXd t = random_costs(4, 2, rng);
    auto dual = DualState::zeros(cfg);
    std::vector<double> best;
    double running = -std::numeric_limits<double>::infinity();
    for (int it = 0; it < 200; ++it) {
        const auto pt = lemma1_primal(dual, t, cfg);
        const double q = lagrangian(dual, pt.x, pt.y, t, cfg);
        ASSERT_TRUE(std::isfinite(q));
        ASSERT_LT(std::abs(q), 100.0);
        running = std::max(running, q);
        best.push_back(running);
        dual = dual_step(dual, pt.x, pt.y, t, cfg);
    }
    // Weak duality: no dual value exceeds the scheduling optimum.
    const auto opt = oracles::brute_force_scheduling(t, cfg);
    EXPECT_LE(best.back(), opt.objective + 1e-9);
    // Diminishing steps: the second hundred steps gain less than the first.
    EXPECT_LE(best[199] - best[99], best[99] - best[0]);
}

TEST(RoundRobin, AlwaysFeasibleAtCapacity) {
    for (int tau = 1; tau <= 4; ++tau)
        for (int K = 1; K <= 8; ++K)
            for (int K0 = 1; K0 <= K; ++K0) {
                auto cfg = small_config(9, K, tau, 1.0 / tau, K0);
                cfg.beta.setConstant(0.5);
                long demand = 0;
                for (int k = 0; k < K; ++k) demand += cfg.required_transmissions(k);
                if (demand > static_cast<long>(K0) * (tau + 1)) continue;
                EXPECT_TRUE(schedule_feasible(round_robin_schedule(cfg), cfg)) << tau << " " << K << " " << K0;
            }
}

TEST(SolveScheduling, ZeroCostsGiveZeroObjective) {
    const auto cfg = small_config(5, 3, 2, 0.5, 2);
    const auto res = solve_scheduling(MatrixXd::Zero(5, 3), cfg);
    EXPECT_EQ(res.objective, 0.0);
    EXPECT_TRUE(schedule_feasible(res.x, cfg));
}

TEST(SolveScheduling, RejectsWindowOverload) {
    auto cfg = small_config(4, 3, 1, 1.0, 1);
    EXPECT_THROW(solve_scheduling(MatrixXd::Ones(4, 3), cfg), InfeasibleError);
}

TEST(SolveScheduling, MatchesBruteForceOnTinyInstances) {
    const auto cfg = small_config(4, 2, 1, 1.0, 1);
    std::mt19937_64 rng(101);
    int close = 0;
    for (int seed = 0; seed < 50; ++seed) {
        const MatrixXd t = random_costs(4, 2, rng);
        const auto res = solve_scheduling(t, cfg);
        const auto ref = oracles::brute_force_scheduling(t, cfg);
        ASSERT_TRUE(schedule_feasible(res.x, cfg));
        EXPECT_NEAR(res.objective, total_delay(res.x, t), 1e-12);
        EXPECT_GE(res.objective, ref.objective - 1e-12);
        close += res.objective <= 1.05 * ref.objective ? 1 : 0;
    }
    EXPECT_GE(close, 48);
}

TEST(SolveScheduling, NearOptimalOnLooserInstances) {
    std::mt19937_64 rng(7);
    int close = 0, total = 0;
    for (int seed = 0; seed < 40; ++seed) {
        auto cfg = small_config(5, 3, 2, 0.5, 2);
        const MatrixXd t = random_costs(5, 3, rng);
        const auto res = solve_scheduling(t, cfg);
        const auto ref = oracles::brute_force_scheduling(t, cfg);
        ASSERT_TRUE(schedule_feasible(res.x, cfg));
        close += res.objective <= 1.05 * ref.objective + 1e-12 ? 1 : 0;
        ++total;
    }
    EXPECT_GE(close, total * 9 / 10);
}

// One window covering the whole horizon and rank-one costs t = a_n b_k:
// every device should take its ceil(beta tau) slots with the smallest a_n,
// and the nested choice is optimal.
TEST(SolveScheduling, SingleWindowRankOneMatchesGreedy) {
    std::mt19937_64 rng(19);
    std::uniform_real_distribution<double> u(0.1, 1.0);
    for (int trial = 0; trial < 20; ++trial) {
        const int N = 5, K = 3;
        auto cfg = small_config(N, K, N - 1, 0.5, K);
        cfg.beta << 0.25, 0.5, 0.75;
        VectorXd a(N), b(K);
        for (int n = 0; n < N; ++n) a(n) = u(rng);
        for (int k = 0; k < K; ++k) b(k) = u(rng);
        const MatrixXd t = a * b.transpose();

        std::vector<int> slots(N);
        std::iota(slots.begin(), slots.end(), 0);
        std::sort(slots.begin(), slots.end(), [&](int i, int j) { return a(i) < a(j); });
        double greedy = 0.0;
        for (int j = 0; j < N; ++j) {
            double worst = 0.0;
            for (int k = 0; k < K; ++k)
                if (cfg.required_transmissions(k) > j) worst = std::max(worst, b(k));
            greedy += a(slots[j]) * worst;
        }
        const auto res = solve_scheduling(t, cfg);
        EXPECT_NEAR(res.objective, greedy, 1e-12) << "trial " << trial;
        EXPECT_NEAR(oracles::brute_force_scheduling(t, cfg).objective, greedy, 1e-12);
    }
}

TEST(Repair, NeverAddsViolationsAndFixesRandomStarts) {
    std::mt19937_64 rng(23);
    std::bernoulli_distribution coin(0.4);
    for (int trial = 0; trial < 100; ++trial) {
        auto cfg = small_config(8, 4, 3, 1.0 / 3.0, 2);
        const MatrixXd t = random_costs(8, 4, rng);
        const MatrixXi x0 = MatrixXi::NullaryExpr(8, 4, [&] { return coin(rng) ? 1 : 0; });
        FeasibilityReport before, after;
        detail::check_schedule(x0, cfg, before);
        const MatrixXi x = repair_schedule(x0, t, cfg);
        detail::check_schedule(x, cfg, after);
        EXPECT_LE(after.regularity.violation, before.regularity.violation);
        EXPECT_TRUE(after.regularity.pass);
        EXPECT_TRUE(schedule_feasible(x, cfg)) << "trial " << trial;
    }
}
