#include "dtsync/convex/lp.hpp"
#include "dtsync/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dtsync;
using namespace dtsync::convex;

TEST(Simplex, SingleBindingLowerBound) {
    auto lp = LinearProgram::with_variables(1);
    lp.c << 1.0;
    lp.lower << 3.0;
    const auto sol = simplex_solve(lp);
    ASSERT_TRUE(sol.status.optimal());
    EXPECT_NEAR(sol.x(0), 3.0, 1e-12);
    EXPECT_NEAR(sol.objective, 3.0, 1e-12);
}

TEST(Simplex, BindingBoundExpressedAsRow) {
    auto lp = LinearProgram::with_variables(1);
    lp.c << 1.0;
    lp.lower << -kInf;
    lp.A.resize(1, 1);
    lp.A << -1.0;
    lp.b.resize(1);
    lp.b << -3.0;
    const auto sol = simplex_solve(lp);
    ASSERT_TRUE(sol.status.optimal());
    EXPECT_NEAR(sol.x(0), 3.0, 1e-12);
}

TEST(Simplex, TextbookFacet) {
    auto lp = LinearProgram::with_variables(2);
    lp.c << -1.0, -1.0;
    lp.A.resize(1, 2);
    lp.A << 1.0, 1.0;
    lp.b.resize(1);
    lp.b << 1.0;
    const auto sol = simplex_solve(lp);
    ASSERT_TRUE(sol.status.optimal());
    EXPECT_NEAR(sol.objective, -1.0, 1e-12);
    EXPECT_NEAR(sol.x.sum(), 1.0, 1e-12);
}

TEST(Simplex, ReportsInfeasible) {
    auto lp = LinearProgram::with_variables(1);
    lp.c << 1.0;
    lp.A.resize(2, 1);
    lp.A << 1.0, -1.0;
    lp.b.resize(2);
    lp.b << 1.0, -2.0;  // v <= 1 and v >= 2
    EXPECT_EQ(simplex_solve(lp).status.outcome, SolveOutcome::infeasible);
}

TEST(Simplex, ReportsUnbounded) {
    auto lp = LinearProgram::with_variables(2);
    lp.c << -1.0, 0.0;
    lp.A.resize(1, 2);
    lp.A << 0.0, 1.0;
    lp.b.resize(1);
    lp.b << 1.0;
    EXPECT_EQ(simplex_solve(lp).status.outcome, SolveOutcome::unbounded);
}

TEST(Simplex, FreeAndUpperBoundedVariables) {
    // min v0 - v1, v0 free with v0 >= v1 - 2 (row), v1 in (-inf, 5].
    auto lp = LinearProgram::with_variables(2);
    lp.c << 1.0, -1.0;
    lp.lower << -kInf, -kInf;
    lp.upper << kInf, 5.0;
    lp.A.resize(1, 2);
    lp.A << -1.0, 1.0;
    lp.b.resize(1);
    lp.b << 2.0;
    const auto sol = simplex_solve(lp);
    ASSERT_TRUE(sol.status.optimal());
    EXPECT_NEAR(sol.objective, -2.0, 1e-12);
}

TEST(Simplex, RejectsMalformedInput) {
    auto lp = LinearProgram::with_variables(2);
    lp.lower << 1.0, 0.0;
    lp.upper << 0.0, 1.0;
    EXPECT_THROW(simplex_solve(lp), std::invalid_argument);
}

TEST(Simplex, DegenerateCyclingExample) {
    // Beale's classic cycling instance (maximisation turned into min).
    auto lp = LinearProgram::with_variables(4);
    lp.c << -0.75, 150.0, -0.02, 6.0;
    lp.A.resize(3, 4);
    lp.A << 0.25, -60.0, -0.04, 9.0,
            0.5, -90.0, -0.02, 3.0,
            0.0, 0.0, 1.0, 0.0;
    lp.b.resize(3);
    lp.b << 0.0, 0.0, 1.0;
    const auto sol = simplex_solve(lp);
    ASSERT_TRUE(sol.status.optimal());
    EXPECT_NEAR(sol.objective, -0.05, 1e-10);
}

namespace {

LinearProgram random_bounded_lp(std::mt19937_64& rng, int n, int m) {
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    auto lp = LinearProgram::with_variables(n);
    for (int j = 0; j < n; ++j) {
        lp.c(j) = u(rng);
        lp.upper(j) = 2.0 + u(rng);
    }
    lp.A.resize(m, n);
    lp.b.resize(m);
    for (int i = 0; i < m; ++i) {
        for (int j = 0; j < n; ++j) lp.A(i, j) = u(rng);
        // Some rows exclude the origin so phase 1 has work to do.
        lp.b(i) = 0.8 * u(rng) + 0.3;
    }
    return lp;
}

} // namespace

TEST(Simplex, MatchesVertexEnumerationOnRandomLps) {
    std::mt19937_64 rng(2024);
    int optimal = 0, infeasible = 0;
    for (int trial = 0; trial < 200; ++trial) {
        const auto lp = random_bounded_lp(rng, 6, 8);
        const auto sol = simplex_solve(lp);
        const auto ref = oracles::enumerate_basic_feasible(lp);
        if (!ref) {
            EXPECT_EQ(sol.status.outcome, SolveOutcome::infeasible) << "trial " << trial;
            ++infeasible;
            continue;
        }
        ASSERT_TRUE(sol.status.optimal()) << "trial " << trial;
        EXPECT_NEAR(sol.objective, ref->objective, 1e-7 * std::max(1.0, std::abs(ref->objective)));
        EXPECT_LE(sol.status.primal_violation, 1e-9);
        EXPECT_LE(sol.status.residual, 1e-9);
        ++optimal;
    }
    EXPECT_GT(optimal, 50);
    EXPECT_GT(infeasible, 0);
}
