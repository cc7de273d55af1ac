#include "dtsync/convex/barrier.hpp"
#include "dtsync/oracles.hpp"

#include <gtest/gtest.h>

#include <random>

using namespace dtsync;
using namespace dtsync::convex;

namespace {

SmoothFunction quadratic(MatrixXd Q, VectorXd c) {
    return [Q = std::move(Q), c = std::move(c)](const VectorXd& v, Derivatives* out) {
        const VectorXd Qv = Q * v;
        if (out) {
            for (int i = 0; i < v.size(); ++i) {
                out->gradient.emplace_back(i, Qv(i) + c(i));
                for (int j = 0; j < v.size(); ++j) out->hessian.emplace_back(i, j, Q(i, j));
            }
        }
        return 0.5 * v.dot(Qv) + c.dot(v);
    };
}

VectorXd dense_gradient(const SmoothFunction& f, const VectorXd& v) {
    Derivatives d;
    f(v, &d);
    VectorXd g = VectorXd::Zero(v.size());
    for (const auto& [j, a] : d.gradient) g(j) += a;
    return g;
}

// Projected gradient on a box with a fixed small step, run to a tight
// tolerance: the reference for box-constrained convex QPs.
VectorXd projected_gradient(const MatrixXd& Q, const VectorXd& c, const VectorXd& lo, const VectorXd& hi) {
    const double L = Q.eigenvalues().real().maxCoeff();
    VectorXd v = (lo + hi) / 2;
    for (int it = 0; it < 2'000'000; ++it) {
        VectorXd next = (v - (Q * v + c) / L).cwiseMax(lo).cwiseMin(hi);
        if ((next - v).cwiseAbs().maxCoeff() < 1e-15) return next;
        v = next;
    }
    return v;
}

} // namespace

TEST(Barrier, ActiveLowerBound) {
    auto prog = SmoothConvexProgram::unbounded_box(1);
    prog.objective = quadratic(MatrixXd::Constant(1, 1, 2.0), VectorXd::Zero(1));
    prog.lower << 1.0;
    const auto r = barrier_solve(prog, VectorXd::Constant(1, 2.0));
    ASSERT_TRUE(r.status.optimal());
    EXPECT_NEAR(r.x(0), 1.0, 1e-6);
    EXPECT_LE(r.status.residual, kKktTol);
}

TEST(Barrier, LinearObjectiveOverDisc) {
    auto prog = SmoothConvexProgram::unbounded_box(2);
    prog.objective = linear_function({{0, 1.0}, {1, 1.0}});
    prog.constraints.push_back([](const VectorXd& v, Derivatives* out) {
        if (out) {
            out->gradient = {{0, 2 * v(0)}, {1, 2 * v(1)}};
            out->hessian = {{0, 0, 2.0}, {1, 1, 2.0}};
        }
        return v.squaredNorm() - 2.0;
    });
    const auto r = barrier_solve(prog, VectorXd::Zero(2));
    ASSERT_TRUE(r.status.optimal());
    EXPECT_NEAR(r.x(0), -1.0, 1e-5);
    EXPECT_NEAR(r.x(1), -1.0, 1e-5);
}

TEST(Barrier, RejectsInfeasibleStart) {
    auto prog = SmoothConvexProgram::unbounded_box(1);
    prog.objective = linear_function({{0, 1.0}});
    prog.lower << 0.0;
    EXPECT_THROW(barrier_solve(prog, VectorXd::Constant(1, 0.0)), std::invalid_argument);
}

TEST(Barrier, IteratesStayStrictlyFeasibleAndStagesDescend) {
    auto prog = SmoothConvexProgram::unbounded_box(2);
    prog.objective = linear_function({{0, -1.0}, {1, -2.0}});
    prog.constraints.push_back(linear_function({{0, 1.0}, {1, 1.0}}, -1.0));
    prog.constraints.push_back([](const VectorXd& v, Derivatives* out) {
        if (out) {
            out->gradient = {{0, 2 * v(0)}, {1, 2 * v(1)}};
            out->hessian = {{0, 0, 2.0}, {1, 1, 2.0}};
        }
        return v.squaredNorm() - 0.8;
    });
    prog.lower = VectorXd::Zero(2);
    int bad = 0;
    BarrierOptions opt;
    opt.on_accept = [&](const VectorXd& v) { bad += prog.strictly_feasible(v) ? 0 : 1; };
    const auto r = barrier_solve(prog, VectorXd::Constant(2, 0.1), opt);
    ASSERT_TRUE(r.status.optimal());
    EXPECT_EQ(bad, 0);
    for (std::size_t i = 1; i < r.stage_objectives.size(); ++i)
        EXPECT_LE(r.stage_objectives[i], r.stage_objectives[i - 1] + 1e-10);
}

TEST(Barrier, RandomBoxQpsMatchProjectedGradient) {
    std::mt19937_64 rng(77);
    std::uniform_real_distribution<double> u(-1.0, 1.0);
    for (int trial = 0; trial < 30; ++trial) {
        const int n = 2 + trial % 5;
        MatrixXd M(n, n);
        for (int i = 0; i < n; ++i)
            for (int j = 0; j < n; ++j) M(i, j) = u(rng);
        const MatrixXd Q = M * M.transpose() + 0.5 * MatrixXd::Identity(n, n);
        VectorXd c(n), lo(n), hi(n);
        for (int i = 0; i < n; ++i) {
            c(i) = 2.0 * u(rng);
            lo(i) = -1.0 + 0.5 * u(rng);
            hi(i) = 1.0 + 0.5 * u(rng);
        }
        auto prog = SmoothConvexProgram::unbounded_box(n);
        prog.objective = quadratic(Q, c);
        prog.lower = lo;
        prog.upper = hi;
        const auto r = barrier_solve(prog, (lo + hi) / 2);
        ASSERT_TRUE(r.status.optimal()) << "trial " << trial;
        const VectorXd ref = projected_gradient(Q, c, lo, hi);
        EXPECT_LE((r.x - ref).cwiseAbs().maxCoeff(), 1e-5) << "trial " << trial;
    }
}

TEST(Barrier, SuppliedGradientsMatchFiniteDifferences) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(0.2, 2.0);
    const SmoothFunction disc = [](const VectorXd& v, Derivatives* out) {
        if (out) out->gradient = {{0, 2 * v(0)}, {1, 2 * v(1)}};
        return v.squaredNorm() - 2.0;
    };
    for (int i = 0; i < 20; ++i) {
        const VectorXd v = VectorXd::NullaryExpr(2, [&] { return u(rng); });
        const VectorXd fd = oracles::finite_difference_gradient([&](const VectorXd& w) { return disc(w, nullptr); }, v, 1e-6);
        const VectorXd g = dense_gradient(disc, v);
        EXPECT_LE((g - fd).norm() / g.norm(), 1e-4);
    }
}

TEST(Barrier, RandomMidpointConvexityOfTestConstraints) {
    std::mt19937_64 rng(6);
    std::uniform_real_distribution<double> u(-3.0, 3.0);
    const auto f = quadratic(MatrixXd::Identity(3, 3) * 2.0, VectorXd::Ones(3));
    for (int i = 0; i < 100; ++i) {
        const VectorXd a = VectorXd::NullaryExpr(3, [&] { return u(rng); });
        const VectorXd b = VectorXd::NullaryExpr(3, [&] { return u(rng); });
        EXPECT_LE(f((a + b) / 2, nullptr), (f(a, nullptr) + f(b, nullptr)) / 2 + 1e-12);
    }
}

TEST(PhaseOne, FindsInteriorPointAndDetectsEmptyInterior) {
    auto prog = SmoothConvexProgram::unbounded_box(2);
    prog.objective = linear_function({{0, 1.0}});
    prog.lower = VectorXd::Zero(2);
    prog.upper = VectorXd::Constant(2, 4.0);
    prog.constraints.push_back(linear_function({{0, -1.0}, {1, -1.0}}, 3.0));  // v0 + v1 >= 3
    const auto p = find_strictly_feasible(prog, VectorXd::Zero(2));
    ASSERT_TRUE(p.has_value());
    EXPECT_TRUE(prog.strictly_feasible(*p));

    prog.constraints.push_back(linear_function({{0, 1.0}, {1, 1.0}}, -3.0));  // v0 + v1 <= 3
    EXPECT_FALSE(find_strictly_feasible(prog, VectorXd::Zero(2)).has_value());
}
