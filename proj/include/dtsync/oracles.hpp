#pragma once

// Slow, exhaustive reference implementations. They depend only on the model
// formulas and on plain problem data, never on the solver modules, so a
// solver and its oracle cannot share a bug.

#include "dtsync/convex/lp.hpp"
#include "dtsync/error.hpp"
#include "dtsync/model.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <optional>
#include <stdexcept>
#include <vector>

namespace dtsync::oracles {

/// Size caps. Exceeding one is a usage error and throws std::length_error;
/// an oracle never truncates silently.
struct OracleBudget {
    std::uint64_t max_states = 20'000'000;
    int max_grid = 2000;
    double max_seconds = 120.0;
};

namespace detail {

class Deadline {
public:
    explicit Deadline(double seconds)
        : end_(std::chrono::steady_clock::now() +
               std::chrono::duration_cast<std::chrono::steady_clock::duration>(std::chrono::duration<double>(seconds))) {}
    void check(const char* who) const {
        if (std::chrono::steady_clock::now() > end_)
            throw std::length_error(std::string(who) + ": oracle wall-time budget exceeded");
    }

private:
    std::chrono::steady_clock::time_point end_;
};

inline std::uint64_t binomial(int n, int k) {
    if (k < 0 || k > n) return 0;
    k = std::min(k, n - k);
    long double r = 1;
    for (int i = 1; i <= k; ++i) r = r * (n - k + i) / i;
    return static_cast<std::uint64_t>(r + 0.5L);
}

} // namespace detail

struct ScheduleOptimum {
    MatrixXi x;
    double objective = 0.0;
};

/// Scans every binary N x K matrix and keeps the feasible one with the least
/// sum over slots of max_k x t. Requires N K <= 20.
inline ScheduleOptimum brute_force_scheduling(const MatrixXd& t, const ScenarioConfig& cfg,
                                              const OracleBudget& budget = {}) {
    const int N = cfg.N, K = cfg.K, cells = N * K;
    if (cells > 20 || (std::uint64_t{1} << cells) > budget.max_states)
        throw std::length_error("brute_force_scheduling: N*K exceeds the enumeration cap");
    const int windows = cfg.window_count();
    std::vector<int> need(K);
    for (int k = 0; k < K; ++k) need[k] = cfg.required_transmissions(k);

    ScheduleOptimum best;
    bool found = false;
    MatrixXi x(N, K);
    for (std::uint64_t mask = 0; mask < (std::uint64_t{1} << cells); ++mask) {
        for (int n = 0; n < N; ++n)
            for (int k = 0; k < K; ++k) x(n, k) = static_cast<int>((mask >> (n * K + k)) & 1U);
        bool ok = true;
        for (int n = 0; n < N && ok; ++n) ok = x.row(n).sum() <= cfg.K0;
        for (int k = 0; k < K && ok; ++k)
            for (int w = 0; w < windows && ok; ++w) ok = x.col(k).segment(w, cfg.tau + 1).sum() >= need[k];
        if (!ok) continue;
        double obj = 0.0;
        for (int n = 0; n < N; ++n) {
            double slot = 0.0;
            for (int k = 0; k < K; ++k)
                if (x(n, k)) slot = std::max(slot, t(n, k));
            obj += slot;
        }
        if (!found || obj < best.objective) {
            best.x = x;
            best.objective = obj;
            found = true;
        }
    }
    if (!found) throw InfeasibleError("brute_force_scheduling: no feasible schedule");
    return best;
}

struct VertexOptimum {
    double objective = 0.0;
    VectorXd x;
};

/// Minimum of c.v over every basic feasible solution: each choice of n
/// linearly independent constraints (rows or finite bounds) taken as
/// equalities is solved and kept if it satisfies all constraints. Returns
/// nullopt when the polyhedron has no vertex.
inline std::optional<VertexOptimum> enumerate_basic_feasible(const convex::LinearProgram& lp,
                                                             const OracleBudget& budget = {}) {
    lp.validate();
    const int n = lp.variables();
    if (n > 10) throw std::length_error("enumerate_basic_feasible: more than 10 variables");

    std::vector<VectorXd> rows;
    std::vector<double> rhs;
    for (int i = 0; i < lp.rows(); ++i) {
        rows.emplace_back(lp.A.row(i).transpose());
        rhs.push_back(lp.b(i));
    }
    for (int j = 0; j < n; ++j) {
        if (std::isfinite(lp.lower(j))) {
            rows.emplace_back(-VectorXd::Unit(n, j));
            rhs.push_back(-lp.lower(j));
        }
        if (std::isfinite(lp.upper(j))) {
            rows.emplace_back(VectorXd::Unit(n, j));
            rhs.push_back(lp.upper(j));
        }
    }
    const int M = static_cast<int>(rows.size());
    if (detail::binomial(M, n) > budget.max_states)
        throw std::length_error("enumerate_basic_feasible: too many bases to enumerate");
    const detail::Deadline deadline(budget.max_seconds);

    double scale = 1.0;
    for (double r : rhs) scale = std::max(scale, std::abs(r));
    const double tol = 1e-9 * scale;

    std::optional<VertexOptimum> best;
    std::vector<int> pick(n);
    for (int i = 0; i < n; ++i) pick[i] = i;
    MatrixXd S(n, n);
    VectorXd r(n);
    std::uint64_t visited = 0;
    while (n <= M) {
        if ((++visited & 0xFFFF) == 0) deadline.check("enumerate_basic_feasible");
        for (int i = 0; i < n; ++i) {
            S.row(i) = rows[pick[i]].transpose();
            r(i) = rhs[pick[i]];
        }
        Eigen::FullPivLU<MatrixXd> lu(S);
        if (lu.rank() == n) {
            const VectorXd v = lu.solve(r);
            bool feasible = v.allFinite();
            for (int k = 0; k < M && feasible; ++k) feasible = rows[k].dot(v) <= rhs[k] + tol;
            if (feasible) {
                const double obj = lp.c.dot(v);
                if (!best || obj < best->objective) best = VertexOptimum{obj, v};
            }
        }
        // Next combination in lexicographic order.
        int i = n - 1;
        while (i >= 0 && pick[i] == M - n + i) --i;
        if (i < 0) break;
        ++pick[i];
        for (int j = i + 1; j < n; ++j) pick[j] = pick[j - 1] + 1;
    }
    return best;
}

/// One device, one transmission: the quantities that define the
/// single-hop delay problem.
struct SingleHop {
    double data_bits = 0.0;          // d
    double gain = 0.0;               // h
    double energy_budget = 0.0;      // upper bound on p t
    double max_power = 0.0;          // P
    double required_delivery = 0.0;  // lower bound on d s(p)
    double delivery_cap = kInfDelivery;  // upper bound on d s(p)

    static constexpr double kInfDelivery = std::numeric_limits<double>::infinity();
};

/// Smallest t over a (p, t) grid with t r(p) >= d, p t <= budget, p <= P,
/// t <= T0 and the expected-delivery bounds. The grid is refined around the
/// incumbent over several levels, each an exhaustive resolution x resolution
/// scan. Returns nullopt when no grid point is feasible; d = 0 gives 0.
inline std::optional<double> grid_search_single_hop(const SingleHop& hop, const ScenarioConfig& cfg,
                                                    int resolution, const OracleBudget& budget = {}) {
    if (resolution <= 0 || resolution > budget.max_grid)
        throw std::length_error("grid_search_single_hop: resolution outside the oracle budget");
    if (hop.data_bits <= 0.0) return 0.0;

    auto feasible = [&](double p, double t) {
        if (p <= 0.0 || t <= 0.0 || p > hop.max_power || t > cfg.T0) return false;
        if (t * rate(p, hop.gain, cfg) < hop.data_bits) return false;
        if (p * t > hop.energy_budget) return false;
        const double delivered = hop.data_bits * success_probability(p, hop.gain, cfg);
        return delivered >= hop.required_delivery && delivered <= hop.delivery_cap;
    };

    // t is scanned on a geometric grid so short durations get the same
    // relative resolution as long ones. Each level keeps every power whose
    // least feasible t lies within kPowerKeep cells of the best, so a tie at
    // a coarse level cannot lock the zoom onto the wrong power range.
    double p_lo = 0.0, p_hi = hop.max_power, t_lo = 1e-9 * cfg.T0, t_hi = cfg.T0;
    std::optional<double> best_t;
    constexpr int kLevels = 6;
    constexpr double kWindow = 50.0;    // t zoom half-width, in cells
    constexpr double kPowerKeep = 2.0;  // t cells within which a power stays a candidate
    std::vector<double> first_t(resolution + 1);
    for (int level = 0; level < kLevels; ++level) {
        const double dp = (p_hi - p_lo) / resolution;
        const double ratio = std::pow(t_hi / t_lo, 1.0 / resolution);
        const double inf = std::numeric_limits<double>::infinity();
        std::optional<double> level_best;
        for (int i = 0; i <= resolution; ++i) {
            const double p = std::min(hop.max_power, p_lo + dp * i);
            first_t[i] = inf;
            double t = t_lo;
            for (int j = 0; j <= resolution; ++j, t *= ratio)
                if (feasible(p, t)) {
                    first_t[i] = t;
                    break;
                }
            if (first_t[i] < inf && (!level_best || first_t[i] < *level_best)) level_best = first_t[i];
        }
        if (!level_best) return best_t;
        if (!best_t || *level_best < *best_t) best_t = level_best;
        const double keep = *best_t * std::pow(ratio, kPowerKeep);
        int lo = resolution, hi = 0;
        for (int i = 0; i <= resolution; ++i)
            if (first_t[i] <= keep) {
                lo = std::min(lo, i);
                hi = std::max(hi, i);
            }
        // Powers next to the kept range may only have looked infeasible on
        // this level's t grid, so the range is padded by kWindow cells.
        const double new_lo = std::max(0.0, p_lo + dp * (lo - kWindow));
        const double new_hi = std::min(hop.max_power, p_lo + dp * (hi + kWindow));
        p_lo = new_lo;
        p_hi = new_hi;
        t_lo = *best_t / std::pow(ratio, kWindow);
        t_hi = *best_t;
    }
    return best_t;
}

/// Central-difference gradient.
inline VectorXd finite_difference_gradient(const std::function<double(const VectorXd&)>& fn, const VectorXd& point,
                                           double step) {
    VectorXd g(point.size());
    VectorXd probe = point;
    for (Eigen::Index i = 0; i < point.size(); ++i) {
        probe(i) = point(i) + step;
        const double up = fn(probe);
        probe(i) = point(i) - step;
        const double down = fn(probe);
        probe(i) = point(i);
        g(i) = (up - down) / (2.0 * step);
    }
    return g;
}

struct ChainOptimum {
    std::vector<int> slots;  // 1-based transmission slots
    double cost = 0.0;
};

/// Exhaustive search over binary x of length N (N <= 20) meeting every
/// window of tau + 1 slots. Cost of x is the sum of edge costs between
/// consecutive transmissions, starting from the virtual source 0:
/// cost(m, q) for m in [0, N], q in [1, N]; +inf marks a forbidden edge.
inline std::optional<ChainOptimum> brute_force_chain(const MatrixXd& cost, int N, int tau,
                                                     const OracleBudget& budget = {}) {
    if (N > 20 || (std::uint64_t{1} << N) > budget.max_states)
        throw std::length_error("brute_force_chain: N exceeds the enumeration cap");
    std::optional<ChainOptimum> best;
    for (std::uint64_t mask = 1; mask < (std::uint64_t{1} << N); ++mask) {
        bool ok = true;
        for (int w = 1; w + tau <= N && ok; ++w) {
            bool any = false;
            for (int i = w; i <= w + tau; ++i) any = any || ((mask >> (i - 1)) & 1U);
            ok = any;
        }
        if (!ok) continue;
        // With N <= tau no window exists; the chain still needs one hop.
        ChainOptimum c;
        int prev = 0;
        for (int q = 1; q <= N; ++q) {
            if (!((mask >> (q - 1)) & 1U)) continue;
            if (q - prev > tau + 1) {
                ok = false;
                break;
            }
            c.cost += cost(prev, q);
            c.slots.push_back(q);
            prev = q;
        }
        if (!ok || N - prev > tau || !std::isfinite(c.cost)) continue;
        if (!best || c.cost < best->cost) best = c;
    }
    return best;
}

/// Least duration of a single transmission at 1-based slot q that carries
/// the cumulative target of slot `target` (1-based) within `energy_budget`:
/// t = need / (s(p) r(p)) minimised over a uniform power grid.
inline double single_placement_delay(int q, int target, double energy_budget, const ScenarioConfig& cfg,
                                     const ChannelRealization& ch, int resolution = 20000) {
    if (resolution <= 0) throw std::length_error("single_placement_delay: resolution must be positive");
    const double need = cfg.required_delivery(target - 1);
    const double h = ch.h(q - 1, 0);
    double best = std::numeric_limits<double>::infinity();
    for (int i = 1; i <= resolution; ++i) {
        const double p = cfg.P(0) * i / resolution;
        const double s = success_probability(p, h, cfg);
        if (s <= 0.0) continue;
        const double t = need / (s * rate(p, h, cfg));
        if (t <= cfg.T0 && p * t <= energy_budget) best = std::min(best, t);
    }
    return best;
}

} // namespace dtsync::oracles
