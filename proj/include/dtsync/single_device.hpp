#pragma once

// One device (K = 1) with one transmission required per window of tau + 1
// slots. The device transmits at a chain of slots; each hop m -> q has a
// closed-form optimal delay T_mq for given data, so the schedule is a
// shortest path over slots. Data and powers for a chosen chain come from
// the offloading LP and the SCA power control.
//
// Slots are numbered 1..N in this module so that node 0 can be the virtual
// source of the chain.

#include "dtsync/alternating.hpp"
#include "dtsync/error.hpp"
#include "dtsync/model.hpp"

#include <boost/math/tools/roots.hpp>

#include <cmath>
#include <limits>
#include <string>
#include <vector>

namespace dtsync {

namespace detail {

inline void require_single_device(const ScenarioConfig& cfg, const char* who) {
    if (cfg.K != 1) throw std::invalid_argument(std::string(who) + ": needs K = 1");
    if (cfg.required_transmissions(0) > 1)
        throw std::invalid_argument(std::string(who) + ": needs ceil(beta tau) = 1; use the general solver");
}

} // namespace detail

/// The best-channel slot among 1..tau+1: a single transmission there is
/// optimal for the first window.
inline int initial_slot(const ScenarioConfig& cfg, const ChannelRealization& ch) {
    detail::require_single_device(cfg, "initial_slot");
    const int last = std::min(cfg.tau + 1, cfg.N);
    int best = 1;
    for (int q = 2; q <= last; ++q)
        if (ch.h(q - 1, 0) > ch.h(best - 1, 0)) best = q;
    return best;
}

/// The power p at which sending d bits costs exactly `rhs` joules:
/// d p / (B log2(1 + p h / sigma^2)) = rhs. The left side rises from
/// d sigma^2 ln2 / (B h) at p -> 0, so smaller budgets are infeasible.
inline double pbar_solve(double d, double h, double rhs, const ScenarioConfig& cfg) {
    if (!(d > 0.0) || !(rhs > 0.0) || !(h > 0.0)) throw std::invalid_argument("pbar_solve: d, h, rhs must be positive");
    const double floor = d * cfg.sigma2 * std::log(2.0) / (cfg.B * h);
    if (rhs <= floor * (1.0 + 1e-12))
        throw InfeasibleError("pbar_solve: budget " + std::to_string(rhs) + " J is below the zero-power limit " +
                              std::to_string(floor) + " J");
    // log1p keeps the left side accurate as p h / sigma^2 -> 0.
    const double g = h / cfg.sigma2;
    auto excess = [&](double p) { return (d * p * std::log(2.0) / (cfg.B * std::log1p(p * g)) - rhs) / rhs; };
    double hi = 1.0 / g;
    while (excess(hi) <= 0.0) hi *= 2.0;
    double lo = hi * 1e-15;
    if (excess(lo) > 0.0) throw InfeasibleError("pbar_solve: budget too close to the zero-power limit");
    const auto r = boost::math::tools::bisect(excess, lo, hi, boost::math::tools::eps_tolerance<double>(60));
    // Take the endpoint with the smaller residual.
    return std::abs(excess(r.first)) <= std::abs(excess(r.second)) ? r.first : r.second;
}

/// Energy a hop arriving at slot q may spend when the previous transmission
/// was at m (0 for the source): (tau + 1) Q / (N - m).
inline double hop_energy_budget(int m, const ScenarioConfig& cfg) {
    return (cfg.tau + 1) * cfg.Q(0) / static_cast<double>(cfg.N - m);
}

/// Optimal delay of the hop m -> q carrying d bits: the power-capped time
/// d / r(P) or the energy-capped time E / pbar, whichever is longer.
inline double edge_delay(int m, int q, double d, const ScenarioConfig& cfg, const ChannelRealization& ch) {
    if (q <= m || q > cfg.N || m < 0) throw std::invalid_argument("edge_delay: need 0 <= m < q <= N");
    if (q - m > cfg.tau + 1) throw std::invalid_argument("edge_delay: gap exceeds tau + 1");
    if (d <= 0.0) return 0.0;
    const double h = ch.h(q - 1, 0);
    const double E = hop_energy_budget(m, cfg);
    return std::max(d / rate(cfg.P(0), h, cfg), E / pbar_solve(d, h, E, cfg));
}

/// T(m, q) for nodes 0..N (0 is the source); +inf marks a missing edge.
struct ChainEdgeCosts {
    int N = 0;
    int tau = 0;
    MatrixXd T;

    static ChainEdgeCosts empty(int N, int tau) {
        return {N, tau, MatrixXd::Constant(N + 1, N + 1, std::numeric_limits<double>::infinity())};
    }
    bool admissible(int m, int q) const { return m < q && q - m <= tau + 1 && q <= N; }
};

struct ChainSchedule {
    MatrixXi x;  // N x 1, 0-based slots
    std::vector<int> slots;  // 1-based transmission slots
    double cost = 0.0;
};

/// Exact minimum-cost chain: first hop lands in 1..tau+1, gaps are at most
/// tau + 1 and the last transmission is within tau of slot N.
inline ChainSchedule chain_schedule(const ChainEdgeCosts& e) {
    const int N = e.N;
    const double inf = std::numeric_limits<double>::infinity();
    std::vector<double> best(N + 1, inf);
    std::vector<int> prev(N + 1, -1);
    best[0] = 0.0;
    for (int q = 1; q <= N; ++q)
        for (int m = std::max(0, q - e.tau - 1); m < q; ++m) {
            if (!std::isfinite(best[m]) || !std::isfinite(e.T(m, q))) continue;
            const double c = best[m] + e.T(m, q);
            if (c < best[q]) {
                best[q] = c;
                prev[q] = m;
            }
        }
    int end = -1;
    for (int q = std::max(1, N - e.tau); q <= N; ++q)
        if (std::isfinite(best[q]) && (end < 0 || best[q] < best[end])) end = q;
    if (end < 0) throw InfeasibleError("chain_schedule: no admissible transmission chain");

    ChainSchedule out;
    out.cost = best[end];
    out.x = MatrixXi::Zero(N, 1);
    for (int q = end; q > 0; q = prev[q]) out.slots.insert(out.slots.begin(), q);
    for (int q : out.slots) out.x(q - 1, 0) = 1;
    return out;
}

/// Edge costs for per-slot data d (length N). Source edges into q are
/// dropped when an earlier slot already needs delivered data, since nothing
/// could have arrived by then. Hops whose budget cannot carry the data are
/// dropped too.
inline ChainEdgeCosts build_edge_costs(const VectorXd& d, const ScenarioConfig& cfg, const ChannelRealization& ch) {
    auto e = ChainEdgeCosts::empty(cfg.N, cfg.tau);
    int first_need = cfg.N + 1;  // first 1-based slot with a positive target
    for (int n = 1; n <= cfg.N; ++n)
        if (cfg.required_delivery(n - 1) > 0.0) {
            first_need = n;
            break;
        }
    for (int m = 0; m < cfg.N; ++m)
        for (int q = m + 1; q <= std::min(cfg.N, m + cfg.tau + 1); ++q) {
            if (m == 0 && q > first_need) continue;
            try {
                e.T(m, q) = edge_delay(m, q, d(q - 1), cfg, ch);
            } catch (const InfeasibleError&) {
            }
        }
    return e;
}

struct SingleDeviceResult {
    Allocation allocation;
    std::vector<double> trace;  // delay of the incumbent after each round
    int rounds = 0;
    bool converged = false;
};

namespace detail {

// Adds transmissions at the slots the offloading LP reports as unreachable
// until the schedule carries the accuracy targets (or every slot is used).
inline Allocation refine_chain(MatrixXi x, const ScenarioConfig& cfg, const ChannelRealization& ch) {
    while (true) {
        try {
            return refine_fixed_schedule(x, cfg, ch);
        } catch (const InfeasibleError& e) {
            const int n = e.slot().value_or(-1);
            if (n < 0 || x(n, 0) == 1) {
                // Fill the latest idle slot at or before n instead.
                int k = n < 0 ? cfg.N - 1 : n;
                while (k >= 0 && x(k, 0) == 1) --k;
                if (k < 0) throw;
                x(k, 0) = 1;
            } else {
                x(n, 0) = 1;
            }
        }
    }
}

} // namespace detail

/// Single-device pipeline: starting from a feasible allocation, alternate
/// the shortest-path schedule (edge costs from the current data, with the
/// mean active load standing in on idle slots) and the data/power
/// refinement on that schedule. A round's result replaces the incumbent
/// only when it lowers the delay.
inline SingleDeviceResult solve_single_device(const ScenarioConfig& cfg, const ChannelRealization& ch,
                                              int max_rounds = 20, double rel_tol = 1e-4) {
    detail::require_single_device(cfg, "solve_single_device");
    SingleDeviceResult res;
    Allocation cur = refine_fixed_schedule(initialize_feasible(cfg, ch).x, cfg, ch);
    double obj = evaluate(cur, cfg, ch).total_delay;
    res.trace.push_back(obj);

    for (int round = 0; round < max_rounds; ++round) {
        res.rounds = round + 1;
        const double before = obj;
        VectorXd d = cur.d.col(0);
        double load = 0.0;
        int active = 0;
        for (int n = 0; n < cfg.N; ++n)
            if (d(n) > 0.0) {
                load += d(n);
                ++active;
            }
        if (active > 0) load /= active;
        for (int n = 0; n < cfg.N; ++n)
            if (d(n) <= 0.0) d(n) = load;

        try {
            const auto chain = chain_schedule(build_edge_costs(d, cfg, ch));
            const Allocation cand = detail::refine_chain(chain.x, cfg, ch);
            const auto ev = evaluate(cand, cfg, ch);
            if (ev.report.feasible() && ev.total_delay < obj) {
                cur = cand;
                obj = ev.total_delay;
            }
        } catch (const InfeasibleError&) {
        }
        res.trace.push_back(obj);
        if (before - obj <= rel_tol * std::max(before, 1e-300)) {
            res.converged = true;
            break;
        }
    }
    res.allocation = cur;
    return res;
}

} // namespace dtsync
