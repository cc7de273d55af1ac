#pragma once

// Alternating optimisation over the three blocks: schedule x, powers p and
// offloaded data d. Each stage is kept only when the joint objective does
// not rise and the allocation stays feasible, so the trace is monotone even
// though the scheduling stage is a heuristic.

#include "dtsync/error.hpp"
#include "dtsync/model.hpp"
#include "dtsync/offloading.hpp"
#include "dtsync/power_control.hpp"
#include "dtsync/scheduling.hpp"

#include <algorithm>
#include <array>
#include <chrono>
#include <numeric>
#include <optional>
#include <string>
#include <vector>

namespace dtsync {

/// Adds every free resource block to the schedule, best channel first.
/// Extra pairs carry no data unless the offloading LP chooses them, so this
/// never raises the delay of a given (p, d).
inline MatrixXi fill_free_blocks(MatrixXi x, const ScenarioConfig& cfg, const ChannelRealization& ch) {
    for (int n = 0; n < cfg.N; ++n) {
        std::vector<int> order(cfg.K);
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](int a, int b) { return ch.h(n, a) > ch.h(n, b); });
        int used = x.row(n).sum();
        for (int k : order) {
            if (used >= cfg.K0) break;
            if (x(n, k) == 0) {
                x(n, k) = 1;
                ++used;
            }
        }
    }
    return x;
}

/// Full power on scheduled pairs, zero elsewhere.
inline MatrixXd full_power(const MatrixXi& x, const ScenarioConfig& cfg) {
    MatrixXd p = MatrixXd::Zero(cfg.N, cfg.K);
    for (int n = 0; n < cfg.N; ++n)
        for (int k = 0; k < cfg.K; ++k)
            if (x(n, k)) p(n, k) = cfg.P(k);
    return p;
}

/// Round-robin schedules, tried in turn: devices by descending mean gain and
/// in index order, each at every residue shift, each with free blocks
/// filled. Powers are P_k and d comes from the offloading LP. Throws the
/// last InfeasibleError when no variant admits the accuracy targets.
inline Allocation initialize_feasible(const ScenarioConfig& cfg, const ChannelRealization& ch) {
    if (cfg.window_count() > 0) {
        long demand = 0;
        for (int k = 0; k < cfg.K; ++k) demand += cfg.required_transmissions(k);
        if (demand > static_cast<long>(cfg.K0) * (cfg.tau + 1))
            throw InfeasibleError("initialize_feasible: " + std::to_string(demand) +
                                  " transmissions per window exceed the resource-block capacity");
    }
    cfg.validate();
    std::vector<int> by_index(cfg.K), by_gain(cfg.K);
    std::iota(by_index.begin(), by_index.end(), 0);
    by_gain = by_index;
    const VectorXd mean_gain = ch.h.colwise().mean().transpose();
    std::stable_sort(by_gain.begin(), by_gain.end(), [&](int a, int b) { return mean_gain(a) > mean_gain(b); });

    std::optional<InfeasibleError> last;
    for (const auto* order : {&by_gain, &by_index})
        for (int shift = 0; shift <= cfg.tau; ++shift) {
            const MatrixXi x = fill_free_blocks(round_robin_schedule(cfg, *order, shift), cfg, ch);
            if (!schedule_feasible(x, cfg)) continue;
            const MatrixXd p = full_power(x, cfg);
            try {
                const auto off = solve_offloading(x, p, cfg, ch);
                Allocation a{x, p, off.d, {}};
                refresh_durations(a, cfg, ch);
                return a;
            } catch (const InfeasibleError& e) {
                last = e;
            }
        }
    if (last) throw *last;
    throw InfeasibleError("initialize_feasible: no feasible round-robin schedule");
}

/// Power control and offloading alternated for a fixed schedule, starting
/// from `p0` (full power when absent). Steps that raise the delay or break
/// feasibility are discarded. Throws InfeasibleError when the accuracy
/// targets cannot be met on this schedule.
inline Allocation refine_fixed_schedule(const MatrixXi& x, const ScenarioConfig& cfg, const ChannelRealization& ch,
                                        const std::optional<MatrixXd>& p0 = std::nullopt, int max_rounds = 10,
                                        double rel_tol = 1e-6, const PowerControlOptions& power = {}) {
    MatrixXd p = p0 ? *p0 : full_power(x, cfg);
    Allocation cur{x, p, solve_offloading(x, p, cfg, ch).d, {}};
    refresh_durations(cur, cfg, ch);
    auto ev = evaluate(cur, cfg, ch);
    if (!ev.report.feasible())
        throw InfeasibleError("refine_fixed_schedule: start violates " + ev.report.first_failure());
    double obj = ev.total_delay;
    for (int round = 0; round < max_rounds; ++round) {
        const double before = obj;
        try {
            const auto pc = solve_power_control(x, cur.d, cfg, ch, cur.p, power);
            MatrixXd np = pc.p;
            for (int n = 0; n < cfg.N; ++n)
                for (int k = 0; k < cfg.K; ++k)
                    if (x(n, k) && cur.d(n, k) <= 0.0) np(n, k) = cur.p(n, k);
            Allocation cand{x, np, solve_offloading(x, np, cfg, ch).d, {}};
            refresh_durations(cand, cfg, ch);
            const auto cev = evaluate(cand, cfg, ch);
            if (cev.report.feasible() && cev.total_delay <= obj) {
                cur = std::move(cand);
                obj = cev.total_delay;
            }
        } catch (const InfeasibleError&) {
            break;
        }
        if (before - obj <= rel_tol * std::max(before, 1e-300)) break;
    }
    return cur;
}

struct AlternatingOptions {
    int max_outer = 50;
    double rel_tol = 1e-4;
    SchedulingOptions scheduling;
    PowerControlOptions power;
};

enum class Stage { schedule, power, offload };

inline const char* to_string(Stage s) {
    switch (s) {
    case Stage::schedule: return "schedule";
    case Stage::power: return "power";
    case Stage::offload: return "offload";
    }
    return "?";
}

struct StageOutcome {
    bool accepted = false;
    std::string status;  // "improved", "kept", "infeasible: ..." or "error: ..."
    double wall_ms = 0.0;
};

struct AlternatingTrace {
    std::vector<double> objective;                   // [0] is the initial point
    std::vector<std::array<StageOutcome, 3>> stages; // one entry per outer iteration
    bool converged = false;
    int iterations = 0;
};

struct ExperimentResult {
    std::string algorithm;
    double total_delay = 0.0;
    double total_energy = 0.0;
    double min_accuracy = 1.0;
    FeasibilityReport report;
    int outer_iterations = 0;
    bool converged = false;
    std::string status = "ok";
    std::vector<double> trace;
    double wall_ms = 0.0;
};

inline ExperimentResult summarize(const std::string& algorithm, const Allocation& a, const ScenarioConfig& cfg,
                                  const ChannelRealization& ch, const EvaluationOptions& eval = {}) {
    const auto ev = evaluate(a, cfg, ch, eval);
    ExperimentResult r;
    r.algorithm = algorithm;
    r.total_delay = ev.total_delay;
    r.total_energy = ev.total_energy;
    r.min_accuracy = ev.min_accuracy;
    r.report = ev.report;
    r.status = ev.report.feasible() ? "ok" : "infeasible:" + ev.report.first_failure();
    return r;
}

struct AlternatingSolution {
    Allocation allocation;
    AlternatingTrace trace;
    ExperimentResult result;
};

namespace detail {

// Cost the scheduler sees: the current duration where a pair carries data,
// otherwise the time it would need at full power for the mean active load.
inline MatrixXd scheduling_costs(const Allocation& a, const ScenarioConfig& cfg, const ChannelRealization& ch) {
    double load = 0.0;
    int active = 0;
    for (int n = 0; n < cfg.N; ++n)
        for (int k = 0; k < cfg.K; ++k)
            if (a.d(n, k) > 0.0) {
                load += a.d(n, k);
                ++active;
            }
    load = active > 0 ? load / active : 0.0;
    MatrixXd t(cfg.N, cfg.K);
    for (int n = 0; n < cfg.N; ++n)
        for (int k = 0; k < cfg.K; ++k)
            t(n, k) = a.d(n, k) > 0.0 ? a.t(n, k) : load / rate(cfg.P(k), ch.h(n, k), cfg);
    return t;
}

} // namespace detail

/// Alternates scheduling, power control and offloading from a feasible start
/// until the relative objective change drops below rel_tol or max_outer
/// iterations pass.
inline AlternatingSolution solve(const ScenarioConfig& cfg, const ChannelRealization& ch,
                                 const AlternatingOptions& opt = {}) {
    using Clock = std::chrono::steady_clock;
    const auto started = Clock::now();
    AlternatingSolution out;
    Allocation cur = initialize_feasible(cfg, ch);
    double cur_obj = evaluate(cur, cfg, ch).total_delay;
    out.trace.objective.push_back(cur_obj);

    // Keeps `cand` when it is feasible and no worse than the incumbent.
    auto offer = [&](Allocation cand, StageOutcome& so) {
        refresh_durations(cand, cfg, ch);
        const auto ev = evaluate(cand, cfg, ch);
        if (!ev.report.feasible()) {
            so.status = "rejected: " + ev.report.first_failure();
            return;
        }
        if (ev.total_delay <= cur_obj) {
            so.accepted = true;
            so.status = ev.total_delay < cur_obj ? "improved" : "kept";
            cur = std::move(cand);
            cur_obj = ev.total_delay;
        } else {
            so.status = "rejected: objective rose";
        }
    };
    auto run_stage = [&](StageOutcome& so, auto&& body) {
        const auto t0 = Clock::now();
        try {
            body(so);
        } catch (const InfeasibleError& e) {
            so.status = std::string("infeasible: ") + e.what();
        } catch (const std::exception& e) {
            so.status = std::string("error: ") + e.what();
        }
        so.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
    };

    for (int it = 0; it < opt.max_outer; ++it) {
        const double before = cur_obj;
        std::array<StageOutcome, 3> st;
        run_stage(st[0], [&](StageOutcome& so) {
            const auto sched = solve_scheduling(detail::scheduling_costs(cur, cfg, ch), cfg, opt.scheduling);
            const MatrixXi x = fill_free_blocks(sched.x, cfg, ch);
            MatrixXd p = full_power(x, cfg);
            for (int n = 0; n < cfg.N; ++n)
                for (int k = 0; k < cfg.K; ++k)
                    if (x(n, k) && cur.p(n, k) > 0.0) p(n, k) = cur.p(n, k);
            const auto off = solve_offloading(x, p, cfg, ch);
            offer(Allocation{x, p, off.d, {}}, so);
        });
        run_stage(st[1], [&](StageOutcome& so) {
            const auto pc = solve_power_control(cur.x, cur.d, cfg, ch, cur.p, opt.power);
            MatrixXd p = pc.p;
            // Idle scheduled pairs keep their power so later stages may use them.
            for (int n = 0; n < cfg.N; ++n)
                for (int k = 0; k < cfg.K; ++k)
                    if (cur.x(n, k) && cur.d(n, k) <= 0.0) p(n, k) = cur.p(n, k);
            offer(Allocation{cur.x, p, cur.d, {}}, so);
        });
        run_stage(st[2], [&](StageOutcome& so) {
            const auto off = solve_offloading(cur.x, cur.p, cfg, ch);
            offer(Allocation{cur.x, cur.p, off.d, {}}, so);
        });
        out.trace.stages.push_back(st);
        out.trace.objective.push_back(cur_obj);
        out.trace.iterations = it + 1;
        if (before - cur_obj <= opt.rel_tol * std::max(before, 1e-300)) {
            out.trace.converged = true;
            break;
        }
    }
    if (opt.max_outer == 0) out.trace.converged = true;

    out.allocation = cur;
    out.result = summarize("proposed", cur, cfg, ch);
    out.result.outer_iterations = out.trace.iterations;
    out.result.converged = out.trace.converged;
    out.result.trace = out.trace.objective;
    out.result.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
    return out;
}

} // namespace dtsync
