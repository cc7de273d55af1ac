#pragma once

// Power control for a fixed schedule x and offloaded data d.
//
// With q = t p the per-link constraints become convex in (q, t) except for
// the expected delivery exp(-m sigma^2 t / (q h)), which is replaced by its
// first-order Taylor expansion around the current iterate. The resulting
// convex program is solved with the barrier kernel and re-linearised until
// the objective stops improving (successive convex approximation).
//
// Internally q is stored as u = q / P_k so every variable is in seconds.

#include "dtsync/convex/barrier.hpp"
#include "dtsync/error.hpp"
#include "dtsync/model.hpp"

#include <cmath>
#include <optional>
#include <string>
#include <utility>
#include <vector>

namespace dtsync {

inline constexpr double kMinDuration = 1e-9;         // floor on t where d > 0
inline constexpr double kLinearizationRelax = 1e-7;  // relative slack on linearised rows
inline constexpr double kTrueFeasibilityTol = 1e-7;  // relative, for the unlinearised check

/// exp(-a t / q) with a = m sigma^2 / h, linearised at (q0, t0):
/// E0 (1 - a/q0 (t - t0) + a t0/q0^2 (q - q0)),  E0 = exp(-a t0 / q0).
inline double taylor_expected_success(double q, double t, double q0, double t0, double h, const ScenarioConfig& cfg) {
    if (!(q0 > 0.0)) throw std::invalid_argument("taylor_expected_success: q0 must be positive");
    const double a = cfg.m * cfg.sigma2 / h;
    const double E0 = std::exp(-a * t0 / q0);
    return E0 * (1.0 - a / q0 * (t - t0) + a * t0 / (q0 * q0) * (q - q0));
}

/// The unlinearised expected delivery factor in (q, t) form.
inline double expected_success_qt(double q, double t, double h, const ScenarioConfig& cfg) {
    if (q <= 0.0) return 0.0;
    return std::exp(-cfg.m * cfg.sigma2 * t / (q * h));
}

/// Expansion point of the SCA loop.
struct ScaIterate {
    MatrixXd q;  // N x K energy [J]
    MatrixXd t;  // N x K duration [s]
    VectorXd z;  // N slot delays [s]
    std::vector<double> trace;
};

/// The convex subproblem plus the layout needed to read its solution.
struct ScaProgram {
    convex::SmoothConvexProgram prog;
    std::vector<std::pair<int, int>> pairs;  // (n, k) with x = 1 and d > 0
    std::vector<int> z_index;                // per slot, -1 without active pairs
    VectorXd expansion;                      // the iterate in program coordinates
};

namespace detail {

inline int u_var(int j) { return 2 * j; }
inline int t_var(int j) { return 2 * j + 1; }

// 1 - (B/d) t log2(1 + gamma u / t) <= 0, the perspective of the rate.
inline convex::SmoothFunction rate_constraint(int iu, int it, double gamma, double c) {
    return [=](const VectorXd& v, convex::Derivatives* out) {
        const double u = v(iu), t = v(it);
        if (!(t > 0.0) || !(u >= 0.0)) return std::numeric_limits<double>::infinity();
        const double w = gamma * u / t;
        const double lw = std::log1p(w);
        if (out) {
            out->gradient.emplace_back(iu, -c * gamma / (1.0 + w));
            out->gradient.emplace_back(it, -c * (lw - w / (1.0 + w)));
            const double s = u / t;
            const double k = c * gamma * gamma / ((1.0 + w) * (1.0 + w) * t);
            out->hessian.emplace_back(iu, iu, k);
            out->hessian.emplace_back(iu, it, -k * s);
            out->hessian.emplace_back(it, iu, -k * s);
            out->hessian.emplace_back(it, it, k * s * s);
        }
        return 1.0 - c * t * lw;
    };
}

} // namespace detail

/// Builds the linearised convex program at `iterate`. Variables exist only
/// for pairs with x = 1 and d > 0; everything else is fixed at zero.
inline ScaProgram build_sca_subproblem(const MatrixXi& x, const MatrixXd& d, const ScaIterate& iterate,
                                       const ScenarioConfig& cfg, const ChannelRealization& ch,
                                       double relax = kLinearizationRelax) {
    const int N = cfg.N, K = cfg.K;
    ScaProgram out;
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
            if (x(n, k) && d(n, k) > 0.0) out.pairs.emplace_back(n, k);
    const int np = static_cast<int>(out.pairs.size());
    out.z_index.assign(N, -1);
    int dim = 2 * np;
    for (const auto& [n, k] : out.pairs)
        if (out.z_index[n] < 0) out.z_index[n] = dim++;

    auto prog = convex::SmoothConvexProgram::unbounded_box(dim);
    out.expansion = VectorXd::Zero(dim);
    std::vector<std::pair<int, double>> obj;
    for (int n = 0; n < N; ++n)
        if (out.z_index[n] >= 0) {
            obj.emplace_back(out.z_index[n], 1.0);
            // Slot delays never need to exceed T0; a finite cap keeps
            // phase I from pushing them off to infinity.
            prog.lower(out.z_index[n]) = 0.0;
            prog.upper(out.z_index[n]) = 2.0 * cfg.T0;
        }
    prog.objective = convex::linear_function(obj);

    // Linearisation data per pair: s~ = E0 (1 - (a/q0) t + (a t0/q0^2) q).
    std::vector<double> E0(np), ct(np), cu(np);
    for (int j = 0; j < np; ++j) {
        const auto [n, k] = out.pairs[j];
        const double h = ch.h(n, k);
        double q0 = iterate.q(n, k);
        if (!(q0 > 0.0)) q0 = 1e-6 * cfg.Q(k);
        const double t0 = std::max(iterate.t(n, k), kMinDuration);
        const double a = cfg.m * cfg.sigma2 / h;
        E0[j] = std::exp(-a * t0 / q0);
        ct[j] = -E0[j] * a / q0;                           // per second of t
        cu[j] = E0[j] * a * t0 / (q0 * q0) * cfg.P(k);     // per unit of u
        out.expansion(detail::u_var(j)) = q0 / cfg.P(k);
        out.expansion(detail::t_var(j)) = t0;

        double& z0 = out.expansion(out.z_index[n]);
        z0 = std::max(z0, t0 * (1.0 + 1e-6));
        prog.lower(detail::u_var(j)) = 0.0;
        prog.lower(detail::t_var(j)) = kMinDuration;
        prog.upper(detail::t_var(j)) = cfg.T0;

        prog.constraints.push_back(
            convex::linear_function({{detail::t_var(j), 1.0}, {out.z_index[n], -1.0}}));
        prog.constraints.push_back(convex::linear_function({{detail::u_var(j), 1.0}, {detail::t_var(j), -1.0}}));
        const double gamma = cfg.P(k) * h / cfg.sigma2;
        prog.constraints.push_back(
            detail::rate_constraint(detail::u_var(j), detail::t_var(j), gamma, cfg.B / (d(n, k) * std::log(2.0))));
    }

    // Accuracy: (1 - relax) - sum_{i<=n} d s~ / need <= 0.
    for (int n = 0; n < N; ++n) {
        const double need = cfg.required_delivery(n);
        if (need <= 0.0) continue;
        std::vector<std::pair<int, double>> coeffs;
        double constant = 1.0 - relax;
        for (int j = 0; j < np; ++j) {
            const auto [i, k] = out.pairs[j];
            if (i > n) continue;
            const double w = d(i, k) / need;
            constant -= w * E0[j];
            coeffs.emplace_back(detail::t_var(j), -w * ct[j]);
            coeffs.emplace_back(detail::u_var(j), -w * cu[j]);
        }
        prog.constraints.push_back(convex::linear_function(std::move(coeffs), constant));
    }
    // Cumulative delivery caps at each device's active slots, relative.
    for (int k = 0; k < K; ++k)
        for (int jn = 0; jn < np; ++jn) {
            const auto [n, kk] = out.pairs[jn];
            if (kk != k) continue;
            const double cum = cfg.cumulative_arrivals(n, k);
            const double norm = cum > 0.0 ? cum : std::max(1.0, cfg.D.maxCoeff());
            std::vector<std::pair<int, double>> coeffs;
            double constant = -cum / norm - relax;
            for (int j = 0; j < np; ++j) {
                const auto [i, k2] = out.pairs[j];
                if (k2 != k || i > n) continue;
                const double w = d(i, k) / norm;
                constant += w * E0[j];
                coeffs.emplace_back(detail::t_var(j), w * ct[j]);
                coeffs.emplace_back(detail::u_var(j), w * cu[j]);
            }
            prog.constraints.push_back(convex::linear_function(std::move(coeffs), constant));
        }
    // Energy, as a fraction of the budget.
    for (int k = 0; k < K; ++k) {
        std::vector<std::pair<int, double>> coeffs;
        for (int j = 0; j < np; ++j)
            if (out.pairs[j].second == k) coeffs.emplace_back(detail::u_var(j), cfg.P(k) / cfg.Q(k));
        if (!coeffs.empty()) prog.constraints.push_back(convex::linear_function(std::move(coeffs), -1.0));
    }
    out.prog = std::move(prog);
    return out;
}

struct PowerControlOptions {
    double improvement_tol = 1e-6;  // relative, between SCA rounds
    int max_rounds = 30;
    int max_backtracks = 30;
};

struct PowerControlResult {
    MatrixXd p;              // recovered powers, 0 where d = 0
    MatrixXd t;              // d / r(p)
    double objective = 0.0;  // sum_n max_k x t at the returned point
    std::vector<double> trace;  // SCA objective (sum of slot maxima of the t variables) per accepted iterate
    int rounds = 0;
    bool converged = false;
};

namespace detail {

struct ScaChecker {
    const ScaProgram& sp;
    const MatrixXd& d;
    const ScenarioConfig& cfg;
    const ChannelRealization& ch;

    double objective(const VectorXd& v) const {
        VectorXd slot = VectorXd::Zero(cfg.N);
        for (std::size_t j = 0; j < sp.pairs.size(); ++j) {
            const int n = sp.pairs[j].first;
            slot(n) = std::max(slot(n), v(t_var(static_cast<int>(j))));
        }
        return slot.sum();
    }

    // The unlinearised constraints at v, with relative tolerance.
    bool feasible(const VectorXd& v) const {
        const double tol = kTrueFeasibilityTol;
        const int np = static_cast<int>(sp.pairs.size());
        VectorXd energy = VectorXd::Zero(cfg.K);
        MatrixXd delivered = MatrixXd::Zero(cfg.N, cfg.K);
        for (int j = 0; j < np; ++j) {
            const auto [n, k] = sp.pairs[j];
            const double u = v(u_var(j)), t = v(t_var(j));
            if (!(u > 0.0) || !(t >= kMinDuration * (1.0 - 1e-12)) || t > cfg.T0 * (1.0 + 1e-12)) return false;
            if (u > t * (1.0 + 1e-12)) return false;
            const double gamma = cfg.P(k) * ch.h(n, k) / cfg.sigma2;
            if (cfg.B * t * std::log2(1.0 + gamma * u / t) < d(n, k) * (1.0 - 1e-12)) return false;
            energy(k) += u * cfg.P(k);
            delivered(n, k) = d(n, k) * expected_success_qt(u * cfg.P(k), t, ch.h(n, k), cfg);
        }
        for (int k = 0; k < cfg.K; ++k)
            if (energy(k) > cfg.Q(k) * (1.0 + 1e-9)) return false;
        double cum = 0.0;
        for (int n = 0; n < cfg.N; ++n) {
            cum += delivered.row(n).sum();
            if (cum < cfg.required_delivery(n) * (1.0 - tol)) return false;
        }
        for (int k = 0; k < cfg.K; ++k) {
            double got = 0.0;
            for (int n = 0; n < cfg.N; ++n) {
                got += delivered(n, k);
                if (got > cfg.cumulative_arrivals(n, k) * (1.0 + tol)) return false;
            }
        }
        return true;
    }
};

} // namespace detail

/// SCA power control. `init` gives starting powers on the scheduled pairs
/// (full power where absent or zero). Throws InfeasibleError naming the first
/// slot whose accuracy target is out of reach even at full power, or when a
/// pair cannot carry its data within T0 at full power.
inline PowerControlResult solve_power_control(const MatrixXi& x, const MatrixXd& d, const ScenarioConfig& cfg,
                                              const ChannelRealization& ch,
                                              const std::optional<MatrixXd>& init = std::nullopt,
                                              const PowerControlOptions& opt = {}) {
    const int N = cfg.N, K = cfg.K;
    if (x.rows() != N || x.cols() != K || d.rows() != N || d.cols() != K)
        throw std::invalid_argument("solve_power_control: shape mismatch");

    // Full power maximises every delivery factor, so it decides reachability.
    {
        double cum = 0.0;
        for (int n = 0; n < N; ++n) {
            for (int k = 0; k < K; ++k) {
                if (!x(n, k) || d(n, k) <= 0.0) continue;
                if (d(n, k) / rate(cfg.P(k), ch.h(n, k), cfg) > cfg.T0 * (1.0 + 1e-12))
                    throw InfeasibleError("solve_power_control: slot " + std::to_string(n) + " device " +
                                              std::to_string(k) + " cannot carry its data within T0",
                                          n);
                cum += d(n, k) * success_probability(cfg.P(k), ch.h(n, k), cfg);
            }
            if (cum < cfg.required_delivery(n) * (1.0 - kTrueFeasibilityTol))
                throw InfeasibleError("solve_power_control: accuracy target unreachable at slot " + std::to_string(n),
                                      n);
        }
    }

    ScaIterate it;
    it.q = MatrixXd::Zero(N, K);
    it.t = MatrixXd::Zero(N, K);
    it.z = VectorXd::Zero(N);
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k) {
            if (!x(n, k) || d(n, k) <= 0.0) continue;
            double p = init && (*init)(n, k) > 0.0 ? std::min((*init)(n, k), cfg.P(k)) : cfg.P(k);
            double t = d(n, k) / rate(p, ch.h(n, k), cfg);
            if (!(t <= cfg.T0)) {
                p = cfg.P(k);
                t = d(n, k) / rate(p, ch.h(n, k), cfg);
            }
            t = std::clamp(t, kMinDuration, cfg.T0);
            it.t(n, k) = t;
            it.q(n, k) = p * t;
            it.z(n) = std::max(it.z(n), t);
        }

    PowerControlResult res;
    ScaProgram sp = build_sca_subproblem(x, d, it, cfg, ch);
    VectorXd cur = sp.expansion;
    bool cur_ok = detail::ScaChecker{sp, d, cfg, ch}.feasible(cur);
    double cur_obj = detail::ScaChecker{sp, d, cfg, ch}.objective(cur);
    if (cur_ok) res.trace.push_back(cur_obj);

    auto write_back = [&](const VectorXd& v) {
        for (std::size_t j = 0; j < sp.pairs.size(); ++j) {
            const auto [n, k] = sp.pairs[j];
            it.q(n, k) = v(detail::u_var(static_cast<int>(j))) * cfg.P(k);
            it.t(n, k) = v(detail::t_var(static_cast<int>(j)));
        }
        for (int n = 0; n < N; ++n)
            if (sp.z_index[n] >= 0) it.z(n) = v(sp.z_index[n]);
    };

    for (int round = 0; round < opt.max_rounds && !sp.pairs.empty(); ++round) {
        res.rounds = round + 1;
        const auto start = convex::find_strictly_feasible(sp.prog, cur);
        if (!start) {
            if (cur_ok) {
                res.converged = true;
                break;
            }
            throw InfeasibleError("solve_power_control: linearised program has no interior");
        }
        const auto sol = convex::barrier_solve(sp.prog, *start);
        const detail::ScaChecker check{sp, d, cfg, ch};
        VectorXd next = sol.x;
        // Slot delays follow from the durations.
        auto settle = [&](VectorXd& v) {
            for (int n = 0; n < N; ++n)
                if (sp.z_index[n] >= 0) v(sp.z_index[n]) = 0.0;
            for (std::size_t j = 0; j < sp.pairs.size(); ++j) {
                const int zi = sp.z_index[sp.pairs[j].first];
                v(zi) = std::max(v(zi), v(detail::t_var(static_cast<int>(j))));
            }
        };
        settle(next);

        if (cur_ok) {
            // Pull the step back toward the last true-feasible iterate until
            // the unlinearised constraints hold and the objective has not
            // risen.
            bool accepted = false;
            double theta = 1.0;
            for (int b = 0; b <= opt.max_backtracks; ++b, theta *= 0.5) {
                VectorXd trial = cur + theta * (next - cur);
                settle(trial);
                if (check.feasible(trial) && check.objective(trial) <= cur_obj) {
                    next = trial;
                    accepted = true;
                    break;
                }
            }
            if (!accepted) {
                res.converged = true;
                break;
            }
            const double obj = check.objective(next);
            const double gain = cur_obj - obj;
            cur = next;
            cur_obj = obj;
            res.trace.push_back(obj);
            write_back(cur);
            if (gain <= opt.improvement_tol * std::max(cur_obj, 1e-12)) {
                res.converged = true;
                break;
            }
        } else {
            cur = next;
            cur_obj = check.objective(cur);
            cur_ok = check.feasible(cur);
            if (cur_ok) res.trace.push_back(cur_obj);
            write_back(cur);
        }
        sp = build_sca_subproblem(x, d, it, cfg, ch);
        cur = sp.expansion;
        // Rebuilding clamps nothing for a feasible iterate; keep the value.
        cur_obj = detail::ScaChecker{sp, d, cfg, ch}.objective(cur);
    }
    if (!cur_ok) throw InfeasibleError("solve_power_control: no feasible power allocation found");

    res.p = MatrixXd::Zero(N, K);
    for (std::size_t j = 0; j < sp.pairs.size(); ++j) {
        const auto [n, k] = sp.pairs[j];
        const double u = cur(detail::u_var(static_cast<int>(j))), t = cur(detail::t_var(static_cast<int>(j)));
        res.p(n, k) = std::min(u * cfg.P(k) / t, cfg.P(k));
    }
    res.t = derive_durations(res.p, d, cfg, ch);
    res.objective = total_delay(x, res.t);
    return res;
}

} // namespace dtsync
