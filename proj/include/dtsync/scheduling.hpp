#pragma once

// Device scheduling for fixed durations t: choose binary x minimising
// sum_n max_k x_nk t_nk under the per-slot cap K0 and the regularity windows.
//
// The solver follows the dual method: closed-form primal recovery from the
// Lagrangian and projected subgradient steps on (lambda1, lambda2, lambda3).
// Dual iterates are not primal feasible in general, so each distinct primal
// iterate is repaired greedily and the best feasible repair is returned.

#include "dtsync/error.hpp"
#include "dtsync/model.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <vector>

namespace dtsync {

/// Multipliers of the relaxed scheduling problem. lambda1(w, k) belongs to
/// the window starting at slot w (rows past window_count() stay zero).
struct DualState {
    MatrixXd lambda1;  // N x K, >= 0
    VectorXd lambda2;  // N, >= 0
    MatrixXd lambda3;  // N x K, in [0, 1]
    int iteration = 0;
    double kappa0 = 1.0;

    static DualState zeros(const ScenarioConfig& cfg, double kappa0 = 1.0) {
        DualState s;
        s.lambda1 = MatrixXd::Zero(cfg.N, cfg.K);
        s.lambda2 = VectorXd::Zero(cfg.N);
        s.lambda3 = MatrixXd::Zero(cfg.N, cfg.K);
        s.kappa0 = kappa0;
        return s;
    }
};

/// Which Lagrangian coefficient drives primal recovery. `derived` multiplies
/// lambda3 by t (consistent with the Lagrangian); `literal` drops the factor.
enum class CoefficientForm { derived, literal };

struct PrimalPoint {
    MatrixXi x;
    VectorXd y;
};

namespace detail {

// Sum of lambda1 over the windows that contain slot n.
inline double window_multiplier(const DualState& dual, const ScenarioConfig& cfg, int n, int k) {
    double s = 0.0;
    const int last = std::min(n, cfg.window_count() - 1);
    for (int w = std::max(0, n - cfg.tau); w <= last; ++w) s += dual.lambda1(w, k);
    return s;
}

inline VectorXd slot_maxima(const MatrixXi& x, const MatrixXd& t) {
    VectorXd y = VectorXd::Zero(x.rows());
    for (int n = 0; n < x.rows(); ++n)
        for (int k = 0; k < x.cols(); ++k)
            if (x(n, k)) y(n) = std::max(y(n), t(n, k));
    return y;
}

} // namespace detail

/// Coefficient of x_nk in the Lagrangian.
inline double lagrangian_coefficient(const DualState& dual, const MatrixXd& t, const ScenarioConfig& cfg, int n,
                                     int k, CoefficientForm form = CoefficientForm::derived) {
    const double l3 = form == CoefficientForm::derived ? dual.lambda3(n, k) * t(n, k) : dual.lambda3(n, k);
    return dual.lambda2(n) + l3 - detail::window_multiplier(dual, cfg, n, k);
}

/// x_nk = 1 iff its coefficient is strictly negative; y_n = max_k x_nk t_nk.
inline PrimalPoint lemma1_primal(const DualState& dual, const MatrixXd& t, const ScenarioConfig& cfg,
                                 CoefficientForm form = CoefficientForm::derived) {
    PrimalPoint pt;
    pt.x = MatrixXi::Zero(cfg.N, cfg.K);
    for (int n = 0; n < cfg.N; ++n)
        for (int k = 0; k < cfg.K; ++k) pt.x(n, k) = lagrangian_coefficient(dual, t, cfg, n, k, form) < 0.0 ? 1 : 0;
    pt.y = detail::slot_maxima(pt.x, t);
    return pt;
}

/// Lagrangian value at (x, y) for the given multipliers.
inline double lagrangian(const DualState& dual, const MatrixXi& x, const VectorXd& y, const MatrixXd& t,
                         const ScenarioConfig& cfg) {
    double L = y.sum();
    for (int k = 0; k < cfg.K; ++k) {
        const int need = cfg.required_transmissions(k);
        for (int w = 0; w < cfg.window_count(); ++w)
            L += dual.lambda1(w, k) * (need - x.col(k).segment(w, cfg.tau + 1).sum());
    }
    for (int n = 0; n < cfg.N; ++n) {
        L += dual.lambda2(n) * (x.row(n).sum() - cfg.K0);
        for (int k = 0; k < cfg.K; ++k) L += dual.lambda3(n, k) * (x(n, k) * t(n, k) - y(n));
    }
    return L;
}

/// One projected subgradient step with stepsize kappa0 / sqrt(iteration + 1).
inline DualState dual_step(const DualState& dual, const MatrixXi& x, const VectorXd& y, const MatrixXd& t,
                           const ScenarioConfig& cfg) {
    DualState next = dual;
    next.iteration = dual.iteration + 1;
    const double step = dual.kappa0 / std::sqrt(static_cast<double>(next.iteration));
    for (int k = 0; k < cfg.K; ++k) {
        const int need = cfg.required_transmissions(k);
        for (int w = 0; w < cfg.window_count(); ++w) {
            const double g = need - x.col(k).segment(w, cfg.tau + 1).sum();
            next.lambda1(w, k) = std::max(0.0, dual.lambda1(w, k) + step * g);
        }
    }
    for (int n = 0; n < cfg.N; ++n) {
        next.lambda2(n) = std::max(0.0, dual.lambda2(n) + step * (x.row(n).sum() - cfg.K0));
        for (int k = 0; k < cfg.K; ++k)
            next.lambda3(n, k) = std::clamp(dual.lambda3(n, k) + step * (x(n, k) * t(n, k) - y(n)), 0.0, 1.0);
    }
    return next;
}

/// Feasible schedule that ignores costs: device k takes ceil(beta_k tau)
/// residues modulo tau + 1, handed out round-robin from `shift`, in the
/// given device order. Every window of tau + 1 slots then sees each residue
/// once, and no residue holds more than ceil(demand / (tau + 1)) <= K0
/// devices.
inline MatrixXi round_robin_schedule(const ScenarioConfig& cfg, const std::vector<int>& order, int shift = 0) {
    const int period = cfg.tau + 1;
    MatrixXi x = MatrixXi::Zero(cfg.N, cfg.K);
    int token = shift;
    for (int k : order) {
        for (int j = 0; j < cfg.required_transmissions(k); ++j, ++token) {
            const int residue = token % period;
            // Only reachable without windows, where validate() skips the
            // capacity check.
            if (residue < cfg.N && x.row(residue).sum() >= cfg.K0) continue;
            for (int n = residue; n < cfg.N; n += period) x(n, k) = 1;
        }
    }
    return x;
}

inline MatrixXi round_robin_schedule(const ScenarioConfig& cfg) {
    std::vector<int> order(cfg.K);
    for (int k = 0; k < cfg.K; ++k) order[k] = k;
    return round_robin_schedule(cfg, order);
}

namespace detail {

inline int window_deficit(const MatrixXi& x, const ScenarioConfig& cfg, int w, int k) {
    return cfg.required_transmissions(k) - x.col(k).segment(w, cfg.tau + 1).sum();
}

// True when removing x(n, k) keeps every window containing n satisfied.
inline bool removable(const MatrixXi& x, const ScenarioConfig& cfg, int n, int k) {
    const int last = std::min(n, cfg.window_count() - 1);
    for (int w = std::max(0, n - cfg.tau); w <= last; ++w)
        if (window_deficit(x, cfg, w, k) >= 0) return false;  // exactly met; removal breaks it
    return true;
}

inline int violations(const MatrixXi& x, const ScenarioConfig& cfg) {
    int v = 0;
    for (int n = 0; n < cfg.N; ++n) v += std::max(0, static_cast<int>(x.row(n).sum()) - cfg.K0);
    for (int k = 0; k < cfg.K; ++k)
        for (int w = 0; w < cfg.window_count(); ++w) v += std::max(0, window_deficit(x, cfg, w, k));
    return v;
}

} // namespace detail

/// Greedy repair. (a) Each under-served window gets the unscheduled slot
/// that raises that slot's delay least, preferring slots with spare
/// capacity. (b) Over-full slots drop their most expensive entries that no
/// window needs, then relocate entries to slots with spare capacity when that
/// lowers the violation count. Passes repeat until x is feasible or N K
/// passes elapse, so the result can still be infeasible; callers check.
inline MatrixXi repair_schedule(MatrixXi x, const MatrixXd& t, const ScenarioConfig& cfg) {
    const int windows = cfg.window_count();
    for (int pass = 0; pass < cfg.N * cfg.K; ++pass) {
        bool changed = false;
        VectorXd y = detail::slot_maxima(x, t);
        for (int k = 0; k < cfg.K; ++k) {
            for (int w = 0; w < windows; ++w) {
                while (detail::window_deficit(x, cfg, w, k) > 0) {
                    int pick = -1;
                    bool pick_free = false;
                    double pick_cost = 0.0;
                    for (int n = w; n <= w + cfg.tau; ++n) {
                        if (x(n, k)) continue;
                        const bool free = x.row(n).sum() < cfg.K0;
                        const double cost = std::max(0.0, t(n, k) - y(n));
                        const bool better = pick < 0 || (free && !pick_free) ||
                                            (free == pick_free && (cost < pick_cost ||
                                                                   (cost == pick_cost && t(n, k) < t(pick, k))));
                        if (better) {
                            pick = n;
                            pick_free = free;
                            pick_cost = cost;
                        }
                    }
                    x(pick, k) = 1;
                    y(pick) = std::max(y(pick), t(pick, k));
                    changed = true;
                }
            }
        }
        for (int n = 0; n < cfg.N; ++n) {
            while (x.row(n).sum() > cfg.K0) {
                int drop = -1;
                for (int k = 0; k < cfg.K; ++k)
                    if (x(n, k) && detail::removable(x, cfg, n, k) && (drop < 0 || t(n, k) > t(n, drop))) drop = k;
                if (drop >= 0) {
                    x(n, drop) = 0;
                    changed = true;
                    continue;
                }
                const int before = detail::violations(x, cfg);
                bool moved = false;
                for (int k = 0; k < cfg.K && !moved; ++k) {
                    if (!x(n, k)) continue;
                    for (int m = 0; m < cfg.N && !moved; ++m) {
                        if (x(m, k) || x.row(m).sum() >= cfg.K0) continue;
                        x(n, k) = 0;
                        x(m, k) = 1;
                        if (detail::violations(x, cfg) < before) {
                            moved = true;
                        } else {
                            x(m, k) = 0;
                            x(n, k) = 1;
                        }
                    }
                }
                if (!moved) break;
                changed = true;
            }
        }
        if (!changed || detail::violations(x, cfg) == 0) break;
    }
    return x;
}

/// Local improvement of a feasible schedule. Moves: drop an entry no window
/// needs, move an entry to another slot, and exchange the slots of two
/// devices. A move is taken only if it keeps x feasible and strictly lowers
/// the objective (drops are also taken at equal objective).
inline MatrixXi improve_schedule(MatrixXi x, const MatrixXd& t, const ScenarioConfig& cfg) {
    double best = total_delay(x, t);
    auto try_state = [&](double slack) {
        const double obj = total_delay(x, t);
        if (obj < best - slack && detail::violations(x, cfg) == 0) {
            best = obj;
            return true;
        }
        return false;
    };
    for (int round = 0; round < 4 * cfg.N * cfg.K; ++round) {
        bool improved = false;
        for (int n = 0; n < cfg.N; ++n)
            for (int k = 0; k < cfg.K; ++k)
                if (x(n, k) && detail::removable(x, cfg, n, k)) {
                    x(n, k) = 0;
                    const double obj = total_delay(x, t);
                    if (obj <= best) {
                        improved = improved || obj < best;
                        best = obj;
                    } else {
                        x(n, k) = 1;
                    }
                }
        for (int n = 0; n < cfg.N; ++n)
            for (int k = 0; k < cfg.K; ++k) {
                if (!x(n, k)) continue;
                for (int m = 0; m < cfg.N; ++m) {
                    if (x(m, k) || x.row(m).sum() >= cfg.K0) continue;
                    x(n, k) = 0;
                    x(m, k) = 1;
                    if (try_state(1e-15)) {
                        improved = true;
                        break;
                    }
                    x(m, k) = 0;
                    x(n, k) = 1;
                }
            }
        for (int n = 0; n < cfg.N; ++n)
            for (int m = n + 1; m < cfg.N; ++m)
                for (int k = 0; k < cfg.K; ++k) {
                    if (x(n, k) == x(m, k)) continue;
                    // k moves between n and m; j moves the other way.
                    const int from = x(n, k) ? n : m, to = x(n, k) ? m : n;
                    for (int j = 0; j < cfg.K; ++j) {
                        if (j == k || !x(to, j) || x(from, j)) continue;
                        x(from, k) = 0;
                        x(to, k) = 1;
                        x(to, j) = 0;
                        x(from, j) = 1;
                        if (try_state(1e-15)) {
                            improved = true;
                            break;
                        }
                        x(from, k) = 1;
                        x(to, k) = 0;
                        x(to, j) = 1;
                        x(from, j) = 0;
                    }
                }
        if (!improved) break;
    }
    return x;
}

struct SchedulingOptions {
    CoefficientForm form = CoefficientForm::derived;
    double kappa0 = 1.0;
    double dual_tol = 1e-6;  // max-norm change of the multipliers
    int max_iterations = 5000;
    int polish_candidates = 8;  // best repairs handed to local improvement
};

struct SchedulingResult {
    MatrixXi x;
    double objective = 0.0;
    int iterations = 0;
    bool dual_converged = false;
};

/// Dual method with repair. Throws InfeasibleError when the window demand
/// exceeds the resource-block capacity.
inline SchedulingResult solve_scheduling(const MatrixXd& t, const ScenarioConfig& cfg,
                                         const SchedulingOptions& opt = {}) {
    if (t.rows() != cfg.N || t.cols() != cfg.K) throw std::invalid_argument("solve_scheduling: t has the wrong shape");
    if ((t.array() < 0).any() || !t.allFinite()) throw std::invalid_argument("solve_scheduling: t must be finite, >= 0");
    if (cfg.window_count() > 0) {
        long demand = 0;
        for (int k = 0; k < cfg.K; ++k) demand += cfg.required_transmissions(k);
        if (demand > static_cast<long>(cfg.K0) * (cfg.tau + 1))
            throw InfeasibleError("solve_scheduling: window demand exceeds resource-block capacity");
    }

    SchedulingResult res;
    std::set<std::vector<int>> seen;
    std::vector<std::pair<double, MatrixXi>> pool;  // distinct feasible repairs
    auto consider = [&](const MatrixXi& raw) {
        std::vector<int> key(raw.data(), raw.data() + raw.size());
        if (!seen.insert(std::move(key)).second) return;
        MatrixXi x = repair_schedule(raw, t, cfg);
        if (detail::violations(x, cfg) == 0) pool.emplace_back(total_delay(x, t), std::move(x));
    };

    DualState dual = DualState::zeros(cfg, opt.kappa0);
    for (int it = 0; it < opt.max_iterations; ++it) {
        const PrimalPoint pt = lemma1_primal(dual, t, cfg, opt.form);
        consider(pt.x);
        const DualState next = dual_step(dual, pt.x, pt.y, t, cfg);
        const double change = std::max({(next.lambda1 - dual.lambda1).cwiseAbs().maxCoeff(),
                                        (next.lambda2 - dual.lambda2).cwiseAbs().maxCoeff(),
                                        (next.lambda3 - dual.lambda3).cwiseAbs().maxCoeff()});
        dual = next;
        res.iterations = it + 1;
        if (change < opt.dual_tol) {
            res.dual_converged = true;
            break;
        }
    }
    consider(round_robin_schedule(cfg));
    if (pool.empty()) throw InfeasibleError("solve_scheduling: no feasible schedule found");

    // Polish the most promising repairs; stable order keeps runs repeatable.
    std::stable_sort(pool.begin(), pool.end(), [](const auto& a, const auto& b) { return a.first < b.first; });
    const std::size_t polish = std::min<std::size_t>(pool.size(), static_cast<std::size_t>(opt.polish_candidates));
    bool have = false;
    for (std::size_t i = 0; i < polish; ++i) {
        MatrixXi x = improve_schedule(pool[i].second, t, cfg);
        const double obj = total_delay(x, t);
        if (!have || obj < res.objective) {
            res.x = std::move(x);
            res.objective = obj;
            have = true;
        }
    }
    return res;
}

} // namespace dtsync
