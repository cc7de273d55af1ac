#pragma once

// Data offloading for fixed schedule and powers: a linear program in the
// offloaded bits d and per-slot delay slacks y, solved with the simplex
// kernel.
//
//   min  sum_n y_n
//   s.t. d_nk / r_nk <= y_n                           scheduled pairs
//        sum_{i<=n} sum_k s_ik d_ik >= A_n^(1/alpha) sum_{i<=n} sum_k D_ik
//        sum_n p_nk d_nk / r_nk <= Q_k
//        sum_{i<=n} s_ik d_ik <= sum_{i<=n} D_ik      per device
//        0 <= d_nk <= min(T0 r_nk, sum_{i<=n} D_ik)
//
// s_nk is the expected delivery factor exp(-m sigma^2 / (p h)). Data columns
// are expressed in units of max(D) and every row is normalised so simplex
// tolerances are relative.

#include "dtsync/convex/lp.hpp"
#include "dtsync/error.hpp"
#include "dtsync/model.hpp"

#include <string>
#include <utility>
#include <vector>

namespace dtsync {

/// Column layout of the offloading LP and the per-pair constants it uses.
struct OffloadingLpMap {
    std::vector<std::pair<int, int>> pairs;  // (n, k) per data column
    MatrixXi column;                         // N x K, -1 where d is fixed at 0
    int first_slack = 0;                     // y_n lives at first_slack + n
    double data_scale = 1.0;                 // bits per LP data unit
    MatrixXd r;                              // rates [bit/s]
    MatrixXd s;                              // expected delivery factors
};

struct OffloadingLp {
    convex::LinearProgram lp;
    OffloadingLpMap map;
    std::vector<int> accuracy_row;  // LP row of slot n's accuracy bound, -1 if absent
};

namespace detail {

inline OffloadingLp assemble_offloading(const MatrixXi& x, const MatrixXd& p, const ScenarioConfig& cfg,
                                        const ChannelRealization& ch, int accuracy_through) {
    const int N = cfg.N, K = cfg.K;
    OffloadingLp out;
    auto& map = out.map;
    map.data_scale = std::max(1.0, cfg.D.maxCoeff());
    map.r = MatrixXd::Zero(N, K);
    map.s = MatrixXd::Zero(N, K);
    map.column = MatrixXi::Constant(N, K, -1);
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k) {
            if (x(n, k) == 0) continue;
            map.r(n, k) = rate(p(n, k), ch.h(n, k), cfg);
            map.s(n, k) = success_probability(p(n, k), ch.h(n, k), cfg);
            if (map.r(n, k) > 0.0 && map.s(n, k) > 0.0) {
                map.column(n, k) = static_cast<int>(map.pairs.size());
                map.pairs.emplace_back(n, k);
            }
        }
    const int nd = static_cast<int>(map.pairs.size());
    map.first_slack = nd;
    const double scale = map.data_scale;

    auto lp = convex::LinearProgram::with_variables(nd + N);
    for (int n = 0; n < N; ++n) lp.c(nd + n) = 1.0;
    for (int j = 0; j < nd; ++j) {
        const auto [n, k] = map.pairs[j];
        lp.upper(j) = std::min(cfg.T0 * map.r(n, k), cfg.cumulative_arrivals(n, k)) / scale;
    }

    std::vector<VectorXd> rows;
    std::vector<double> rhs;
    auto add_row = [&](VectorXd row, double b) {
        rows.push_back(std::move(row));
        rhs.push_back(b);
    };

    // Delay slacks, in seconds.
    for (int j = 0; j < nd; ++j) {
        const auto [n, k] = map.pairs[j];
        VectorXd row = VectorXd::Zero(nd + N);
        row(j) = scale / map.r(n, k);
        row(nd + n) = -1.0;
        add_row(std::move(row), 0.0);
    }
    // Accuracy, as a fraction of cumulative arrivals.
    out.accuracy_row.assign(N, -1);
    for (int n = 0; n <= std::min(accuracy_through, N - 1); ++n) {
        const double need = cfg.required_delivery(n);
        if (need <= 0.0) continue;
        const double cum = cfg.cumulative_arrivals(n);
        VectorXd row = VectorXd::Zero(nd + N);
        for (int j = 0; j < nd; ++j) {
            const auto [i, k] = map.pairs[j];
            if (i <= n) row(j) = -map.s(i, k) * scale / cum;
        }
        out.accuracy_row[n] = static_cast<int>(rows.size());
        add_row(std::move(row), -need / cum);
    }
    // Energy, as a fraction of the budget.
    for (int k = 0; k < K; ++k) {
        VectorXd row = VectorXd::Zero(nd + N);
        bool any = false;
        for (int j = 0; j < nd; ++j) {
            const auto [n, kk] = map.pairs[j];
            if (kk != k) continue;
            row(j) = p(n, k) * scale / map.r(n, k) / cfg.Q(k);
            any = true;
        }
        if (any) add_row(std::move(row), 1.0);
    }
    // Cumulative delivery caps. The left side only grows at the device's
    // own columns, so a row at each of those slots implies all the others.
    for (int k = 0; k < K; ++k)
        for (int n = 0; n < N; ++n) {
            if (map.column(n, k) < 0) continue;
            const double cum = cfg.cumulative_arrivals(n, k);
            const double norm = cum > 0.0 ? cum : scale;
            VectorXd row = VectorXd::Zero(nd + N);
            for (int i = 0; i <= n; ++i)
                if (map.column(i, k) >= 0) row(map.column(i, k)) = map.s(i, k) * scale / norm;
            add_row(std::move(row), cum / norm);
        }

    lp.A.resize(static_cast<Eigen::Index>(rows.size()), nd + N);
    lp.b.resize(static_cast<Eigen::Index>(rows.size()));
    for (std::size_t i = 0; i < rows.size(); ++i) {
        lp.A.row(static_cast<Eigen::Index>(i)) = rows[i].transpose();
        lp.b(static_cast<Eigen::Index>(i)) = rhs[i];
    }
    out.lp = std::move(lp);
    return out;
}

} // namespace detail

/// Builds the offloading LP. Pairs with x = 0, or scheduled with zero rate,
/// get no column: their d is fixed at 0.
inline OffloadingLp build_offloading_lp(const MatrixXi& x, const MatrixXd& p, const ScenarioConfig& cfg,
                                        const ChannelRealization& ch) {
    return detail::assemble_offloading(x, p, cfg, ch, cfg.N - 1);
}

struct OffloadingResult {
    MatrixXd d;
    double objective = 0.0;  // sum_n max_k d_nk / r_nk
    convex::SolveStatus status;
};

/// Solves the offloading LP. Throws InfeasibleError naming the first slot
/// whose accuracy bound cannot be met together with the earlier ones.
inline OffloadingResult solve_offloading(const MatrixXi& x, const MatrixXd& p, const ScenarioConfig& cfg,
                                         const ChannelRealization& ch) {
    const OffloadingLp built = build_offloading_lp(x, p, cfg, ch);
    const auto sol = convex::simplex_solve(built.lp);
    if (sol.status.outcome == convex::SolveOutcome::infeasible) {
        // The cap and energy rows alone are satisfied by d = 0, so some
        // accuracy row is to blame; find the first prefix that fails.
        int slot = cfg.N - 1;
        for (int n = 0; n < cfg.N; ++n) {
            if (built.accuracy_row[n] < 0) continue;
            const auto part = detail::assemble_offloading(x, p, cfg, ch, n);
            if (convex::simplex_solve(part.lp).status.outcome == convex::SolveOutcome::infeasible) {
                slot = n;
                break;
            }
        }
        throw InfeasibleError("solve_offloading: accuracy target unreachable at slot " + std::to_string(slot), slot);
    }
    if (!sol.status.optimal())
        throw std::runtime_error(std::string("solve_offloading: simplex stopped with status ") + convex::to_string(sol.status.outcome));

    OffloadingResult res;
    res.status = sol.status;
    res.d = MatrixXd::Zero(cfg.N, cfg.K);
    const auto& map = built.map;
    for (std::size_t j = 0; j < map.pairs.size(); ++j) {
        const auto [n, k] = map.pairs[j];
        res.d(n, k) = std::max(0.0, sol.x(static_cast<Eigen::Index>(j)) * map.data_scale);
    }
    res.objective = total_delay(x, derive_durations(p, res.d, cfg, ch));
    return res;
}

} // namespace dtsync
