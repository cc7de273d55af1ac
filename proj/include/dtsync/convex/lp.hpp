#pragma once

// Dense two-phase tableau simplex for
//
//     minimize    c.v
//     subject to  A v <= b,  lower <= v <= upper
//
// Bounds may be infinite. Entering columns are chosen by Dantzig's rule and
// the solver switches permanently to Bland's smallest-index rule after a run
// of degenerate pivots, so it cannot cycle.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

namespace dtsync::convex {

using Eigen::MatrixXd;
using Eigen::VectorXd;

inline constexpr double kInf = std::numeric_limits<double>::infinity();

enum class SolveOutcome { optimal, infeasible, unbounded, iteration_limit };

inline const char* to_string(SolveOutcome o) {
    switch (o) {
    case SolveOutcome::optimal: return "optimal";
    case SolveOutcome::infeasible: return "infeasible";
    case SolveOutcome::unbounded: return "unbounded";
    case SolveOutcome::iteration_limit: return "iteration-limit";
    }
    return "?";
}

struct SolveStatus {
    SolveOutcome outcome = SolveOutcome::iteration_limit;
    int iterations = 0;
    // Simplex: most negative reduced cost at termination (as a non-negative
    // number). Barrier: KKT residual.
    double residual = 0.0;
    double primal_violation = 0.0;

    bool optimal() const { return outcome == SolveOutcome::optimal; }
};

struct LinearProgram {
    VectorXd c;
    MatrixXd A;
    VectorXd b;
    VectorXd lower;
    VectorXd upper;

    /// Program with n variables, no rows, bounds [0, inf).
    static LinearProgram with_variables(int n) {
        LinearProgram lp;
        lp.c = VectorXd::Zero(n);
        lp.A.resize(0, n);
        lp.b.resize(0);
        lp.lower = VectorXd::Zero(n);
        lp.upper = VectorXd::Constant(n, kInf);
        return lp;
    }

    int variables() const { return static_cast<int>(c.size()); }
    int rows() const { return static_cast<int>(A.rows()); }

    void validate() const {
        const auto n = c.size();
        if (A.cols() != n || b.size() != A.rows() || lower.size() != n || upper.size() != n)
            throw std::invalid_argument("LinearProgram: inconsistent dimensions");
        for (Eigen::Index j = 0; j < n; ++j)
            if (!(lower(j) <= upper(j))) throw std::invalid_argument("LinearProgram: lower > upper");
        if (!c.allFinite() || !A.allFinite() || !b.allFinite())
            throw std::invalid_argument("LinearProgram: non-finite data");
    }

    /// Largest violation of A v <= b and of the bounds at v.
    double max_violation(const VectorXd& v) const {
        double worst = 0.0;
        if (A.rows() > 0) worst = std::max(worst, (A * v - b).maxCoeff());
        for (Eigen::Index j = 0; j < v.size(); ++j) {
            worst = std::max(worst, lower(j) - v(j));
            worst = std::max(worst, v(j) - upper(j));
        }
        return worst;
    }
};

struct LpSolution {
    VectorXd x;
    double objective = 0.0;
    SolveStatus status;
};

struct SimplexOptions {
    double feasibility_tol = 1e-9;
    double optimality_tol = 1e-9;
    double pivot_tol = 1e-11;
    int degenerate_switch = 50;  // degenerate pivots before Bland's rule takes over
    int max_iterations = 200000;
};

namespace detail {

class Tableau {
public:
    Tableau(int rows, int cols) : m_(rows), n_(cols), t_(static_cast<std::size_t>(rows + 1) * (cols + 1), 0.0) {}

    double& at(int r, int c) { return t_[static_cast<std::size_t>(r) * (n_ + 1) + c]; }
    double at(int r, int c) const { return t_[static_cast<std::size_t>(r) * (n_ + 1) + c]; }
    double& rhs(int r) { return at(r, n_); }
    double rhs(int r) const { return at(r, n_); }
    int rows() const { return m_; }
    int cols() const { return n_; }
    int objective_row() const { return m_; }

    void pivot(int r, int c) {
        const double inv = 1.0 / at(r, c);
        double* prow = &t_[static_cast<std::size_t>(r) * (n_ + 1)];
        for (int j = 0; j <= n_; ++j) prow[j] *= inv;
        prow[c] = 1.0;
        for (int i = 0; i <= m_; ++i) {
            if (i == r) continue;
            double* row = &t_[static_cast<std::size_t>(i) * (n_ + 1)];
            const double f = row[c];
            if (f == 0.0) continue;
            for (int j = 0; j <= n_; ++j) row[j] -= f * prow[j];
            row[c] = 0.0;
        }
    }

private:
    int m_, n_;
    std::vector<double> t_;
};

struct Column {
    int var;       // original variable
    double sign;   // v contribution: offset + sign * w
};

// Runs simplex iterations on the tableau's objective row. Columns with
// allowed[j] == false never enter.
inline SolveOutcome iterate(Tableau& T, std::vector<int>& basis, const std::vector<char>& allowed,
                            const SimplexOptions& opt, int& iterations) {
    const int m = T.rows(), n = T.cols(), obj = T.objective_row();
    bool bland = false;
    int degenerate_run = 0;
    while (true) {
        if (iterations >= opt.max_iterations) return SolveOutcome::iteration_limit;
        int enter = -1;
        double best = -opt.optimality_tol;
        for (int j = 0; j < n; ++j) {
            if (!allowed[j]) continue;
            const double rc = T.at(obj, j);
            if (rc < best) {
                enter = j;
                if (bland) break;
                best = rc;
            }
        }
        if (enter < 0) return SolveOutcome::optimal;

        int leave = -1;
        double ratio = kInf;
        for (int i = 0; i < m; ++i) {
            const double a = T.at(i, enter);
            if (a <= opt.pivot_tol) continue;
            const double r = std::max(T.rhs(i), 0.0) / a;
            const double tie = 1e-12 * std::max(1.0, ratio);
            if (leave < 0 || r < ratio - tie) {
                leave = i;
                ratio = r;
            } else if (r <= ratio + tie && basis[i] < basis[leave]) {
                leave = i;
                ratio = std::min(ratio, r);
            }
        }
        if (leave < 0) return SolveOutcome::unbounded;

        degenerate_run = ratio <= 1e-12 ? degenerate_run + 1 : 0;
        if (degenerate_run > opt.degenerate_switch) bland = true;
        T.pivot(leave, enter);
        basis[leave] = enter;
        ++iterations;
    }
}

} // namespace detail

/// Solves the LP. Infeasibility and unboundedness are reported through the
/// status, never thrown; malformed input throws std::invalid_argument.
inline LpSolution simplex_solve(const LinearProgram& lp, const SimplexOptions& opt = {}) {
    lp.validate();
    const int n = lp.variables();
    const int m0 = lp.rows();

    // Map each original variable onto non-negative columns.
    std::vector<detail::Column> cols;
    VectorXd offset = VectorXd::Zero(n);
    std::vector<std::pair<int, double>> upper_rows;  // (column, bound) for shifted variables
    for (int j = 0; j < n; ++j) {
        const double l = lp.lower(j), u = lp.upper(j);
        if (std::isfinite(l)) {
            offset(j) = l;
            cols.push_back({j, 1.0});
            if (std::isfinite(u)) upper_rows.emplace_back(static_cast<int>(cols.size()) - 1, u - l);
        } else if (std::isfinite(u)) {
            offset(j) = u;
            cols.push_back({j, -1.0});
        } else {
            cols.push_back({j, 1.0});
            cols.push_back({j, -1.0});
        }
    }
    const int nw = static_cast<int>(cols.size());
    const int m = m0 + static_cast<int>(upper_rows.size());

    MatrixXd Aw = MatrixXd::Zero(m, nw);
    VectorXd bw(m);
    for (int i = 0; i < m0; ++i) {
        bw(i) = lp.b(i) - lp.A.row(i).dot(offset);
        for (int c = 0; c < nw; ++c) Aw(i, c) = lp.A(i, cols[c].var) * cols[c].sign;
    }
    for (std::size_t r = 0; r < upper_rows.size(); ++r) {
        Aw(m0 + static_cast<int>(r), upper_rows[r].first) = 1.0;
        bw(m0 + static_cast<int>(r)) = upper_rows[r].second;
    }
    VectorXd cw(nw);
    for (int c = 0; c < nw; ++c) cw(c) = lp.c(cols[c].var) * cols[c].sign;

    // Columns: [w (nw) | slack (m) | artificial (one per negative rhs row)].
    std::vector<int> art_row;
    for (int i = 0; i < m; ++i)
        if (bw(i) < 0) art_row.push_back(i);
    const int na = static_cast<int>(art_row.size());
    const int ncols = nw + m + na;
    detail::Tableau T(m, ncols);
    std::vector<int> basis(m);
    {
        int a = 0;
        for (int i = 0; i < m; ++i) {
            const double sgn = bw(i) < 0 ? -1.0 : 1.0;
            for (int c = 0; c < nw; ++c) T.at(i, c) = sgn * Aw(i, c);
            T.at(i, nw + i) = sgn;
            T.rhs(i) = sgn * bw(i);
            if (sgn < 0) {
                T.at(i, nw + m + a) = 1.0;
                basis[i] = nw + m + a;
                ++a;
            } else {
                basis[i] = nw + i;
            }
        }
    }

    LpSolution sol;
    sol.status.iterations = 0;
    std::vector<char> allowed(ncols, 1);
    const double scale = m > 0 ? std::max(1.0, bw.cwiseAbs().maxCoeff()) : 1.0;

    if (na > 0) {
        const int obj = T.objective_row();
        for (int a = 0; a < na; ++a) {
            const int r = art_row[a];
            for (int j = 0; j <= ncols; ++j)
                if (j < nw + m || j == ncols) T.at(obj, j) -= T.at(r, j);
        }
        const auto outcome = detail::iterate(T, basis, allowed, opt, sol.status.iterations);
        if (outcome == SolveOutcome::iteration_limit) {
            sol.status.outcome = outcome;
            return sol;
        }
        if (-T.rhs(obj) > opt.feasibility_tol * scale) {
            sol.status.outcome = SolveOutcome::infeasible;
            sol.status.primal_violation = -T.rhs(obj);
            return sol;
        }
        // Drive zero-valued artificials out of the basis where possible.
        for (int i = 0; i < m; ++i) {
            if (basis[i] < nw + m) continue;
            for (int j = 0; j < nw + m; ++j) {
                if (std::abs(T.at(i, j)) > 1e-9) {
                    T.pivot(i, j);
                    basis[i] = j;
                    break;
                }
            }
        }
        for (int j = nw + m; j < ncols; ++j) allowed[j] = 0;
    }

    // Phase 2 objective row in canonical form.
    {
        const int obj = T.objective_row();
        for (int j = 0; j <= ncols; ++j) T.at(obj, j) = j < nw ? cw(j) : 0.0;
        for (int i = 0; i < m; ++i) {
            const int bv = basis[i];
            const double cb = bv < nw ? cw(bv) : 0.0;
            if (cb == 0.0) continue;
            for (int j = 0; j <= ncols; ++j) T.at(obj, j) -= cb * T.at(i, j);
        }
    }
    const auto outcome = detail::iterate(T, basis, allowed, opt, sol.status.iterations);
    sol.status.outcome = outcome;
    if (outcome != SolveOutcome::optimal) return sol;

    VectorXd w = VectorXd::Zero(nw);
    for (int i = 0; i < m; ++i)
        if (basis[i] < nw) w(basis[i]) = std::max(T.rhs(i), 0.0);
    sol.x = offset;
    for (int c = 0; c < nw; ++c) sol.x(cols[c].var) += cols[c].sign * w(c);
    // Clamp round-off onto the box.
    for (int j = 0; j < n; ++j) sol.x(j) = std::clamp(sol.x(j), lp.lower(j), lp.upper(j));
    sol.objective = lp.c.dot(sol.x);

    double min_rc = 0.0;
    for (int j = 0; j < ncols; ++j)
        if (allowed[j]) min_rc = std::min(min_rc, T.at(T.objective_row(), j));
    sol.status.residual = -min_rc;
    sol.status.primal_violation = lp.max_violation(sol.x);
    return sol;
}

} // namespace dtsync::convex
