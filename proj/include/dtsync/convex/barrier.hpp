#pragma once

// Log-barrier method for smooth convex programs
//
//     minimize    f(v)
//     subject to  g_i(v) <= 0,  lower <= v <= upper
//
// Each stage minimises  w f(v) - sum log(-g_i(v)) - sum log(box slack)  by
// damped Newton steps with Armijo backtracking, then multiplies w by 10. The
// run stops once the duality-gap bound (#constraints / w) drops below 1e-8.
// Functions report sparse gradients and, optionally, Hessian triplets; a
// function that reports no Hessian is treated as linear.

#include "dtsync/convex/lp.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Sparse>

#include <functional>
#include <optional>
#include <utility>
#include <vector>

namespace dtsync::convex {

/// Derivative information written by a SmoothFunction.
struct Derivatives {
    std::vector<std::pair<int, double>> gradient;  // sparse (index, value)
    std::vector<Eigen::Triplet<double>> hessian;   // both triangles

    void clear() {
        gradient.clear();
        hessian.clear();
    }
};

/// Returns f(v); fills `out` when it is non-null.
using SmoothFunction = std::function<double(const VectorXd& v, Derivatives* out)>;

/// a.v + constant
inline SmoothFunction linear_function(std::vector<std::pair<int, double>> coeffs, double constant = 0.0) {
    return [coeffs = std::move(coeffs), constant](const VectorXd& v, Derivatives* out) {
        double value = constant;
        for (const auto& [j, a] : coeffs) value += a * v(j);
        if (out) out->gradient.insert(out->gradient.end(), coeffs.begin(), coeffs.end());
        return value;
    };
}

struct SmoothConvexProgram {
    int dimension = 0;
    SmoothFunction objective;
    std::vector<SmoothFunction> constraints;  // g_i(v) <= 0
    VectorXd lower;                           // may hold -inf
    VectorXd upper;                           // may hold +inf

    static SmoothConvexProgram unbounded_box(int n) {
        SmoothConvexProgram p;
        p.dimension = n;
        p.lower = VectorXd::Constant(n, -kInf);
        p.upper = VectorXd::Constant(n, kInf);
        return p;
    }

    int finite_bounds() const {
        int c = 0;
        for (int j = 0; j < dimension; ++j) c += std::isfinite(lower(j)) + std::isfinite(upper(j));
        return c;
    }

    bool strictly_inside_box(const VectorXd& v) const {
        for (int j = 0; j < dimension; ++j)
            if (!(v(j) > lower(j) && v(j) < upper(j))) return false;
        return true;
    }

    /// Largest g_i(v); -inf without constraints.
    double max_constraint(const VectorXd& v) const {
        double worst = -kInf;
        for (const auto& g : constraints) worst = std::max(worst, g(v, nullptr));
        return worst;
    }

    bool strictly_feasible(const VectorXd& v) const {
        if (!strictly_inside_box(v)) return false;
        for (const auto& g : constraints) {
            const double val = g(v, nullptr);
            if (!(val < 0.0)) return false;
        }
        return true;
    }
};

inline constexpr double kBarrierGrowth = 10.0;
inline constexpr double kBarrierGapTol = 1e-8;
inline constexpr double kArmijo = 1e-4;
inline constexpr double kBacktrack = 0.5;
inline constexpr double kKktTol = 1e-6;

struct BarrierOptions {
    double gap_tol = kBarrierGapTol;
    double newton_tol = 1e-14;     // half squared Newton decrement
    int max_inner = 200;           // Newton steps per stage
    int max_total = 5000;
    std::function<void(const VectorXd&)> on_accept;  // every accepted iterate
    std::function<bool(const VectorXd&)> stop_when;  // early exit after a step
};

struct BarrierResult {
    VectorXd x;
    double objective = 0.0;
    SolveStatus status;
    std::vector<double> stage_objectives;
    bool stopped_early = false;
};

namespace detail {

struct BarrierModel {
    const SmoothConvexProgram& prog;
    double weight;
    mutable Derivatives scratch;

    // phi(v), +inf outside the strict domain.
    double value(const VectorXd& v) const {
        if (!prog.strictly_inside_box(v)) return kInf;
        double phi = weight * prog.objective(v, nullptr);
        for (const auto& g : prog.constraints) {
            const double val = g(v, nullptr);
            if (!(val < 0.0)) return kInf;
            phi -= std::log(-val);
        }
        for (int j = 0; j < prog.dimension; ++j) {
            if (std::isfinite(prog.lower(j))) phi -= std::log(v(j) - prog.lower(j));
            if (std::isfinite(prog.upper(j))) phi -= std::log(prog.upper(j) - v(j));
        }
        return std::isfinite(phi) ? phi : kInf;
    }

    // Gradient and Hessian of phi; also returns the objective gradient and
    // the stationarity vector divided by the weight.
    void derivatives(const VectorXd& v, VectorXd& grad, MatrixXd& hess, VectorXd& fgrad) const {
        const int n = prog.dimension;
        grad = VectorXd::Zero(n);
        hess = MatrixXd::Zero(n, n);
        fgrad = VectorXd::Zero(n);
        scratch.clear();
        prog.objective(v, &scratch);
        for (const auto& [j, a] : scratch.gradient) fgrad(j) += a;
        grad += weight * fgrad;
        for (const auto& tr : scratch.hessian) hess(tr.row(), tr.col()) += weight * tr.value();
        for (const auto& g : prog.constraints) {
            scratch.clear();
            const double val = g(v, &scratch);
            const double inv = 1.0 / (-val);
            for (const auto& [j, a] : scratch.gradient) grad(j) += inv * a;
            for (const auto& [i, ai] : scratch.gradient)
                for (const auto& [j, aj] : scratch.gradient) hess(i, j) += inv * inv * ai * aj;
            for (const auto& tr : scratch.hessian) hess(tr.row(), tr.col()) += inv * tr.value();
        }
        for (int j = 0; j < n; ++j) {
            if (std::isfinite(prog.lower(j))) {
                const double s = v(j) - prog.lower(j);
                grad(j) -= 1.0 / s;
                hess(j, j) += 1.0 / (s * s);
            }
            if (std::isfinite(prog.upper(j))) {
                const double s = prog.upper(j) - v(j);
                grad(j) += 1.0 / s;
                hess(j, j) += 1.0 / (s * s);
            }
        }
    }
};

// Newton direction, falling back to a diagonally shifted system and finally
// to steepest descent.
inline VectorXd newton_direction(const MatrixXd& H, const VectorXd& g) {
    const int n = static_cast<int>(g.size());
    Eigen::LLT<MatrixXd> llt(H);
    if (llt.info() == Eigen::Success) {
        VectorXd dir = -llt.solve(g);
        if (dir.allFinite() && dir.dot(g) < 0) return dir;
    }
    const double diag = std::max(1e-12, H.diagonal().cwiseAbs().maxCoeff());
    for (double shift = 1e-10 * diag; shift < 1e6 * diag; shift *= 100.0) {
        MatrixXd Hs = H;
        Hs.diagonal().array() += shift;
        Eigen::LLT<MatrixXd> reg(Hs);
        if (reg.info() != Eigen::Success) continue;
        VectorXd dir = -reg.solve(g);
        if (dir.allFinite() && dir.dot(g) < 0) return dir;
    }
    return -g / std::max(1.0, static_cast<double>(n) * g.cwiseAbs().maxCoeff());
}

// Largest step in (0, 1] keeping v + s dir strictly inside the box.
inline double box_step(const SmoothConvexProgram& prog, const VectorXd& v, const VectorXd& dir) {
    double s = 1.0;
    for (int j = 0; j < prog.dimension; ++j) {
        if (dir(j) < 0 && std::isfinite(prog.lower(j))) s = std::min(s, 0.99 * (prog.lower(j) - v(j)) / dir(j));
        if (dir(j) > 0 && std::isfinite(prog.upper(j))) s = std::min(s, 0.99 * (prog.upper(j) - v(j)) / dir(j));
    }
    return s;
}

} // namespace detail

/// Minimises a smooth convex program from a strictly feasible start.
/// Throws std::invalid_argument when `start` is not strictly feasible.
inline BarrierResult barrier_solve(const SmoothConvexProgram& prog, const VectorXd& start,
                                   const BarrierOptions& opt = {}) {
    if (start.size() != prog.dimension || prog.lower.size() != prog.dimension || prog.upper.size() != prog.dimension)
        throw std::invalid_argument("barrier_solve: dimension mismatch");
    if (!prog.strictly_feasible(start))
        throw std::invalid_argument("barrier_solve: start is not strictly feasible");

    const int n = prog.dimension;
    const double m_total = static_cast<double>(prog.constraints.size() + prog.finite_bounds());
    BarrierResult res;
    VectorXd v = start;

    const double f0 = prog.objective(v, nullptr);
    double weight = m_total > 0 ? m_total / std::max(std::abs(f0), 1e-6) : 1.0;
    weight = std::clamp(weight, 1e-6, 1e8);

    VectorXd grad, fgrad;
    MatrixXd hess;
    int total = 0;
    bool inner_failed = false;

    while (true) {
        detail::BarrierModel model{prog, weight, {}};
        double phi = model.value(v);
        for (int inner = 0; inner < opt.max_inner && total < opt.max_total; ++inner, ++total) {
            model.derivatives(v, grad, hess, fgrad);
            const VectorXd dir = detail::newton_direction(hess, grad);
            const double slope = grad.dot(dir);
            if (-slope / 2.0 <= opt.newton_tol) break;

            double step = detail::box_step(prog, v, dir);
            VectorXd trial;
            double phi_trial = kInf;
            bool accepted = false;
            while (step > 1e-18) {
                trial = v + step * dir;
                phi_trial = model.value(trial);
                // The slack absorbs round-off in phi, which is large once
                // the weight is; without it Newton stalls near the centre.
                if (phi_trial <= phi + kArmijo * step * slope + 1e-14 * std::abs(phi)) {
                    accepted = true;
                    break;
                }
                step *= kBacktrack;
            }
            if (!accepted) {
                inner_failed = true;
                break;
            }
            v = trial;
            phi = phi_trial;
            if (opt.on_accept) opt.on_accept(v);
            if (opt.stop_when && opt.stop_when(v)) {
                res.stopped_early = true;
                break;
            }
        }
        res.stage_objectives.push_back(prog.objective(v, nullptr));
        if (res.stopped_early) break;
        if (m_total / weight < opt.gap_tol || m_total == 0) break;
        if (total >= opt.max_total) break;
        if (inner_failed) {
            // Line search stalled; the point is still strictly feasible.
            // Accept it if the gap bound is already small.
            break;
        }
        weight *= kBarrierGrowth;
    }

    res.x = v;
    res.objective = prog.objective(v, nullptr);
    res.status.iterations = total;

    // KKT residual: scaled stationarity of the barrier subproblem plus the
    // complementarity bound m / w.
    detail::BarrierModel model{prog, weight, {}};
    model.derivatives(v, grad, hess, fgrad);
    const double stationarity = (grad / weight).cwiseAbs().maxCoeff() / std::max(1.0, fgrad.cwiseAbs().maxCoeff());
    const double gap = m_total / weight;
    res.status.residual = n > 0 ? std::max(stationarity, gap) : 0.0;
    res.status.primal_violation = std::max(0.0, prog.max_constraint(v));

    if (res.stopped_early || (gap < opt.gap_tol || m_total == 0)) {
        res.status.outcome = res.status.residual <= kKktTol || res.stopped_early ? SolveOutcome::optimal
                                                                                 : SolveOutcome::iteration_limit;
    } else if (inner_failed && gap < 1e-6 && stationarity <= kKktTol) {
        res.status.outcome = SolveOutcome::optimal;
    } else {
        res.status.outcome = SolveOutcome::iteration_limit;
    }
    return res;
}

/// Phase I: returns a strictly feasible point near `guess`, or nullopt when
/// the feasible set has no interior. The guess is first pulled strictly
/// inside the box; if it still violates a constraint, the barrier method
/// minimises the largest violation s over (v, s) until s < 0.
inline std::optional<VectorXd> find_strictly_feasible(const SmoothConvexProgram& prog, const VectorXd& guess) {
    const int n = prog.dimension;
    VectorXd v = guess;
    for (int j = 0; j < n; ++j) {
        const double l = prog.lower(j), u = prog.upper(j);
        double eps;
        if (std::isfinite(l) && std::isfinite(u)) {
            if (!(u > l)) return std::nullopt;
            eps = 1e-4 * (u - l);
        } else if (std::isfinite(l)) {
            eps = 1e-6 * std::max(1.0, std::abs(l));
        } else if (std::isfinite(u)) {
            eps = 1e-6 * std::max(1.0, std::abs(u));
        } else {
            eps = 0.0;
        }
        if (std::isfinite(l)) v(j) = std::max(v(j), l + eps);
        if (std::isfinite(u)) v(j) = std::min(v(j), u - eps);
    }
    if (prog.strictly_feasible(v)) return v;

    double worst = prog.max_constraint(v);
    if (!std::isfinite(worst)) return std::nullopt;

    SmoothConvexProgram aux;
    aux.dimension = n + 1;
    aux.lower.resize(n + 1);
    aux.upper.resize(n + 1);
    aux.lower.head(n) = prog.lower;
    aux.upper.head(n) = prog.upper;
    aux.lower(n) = -1.0;
    aux.upper(n) = kInf;
    aux.objective = linear_function({{n, 1.0}});
    for (const auto& g : prog.constraints) {
        aux.constraints.push_back([g, n](const VectorXd& w, Derivatives* out) {
            const double val = g(w.head(n), out);
            if (out) out->gradient.emplace_back(n, -1.0);
            return val - w(n);
        });
    }
    VectorXd start(n + 1);
    start.head(n) = v;
    start(n) = std::max(worst, 0.0) + 1.0;

    BarrierOptions opt;
    opt.stop_when = [n](const VectorXd& w) { return w(n) < 0.0; };
    const BarrierResult r = barrier_solve(aux, start, opt);
    VectorXd cand = r.x.head(n);
    if (prog.strictly_feasible(cand)) return cand;
    return std::nullopt;
}

} // namespace dtsync::convex
