#pragma once

// Baselines, seeded parameter sweeps and result tables.

#include "dtsync/alternating.hpp"
#include "dtsync/config_io.hpp"
#include "dtsync/error.hpp"
#include "dtsync/model.hpp"
#include "dtsync/single_device.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <limits>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace dtsync {

namespace detail {

// Uniform draw among rows with at most K0 ones: the row weight is picked by
// its share C(K, s) of such rows, then a uniform subset of that size.
inline void draw_capped_row(MatrixXi& x, int n, const ScenarioConfig& cfg, std::mt19937_64& rng) {
    std::vector<double> weight(cfg.K0 + 1);
    double c = 1.0;
    for (int s = 0; s <= cfg.K0; ++s) {
        weight[s] = c;
        c = c * (cfg.K - s) / (s + 1);
    }
    const int s = std::discrete_distribution<int>(weight.begin(), weight.end())(rng);
    std::vector<int> idx(cfg.K);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    for (int k = 0; k < cfg.K; ++k) x(n, k) = 0;
    for (int i = 0; i < s; ++i) x(n, idx[i]) = 1;
}

} // namespace detail

inline constexpr int kRandomRejections = 1000;

/// Random device selection: a schedule drawn uniformly among those meeting
/// the resource-block and regularity limits (and admitting the accuracy
/// targets), then power control and offloading by the proposed solvers.
/// After kRandomRejections rejected draws it falls back to round-robin with
/// a shuffled device order and a random phase.
inline Allocation baseline_random(const ScenarioConfig& cfg, const ChannelRealization& ch, std::uint64_t seed) {
    cfg.validate();
    std::mt19937_64 rng(seed);
    MatrixXi x(cfg.N, cfg.K);
    for (int draw = 0; draw < kRandomRejections; ++draw) {
        for (int n = 0; n < cfg.N; ++n) detail::draw_capped_row(x, n, cfg, rng);
        if (!schedule_feasible(x, cfg)) continue;
        try {
            return refine_fixed_schedule(x, cfg, ch);
        } catch (const InfeasibleError&) {
        }
    }
    std::vector<int> order(cfg.K);
    std::iota(order.begin(), order.end(), 0);
    std::optional<InfeasibleError> last;
    for (int draw = 0; draw < kRandomRejections; ++draw) {
        std::shuffle(order.begin(), order.end(), rng);
        const int shift = std::uniform_int_distribution<int>(0, cfg.tau)(rng);
        x = round_robin_schedule(cfg, order, shift);
        if (!schedule_feasible(x, cfg)) continue;
        try {
            return refine_fixed_schedule(x, cfg, ch);
        } catch (const InfeasibleError& e) {
            last = e;
        }
    }
    if (last) throw *last;
    throw InfeasibleError("baseline_random: no feasible schedule found");
}

/// p = min(P_k, Q_k / (S_k T0)) on scheduled pairs, S_k the number of slots
/// device k is scheduled in.
inline MatrixXd equal_power(const MatrixXi& x, const ScenarioConfig& cfg) {
    MatrixXd p = MatrixXd::Zero(cfg.N, cfg.K);
    for (int k = 0; k < cfg.K; ++k) {
        const int S = x.col(k).sum();
        if (S == 0) continue;
        const double pk = std::min(cfg.P(k), cfg.Q(k) / (S * cfg.T0));
        for (int n = 0; n < cfg.N; ++n)
            if (x(n, k)) p(n, k) = pk;
    }
    return p;
}

/// Equal power allocation: the proposed scheduler and offloading LP with the
/// power of every scheduled pair fixed by equal_power. Starts from the best
/// round-robin schedule and keeps scheduler proposals that lower the delay.
inline Allocation baseline_equal_power(const ScenarioConfig& cfg, const ChannelRealization& ch, int max_rounds = 50,
                                       const SchedulingOptions& sched = {}) {
    cfg.validate();
    std::optional<Allocation> cur;
    double obj = std::numeric_limits<double>::infinity();
    std::optional<InfeasibleError> last;
    auto consider = [&](const MatrixXi& x) {
        if (!schedule_feasible(x, cfg)) return false;
        const MatrixXd p = equal_power(x, cfg);
        try {
            Allocation a{x, p, solve_offloading(x, p, cfg, ch).d, {}};
            refresh_durations(a, cfg, ch);
            const auto ev = evaluate(a, cfg, ch);
            if (ev.report.feasible() && ev.total_delay < obj) {
                cur = std::move(a);
                obj = ev.total_delay;
                return true;
            }
        } catch (const InfeasibleError& e) {
            last = e;
        }
        return false;
    };

    std::vector<int> by_index(cfg.K);
    std::iota(by_index.begin(), by_index.end(), 0);
    std::vector<int> by_gain = by_index;
    const VectorXd mean_gain = ch.h.colwise().mean().transpose();
    std::stable_sort(by_gain.begin(), by_gain.end(), [&](int a, int b) { return mean_gain(a) > mean_gain(b); });
    for (const auto* order : {&by_gain, &by_index})
        for (int shift = 0; shift <= cfg.tau; ++shift) consider(round_robin_schedule(cfg, *order, shift));
    if (!cur) {
        if (last) throw *last;
        throw InfeasibleError("baseline_equal_power: no feasible starting schedule");
    }
    for (int round = 0; round < max_rounds; ++round)
        if (!consider(solve_scheduling(detail::scheduling_costs(*cur, cfg, ch), cfg, sched).x)) break;
    return *cur;
}

// ---------------------------------------------------------------------------
// Sweeps

enum class SweepParameter { max_power_dbm, device_count, resource_blocks, accuracy_target };

inline const char* to_string(SweepParameter p) {
    switch (p) {
    case SweepParameter::max_power_dbm: return "max_power_dbm";
    case SweepParameter::device_count: return "device_count";
    case SweepParameter::resource_blocks: return "resource_blocks";
    case SweepParameter::accuracy_target: return "accuracy_target";
    }
    return "?";
}

inline SweepParameter parse_sweep_parameter(const std::string& s) {
    for (auto p : {SweepParameter::max_power_dbm, SweepParameter::device_count, SweepParameter::resource_blocks,
                   SweepParameter::accuracy_target})
        if (s == to_string(p)) return p;
    throw std::invalid_argument("unknown sweep parameter '" + s + "'");
}

inline const std::vector<std::string>& algorithm_names() {
    static const std::vector<std::string> names = {"proposed", "random", "equal_power", "single_device"};
    return names;
}

inline void check_algorithm(const std::string& name) {
    const auto& all = algorithm_names();
    if (std::find(all.begin(), all.end(), name) == all.end())
        throw std::invalid_argument("unknown algorithm '" + name + "'");
}

struct SweepSpec {
    SweepParameter parameter = SweepParameter::max_power_dbm;
    std::vector<double> values;
    std::vector<std::uint64_t> seeds;
    std::vector<std::string> algorithms;

    void validate() const {
        if (values.empty() || seeds.empty() || algorithms.empty())
            throw std::invalid_argument("SweepSpec: values, seeds and algorithms must be nonempty");
        for (const auto& a : algorithms) check_algorithm(a);
    }
};

/// {"parameter": ..., "values": [...], "seeds": [...] | {"first": s, "count": n},
///  "algorithms": [...]}
inline SweepSpec sweep_from_json(const json& j) {
    static const std::set<std::string> known = {"parameter", "values", "seeds", "algorithms"};
    if (!j.is_object()) throw std::invalid_argument("sweep: top level must be an object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw std::invalid_argument("sweep: unknown key '" + key + "'");
    SweepSpec s;
    s.parameter = parse_sweep_parameter(j.at("parameter").get<std::string>());
    s.values = j.at("values").get<std::vector<double>>();
    const json& seeds = j.at("seeds");
    if (seeds.is_object()) {
        const auto first = seeds.at("first").get<std::uint64_t>();
        const auto count = seeds.at("count").get<std::uint64_t>();
        for (std::uint64_t i = 0; i < count; ++i) s.seeds.push_back(first + i);
    } else {
        s.seeds = seeds.get<std::vector<std::uint64_t>>();
    }
    s.algorithms = j.at("algorithms").get<std::vector<std::string>>();
    s.validate();
    return s;
}

namespace detail {

// A per-device vector resized to K: constant vectors stretch, others may
// only shrink.
inline VectorXd resize_devices(const VectorXd& v, int K, const char* what) {
    if (v.size() > 0 && (v.array() == v(0)).all()) return VectorXd::Constant(K, v(0));
    if (K <= v.size()) return v.head(K);
    throw std::invalid_argument(std::string("device_count: cannot grow non-uniform ") + what);
}

} // namespace detail

/// The base scenario with one parameter replaced. device_count keeps the
/// first K devices (their channels are unchanged, see generate_channels)
/// and clips K0 to K.
inline ScenarioConfig with_parameter(ScenarioConfig cfg, SweepParameter param, double value) {
    switch (param) {
    case SweepParameter::max_power_dbm:
        cfg.P.setConstant(dbm_to_watts(value));
        break;
    case SweepParameter::device_count: {
        const int K = static_cast<int>(std::lround(value));
        if (K <= 0 || std::abs(value - K) > 1e-9) throw std::invalid_argument("device_count must be a positive integer");
        cfg.Q = detail::resize_devices(cfg.Q, K, "Q");
        cfg.P = detail::resize_devices(cfg.P, K, "P");
        cfg.beta = detail::resize_devices(cfg.beta, K, "beta");
        MatrixXd D(cfg.N, K);
        for (int n = 0; n < cfg.N; ++n) D.row(n) = detail::resize_devices(cfg.D.row(n).transpose(), K, "D").transpose();
        cfg.D = D;
        cfg.K = K;
        cfg.K0 = std::min(cfg.K0, K);
        break;
    }
    case SweepParameter::resource_blocks: {
        const int K0 = static_cast<int>(std::lround(value));
        if (std::abs(value - K0) > 1e-9) throw std::invalid_argument("resource_blocks must be an integer");
        cfg.K0 = K0;
        break;
    }
    case SweepParameter::accuracy_target:
        cfg.A.setConstant(value);
        break;
    }
    cfg.validate();
    return cfg;
}

struct RunOptions {
    EvaluationOptions eval;  // expected or Monte-Carlo scoring of the result
    bool timing = false;     // record wall_ms; off keeps output reproducible
    AlternatingOptions alternating;
};

struct RunOutcome {
    ExperimentResult result;
    std::optional<Allocation> allocation;
};

/// Runs one algorithm on one scenario. Failures land in result.status and
/// never propagate.
inline RunOutcome run_algorithm(const std::string& algorithm, const ScenarioConfig& cfg, const ChannelRealization& ch,
                                std::uint64_t seed, const RunOptions& opt = {}) {
    using Clock = std::chrono::steady_clock;
    const auto started = Clock::now();
    RunOutcome out;
    out.result.algorithm = algorithm;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    out.result.total_delay = out.result.total_energy = out.result.min_accuracy = nan;
    try {
        check_algorithm(algorithm);
        int iterations = 0;
        bool converged = true;
        std::vector<double> trace;
        if (algorithm == "proposed") {
            auto sol = solve(cfg, ch, opt.alternating);
            out.allocation = std::move(sol.allocation);
            iterations = sol.trace.iterations;
            converged = sol.trace.converged;
            trace = sol.trace.objective;
        } else if (algorithm == "random") {
            out.allocation = baseline_random(cfg, ch, detail::mix_seed(seed, 0x72616e64ULL));
        } else if (algorithm == "equal_power") {
            out.allocation = baseline_equal_power(cfg, ch);
        } else {
            auto sd = solve_single_device(cfg, ch);
            out.allocation = std::move(sd.allocation);
            iterations = sd.rounds;
            converged = sd.converged;
            trace = sd.trace;
        }
        out.result = summarize(algorithm, *out.allocation, cfg, ch, opt.eval);
        out.result.outer_iterations = iterations;
        out.result.converged = converged;
        out.result.trace = std::move(trace);
    } catch (const InfeasibleError& e) {
        out.result.status = std::string("infeasible: ") + e.what();
    } catch (const std::exception& e) {
        out.result.status = std::string("error: ") + e.what();
    }
    if (opt.timing) out.result.wall_ms = std::chrono::duration<double, std::milli>(Clock::now() - started).count();
    return out;
}

struct ResultRow {
    std::uint64_t seed = 0;
    std::string algorithm;
    std::string param;
    double value = 0.0;
    double total_delay_s = 0.0;
    double total_energy_j = 0.0;
    double min_accuracy = 0.0;
    int outer_iterations = 0;
    bool converged = false;
    std::string status;
    double wall_ms = 0.0;
};

inline ResultRow make_row(std::uint64_t seed, const std::string& param, double value, const ExperimentResult& r) {
    return {seed,          r.algorithm, param, value, r.total_delay, r.total_energy, r.min_accuracy, r.outer_iterations,
            r.converged,   r.status,    r.wall_ms};
}

/// Sees every cell after it ran; the outcome is empty when the swept value
/// made the scenario invalid.
using CellObserver = std::function<void(const ResultRow&, const RunOutcome*)>;

/// One row per (value, seed, algorithm), in that nesting order. Channels
/// depend on the seed alone, so every algorithm and value at a seed sees the
/// same devices. Monte-Carlo scoring draws from mix_seed(seed, cell index).
inline std::vector<ResultRow> run_sweep(const SweepSpec& spec, const ScenarioConfig& base, const RunOptions& opt = {},
                                        const CellObserver& observe = {}) {
    spec.validate();
    std::vector<ResultRow> rows;
    std::uint64_t cell = 0;
    for (double value : spec.values) {
        std::optional<ScenarioConfig> cfg;
        std::string cfg_error;
        try {
            cfg = with_parameter(base, spec.parameter, value);
        } catch (const std::exception& e) {
            cfg_error = std::string("error: ") + e.what();
        }
        for (std::uint64_t seed : spec.seeds) {
            std::optional<ChannelRealization> ch;
            if (cfg) ch = generate_channels(*cfg, seed);
            for (const auto& algo : spec.algorithms) {
                RunOptions cell_opt = opt;
                cell_opt.eval.seed = detail::mix_seed(seed, cell++);
                if (cfg) {
                    const RunOutcome out = run_algorithm(algo, *cfg, *ch, seed, cell_opt);
                    rows.push_back(make_row(seed, to_string(spec.parameter), value, out.result));
                    if (observe) observe(rows.back(), &out);
                } else {
                    ExperimentResult r;
                    r.algorithm = algo;
                    r.total_delay = r.total_energy = r.min_accuracy = std::numeric_limits<double>::quiet_NaN();
                    r.status = cfg_error;
                    rows.push_back(make_row(seed, to_string(spec.parameter), value, r));
                    if (observe) observe(rows.back(), nullptr);
                }
            }
        }
    }
    return rows;
}

// ---------------------------------------------------------------------------
// Serialization

inline constexpr const char* kCsvHeader =
    "seed,algorithm,param,value,total_delay_s,total_energy_j,min_accuracy,outer_iterations,converged,status,wall_ms";

/// Nine significant digits, locale independent.
inline std::string format_double(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.9g", v);
    return buf;
}

namespace detail {

inline std::string csv_field(const std::string& s) {
    if (s.find_first_of(",\"\n\r") == std::string::npos) return s;
    std::string out = "\"";
    for (char c : s) {
        if (c == '"') out += '"';
        out += (c == '\n' || c == '\r') ? ' ' : c;
    }
    return out + '"';
}

} // namespace detail

inline void write_csv(std::ostream& os, const std::vector<ResultRow>& rows) {
    os << kCsvHeader << '\n';
    for (const auto& r : rows)
        os << r.seed << ',' << detail::csv_field(r.algorithm) << ',' << r.param << ',' << format_double(r.value) << ','
           << format_double(r.total_delay_s) << ',' << format_double(r.total_energy_j) << ','
           << format_double(r.min_accuracy) << ',' << r.outer_iterations << ',' << (r.converged ? 1 : 0) << ','
           << detail::csv_field(r.status) << ',' << format_double(r.wall_ms) << '\n';
}

inline std::string to_csv(const std::vector<ResultRow>& rows) {
    std::ostringstream os;
    write_csv(os, rows);
    return os.str();
}

inline json to_json(const ResultRow& r) {
    auto num = [](double v) { return std::isfinite(v) ? json(v) : json(nullptr); };
    return {{"seed", r.seed},
            {"algorithm", r.algorithm},
            {"param", r.param},
            {"value", num(r.value)},
            {"total_delay_s", num(r.total_delay_s)},
            {"total_energy_j", num(r.total_energy_j)},
            {"min_accuracy", num(r.min_accuracy)},
            {"outer_iterations", r.outer_iterations},
            {"converged", r.converged},
            {"status", r.status},
            {"wall_ms", num(r.wall_ms)}};
}

inline json to_json(const std::vector<ResultRow>& rows) {
    json a = json::array();
    for (const auto& r : rows) a.push_back(to_json(r));
    return a;
}

inline json to_json(const Allocation& a) {
    auto mat = [](const auto& m) {
        json rows = json::array();
        for (Eigen::Index i = 0; i < m.rows(); ++i) {
            json row = json::array();
            for (Eigen::Index j = 0; j < m.cols(); ++j) row.push_back(m(i, j));
            rows.push_back(row);
        }
        return rows;
    };
    return {{"x", mat(a.x)}, {"p_w", mat(a.p)}, {"d_bits", mat(a.d)}, {"t_s", mat(a.t)}};
}

} // namespace dtsync
