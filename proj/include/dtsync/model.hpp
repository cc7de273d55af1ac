#pragma once

// System model: scenario constants, channel generation, the per-link physical
// quantities (rate, delivery probability, accuracy) and a full evaluator and
// feasibility checker for the joint scheduling / power / offloading problem.
//
// Indexing is zero-based throughout: slot n in [0, N), device k in [0, K).
// Matrices indexed by (slot, device) are N x K.

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <random>
#include <stdexcept>
#include <string>

namespace dtsync {

using Eigen::MatrixXd;
using Eigen::MatrixXi;
using Eigen::VectorXd;

namespace detail {

inline std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

/// Order-sensitive seed mixing; used to give every (seed, device, stream)
/// triple an independent generator.
inline std::uint64_t mix_seed(std::uint64_t a, std::uint64_t b, std::uint64_t c = 0) {
    return splitmix64(splitmix64(splitmix64(a) ^ (b + 0x632be59bd9b4e019ULL)) ^ (c + 0x8cb92ba72f3d8dd7ULL));
}

} // namespace detail

inline double dbm_to_watts(double dbm) { return std::pow(10.0, (dbm - 30.0) / 10.0); }
inline double watts_to_dbm(double w) { return 10.0 * std::log10(w) + 30.0; }

/// Noise power over a band from a spectral density in dBm/Hz.
inline double noise_power_watts(double dbm_per_hz, double bandwidth_hz) {
    return dbm_to_watts(dbm_per_hz) * bandwidth_hz;
}

struct Geometry {
    double area_m = 200.0;                // side of the square deployment area
    double pathloss_intercept_db = 128.1; // path loss at 1 km
    double pathloss_slope = 37.6;         // dB per decade of distance in km
    double shadowing_db = 8.0;            // log-normal shadowing std
    double min_distance_m = 1.0;
};

struct ScenarioConfig {
    int K = 1;              // devices
    int N = 1;              // time slots
    double T0 = 1.0;        // slot duration [s]
    double B = 1e6;         // bandwidth [Hz]
    double sigma2 = 1e-15;  // noise power [W]
    double m = 1.0;         // waterfall threshold
    double alpha = 0.25;    // accuracy exponent
    VectorXd Q;             // per-device energy budget [J], length K
    VectorXd P;             // per-device max transmit power [W], length K
    MatrixXd D;             // arrivals [bits], N x K
    VectorXd A;             // accuracy targets, length N
    int tau = 1;            // regularity window is tau + 1 slots
    VectorXd beta;          // regularity fraction, length K
    int K0 = 1;             // resource blocks per slot
    Geometry geometry;

    /// Transmissions device k needs in every window of tau + 1 slots.
    int required_transmissions(int k) const {
        return static_cast<int>(std::ceil(beta(k) * tau - 1e-9));
    }

    /// Number of regularity windows; windows starting past N - tau - 1 would
    /// reach beyond the horizon and are not enforced.
    int window_count() const { return std::max(0, N - tau); }

    /// Cumulative arrivals of device k over slots [0, n].
    double cumulative_arrivals(int n, int k) const { return D.col(k).head(n + 1).sum(); }

    /// Cumulative arrivals of all devices over slots [0, n].
    double cumulative_arrivals(int n) const { return D.topRows(n + 1).sum(); }

    /// Expected bits that must be delivered by the end of slot n so that the
    /// accuracy (delivered / arrived)^alpha reaches A_n.
    double required_delivery(int n) const {
        if (A(n) <= 0.0) return 0.0;
        return std::pow(A(n), 1.0 / alpha) * cumulative_arrivals(n);
    }

    /// Throws std::invalid_argument describing the first violated invariant.
    void validate() const {
        auto fail = [](const std::string& msg) { throw std::invalid_argument("ScenarioConfig: " + msg); };
        if (K <= 0 || N <= 0) fail("K and N must be positive");
        if (!(T0 > 0) || !(B > 0) || !(sigma2 > 0) || !(m > 0) || !(alpha > 0))
            fail("T0, B, sigma2, m, alpha must be strictly positive");
        if (Q.size() != K || P.size() != K || beta.size() != K) fail("Q, P, beta must have length K");
        if (D.rows() != N || D.cols() != K) fail("D must be N x K");
        if (A.size() != N) fail("A must have length N");
        if (tau <= 0) fail("tau must be a positive integer");
        if (K0 <= 0 || K0 > K) fail("K0 must lie in [1, K]");
        if ((Q.array() <= 0).any() || (P.array() <= 0).any()) fail("Q and P must be strictly positive");
        if ((D.array() < 0).any() || !D.allFinite()) fail("D must be finite and non-negative");
        if ((A.array() < 0).any() || (A.array() > 1).any()) fail("A must lie in [0, 1]");
        if ((beta.array() <= 0).any() || (beta.array() > 1).any()) fail("beta must lie in (0, 1]");
        if (!(geometry.area_m > 0) || geometry.shadowing_db < 0 || !(geometry.min_distance_m > 0))
            fail("geometry parameters out of range");
        if (window_count() > 0) {
            long demand = 0;
            for (int k = 0; k < K; ++k) demand += required_transmissions(k);
            if (demand > static_cast<long>(K0) * (tau + 1))
                fail("regularity demand " + std::to_string(demand) + " exceeds resource-block capacity " +
                     std::to_string(static_cast<long>(K0) * (tau + 1)) + " per window");
        }
    }
};

struct ChannelRealization {
    MatrixXd h;              // N x K linear power gains
    std::uint64_t seed = 0;
    MatrixXd positions;      // K x 2 device coordinates [m]
};

/// Linear power gain for a link of the given length and shadowing draw.
inline double path_gain(double distance_m, double shadowing_draw_db, const Geometry& g) {
    const double d_km = std::max(distance_m, g.min_distance_m) / 1000.0;
    const double loss_db = g.pathloss_intercept_db + g.pathloss_slope * std::log10(d_km) + shadowing_draw_db;
    return std::pow(10.0, -loss_db / 10.0);
}

/// Devices uniform in the square, server at its centre. Device k draws its
/// position and its N shadowing samples from its own seeded stream, so
/// device k sees the same channel whatever K is.
inline ChannelRealization generate_channels(const ScenarioConfig& cfg, std::uint64_t seed) {
    ChannelRealization ch;
    ch.seed = seed;
    ch.h.resize(cfg.N, cfg.K);
    ch.positions.resize(cfg.K, 2);
    const Geometry& g = cfg.geometry;
    const double cx = g.area_m / 2.0;
    for (int k = 0; k < cfg.K; ++k) {
        std::mt19937_64 pos_rng(detail::mix_seed(seed, static_cast<std::uint64_t>(k), 1));
        std::uniform_real_distribution<double> uni(0.0, g.area_m);
        ch.positions(k, 0) = uni(pos_rng);
        ch.positions(k, 1) = uni(pos_rng);
        const double dist = std::hypot(ch.positions(k, 0) - cx, ch.positions(k, 1) - cx);

        std::mt19937_64 shadow_rng(detail::mix_seed(seed, static_cast<std::uint64_t>(k), 2));
        std::normal_distribution<double> shadow(0.0, 1.0);
        for (int n = 0; n < cfg.N; ++n) {
            const double draw = g.shadowing_db > 0 ? g.shadowing_db * shadow(shadow_rng) : 0.0;
            ch.h(n, k) = path_gain(dist, draw, g);
        }
    }
    return ch;
}

/// Shannon rate B log2(1 + p h / sigma^2) in bits/s.
inline double rate(double p, double h, const ScenarioConfig& cfg) {
    if (p <= 0.0) return 0.0;
    return cfg.B * std::log2(1.0 + p * h / cfg.sigma2);
}

/// Probability that a transmission is received without error,
/// exp(-m sigma^2 / (p h)); zero at p = 0.
inline double success_probability(double p, double h, const ScenarioConfig& cfg) {
    if (p <= 0.0) return 0.0;
    return std::exp(-cfg.m * cfg.sigma2 / (p * h));
}

/// Twin accuracy (received / arrived)^alpha; an empty arrival history is
/// treated as perfectly synchronised.
inline double accuracy(double received_cum, double arrived_cum, const ScenarioConfig& cfg) {
    if (arrived_cum <= 0.0) return 1.0;
    const double ratio = std::clamp(received_cum / arrived_cum, 0.0, 1.0);
    return std::pow(ratio, cfg.alpha);
}

/// Decision triple plus the durations it implies.
struct Allocation {
    MatrixXi x;  // N x K schedule, entries 0/1
    MatrixXd p;  // N x K transmit power [W]
    MatrixXd d;  // N x K offloaded bits
    MatrixXd t;  // N x K transmission time [s], derived

    static Allocation zeros(int N, int K) {
        Allocation a;
        a.x = MatrixXi::Zero(N, K);
        a.p = MatrixXd::Zero(N, K);
        a.d = MatrixXd::Zero(N, K);
        a.t = MatrixXd::Zero(N, K);
        return a;
    }
};

/// t = d / r(p) where d > 0; infinite when data is assigned to a zero-rate link.
inline MatrixXd derive_durations(const MatrixXd& p, const MatrixXd& d, const ScenarioConfig& cfg,
                                 const ChannelRealization& ch) {
    MatrixXd t = MatrixXd::Zero(d.rows(), d.cols());
    for (int n = 0; n < d.rows(); ++n)
        for (int k = 0; k < d.cols(); ++k) {
            if (d(n, k) <= 0.0) continue;
            const double r = rate(p(n, k), ch.h(n, k), cfg);
            t(n, k) = r > 0.0 ? d(n, k) / r : std::numeric_limits<double>::infinity();
        }
    return t;
}

inline void refresh_durations(Allocation& a, const ScenarioConfig& cfg, const ChannelRealization& ch) {
    a.t = derive_durations(a.p, a.d, cfg, ch);
}

/// Sum over slots of the slowest scheduled transmission.
inline double total_delay(const MatrixXi& x, const MatrixXd& t) {
    double total = 0.0;
    for (int n = 0; n < t.rows(); ++n) {
        double slot = 0.0;
        for (int k = 0; k < t.cols(); ++k)
            if (x(n, k) != 0) slot = std::max(slot, t(n, k));
        total += slot;
    }
    return total;
}

inline double total_delay(const Allocation& a) { return total_delay(a.x, a.t); }

enum class DeliveryMode { expected, monte_carlo };

struct EvaluationOptions {
    DeliveryMode mode = DeliveryMode::expected;
    std::uint64_t seed = 0;
    int trials = 10000;
    double tolerance = 1e-6;
};

struct ConstraintCheck {
    bool pass = true;
    double violation = 0.0;  // worst violation, relative where a scale exists
};

struct FeasibilityReport {
    ConstraintCheck accuracy;          // a_n >= A_n
    ConstraintCheck energy;            // sum_n t p <= Q_k
    ConstraintCheck cumulative_data;   // delivered <= arrived, per device
    ConstraintCheck regularity;        // ceil(beta tau) per window
    ConstraintCheck resource_blocks;   // sum_k x <= K0
    ConstraintCheck data_nonnegative;  // d >= 0
    ConstraintCheck binary_schedule;   // x in {0, 1}
    ConstraintCheck power_bounds;      // 0 <= p <= P_k
    ConstraintCheck duration_bounds;   // 0 <= t <= T0
    ConstraintCheck coupling;          // d > 0 implies x = 1 and p > 0

    bool feasible() const {
        return accuracy.pass && energy.pass && cumulative_data.pass && regularity.pass && resource_blocks.pass &&
               data_nonnegative.pass && binary_schedule.pass && power_bounds.pass && duration_bounds.pass &&
               coupling.pass;
    }

    /// Name of the first failing constraint, empty when feasible.
    std::string first_failure() const {
        const std::pair<const char*, const ConstraintCheck*> all[] = {
            {"accuracy", &accuracy},         {"energy", &energy},
            {"cumulative_data", &cumulative_data}, {"regularity", &regularity},
            {"resource_blocks", &resource_blocks}, {"data_nonnegative", &data_nonnegative},
            {"binary_schedule", &binary_schedule}, {"power_bounds", &power_bounds},
            {"duration_bounds", &duration_bounds}, {"coupling", &coupling}};
        for (const auto& [name, c] : all)
            if (!c->pass) return name;
        return {};
    }
};

struct Evaluation {
    double total_delay = 0.0;
    FeasibilityReport report;
    VectorXd slot_delay;      // length N
    VectorXd device_energy;   // length K
    VectorXd slot_accuracy;   // length N (trial mean in Monte-Carlo mode)
    VectorXd accuracy_stderr; // length N, zero in expected mode
    double min_accuracy = 1.0;
    double total_energy = 0.0;
};

namespace detail {

inline void record(ConstraintCheck& c, double violation, double tol) {
    c.violation = std::max(c.violation, std::max(violation, 0.0));
    c.pass = c.violation <= tol;
}

/// Schedule-only checks shared with the scheduling module and oracles.
inline void check_schedule(const MatrixXi& x, const ScenarioConfig& cfg, FeasibilityReport& rep) {
    for (int n = 0; n < cfg.N; ++n) {
        int used = 0;
        for (int k = 0; k < cfg.K; ++k) {
            const int v = x(n, k);
            if (v != 0 && v != 1) record(rep.binary_schedule, 1.0, 0.0);
            used += v != 0 ? 1 : 0;
        }
        record(rep.resource_blocks, used - cfg.K0, 0.0);
    }
    for (int k = 0; k < cfg.K; ++k) {
        const int need = cfg.required_transmissions(k);
        for (int w = 0; w < cfg.window_count(); ++w) {
            int have = 0;
            for (int i = w; i <= w + cfg.tau; ++i) have += x(i, k) != 0 ? 1 : 0;
            record(rep.regularity, need - have, 0.0);
        }
    }
}

} // namespace detail

/// True iff x is binary, respects K0 in every slot and meets every
/// regularity window.
inline bool schedule_feasible(const MatrixXi& x, const ScenarioConfig& cfg) {
    FeasibilityReport rep;
    detail::check_schedule(x, cfg, rep);
    return rep.binary_schedule.pass && rep.resource_blocks.pass && rep.regularity.pass;
}

/// Evaluates an allocation: delay, per-device energy, per-slot accuracy and
/// every constraint of the joint problem. Durations are recomputed from
/// (p, d); `alloc.t` is ignored.
inline Evaluation evaluate(const Allocation& alloc, const ScenarioConfig& cfg, const ChannelRealization& ch,
                           const EvaluationOptions& opt = {}) {
    const int N = cfg.N, K = cfg.K;
    if (alloc.x.rows() != N || alloc.x.cols() != K || alloc.p.rows() != N || alloc.p.cols() != K ||
        alloc.d.rows() != N || alloc.d.cols() != K || ch.h.rows() != N || ch.h.cols() != K)
        throw std::invalid_argument("evaluate: allocation or channel shape does not match the scenario");

    const double tol = opt.tolerance;
    Evaluation ev;
    FeasibilityReport& rep = ev.report;
    const MatrixXd t = derive_durations(alloc.p, alloc.d, cfg, ch);

    ev.slot_delay = VectorXd::Zero(N);
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
            if (alloc.x(n, k) != 0) ev.slot_delay(n) = std::max(ev.slot_delay(n), t(n, k));
    ev.total_delay = ev.slot_delay.sum();

    ev.device_energy = VectorXd::Zero(K);
    for (int k = 0; k < K; ++k) {
        for (int n = 0; n < N; ++n)
            if (alloc.d(n, k) > 0.0) ev.device_energy(k) += t(n, k) * alloc.p(n, k);
        detail::record(rep.energy, (ev.device_energy(k) - cfg.Q(k)) / cfg.Q(k), tol);
    }
    ev.total_energy = ev.device_energy.sum();

    detail::check_schedule(alloc.x, cfg, rep);
    rep.resource_blocks.pass = rep.resource_blocks.violation <= 0.0;
    rep.regularity.pass = rep.regularity.violation <= 0.0;

    const double data_scale = std::max(cfg.D.maxCoeff(), 1.0);
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k) {
            const double d = alloc.d(n, k), p = alloc.p(n, k);
            detail::record(rep.data_nonnegative, -d / data_scale, tol);
            detail::record(rep.power_bounds, (p - cfg.P(k)) / cfg.P(k), tol);
            detail::record(rep.power_bounds, -p / cfg.P(k), tol);
            detail::record(rep.duration_bounds, (t(n, k) - cfg.T0) / cfg.T0, tol);
            if (d > 0.0 && (alloc.x(n, k) == 0 || p <= 0.0))
                detail::record(rep.coupling, d / data_scale, tol);
        }

    // Expected delivery factor per link; the optimiser works with these.
    MatrixXd s = MatrixXd::Zero(N, K);
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k)
            if (alloc.x(n, k) != 0 && alloc.d(n, k) > 0.0) s(n, k) = success_probability(alloc.p(n, k), ch.h(n, k), cfg);

    MatrixXd delivered = alloc.d.cwiseProduct(s);  // expected bits per link
    ev.slot_accuracy = VectorXd::Zero(N);
    ev.accuracy_stderr = VectorXd::Zero(N);

    if (opt.mode == DeliveryMode::expected) {
        double cum = 0.0;
        for (int n = 0; n < N; ++n) {
            cum += delivered.row(n).sum();
            ev.slot_accuracy(n) = accuracy(cum, cfg.cumulative_arrivals(n), cfg);
        }
    } else {
        if (opt.trials <= 0) throw std::invalid_argument("evaluate: Monte-Carlo mode needs trials > 0");
        std::mt19937_64 rng(opt.seed);
        std::uniform_real_distribution<double> uni(0.0, 1.0);
        VectorXd mean = VectorXd::Zero(N), m2 = VectorXd::Zero(N);
        MatrixXd delivered_sum = MatrixXd::Zero(N, K);
        for (int trial = 1; trial <= opt.trials; ++trial) {
            double cum = 0.0;
            for (int n = 0; n < N; ++n) {
                for (int k = 0; k < K; ++k) {
                    if (s(n, k) <= 0.0) continue;
                    if (uni(rng) < s(n, k)) {
                        cum += alloc.d(n, k);
                        delivered_sum(n, k) += alloc.d(n, k);
                    }
                }
                const double a = accuracy(cum, cfg.cumulative_arrivals(n), cfg);
                const double delta = a - mean(n);
                mean(n) += delta / trial;
                m2(n) += delta * (a - mean(n));
            }
        }
        ev.slot_accuracy = mean;
        if (opt.trials > 1)
            ev.accuracy_stderr = (m2.array() / (opt.trials - 1.0) / opt.trials).sqrt().matrix();
        delivered = delivered_sum / static_cast<double>(opt.trials);
    }

    for (int n = 0; n < N; ++n) detail::record(rep.accuracy, cfg.A(n) - ev.slot_accuracy(n), tol);
    ev.min_accuracy = N > 0 ? ev.slot_accuracy.minCoeff() : 1.0;

    for (int k = 0; k < K; ++k) {
        double cum_delivered = 0.0, cum_arrived = 0.0;
        for (int n = 0; n < N; ++n) {
            cum_delivered += delivered(n, k);
            cum_arrived += cfg.D(n, k);
            detail::record(rep.cumulative_data, (cum_delivered - cum_arrived) / std::max(cum_arrived, data_scale), tol);
        }
    }
    return ev;
}

} // namespace dtsync
