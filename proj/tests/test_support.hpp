#pragma once

// Shared scenario builders for the unit tests.

#include "dtsync/model.hpp"

#include <cstdint>
#include <random>

namespace dtsync::testing {

/// Small homogeneous scenario with typical radio constants.
inline ScenarioConfig small_config(int N, int K, int tau = 1, double beta = 1.0, int K0 = -1) {
    ScenarioConfig cfg;
    cfg.K = K;
    cfg.N = N;
    cfg.T0 = 1.0;
    cfg.B = 1e6;
    cfg.sigma2 = noise_power_watts(-174.0, cfg.B);
    cfg.m = 1.0;
    cfg.alpha = 1.0;
    cfg.Q = VectorXd::Constant(K, 0.01);
    cfg.P = VectorXd::Constant(K, dbm_to_watts(1.0));
    cfg.D = MatrixXd::Constant(N, K, 3e5);
    cfg.A = VectorXd::Constant(N, 0.3);
    cfg.tau = tau;
    cfg.beta = VectorXd::Constant(K, beta);
    cfg.K0 = K0 < 0 ? K : K0;
    return cfg;
}

/// Channel matrix with gains spread log-uniformly around a typical link.
inline ChannelRealization random_channels(int N, int K, std::uint64_t seed, double lo_db = -100.0,
                                          double hi_db = -85.0) {
    std::mt19937_64 rng(seed);
    std::uniform_real_distribution<double> db(lo_db, hi_db);
    ChannelRealization ch;
    ch.seed = seed;
    ch.h.resize(N, K);
    for (int n = 0; n < N; ++n)
        for (int k = 0; k < K; ++k) ch.h(n, k) = std::pow(10.0, db(rng) / 10.0);
    ch.positions = MatrixXd::Zero(K, 2);
    return ch;
}

} // namespace dtsync::testing
