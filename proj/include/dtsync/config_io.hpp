#pragma once

// Scenario defaults and the JSON scenario format.
//
// Keys: K, N, T0_s, B_hz, noise_dbm_per_hz, m, alpha, Q_j, P_dbm, D_bits, A,
// tau, beta, K0, area_m, shadowing_db, pathloss {intercept_db, slope}.
// Q_j, P_dbm, A and beta take an array or a scalar; D_bits takes an N x K
// array or a scalar. Unknown keys are rejected.

#include "dtsync/model.hpp"

#include <json.hpp>

#include <fstream>
#include <set>
#include <stdexcept>
#include <string>

namespace dtsync {

using json = nlohmann::json;

/// Default scenario: 10 devices, 10 one-second slots, 300 kbit arrivals,
/// A = 0.6, tau = 3, K0 = 5, beta = 1/3, 1 dBm, 1 MHz, -174 dBm/Hz.
/// Q_k = 10 mJ, m = 1 and T0 = 1 s are not given by the model; alpha = 0.25
/// keeps the default accuracy target reachable with K0 = 5 of 10 devices.
inline ScenarioConfig reference_scenario(int K = 10, int N = 10) {
    ScenarioConfig cfg;
    cfg.K = K;
    cfg.N = N;
    cfg.T0 = 1.0;
    cfg.B = 1e6;
    cfg.sigma2 = noise_power_watts(-174.0, cfg.B);
    cfg.m = 1.0;
    cfg.alpha = 0.25;
    cfg.Q = VectorXd::Constant(K, 1e-2);
    cfg.P = VectorXd::Constant(K, dbm_to_watts(1.0));
    cfg.D = MatrixXd::Constant(N, K, 3e5);
    cfg.A = VectorXd::Constant(N, 0.6);
    cfg.tau = 3;
    cfg.beta = VectorXd::Constant(K, 1.0 / 3.0);
    cfg.K0 = std::min(5, K);
    return cfg;
}

namespace detail {

inline VectorXd json_vector(const json& j, int n, const char* key) {
    if (j.is_number()) return VectorXd::Constant(n, j.get<double>());
    if (!j.is_array() || static_cast<int>(j.size()) != n)
        throw std::invalid_argument(std::string("config: ") + key + " must be a number or an array of length " +
                                    std::to_string(n));
    VectorXd v(n);
    for (int i = 0; i < n; ++i) v(i) = j[i].get<double>();
    return v;
}

inline json vector_json(const VectorXd& v) {
    json a = json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) a.push_back(v(i));
    return a;
}

} // namespace detail

/// Parses a scenario; missing keys keep reference_scenario values.
inline ScenarioConfig config_from_json(const json& j) {
    static const std::set<std::string> known = {"K", "N", "T0_s", "B_hz", "noise_dbm_per_hz", "m", "alpha",
                                                "Q_j", "P_dbm", "D_bits", "A", "tau", "beta", "K0", "area_m",
                                                "shadowing_db", "pathloss"};
    if (!j.is_object()) throw std::invalid_argument("config: top level must be an object");
    for (const auto& [key, _] : j.items())
        if (!known.count(key)) throw std::invalid_argument("config: unknown key '" + key + "'");

    const int K = j.value("K", 10), N = j.value("N", 10);
    if (K <= 0 || N <= 0) throw std::invalid_argument("config: K and N must be positive");
    ScenarioConfig cfg = reference_scenario(K, N);
    cfg.T0 = j.value("T0_s", cfg.T0);
    cfg.B = j.value("B_hz", cfg.B);
    cfg.sigma2 = noise_power_watts(j.value("noise_dbm_per_hz", -174.0), cfg.B);
    cfg.m = j.value("m", cfg.m);
    cfg.alpha = j.value("alpha", cfg.alpha);
    if (j.contains("Q_j")) cfg.Q = detail::json_vector(j["Q_j"], K, "Q_j");
    if (j.contains("P_dbm"))
        cfg.P = detail::json_vector(j["P_dbm"], K, "P_dbm").unaryExpr([](double v) { return dbm_to_watts(v); });
    if (j.contains("D_bits")) {
        const json& d = j["D_bits"];
        if (d.is_number()) {
            cfg.D.setConstant(d.get<double>());
        } else {
            if (!d.is_array() || static_cast<int>(d.size()) != N)
                throw std::invalid_argument("config: D_bits must be a number or an N x K array");
            for (int n = 0; n < N; ++n) cfg.D.row(n) = detail::json_vector(d[n], K, "D_bits row").transpose();
        }
    }
    if (j.contains("A")) cfg.A = detail::json_vector(j["A"], N, "A");
    cfg.tau = j.value("tau", cfg.tau);
    if (j.contains("beta")) cfg.beta = detail::json_vector(j["beta"], K, "beta");
    cfg.K0 = j.value("K0", cfg.K0);
    cfg.geometry.area_m = j.value("area_m", cfg.geometry.area_m);
    cfg.geometry.shadowing_db = j.value("shadowing_db", cfg.geometry.shadowing_db);
    if (j.contains("pathloss")) {
        const json& pl = j["pathloss"];
        cfg.geometry.pathloss_intercept_db = pl.value("intercept_db", cfg.geometry.pathloss_intercept_db);
        cfg.geometry.pathloss_slope = pl.value("slope", cfg.geometry.pathloss_slope);
    }
    cfg.validate();
    return cfg;
}

inline json config_to_json(const ScenarioConfig& cfg) {
    json j;
    j["K"] = cfg.K;
    j["N"] = cfg.N;
    j["T0_s"] = cfg.T0;
    j["B_hz"] = cfg.B;
    j["noise_dbm_per_hz"] = watts_to_dbm(cfg.sigma2 / cfg.B);
    j["m"] = cfg.m;
    j["alpha"] = cfg.alpha;
    j["Q_j"] = detail::vector_json(cfg.Q);
    j["P_dbm"] = detail::vector_json(cfg.P.unaryExpr([](double w) { return watts_to_dbm(w); }));
    json d = json::array();
    for (int n = 0; n < cfg.N; ++n) d.push_back(detail::vector_json(cfg.D.row(n).transpose()));
    j["D_bits"] = d;
    j["A"] = detail::vector_json(cfg.A);
    j["tau"] = cfg.tau;
    j["beta"] = detail::vector_json(cfg.beta);
    j["K0"] = cfg.K0;
    j["area_m"] = cfg.geometry.area_m;
    j["shadowing_db"] = cfg.geometry.shadowing_db;
    j["pathloss"] = {{"intercept_db", cfg.geometry.pathloss_intercept_db}, {"slope", cfg.geometry.pathloss_slope}};
    return j;
}

inline json read_json_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw std::runtime_error("cannot open " + path);
    return json::parse(in);
}

inline ScenarioConfig load_config(const std::string& path) { return config_from_json(read_json_file(path)); }

} // namespace dtsync
