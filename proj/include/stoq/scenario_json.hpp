// scenario_json.hpp — JSON (de)serialization of scenarios and run configs.

#pragma once

#include "stoq/model.hpp"
#include "stoq/oracle.hpp"
#include "stoq/types.hpp"

#include <json.hpp>

#include <optional>
#include <string>

namespace stoq {

// Scenario schema:
// {
//   "system": [[[re,im],...],...],
//   "couplings": [matrix, ...],
//   "bath": {"T": number | "infinite", "hbar": number,
//            "spectrum": {"kind": "discrete", "modes": [{"omega": w, "weight": [[..]]}]}
//                      | {"kind": "continuous", "omega": [..], "sigma": [[[..]],..]}},
//   "initial": {"state": [[re,im],...]} | {"density": matrix},
//   "grid": {"t0": t, "dt": dt, "n_steps": n}
// }
Scenario scenario_from_json(const nlohmann::json& j);
nlohmann::json scenario_to_json(const Scenario& s);

Scenario load_scenario(const std::string& path);

// Optional config sections used by the CLI.
struct RunConfig {
    Scenario scenario;
    std::size_t n_traj{1000};
    std::uint64_t master_seed{1};
    std::optional<BathModeSet> oracle_modes;   // "oracle": {"modes": [...]}
    bool scattering{false};                    // "analysis": {"scattering": true, ...}
    int window_begin{0};
    bool gibbs{false};
    int gibbs_window_begin{0};
    double compare_threshold{0.02};
};

RunConfig config_from_json(const nlohmann::json& j);
RunConfig load_config(const std::string& path);

Matrix matrix_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json matrix_to_json(const Matrix& m);
Vector vector_from_json(const nlohmann::json& j, const std::string& where);
nlohmann::json vector_to_json(const Vector& v);

} // namespace stoq
