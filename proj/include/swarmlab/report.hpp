#pragma once

#include <nlohmann/json.hpp>

#include "swarmlab/swarm.hpp"

namespace swarmlab {

// JSON shapes:
//   Point      [x, y]
//   RunReport  {"g_best": [x, y], "error": number, "iterations": int,
//               "reason": "tolerance" | "max_iterations", "trace": [number]}
//   SwarmConfig {"num_particles", "c1", "c2", "inertia_w",
//                "bounds": {"x": [lo, hi], "y": [lo, hi]},
//                "v_max_fraction": number | null, "bounds_policy": "clamp" | "reflect",
//                "max_iterations", "error_tolerance", "seed"}

nlohmann::json point_to_json(const Point& p);
Point point_from_json(const nlohmann::json& j);

nlohmann::json to_json(const RunReport& report);
RunReport run_report_from_json(const nlohmann::json& j);

nlohmann::json to_json(const SwarmConfig& config);

/// Overrides the fields present in j; unknown keys raise ConfigError.
/// The result is not validated.
void apply_json(SwarmConfig& config, const nlohmann::json& j);

}  // namespace swarmlab
