#pragma once

#include <chrono>
#include <cstddef>
#include <filesystem>

#include <nlohmann/json.hpp>

#include "swarmlab/swarm.hpp"

namespace swarmlab {

/// Defaults for new server sessions, loaded from a JSON file. Keys:
///   "tick_interval_ms"   (default 3000)
///   "steps_per_tick"     (default 1)
///   "frame_buffer"       per-subscriber queue length before oldest frames drop (default 64)
/// plus any swarm config key ("bounds", "c1", "c2", "inertia_w", ...).
struct ServiceConfig {
  SwarmConfig swarm;
  std::chrono::milliseconds tick_interval{3000};
  std::size_t steps_per_tick = 1;
  std::size_t frame_buffer = 64;

  void validate() const;
};

ServiceConfig service_config_from_json(const nlohmann::json& j);
ServiceConfig load_service_config(const std::filesystem::path& path);
nlohmann::json to_json(const ServiceConfig& config);

}  // namespace swarmlab
