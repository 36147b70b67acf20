#include "swarmlab/config.hpp"

#include <fstream>

#include "swarmlab/error.hpp"
#include "swarmlab/report.hpp"

namespace swarmlab {

using nlohmann::json;

void ServiceConfig::validate() const {
  swarm.validate();
  if (tick_interval.count() <= 0) throw ConfigError("tick_interval_ms must be > 0");
  if (steps_per_tick < 1) throw ConfigError("steps_per_tick must be >= 1");
  if (frame_buffer < 1) throw ConfigError("frame_buffer must be >= 1");
}

ServiceConfig service_config_from_json(const json& j) {
  if (!j.is_object()) throw ConfigError("service config must be a JSON object");
  ServiceConfig c;
  json swarm_keys = json::object();
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "tick_interval_ms") {
        c.tick_interval = std::chrono::milliseconds(value.get<std::int64_t>());
      } else if (key == "steps_per_tick") {
        c.steps_per_tick = value.get<std::size_t>();
      } else if (key == "frame_buffer") {
        c.frame_buffer = value.get<std::size_t>();
      } else {
        swarm_keys[key] = value;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid service config: ") + e.what());
  }
  apply_json(c.swarm, swarm_keys);
  c.validate();
  return c;
}

ServiceConfig load_service_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    in >> j;
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + ": " + e.what());
  }
  return service_config_from_json(j);
}

json to_json(const ServiceConfig& c) {
  json j = to_json(c.swarm);
  j["tick_interval_ms"] = c.tick_interval.count();
  j["steps_per_tick"] = c.steps_per_tick;
  j["frame_buffer"] = c.frame_buffer;
  return j;
}

}  // namespace swarmlab
