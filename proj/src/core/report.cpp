#include "swarmlab/report.hpp"

#include <string>

#include "swarmlab/error.hpp"

namespace swarmlab {

using nlohmann::json;

json point_to_json(const Point& p) {
  json j = json::array();
  for (double v : p) j.push_back(v);
  return j;
}

Point point_from_json(const json& j) {
  if (!j.is_array() || j.size() != kDimensions) {
    throw ConfigError("expected a point [x, y], got " + j.dump());
  }
  Point p{};
  for (std::size_t d = 0; d < kDimensions; ++d) p[d] = j.at(d).get<double>();
  return p;
}

json to_json(const RunReport& report) {
  return json{{"g_best", point_to_json(report.g_best)},
              {"error", report.error},
              {"iterations", report.iterations},
              {"reason", std::string(to_string(report.reason))},
              {"trace", report.trace}};
}

RunReport run_report_from_json(const json& j) {
  RunReport r;
  r.g_best = point_from_json(j.at("g_best"));
  r.error = j.at("error").get<double>();
  r.iterations = j.at("iterations").get<std::uint64_t>();
  const auto reason = j.at("reason").get<std::string>();
  if (reason == "tolerance") {
    r.reason = TerminationReason::tolerance;
  } else if (reason == "max_iterations") {
    r.reason = TerminationReason::max_iterations;
  } else {
    throw ConfigError("unknown termination reason '" + reason + "'");
  }
  r.trace = j.at("trace").get<std::vector<double>>();
  return r;
}

json to_json(const SwarmConfig& c) {
  json bounds;
  bounds["x"] = {c.bounds.axes[0].lo, c.bounds.axes[0].hi};
  bounds["y"] = {c.bounds.axes[1].lo, c.bounds.axes[1].hi};
  return json{{"num_particles", c.num_particles},
              {"c1", c.c1},
              {"c2", c.c2},
              {"inertia_w", c.inertia_w},
              {"bounds", bounds},
              {"v_max_fraction", c.v_max_fraction ? json(*c.v_max_fraction) : json(nullptr)},
              {"bounds_policy", std::string(to_string(c.bounds_policy))},
              {"max_iterations", c.max_iterations},
              {"error_tolerance", c.error_tolerance},
              {"seed", c.seed}};
}

namespace {

Interval interval_from_json(const json& j, const char* axis) {
  if (!j.is_array() || j.size() != 2) throw ConfigError(std::string("bounds.") + axis + " must be [lo, hi]");
  return {j[0].get<double>(), j[1].get<double>()};
}

}  // namespace

void apply_json(SwarmConfig& c, const json& j) {
  if (!j.is_object()) throw ConfigError("swarm config must be a JSON object");
  try {
    for (const auto& [key, value] : j.items()) {
      if (key == "num_particles") {
        c.num_particles = value.get<std::size_t>();
      } else if (key == "c1") {
        c.c1 = value.get<double>();
      } else if (key == "c2") {
        c.c2 = value.get<double>();
      } else if (key == "inertia_w") {
        c.inertia_w = value.get<double>();
      } else if (key == "bounds") {
        if (value.contains("x")) c.bounds.axes[0] = interval_from_json(value.at("x"), "x");
        if (value.contains("y")) c.bounds.axes[1] = interval_from_json(value.at("y"), "y");
      } else if (key == "v_max_fraction") {
        if (value.is_null()) {
          c.v_max_fraction.reset();
        } else {
          c.v_max_fraction = value.get<double>();
        }
      } else if (key == "bounds_policy") {
        c.bounds_policy = bounds_policy_from_string(value.get<std::string>());
      } else if (key == "max_iterations") {
        c.max_iterations = value.get<std::size_t>();
      } else if (key == "error_tolerance") {
        c.error_tolerance = value.get<double>();
      } else if (key == "seed") {
        c.seed = value.get<std::uint64_t>();
      } else {
        throw ConfigError("unknown swarm config key '" + key + "'");
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid swarm config: ") + e.what());
  }
}

}  // namespace swarmlab
