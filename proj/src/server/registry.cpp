#include "swarmlab/server/registry.hpp"

#include "swarmlab/report.hpp"

namespace swarmlab::server {

using nlohmann::json;

SessionRegistry::SessionRegistry(SessionOptions defaults) : defaults_(std::move(defaults)) {
  defaults_.service.validate();
}

std::shared_ptr<Session> SessionRegistry::create(const std::string& objective_source, const json& overrides) {
  if (!overrides.is_object()) throw ConfigError("session config must be a JSON object");
  SessionOptions options = defaults_;
  SwarmConfig config = defaults_.service.swarm;
  json swarm_keys = json::object();
  try {
    for (const auto& [key, value] : overrides.items()) {
      if (key == "tick_interval_ms") {
        options.service.tick_interval = std::chrono::milliseconds(value.get<std::int64_t>());
      } else if (key == "steps_per_tick") {
        options.service.steps_per_tick = value.get<std::size_t>();
      } else {
        swarm_keys[key] = value;
      }
    }
  } catch (const json::exception& e) {
    throw ConfigError(std::string("invalid session config: ") + e.what());
  }
  apply_json(config, swarm_keys);
  options.service.swarm = config;

  std::string id;
  {
    std::lock_guard lock(mutex_);
    id = "s" + std::to_string(next_id_++);
  }
  auto session = std::make_shared<Session>(id, config, objective_source, std::move(options));
  std::lock_guard lock(mutex_);
  sessions_.emplace(id, session);
  return session;
}

std::shared_ptr<Session> SessionRegistry::find(const std::string& id) const {
  std::lock_guard lock(mutex_);
  auto it = sessions_.find(id);
  if (it == sessions_.end()) throw NotFoundError("no session '" + id + "'");
  return it->second;
}

bool SessionRegistry::erase(const std::string& id) {
  std::shared_ptr<Session> doomed;
  {
    std::lock_guard lock(mutex_);
    auto it = sessions_.find(id);
    if (it == sessions_.end()) return false;
    doomed = std::move(it->second);
    sessions_.erase(it);
  }
  return true;
}

std::vector<std::string> SessionRegistry::ids() const {
  std::lock_guard lock(mutex_);
  std::vector<std::string> out;
  for (const auto& [id, s] : sessions_) out.push_back(id);
  return out;
}

std::size_t SessionRegistry::size() const {
  std::lock_guard lock(mutex_);
  return sessions_.size();
}

}  // namespace swarmlab::server
