#pragma once

#include <map>
#include <memory>
#include <mutex>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarmlab/server/session.hpp"

namespace swarmlab::server {

/// Thread-safe map of live sessions. New sessions start from the service
/// defaults with the client's overrides applied on top.
class SessionRegistry {
 public:
  explicit SessionRegistry(SessionOptions defaults);

  /// overrides: any swarm config key, plus "tick_interval_ms" and "steps_per_tick".
  std::shared_ptr<Session> create(const std::string& objective_source,
                                  const nlohmann::json& overrides = nlohmann::json::object());
  /// Throws NotFoundError.
  std::shared_ptr<Session> find(const std::string& id) const;
  bool erase(const std::string& id);
  std::vector<std::string> ids() const;
  std::size_t size() const;

  const SessionOptions& defaults() const { return defaults_; }

 private:
  SessionOptions defaults_;
  mutable std::mutex mutex_;
  std::map<std::string, std::shared_ptr<Session>> sessions_;
  std::uint64_t next_id_ = 1;
};

}  // namespace swarmlab::server
