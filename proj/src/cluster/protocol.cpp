#include "swarmlab/cluster/protocol.hpp"

#include <charconv>
#include <cmath>
#include <cstring>
#include <limits>
#include <unordered_set>

#include "swarmlab/expr.hpp"

namespace swarmlab::cluster {

using nlohmann::json;

namespace {

struct TypeName {
  MessageType type;
  std::string_view name;
};

constexpr TypeName kTypes[] = {
    {MessageType::register_worker, "register"}, {MessageType::task, "task"},
    {MessageType::result, "result"},            {MessageType::error, "error"},
    {MessageType::ping, "ping"},                {MessageType::pong, "pong"},
};

void expect_type(const Message& m, MessageType t) {
  if (m.type != t) {
    throw ProtocolError("expected '" + std::string(to_string(t)) + "' message, got '" +
                        std::string(to_string(m.type)) + "'");
  }
}

template <typename F>
auto guarded(const char* what, F&& f) {
  try {
    return f();
  } catch (const json::exception& e) {
    throw ProtocolError(std::string("malformed ") + what + " payload: " + e.what());
  }
}

}  // namespace

std::string_view to_string(MessageType type) {
  for (const auto& t : kTypes) {
    if (t.type == type) return t.name;
  }
  return "?";
}

std::string encode(const Message& message) {
  json j{{"type", std::string(to_string(message.type))}, {"payload", message.payload}};
  std::string line = j.dump();
  line += '\n';
  return line;
}

Message decode(std::string_view line) {
  if (!line.empty() && line.back() == '\n') line.remove_suffix(1);
  if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
  json j = json::parse(line, nullptr, false);
  if (j.is_discarded() || !j.is_object()) throw ProtocolError("message is not a JSON object");
  if (!j.contains("type") || !j["type"].is_string()) throw ProtocolError("message lacks a string 'type'");
  const std::string type = j["type"].get<std::string>();
  Message m;
  bool known = false;
  for (const auto& t : kTypes) {
    if (t.name == type) {
      m.type = t.type;
      known = true;
    }
  }
  if (!known) throw ProtocolError("unknown message type '" + type + "'");
  if (j.contains("payload")) m.payload = j["payload"];
  if (!m.payload.is_object()) throw ProtocolError("payload must be an object");
  return m;
}

json value_to_json(double v) {
  if (std::isnan(v)) return "nan";
  if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
  return v;
}

double value_from_json(const json& j) {
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) {
    const auto s = j.get<std::string>();
    if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
    if (s == "inf") return std::numeric_limits<double>::infinity();
    if (s == "-inf") return -std::numeric_limits<double>::infinity();
  }
  throw ProtocolError("invalid value " + j.dump());
}

bool same_values(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::isnan(a[i]) && std::isnan(b[i])) continue;
    if (std::memcmp(&a[i], &b[i], sizeof(double)) != 0) return false;
  }
  return true;
}

void TaskEnvelope::validate() const {
  std::unordered_set<std::uint64_t> seen;
  for (const auto& p : points) {
    if (!seen.insert(p.index).second) {
      throw ProtocolError("task " + std::to_string(task_id) + ": duplicate particle index " +
                          std::to_string(p.index));
    }
  }
  try {
    expr::ObjectiveExpr::parse(objective_source);
  } catch (const expr::ParseError& e) {
    throw ProtocolError("task " + std::to_string(task_id) + ": " + e.what());
  }
}

bool ResultEnvelope::covers(const TaskEnvelope& task) const {
  if (results.size() != task.points.size()) return false;
  std::unordered_set<std::uint64_t> want;
  for (const auto& p : task.points) want.insert(p.index);
  for (const auto& r : results) {
    if (want.erase(r.index) != 1) return false;
  }
  return want.empty();
}

Message make_register(std::string_view worker_name) {
  return {MessageType::register_worker, json{{"name", std::string(worker_name)}}};
}

Message make_task(const TaskEnvelope& task) {
  json points = json::array();
  for (const auto& p : task.points) points.push_back(json::array({p.index, p.point[0], p.point[1]}));
  return {MessageType::task,
          json{{"task_id", task.task_id}, {"objective", task.objective_source}, {"points", std::move(points)}}};
}

Message make_result(const ResultEnvelope& result) {
  json results = json::array();
  for (const auto& r : result.results) results.push_back(json::array({r.index, value_to_json(r.value)}));
  return {MessageType::result, json{{"task_id", result.task_id}, {"results", std::move(results)}}};
}

Message make_error(const ErrorEnvelope& error) {
  return {MessageType::error, json{{"task_id", error.task_id}, {"message", error.message}}};
}

Message make_ping(std::uint64_t nonce) { return {MessageType::ping, json{{"nonce", nonce}}}; }
Message make_pong(std::uint64_t nonce) { return {MessageType::pong, json{{"nonce", nonce}}}; }

TaskEnvelope task_from(const Message& m) {
  expect_type(m, MessageType::task);
  return guarded("task", [&] {
    TaskEnvelope t;
    t.task_id = m.payload.at("task_id").get<std::uint64_t>();
    t.objective_source = m.payload.at("objective").get<std::string>();
    for (const auto& p : m.payload.at("points")) {
      if (!p.is_array() || p.size() != 3) throw ProtocolError("task point must be [index, x, y]");
      t.points.push_back({p[0].get<std::uint64_t>(), {p[1].get<double>(), p[2].get<double>()}});
    }
    return t;
  });
}

ResultEnvelope result_from(const Message& m) {
  expect_type(m, MessageType::result);
  return guarded("result", [&] {
    ResultEnvelope r;
    r.task_id = m.payload.at("task_id").get<std::uint64_t>();
    for (const auto& v : m.payload.at("results")) {
      if (!v.is_array() || v.size() != 2) throw ProtocolError("result entry must be [index, value]");
      r.results.push_back({v[0].get<std::uint64_t>(), value_from_json(v[1])});
    }
    return r;
  });
}

ErrorEnvelope error_from(const Message& m) {
  expect_type(m, MessageType::error);
  return guarded("error", [&] {
    return ErrorEnvelope{m.payload.at("task_id").get<std::uint64_t>(), m.payload.at("message").get<std::string>()};
  });
}

std::string worker_name_from(const Message& m) {
  expect_type(m, MessageType::register_worker);
  return guarded("register", [&] { return m.payload.value("name", std::string{}); });
}

std::uint64_t nonce_from(const Message& m) {
  return guarded("ping", [&] { return m.payload.value("nonce", std::uint64_t{0}); });
}

Address parse_address(std::string_view text) {
  const auto colon = text.rfind(':');
  if (colon == std::string_view::npos || colon == 0 || colon + 1 == text.size()) {
    throw ConfigError("address must be HOST:PORT, got '" + std::string(text) + "'");
  }
  Address a;
  a.host = std::string(text.substr(0, colon));
  unsigned port = 0;
  const auto digits = text.substr(colon + 1);
  const auto res = std::from_chars(digits.data(), digits.data() + digits.size(), port);
  if (res.ec != std::errc() || res.ptr != digits.data() + digits.size() || port > 65535) {
    throw ConfigError("invalid port in address '" + std::string(text) + "'");
  }
  a.port = static_cast<std::uint16_t>(port);
  return a;
}

}  // namespace swarmlab::cluster
