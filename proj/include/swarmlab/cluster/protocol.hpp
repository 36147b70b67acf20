#pragma once

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarmlab/error.hpp"
#include "swarmlab/evaluator.hpp"

namespace swarmlab::cluster {

// Wire format: one compact UTF-8 JSON object per line, {"type": T, "payload": P}.
//
//   register  worker -> head    {"name": string}
//   task      head -> worker,   {"task_id": u64, "objective": canonical text,
//             client -> head     "points": [[index, x, y], ...]}
//   result    reply to task     {"task_id": u64, "results": [[index, value], ...]}
//   error     reply to task     {"task_id": u64, "message": string}
//   ping/pong either direction  {"nonce": u64}
//
// Values that are not finite travel as the strings "nan", "inf", "-inf".

class ProtocolError : public Error {
 public:
  using Error::Error;
};

enum class MessageType { register_worker, task, result, error, ping, pong };

std::string_view to_string(MessageType type);

struct Message {
  MessageType type = MessageType::ping;
  nlohmann::json payload = nlohmann::json::object();
};

/// Compact JSON followed by '\n'.
std::string encode(const Message& message);

/// Parses one line (trailing '\n' optional). Throws ProtocolError.
Message decode(std::string_view line);

struct IndexedPoint {
  std::uint64_t index = 0;
  Point point{};
  friend bool operator==(const IndexedPoint&, const IndexedPoint&) = default;
};

struct IndexedValue {
  std::uint64_t index = 0;
  double value = 0.0;
};

struct TaskEnvelope {
  std::uint64_t task_id = 0;
  std::string objective_source;
  std::vector<IndexedPoint> points;

  /// Indices unique and objective parses; throws ProtocolError otherwise.
  void validate() const;
};

struct ResultEnvelope {
  std::uint64_t task_id = 0;
  std::vector<IndexedValue> results;

  /// True iff results cover exactly the index set of `task`.
  bool covers(const TaskEnvelope& task) const;
};

struct ErrorEnvelope {
  std::uint64_t task_id = 0;
  std::string message;
};

Message make_register(std::string_view worker_name);
Message make_task(const TaskEnvelope& task);
Message make_result(const ResultEnvelope& result);
Message make_error(const ErrorEnvelope& error);
Message make_ping(std::uint64_t nonce);
Message make_pong(std::uint64_t nonce);

TaskEnvelope task_from(const Message& m);
ResultEnvelope result_from(const Message& m);
ErrorEnvelope error_from(const Message& m);
std::string worker_name_from(const Message& m);
std::uint64_t nonce_from(const Message& m);

nlohmann::json value_to_json(double v);
double value_from_json(const nlohmann::json& j);

/// Values bit-identical, with every NaN considered equal to every NaN.
bool same_values(const std::vector<double>& a, const std::vector<double>& b);

/// "host:port" split. Throws ConfigError on a malformed address.
struct Address {
  std::string host;
  std::uint16_t port = 0;
  std::string str() const { return host + ":" + std::to_string(port); }
};
Address parse_address(std::string_view text);

}  // namespace swarmlab::cluster
