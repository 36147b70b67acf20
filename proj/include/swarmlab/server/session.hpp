#pragma once

#include <chrono>
#include <condition_variable>
#include <cstddef>
#include <cstdint>
#include <deque>
#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <mutex>
#include <optional>
#include <string>
#include <string_view>
#include <thread>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarmlab/config.hpp"
#include "swarmlab/error.hpp"
#include "swarmlab/swarm.hpp"

namespace swarmlab::server {

enum class SessionStatus { idle, running, converged, stopped, errored };

std::string_view to_string(SessionStatus status);

/// Illegal lifecycle transition; the message names the current status.
class StateError : public Error {
 public:
  StateError(const std::string& what, SessionStatus current) : Error(what), current_(current) {}
  SessionStatus current() const { return current_; }

 private:
  SessionStatus current_;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

struct SetNumParticles {
  std::size_t n = 0;
};
struct SetObjective {
  ObjectiveExpr objective;
};
struct SetLearningFactors {
  double c1 = 0.0;
  double c2 = 0.0;
};
struct SetTickInterval {
  std::chrono::milliseconds interval{0};
};

using ParamChange = std::variant<SetNumParticles, SetObjective, SetLearningFactors, SetTickInterval>;

std::string to_string(const ParamChange& change);

struct Frame {
  std::string session_id;
  std::uint64_t iteration = 0;
  std::vector<Point> positions;
  std::vector<double> p_best_errors;
  Point g_best{};
  double g_best_error = 0.0;
  SessionStatus status = SessionStatus::idle;
  std::string objective;
  std::optional<std::string> error;
};

nlohmann::json to_json(const Frame& frame);
Frame frame_from_json(const nlohmann::json& j);

/// Bounded per-subscriber frame buffer. push never blocks: when full the
/// oldest frame is discarded and counted, and the next pop reports the gap
/// before any further frame.
class FrameQueue {
 public:
  struct Item {
    std::shared_ptr<const std::string> frame;  // null for a gap marker
    std::size_t dropped = 0;
  };

  explicit FrameQueue(std::size_t capacity) : capacity_(capacity) {}

  void push(std::shared_ptr<const std::string> frame);
  /// nullopt on timeout or once closed and drained.
  std::optional<Item> pop(std::chrono::milliseconds timeout);
  void close();
  bool closed() const;
  std::size_t total_dropped() const;

 private:
  std::size_t capacity_;
  mutable std::mutex mutex_;
  std::condition_variable ready_;
  std::deque<std::shared_ptr<const std::string>> frames_;
  std::size_t pending_gap_ = 0;
  std::size_t total_dropped_ = 0;
  bool closed_ = false;
};

using EvaluatorFactory = std::function<std::unique_ptr<Evaluator>()>;

struct SessionOptions {
  ServiceConfig service;
  /// Start a ticker thread on start(); tests leave this off and call tick().
  bool autotick = true;
  /// Per-session evaluator; ParallelEvaluator when empty.
  EvaluatorFactory evaluator_factory;
  /// When set, every emitted frame is appended to <trace_dir>/<session_id>.jsonl.
  std::optional<std::filesystem::path> trace_dir;
};

/// One client's live run. Every public member is thread-safe; ticks,
/// lifecycle calls and snapshots on one session are serialized by its mutex.
class Session {
 public:
  /// Parses the objective and validates the config (ParseError, ConfigError),
  /// then initializes the swarm. The session starts idle.
  Session(std::string id, const SwarmConfig& config, const std::string& objective_source, SessionOptions options);
  ~Session();
  Session(const Session&) = delete;
  Session& operator=(const Session&) = delete;

  const std::string& id() const { return id_; }

  SessionStatus status() const;
  void start();
  void stop();
  /// Fresh swarm seeded with derive_seed(seed, resets + 1). Legal from any status.
  void reset();

  /// Checks the change against the current config, then queues it for the
  /// next tick. Throws ConfigError when the result would be invalid.
  void enqueue(ParamChange change);
  /// All-or-nothing: either every change is queued or none is.
  void enqueue(std::vector<ParamChange> changes);
  std::size_t pending_changes() const;

  /// Applies pending changes, advances steps_per_tick iterations and emits a
  /// frame to every subscriber. Requires running. Ends in converged when the
  /// tolerance is reached, stopped at max_iterations, errored on an
  /// evaluation failure (the frame then carries the error).
  Frame tick();

  /// Current state as a frame; emits nothing.
  Frame snapshot() const;
  /// Session metadata plus snapshot, as served over HTTP.
  nlohmann::json describe() const;

  SwarmConfig config() const;
  std::chrono::milliseconds tick_interval() const;
  std::uint64_t resets() const;

  /// Receives every frame emitted after this call, serialized once and shared.
  std::shared_ptr<FrameQueue> subscribe();
  void unsubscribe(const std::shared_ptr<FrameQueue>& queue);
  std::size_t subscriber_count() const;

 private:
  Frame make_frame_locked() const;
  void apply_locked(const ParamChange& change);
  void emit_locked(const Frame& frame);
  Frame tick_locked();
  void ticker_loop(std::uint64_t generation);
  void join_ticker();

  const std::string id_;
  SessionOptions options_;
  std::unique_ptr<Evaluator> evaluator_;

  mutable std::mutex mutex_;
  std::condition_variable wake_;
  SwarmConfig config_;
  ObjectiveExpr objective_;
  SwarmState swarm_;
  SessionStatus status_ = SessionStatus::idle;
  std::chrono::milliseconds tick_interval_;
  std::deque<ParamChange> pending_;
  std::uint64_t resets_ = 0;
  std::optional<std::string> last_error_;
  std::uint64_t generation_ = 0;  // bumped on every start so stale tickers exit

  mutable std::mutex subscribers_mutex_;
  std::vector<std::shared_ptr<FrameQueue>> subscribers_;
  std::ofstream trace_;

  std::mutex ticker_mutex_;
  std::thread ticker_;
};

}  // namespace swarmlab::server
