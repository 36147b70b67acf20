#pragma once

#include <chrono>
#include <cstddef>
#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "swarmlab/cluster/protocol.hpp"
#include "swarmlab/evaluator.hpp"

namespace swarmlab::cluster {

class StartupError : public Error {
 public:
  using Error::Error;
};

/// A batch failed on its original worker and again after reassignment.
class TaskError : public Error {
 public:
  using Error::Error;
};

struct ClusterConfig {
  std::string head_address = "127.0.0.1:0";  // port 0 picks a free port
  std::size_t worker_count_expected = 0;
  std::chrono::milliseconds task_timeout{5000};
  std::size_t batch_size = 64;

  void validate() const;
};

struct DistributedResult {
  std::vector<double> values;   // values[i] belongs to points[i]
  std::size_t batches = 0;
  std::size_t reassigned = 0;   // batches retried on a second worker
  bool local_fallback = false;  // some or all points were evaluated in-process
};

/// Head node. Listens for worker registrations and for remote submitters
/// (connections whose first message is a task), and exposes
/// evaluate_distributed to in-process callers. All members are thread-safe.
class Head {
 public:
  /// Binds and starts accepting. Throws StartupError if the address cannot be bound.
  explicit Head(ClusterConfig config);
  ~Head();
  Head(const Head&) = delete;
  Head& operator=(const Head&) = delete;

  const ClusterConfig& config() const;
  /// Actual bound address (resolved port when 0 was requested).
  Address address() const;

  std::size_t worker_count() const;
  /// Blocks until at least n workers are registered; false on timeout.
  bool wait_for_workers(std::size_t n, std::chrono::milliseconds timeout) const;

  /// Splits points into batch_size batches, dispatches them round-robin
  /// over registered workers and reassembles results in index order. A
  /// batch that times out or whose worker dies is reassigned once to a
  /// different worker, or evaluated locally if there is none; a second
  /// failure throws TaskError. With no workers registered everything is
  /// evaluated locally.
  DistributedResult evaluate_distributed(const ObjectiveExpr& objective, std::span<const Point> points);

  /// Stops accepting, disconnects every peer and joins all threads. Idempotent.
  void shutdown();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

inline std::unique_ptr<Head> start_head(ClusterConfig config) { return std::make_unique<Head>(std::move(config)); }

/// Evaluator adaptor routing swarm fitness batches through an in-process head.
class HeadEvaluator final : public Evaluator {
 public:
  explicit HeadEvaluator(Head& head) : head_(head) {}
  void evaluate(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out) override;

  std::size_t degraded_batches() const { return degraded_; }

 private:
  Head& head_;
  std::size_t degraded_ = 0;
};

}  // namespace swarmlab::cluster
