#pragma once

#include <atomic>
#include <chrono>
#include <cstddef>
#include <memory>
#include <mutex>
#include <string>
#include <thread>

#include "swarmlab/cluster/protocol.hpp"

namespace swarmlab::cluster {

class LineChannel;

struct WorkerOptions {
  std::string head_address;
  std::string name;  // reported at registration; defaults to "worker"
  std::chrono::milliseconds initial_backoff{200};
  std::chrono::milliseconds max_backoff{5000};
  /// Total time spent failing to reach the head before run() throws ConnectError.
  std::chrono::milliseconds give_up{30000};
  /// Artificial per-task delay, for exercising timeouts and mid-batch failures.
  std::chrono::milliseconds task_delay{0};
};

/// Reconnect delays: initial, x2 each attempt, capped at max.
std::chrono::milliseconds backoff_delay(const WorkerOptions& options, unsigned attempt);

/// Evaluates one task. Returns a result message, or an error message naming
/// the task when the objective does not parse or the envelope is invalid.
Message handle_task(const TaskEnvelope& task);

/// Stateless worker node: registers with the head, then answers tasks one at
/// a time. Reconnects with exponential backoff when the head goes away.
class Worker {
 public:
  explicit Worker(WorkerOptions options);
  ~Worker();

  /// Blocks until stop()/kill(), or throws ConnectError after give_up.
  void run();

  /// Ends run() after the current task.
  void stop();
  /// Drops the connection immediately, abandoning any task in progress.
  void kill();

  bool connected() const { return connected_; }
  std::size_t tasks_completed() const { return tasks_completed_; }

 private:
  bool serve_connection(LineChannel& channel);

  WorkerOptions options_;
  std::atomic<bool> stopping_{false};
  std::atomic<bool> killed_{false};
  std::atomic<bool> connected_{false};
  std::atomic<std::size_t> tasks_completed_{0};
  std::mutex channel_mutex_;
  LineChannel* channel_ = nullptr;
};

/// Worker running on a background thread.
class WorkerHandle {
 public:
  explicit WorkerHandle(WorkerOptions options);
  ~WorkerHandle();
  WorkerHandle(const WorkerHandle&) = delete;
  WorkerHandle& operator=(const WorkerHandle&) = delete;

  Worker& worker() { return *worker_; }
  void stop();
  void kill();
  /// Error that ended the worker thread, if any.
  std::string failure() const;

 private:
  std::unique_ptr<Worker> worker_;
  std::thread thread_;
  mutable std::mutex mutex_;
  std::string failure_;
};

inline std::unique_ptr<WorkerHandle> start_worker(const std::string& head_address, std::string name = "worker") {
  WorkerOptions o;
  o.head_address = head_address;
  o.name = std::move(name);
  return std::make_unique<WorkerHandle>(std::move(o));
}

}  // namespace swarmlab::cluster
