#include "swarmlab/cluster/worker.hpp"

#include <algorithm>
#include <unordered_map>

#include <boost/asio/io_context.hpp>

#include "swarmlab/cluster/line_channel.hpp"
#include "swarmlab/expr.hpp"

namespace swarmlab::cluster {

using Clock = std::chrono::steady_clock;

std::chrono::milliseconds backoff_delay(const WorkerOptions& options, unsigned attempt) {
  auto delay = options.initial_backoff;
  for (unsigned i = 0; i < attempt && delay < options.max_backoff; ++i) delay *= 2;
  return std::min(delay, options.max_backoff);
}

namespace {

// Memo of parsed objectives keyed by source text. Parsing is pure, so this
// carries no task state.
class ObjectiveCache {
 public:
  const ObjectiveExpr& get(const std::string& source) {
    auto it = cache_.find(source);
    if (it != cache_.end()) return it->second;
    if (cache_.size() >= kCapacity) cache_.clear();
    return cache_.emplace(source, ObjectiveExpr::parse(source)).first->second;
  }

 private:
  static constexpr std::size_t kCapacity = 64;
  std::unordered_map<std::string, ObjectiveExpr> cache_;
};

thread_local ObjectiveCache objective_cache;

}  // namespace

Message handle_task(const TaskEnvelope& task) {
  try {
    task.validate();
    const ObjectiveExpr& f = objective_cache.get(task.objective_source);
    ResultEnvelope reply{task.task_id, {}};
    reply.results.reserve(task.points.size());
    for (const auto& p : task.points) reply.results.push_back({p.index, evaluate_at(f, p.point)});
    return make_result(reply);
  } catch (const Error& e) {
    return make_error({task.task_id, e.what()});
  }
}

Worker::Worker(WorkerOptions options) : options_(std::move(options)) {
  if (options_.name.empty()) options_.name = "worker";
  parse_address(options_.head_address);
}

Worker::~Worker() { stop(); }

void Worker::run() {
  const Address head = parse_address(options_.head_address);
  boost::asio::io_context io;
  unsigned attempt = 0;
  auto failing_since = Clock::now();
  while (!stopping_) {
    std::unique_ptr<LineChannel> channel;
    try {
      channel = std::make_unique<LineChannel>(connect_to(io, head));
    } catch (const ConnectError& e) {
      if (Clock::now() - failing_since >= options_.give_up) {
        throw ConnectError(std::string(e.what()) + " (giving up after " +
                           std::to_string(options_.give_up.count()) + " ms)");
      }
      const auto until = Clock::now() + backoff_delay(options_, attempt++);
      while (!stopping_ && Clock::now() < until) std::this_thread::sleep_for(std::chrono::milliseconds(10));
      continue;
    }
    attempt = 0;
    {
      std::lock_guard lock(channel_mutex_);
      if (stopping_) break;
      channel_ = channel.get();
    }
    connected_ = channel->send(make_register(options_.name));
    if (connected_) serve_connection(*channel);
    connected_ = false;
    {
      std::lock_guard lock(channel_mutex_);
      channel_ = nullptr;
    }
    channel->shutdown();
    failing_since = Clock::now();
  }
}

bool Worker::serve_connection(LineChannel& channel) {
  while (!stopping_) {
    std::optional<Message> m;
    try {
      m = channel.read_message();
    } catch (const ProtocolError&) {
      return false;
    }
    if (!m) return false;
    switch (m->type) {
      case MessageType::task: {
        Message reply;
        try {
          reply = handle_task(task_from(*m));
        } catch (const ProtocolError& e) {
          std::uint64_t id = 0;
          if (m->payload.contains("task_id") && m->payload["task_id"].is_number_unsigned()) {
            id = m->payload["task_id"].get<std::uint64_t>();
          }
          reply = make_error({id, e.what()});
        }
        if (options_.task_delay.count() > 0) std::this_thread::sleep_for(options_.task_delay);
        if (killed_) return false;
        if (!channel.send(reply)) return false;
        ++tasks_completed_;
        break;
      }
      case MessageType::ping:
        channel.send(make_pong(nonce_from(*m)));
        break;
      default:
        break;
    }
  }
  return true;
}

void Worker::stop() {
  stopping_ = true;
  std::lock_guard lock(channel_mutex_);
  if (channel_) channel_->shutdown_read();
}

void Worker::kill() {
  killed_ = true;
  stopping_ = true;
  std::lock_guard lock(channel_mutex_);
  if (channel_) channel_->shutdown();
}

WorkerHandle::WorkerHandle(WorkerOptions options)
    : worker_(std::make_unique<Worker>(std::move(options))) {
  thread_ = std::thread([this] {
    try {
      worker_->run();
    } catch (const std::exception& e) {
      std::lock_guard lock(mutex_);
      failure_ = e.what();
    }
  });
}

WorkerHandle::~WorkerHandle() { stop(); }

void WorkerHandle::stop() {
  worker_->stop();
  if (thread_.joinable()) thread_.join();
}

void WorkerHandle::kill() {
  worker_->kill();
  if (thread_.joinable()) thread_.join();
}

std::string WorkerHandle::failure() const {
  std::lock_guard lock(mutex_);
  return failure_;
}

}  // namespace swarmlab::cluster
