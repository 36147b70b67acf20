#include "swarmlab/cluster/head.hpp"

#include <sys/socket.h>

#include <algorithm>
#include <atomic>
#include <condition_variable>
#include <future>
#include <list>
#include <mutex>
#include <thread>
#include <unordered_map>

#include <boost/asio/ip/tcp.hpp>

#include "swarmlab/cluster/line_channel.hpp"

namespace swarmlab::cluster {

namespace asio = boost::asio;
using asio::ip::tcp;
using Clock = std::chrono::steady_clock;

void ClusterConfig::validate() const {
  parse_address(head_address);
  if (task_timeout.count() <= 0) throw ConfigError("task_timeout must be > 0");
  if (batch_size < 1) throw ConfigError("batch_size must be >= 1");
}

namespace {

struct BatchOutcome {
  bool ok = false;
  std::vector<IndexedValue> results;
  std::string error;
};

BatchOutcome failure(std::string why) {
  BatchOutcome o;
  o.error = std::move(why);
  return o;
}

std::future<BatchOutcome> ready(BatchOutcome o) {
  std::promise<BatchOutcome> p;
  p.set_value(std::move(o));
  return p.get_future();
}

class WorkerLink {
 public:
  WorkerLink(std::uint64_t id, std::string name, std::shared_ptr<LineChannel> channel)
      : id_(id), name_(std::move(name)), channel_(std::move(channel)) {}

  std::uint64_t id() const { return id_; }
  const std::string& name() const { return name_; }
  LineChannel& channel() { return *channel_; }

  std::future<BatchOutcome> dispatch(const TaskEnvelope& task) {
    std::future<BatchOutcome> fut;
    {
      std::lock_guard lock(mutex_);
      if (!alive_) return ready(failure("worker " + name_ + " is gone"));
      Pending& p = pending_[task.task_id];
      p.task = task;
      fut = p.promise.get_future();
    }
    if (!channel_->send(make_task(task))) fail_all("send to worker " + name_ + " failed");
    return fut;
  }

  void deliver(std::uint64_t task_id, BatchOutcome outcome) {
    std::lock_guard lock(mutex_);
    auto it = pending_.find(task_id);
    if (it == pending_.end()) return;  // late reply for a task already given up on
    if (outcome.ok) {
      ResultEnvelope envelope{task_id, outcome.results};
      if (!envelope.covers(it->second.task)) outcome = failure("result does not cover the task's indices");
    }
    it->second.promise.set_value(std::move(outcome));
    pending_.erase(it);
  }

  void forget(std::uint64_t task_id) {
    std::lock_guard lock(mutex_);
    pending_.erase(task_id);
  }

  void fail_all(const std::string& why) {
    std::lock_guard lock(mutex_);
    alive_ = false;
    for (auto& [id, p] : pending_) p.promise.set_value(failure(why));
    pending_.clear();
  }

 private:
  struct Pending {
    TaskEnvelope task;
    std::promise<BatchOutcome> promise;
  };

  std::uint64_t id_;
  std::string name_;
  std::shared_ptr<LineChannel> channel_;
  std::mutex mutex_;
  std::unordered_map<std::uint64_t, Pending> pending_;
  bool alive_ = true;
};

}  // namespace

struct Head::Impl {
  struct Connection {
    std::thread thread;
    std::shared_ptr<std::atomic<bool>> done;
  };

  ClusterConfig config;
  asio::io_context io;
  tcp::acceptor acceptor{io};
  Address bound;
  std::thread accept_thread;
  std::atomic<bool> stopping{false};

  mutable std::mutex mutex;
  mutable std::condition_variable workers_changed;
  std::vector<std::shared_ptr<WorkerLink>> workers;
  std::list<std::shared_ptr<LineChannel>> channels;
  std::list<Connection> connections;

  std::atomic<std::uint64_t> next_task_id{1};
  std::atomic<std::uint64_t> next_worker_id{1};
  std::atomic<std::size_t> round_robin{0};

  explicit Impl(ClusterConfig c) : config(std::move(c)) {
    config.validate();
    const Address want = parse_address(config.head_address);
    boost::system::error_code ec;
    tcp::resolver resolver(io);
    const auto results = resolver.resolve(want.host, std::to_string(want.port), ec);
    if (ec || results.empty()) {
      throw StartupError("cannot resolve head address " + want.str() + ": " + ec.message());
    }
    const tcp::endpoint endpoint = results.begin()->endpoint();
    acceptor.open(endpoint.protocol(), ec);
    if (!ec) acceptor.set_option(tcp::acceptor::reuse_address(true), ec);
    if (!ec) acceptor.bind(endpoint, ec);
    if (!ec) acceptor.listen(asio::socket_base::max_listen_connections, ec);
    if (ec) throw StartupError("cannot bind head to " + want.str() + ": " + ec.message());
    bound.host = want.host;
    bound.port = acceptor.local_endpoint().port();
    accept_thread = std::thread([this] { accept_loop(); });
  }

  void accept_loop() {
    while (!stopping) {
      boost::system::error_code ec;
      tcp::socket socket(io);
      acceptor.accept(socket, ec);
      if (stopping) break;
      if (ec) continue;
      auto channel = std::make_shared<LineChannel>(std::move(socket));
      auto done = std::make_shared<std::atomic<bool>>(false);
      std::lock_guard lock(mutex);
      reap_connections();
      channels.push_back(channel);
      connections.push_back({std::thread([this, channel, done] {
                               serve(channel);
                               release(channel);
                               *done = true;
                             }),
                             done});
    }
  }

  // Caller holds mutex.
  void reap_connections() {
    for (auto it = connections.begin(); it != connections.end();) {
      if (*it->done) {
        it->thread.join();
        it = connections.erase(it);
      } else {
        ++it;
      }
    }
  }

  void release(const std::shared_ptr<LineChannel>& channel) {
    std::lock_guard lock(mutex);
    channels.remove(channel);
  }

  void serve(const std::shared_ptr<LineChannel>& channel) {
    std::optional<Message> first;
    try {
      first = channel->read_message();
    } catch (const ProtocolError&) {
      channel->shutdown();
      return;
    }
    if (!first) return;
    if (first->type == MessageType::register_worker) {
      std::string name;
      try {
        name = worker_name_from(*first);
      } catch (const ProtocolError&) {
      }
      worker_loop(channel, std::move(name));
    } else {
      client_loop(channel, std::move(*first));
    }
    channel->shutdown();
  }

  void worker_loop(const std::shared_ptr<LineChannel>& channel, std::string name) {
    const std::uint64_t id = next_worker_id++;
    if (name.empty()) name = "worker-" + std::to_string(id);
    auto link = std::make_shared<WorkerLink>(id, name, channel);
    {
      std::lock_guard lock(mutex);
      if (stopping) return;
      workers.push_back(link);
    }
    workers_changed.notify_all();

    while (!stopping) {
      std::optional<Message> m;
      try {
        m = channel->read_message();
      } catch (const ProtocolError&) {
        break;
      }
      if (!m) break;
      try {
        switch (m->type) {
          case MessageType::result: {
            ResultEnvelope r = result_from(*m);
            BatchOutcome o;
            o.ok = true;
            o.results = std::move(r.results);
            link->deliver(r.task_id, std::move(o));
            break;
          }
          case MessageType::error: {
            const ErrorEnvelope e = error_from(*m);
            link->deliver(e.task_id, failure("worker " + link->name() + ": " + e.message));
            break;
          }
          case MessageType::ping:
            channel->send(make_pong(nonce_from(*m)));
            break;
          default:
            break;
        }
      } catch (const ProtocolError&) {
        break;
      }
    }

    {
      std::lock_guard lock(mutex);
      workers.erase(std::remove(workers.begin(), workers.end(), link), workers.end());
    }
    link->fail_all("worker " + link->name() + " disconnected");
    workers_changed.notify_all();
  }

  void client_loop(const std::shared_ptr<LineChannel>& channel, Message m) {
    while (true) {
      if (m.type == MessageType::ping) {
        channel->send(make_pong(nonce_from(m)));
      } else if (m.type == MessageType::task) {
        std::uint64_t task_id = 0;
        try {
          TaskEnvelope task = task_from(m);
          task_id = task.task_id;
          task.validate();
          const auto objective = ObjectiveExpr::parse(task.objective_source);
          std::vector<Point> points;
          points.reserve(task.points.size());
          for (const auto& p : task.points) points.push_back(p.point);
          const DistributedResult r = evaluate(objective, points);
          ResultEnvelope reply{task_id, {}};
          reply.results.reserve(points.size());
          for (std::size_t i = 0; i < points.size(); ++i) reply.results.push_back({task.points[i].index, r.values[i]});
          if (!channel->send(make_result(reply))) return;
        } catch (const Error& e) {
          if (!channel->send(make_error({task_id, e.what()}))) return;
        }
      }
      std::optional<Message> next;
      try {
        next = channel->read_message();
      } catch (const ProtocolError& e) {
        channel->send(make_error({0, e.what()}));
        return;
      }
      if (!next) return;
      m = std::move(*next);
    }
  }

  std::vector<std::shared_ptr<WorkerLink>> live_workers() const {
    std::lock_guard lock(mutex);
    return workers;
  }

  std::shared_ptr<WorkerLink> pick_other(std::uint64_t excluded) {
    const auto pool = live_workers();
    std::vector<std::shared_ptr<WorkerLink>> others;
    for (const auto& w : pool) {
      if (w->id() != excluded) others.push_back(w);
    }
    if (others.empty()) return nullptr;
    return others[round_robin++ % others.size()];
  }

  DistributedResult evaluate(const ObjectiveExpr& objective, std::span<const Point> points) {
    DistributedResult out;
    out.values.assign(points.size(), 0.0);
    const auto pool = live_workers();
    if (pool.empty()) {
      evaluate_serial(objective, points, out.values);
      out.local_fallback = true;
      out.batches = points.empty() ? 0 : 1;
      return out;
    }

    const std::string source = objective.canonical();
    struct Batch {
      TaskEnvelope task;
      std::size_t begin = 0, end = 0;
      std::shared_ptr<WorkerLink> worker;
      std::future<BatchOutcome> future;
      Clock::time_point deadline;
    };
    std::vector<Batch> batches;
    for (std::size_t begin = 0; begin < points.size(); begin += config.batch_size) {
      Batch b;
      b.begin = begin;
      b.end = std::min(points.size(), begin + config.batch_size);
      b.task.task_id = next_task_id++;
      b.task.objective_source = source;
      for (std::size_t i = b.begin; i < b.end; ++i) b.task.points.push_back({i, points[i]});
      batches.push_back(std::move(b));
    }
    out.batches = batches.size();

    for (auto& b : batches) {
      b.worker = pool[round_robin++ % pool.size()];
      b.deadline = Clock::now() + config.task_timeout;
      b.future = b.worker->dispatch(b.task);
    }

    auto await = [&](Batch& b) -> BatchOutcome {
      if (b.future.wait_until(b.deadline) != std::future_status::ready) {
        b.worker->forget(b.task.task_id);
        return failure("task " + std::to_string(b.task.task_id) + " timed out on worker " + b.worker->name());
      }
      return b.future.get();
    };
    auto store = [&](const BatchOutcome& o) {
      for (const auto& r : o.results) out.values[r.index] = r.value;
    };

    for (auto& b : batches) {
      BatchOutcome first = await(b);
      if (first.ok) {
        store(first);
        continue;
      }
      auto other = pick_other(b.worker->id());
      if (!other) {
        evaluate_serial(objective, points.subspan(b.begin, b.end - b.begin),
                        std::span<double>(out.values).subspan(b.begin, b.end - b.begin));
        out.local_fallback = true;
        continue;
      }
      ++out.reassigned;
      b.task.task_id = next_task_id++;
      b.worker = other;
      b.deadline = Clock::now() + config.task_timeout;
      b.future = other->dispatch(b.task);
      BatchOutcome second = await(b);
      if (!second.ok) {
        throw TaskError("batch of " + std::to_string(b.end - b.begin) + " points failed twice (" + first.error +
                        "; then " + second.error + ")");
      }
      store(second);
    }
    return out;
  }

  void shutdown() {
    if (stopping.exchange(true)) return;
    ::shutdown(acceptor.native_handle(), SHUT_RDWR);
    if (accept_thread.joinable()) accept_thread.join();
    boost::system::error_code ec;
    acceptor.close(ec);
    std::list<Connection> to_join;
    {
      std::lock_guard lock(mutex);
      for (auto& c : channels) c->shutdown();
      to_join.swap(connections);
    }
    for (auto& c : to_join) c.thread.join();
    std::vector<std::shared_ptr<WorkerLink>> remaining;
    {
      std::lock_guard lock(mutex);
      remaining.swap(workers);
    }
    for (auto& w : remaining) w->fail_all("head shutting down");
    workers_changed.notify_all();
  }
};

Head::Head(ClusterConfig config) : impl_(std::make_unique<Impl>(std::move(config))) {}

Head::~Head() { shutdown(); }

const ClusterConfig& Head::config() const { return impl_->config; }

Address Head::address() const { return impl_->bound; }

std::size_t Head::worker_count() const {
  std::lock_guard lock(impl_->mutex);
  return impl_->workers.size();
}

bool Head::wait_for_workers(std::size_t n, std::chrono::milliseconds timeout) const {
  std::unique_lock lock(impl_->mutex);
  return impl_->workers_changed.wait_for(lock, timeout, [&] { return impl_->workers.size() >= n; });
}

DistributedResult Head::evaluate_distributed(const ObjectiveExpr& objective, std::span<const Point> points) {
  return impl_->evaluate(objective, points);
}

void Head::shutdown() {
  if (impl_) impl_->shutdown();
}

void HeadEvaluator::evaluate(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out) {
  if (out.size() != points.size()) throw PreconditionError("evaluate: output span size mismatch");
  const DistributedResult r = head_.evaluate_distributed(f, points);
  if (r.local_fallback) ++degraded_;
  std::copy(r.values.begin(), r.values.end(), out.begin());
}

}  // namespace swarmlab::cluster
