#include "swarmlab/server/session.hpp"

#include "swarmlab/report.hpp"
#include "swarmlab/rng.hpp"

namespace swarmlab::server {

using nlohmann::json;

std::string_view to_string(SessionStatus status) {
  switch (status) {
    case SessionStatus::idle:
      return "idle";
    case SessionStatus::running:
      return "running";
    case SessionStatus::converged:
      return "converged";
    case SessionStatus::stopped:
      return "stopped";
    case SessionStatus::errored:
      return "errored";
  }
  return "?";
}

namespace {

SessionStatus status_from_string(std::string_view s) {
  for (auto st : {SessionStatus::idle, SessionStatus::running, SessionStatus::converged, SessionStatus::stopped,
                  SessionStatus::errored}) {
    if (to_string(st) == s) return st;
  }
  throw ConfigError("unknown session status '" + std::string(s) + "'");
}

template <class... F>
struct overloaded : F... {
  using F::operator()...;
};
template <class... F>
overloaded(F...) -> overloaded<F...>;

}  // namespace

std::string to_string(const ParamChange& change) {
  return std::visit(overloaded{
                        [](const SetNumParticles& c) { return "set_num_particles(" + std::to_string(c.n) + ")"; },
                        [](const SetObjective& c) { return "set_objective(" + c.objective.source() + ")"; },
                        [](const SetLearningFactors& c) {
                          return "set_learning_factors(" + json(c.c1).dump() + ", " + json(c.c2).dump() + ")";
                        },
                        [](const SetTickInterval& c) {
                          return "set_tick_interval(" + std::to_string(c.interval.count()) + " ms)";
                        },
                    },
                    change);
}

json to_json(const Frame& f) {
  json positions = json::array();
  for (const auto& p : f.positions) positions.push_back(point_to_json(p));
  json j = {
      {"session_id", f.session_id},
      {"iteration", f.iteration},
      {"positions", std::move(positions)},
      {"p_best_errors", f.p_best_errors},
      {"g_best", point_to_json(f.g_best)},
      {"g_best_error", f.g_best_error},
      {"status", to_string(f.status)},
      {"objective", f.objective},
  };
  if (f.error) j["error"] = *f.error;
  return j;
}

Frame frame_from_json(const json& j) {
  try {
    Frame f;
    f.session_id = j.at("session_id").get<std::string>();
    f.iteration = j.at("iteration").get<std::uint64_t>();
    for (const auto& p : j.at("positions")) f.positions.push_back(point_from_json(p));
    f.p_best_errors = j.at("p_best_errors").get<std::vector<double>>();
    f.g_best = point_from_json(j.at("g_best"));
    f.g_best_error = j.at("g_best_error").get<double>();
    f.status = status_from_string(j.at("status").get<std::string>());
    f.objective = j.at("objective").get<std::string>();
    if (j.contains("error")) f.error = j["error"].get<std::string>();
    return f;
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed frame: ") + e.what());
  }
}

void FrameQueue::push(std::shared_ptr<const std::string> frame) {
  {
    std::lock_guard lock(mutex_);
    if (closed_) return;
    if (frames_.size() >= capacity_) {
      frames_.pop_front();
      ++pending_gap_;
      ++total_dropped_;
    }
    frames_.push_back(std::move(frame));
  }
  ready_.notify_one();
}

std::optional<FrameQueue::Item> FrameQueue::pop(std::chrono::milliseconds timeout) {
  std::unique_lock lock(mutex_);
  ready_.wait_for(lock, timeout, [&] { return closed_ || pending_gap_ > 0 || !frames_.empty(); });
  if (pending_gap_ > 0) {
    Item gap{nullptr, pending_gap_};
    pending_gap_ = 0;
    return gap;
  }
  if (frames_.empty()) return std::nullopt;
  Item item{std::move(frames_.front()), 0};
  frames_.pop_front();
  return item;
}

void FrameQueue::close() {
  {
    std::lock_guard lock(mutex_);
    closed_ = true;
  }
  ready_.notify_all();
}

bool FrameQueue::closed() const {
  std::lock_guard lock(mutex_);
  return closed_;
}

std::size_t FrameQueue::total_dropped() const {
  std::lock_guard lock(mutex_);
  return total_dropped_;
}

Session::Session(std::string id, const SwarmConfig& config, const std::string& objective_source,
                 SessionOptions options)
    : id_(std::move(id)),
      options_(std::move(options)),
      config_(config),
      objective_(ObjectiveExpr::parse(objective_source)),
      tick_interval_(options_.service.tick_interval) {
  config_.validate();
  options_.service.validate();
  evaluator_ = options_.evaluator_factory ? options_.evaluator_factory() : std::make_unique<ParallelEvaluator>();
  swarm_ = init_swarm(config_, objective_, *evaluator_);
  if (options_.trace_dir) {
    const auto path = *options_.trace_dir / (id_ + ".jsonl");
    trace_.open(path, std::ios::app);
    if (!trace_) throw ConfigError("cannot open trace file " + path.string());
  }
}

Session::~Session() {
  {
    std::lock_guard lock(mutex_);
    ++generation_;
  }
  wake_.notify_all();
  join_ticker();
  std::lock_guard lock(subscribers_mutex_);
  for (auto& q : subscribers_) q->close();
}

SessionStatus Session::status() const {
  std::lock_guard lock(mutex_);
  return status_;
}

void Session::start() {
  std::uint64_t generation;
  {
    std::lock_guard lock(mutex_);
    if (status_ != SessionStatus::idle) {
      throw StateError("cannot start a session that is " + std::string(to_string(status_)), status_);
    }
    status_ = SessionStatus::running;
    generation = ++generation_;
  }
  if (!options_.autotick) return;
  std::lock_guard lock(ticker_mutex_);
  if (ticker_.joinable()) ticker_.join();
  ticker_ = std::thread([this, generation] { ticker_loop(generation); });
}

void Session::stop() {
  {
    std::lock_guard lock(mutex_);
    if (status_ != SessionStatus::running) {
      throw StateError("cannot stop a session that is " + std::string(to_string(status_)), status_);
    }
    status_ = SessionStatus::stopped;
    ++generation_;
  }
  wake_.notify_all();
  join_ticker();
}

void Session::reset() {
  {
    std::lock_guard lock(mutex_);
    ++generation_;
    ++resets_;
    config_.seed = derive_seed(config_.seed, resets_);
    last_error_.reset();
    status_ = SessionStatus::idle;
    try {
      swarm_ = init_swarm(config_, objective_, *evaluator_);
    } catch (const Error& e) {
      status_ = SessionStatus::errored;
      last_error_ = e.what();
    }
  }
  wake_.notify_all();
  join_ticker();
}

void Session::enqueue(ParamChange change) {
  std::vector<ParamChange> one;
  one.push_back(std::move(change));
  enqueue(std::move(one));
}

void Session::enqueue(std::vector<ParamChange> changes) {
  std::lock_guard lock(mutex_);
  SwarmConfig projected = config_;
  auto project = overloaded{
      [&](const SetNumParticles& c) { projected.num_particles = c.n; },
      [](const SetObjective&) {},
      [&](const SetLearningFactors& c) {
        projected.c1 = c.c1;
        projected.c2 = c.c2;
      },
      [](const SetTickInterval& c) {
        if (c.interval.count() <= 0) throw ConfigError("tick_interval_ms must be > 0");
      },
  };
  for (const auto& c : pending_) std::visit(project, c);
  for (const auto& c : changes) {
    std::visit(project, c);
    projected.validate();
  }
  for (auto& c : changes) pending_.push_back(std::move(c));
}

std::size_t Session::pending_changes() const {
  std::lock_guard lock(mutex_);
  return pending_.size();
}

void Session::apply_locked(const ParamChange& change) {
  std::visit(overloaded{
                 [&](const SetNumParticles& c) {
                   SwarmConfig next = config_;
                   next.num_particles = c.n;
                   SwarmState swarm = swarm_;
                   resize_swarm(swarm, c.n, next, objective_, *evaluator_);
                   config_ = next;
                   swarm_ = std::move(swarm);
                 },
                 [&](const SetObjective& c) {
                   SwarmState swarm = swarm_;
                   rebase_objective(swarm, c.objective, *evaluator_);
                   objective_ = c.objective;
                   swarm_ = std::move(swarm);
                 },
                 [&](const SetLearningFactors& c) {
                   config_.c1 = c.c1;
                   config_.c2 = c.c2;
                 },
                 [&](const SetTickInterval& c) { tick_interval_ = c.interval; },
             },
             change);
}

Frame Session::tick() {
  std::lock_guard lock(mutex_);
  return tick_locked();
}

Frame Session::tick_locked() {
  if (status_ != SessionStatus::running) {
    throw StateError("cannot tick a session that is " + std::string(to_string(status_)), status_);
  }
  try {
    while (!pending_.empty()) {
      const ParamChange change = std::move(pending_.front());
      pending_.pop_front();
      try {
        apply_locked(change);
      } catch (const Error& e) {
        throw Error(to_string(change) + " failed: " + e.what());
      }
    }
    for (std::size_t k = 0; k < options_.service.steps_per_tick; ++k) {
      step(swarm_, config_, objective_, *evaluator_);
      if (swarm_.g_best_error <= config_.error_tolerance) {
        status_ = SessionStatus::converged;
        break;
      }
      if (swarm_.iteration >= config_.max_iterations) {
        status_ = SessionStatus::stopped;
        break;
      }
    }
  } catch (const Error& e) {
    status_ = SessionStatus::errored;
    last_error_ = e.what();
  }
  Frame frame = make_frame_locked();
  emit_locked(frame);
  if (status_ != SessionStatus::running) wake_.notify_all();
  return frame;
}

void Session::ticker_loop(std::uint64_t generation) {
  std::unique_lock lock(mutex_);
  for (;;) {
    const auto deadline = std::chrono::steady_clock::now() + tick_interval_;
    const bool ended = wake_.wait_until(
        lock, deadline, [&] { return generation_ != generation || status_ != SessionStatus::running; });
    if (ended) return;
    tick_locked();
  }
}

void Session::join_ticker() {
  std::lock_guard lock(ticker_mutex_);
  if (ticker_.joinable()) ticker_.join();
}

Frame Session::make_frame_locked() const {
  Frame f;
  f.session_id = id_;
  f.iteration = swarm_.iteration;
  f.positions.reserve(swarm_.particles.size());
  f.p_best_errors.reserve(swarm_.particles.size());
  for (const auto& p : swarm_.particles) {
    f.positions.push_back(p.position);
    f.p_best_errors.push_back(p.best_error);
  }
  f.g_best = swarm_.g_best_position;
  f.g_best_error = swarm_.g_best_error;
  f.status = status_;
  f.objective = objective_.source();
  if (status_ == SessionStatus::errored) f.error = last_error_;
  return f;
}

void Session::emit_locked(const Frame& frame) {
  auto payload = std::make_shared<const std::string>(to_json(frame).dump());
  {
    std::lock_guard lock(subscribers_mutex_);
    for (auto& q : subscribers_) q->push(payload);
  }
  if (trace_.is_open()) {
    trace_ << *payload << '\n';
    trace_.flush();
  }
}

Frame Session::snapshot() const {
  std::lock_guard lock(mutex_);
  return make_frame_locked();
}

json Session::describe() const {
  std::lock_guard lock(mutex_);
  return {
      {"session_id", id_},
      {"status", to_string(status_)},
      {"objective", objective_.source()},
      {"config", to_json(config_)},
      {"tick_interval_ms", tick_interval_.count()},
      {"steps_per_tick", options_.service.steps_per_tick},
      {"resets", resets_},
      {"pending_changes", pending_.size()},
      {"frame", to_json(make_frame_locked())},
  };
}

SwarmConfig Session::config() const {
  std::lock_guard lock(mutex_);
  return config_;
}

std::chrono::milliseconds Session::tick_interval() const {
  std::lock_guard lock(mutex_);
  return tick_interval_;
}

std::uint64_t Session::resets() const {
  std::lock_guard lock(mutex_);
  return resets_;
}

std::shared_ptr<FrameQueue> Session::subscribe() {
  auto q = std::make_shared<FrameQueue>(options_.service.frame_buffer);
  std::lock_guard lock(subscribers_mutex_);
  subscribers_.push_back(q);
  return q;
}

void Session::unsubscribe(const std::shared_ptr<FrameQueue>& queue) {
  std::lock_guard lock(subscribers_mutex_);
  std::erase(subscribers_, queue);
  queue->close();
}

std::size_t Session::subscriber_count() const {
  std::lock_guard lock(subscribers_mutex_);
  return subscribers_.size();
}

}  // namespace swarmlab::server
