#include "swarmlab/cluster/client.hpp"

#include <algorithm>

#include <boost/asio/io_context.hpp>

#include "swarmlab/cluster/head.hpp"
#include "swarmlab/cluster/line_channel.hpp"

namespace swarmlab::cluster {

struct HeadClient::Impl {
  boost::asio::io_context io;
  std::unique_ptr<LineChannel> channel;
  std::mutex mutex;  // one request in flight per connection
  std::uint64_t next_id = 1;

  Message round_trip(const Message& request) {
    if (!channel->send(request)) throw ConnectError("connection to head lost");
    while (true) {
      auto reply = channel->read_message();
      if (!reply) throw ConnectError("connection to head lost");
      if (reply->type != MessageType::ping) return *reply;
      channel->send(make_pong(nonce_from(*reply)));
    }
  }
};

HeadClient::HeadClient(const std::string& head_address) : impl_(std::make_unique<Impl>()) {
  impl_->channel = std::make_unique<LineChannel>(connect_to(impl_->io, parse_address(head_address)));
}

HeadClient::~HeadClient() {
  if (impl_ && impl_->channel) impl_->channel->shutdown();
}

std::vector<double> HeadClient::evaluate(const ObjectiveExpr& objective, std::span<const Point> points) {
  std::lock_guard lock(impl_->mutex);
  TaskEnvelope task;
  task.task_id = impl_->next_id++;
  task.objective_source = objective.canonical();
  task.points.reserve(points.size());
  for (std::size_t i = 0; i < points.size(); ++i) task.points.push_back({i, points[i]});

  const Message reply = impl_->round_trip(make_task(task));
  if (reply.type == MessageType::error) {
    const ErrorEnvelope e = error_from(reply);
    throw TaskError("head rejected task " + std::to_string(e.task_id) + ": " + e.message);
  }
  const ResultEnvelope r = result_from(reply);
  if (r.task_id != task.task_id || !r.covers(task)) {
    throw ProtocolError("head reply does not match task " + std::to_string(task.task_id));
  }
  std::vector<double> values(points.size());
  for (const auto& v : r.results) values[v.index] = v.value;
  return values;
}

bool HeadClient::ping() {
  std::lock_guard lock(impl_->mutex);
  try {
    const Message reply = impl_->round_trip(make_ping(impl_->next_id++));
    return reply.type == MessageType::pong;
  } catch (const Error&) {
    return false;
  }
}

void RemoteHeadEvaluator::evaluate(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out) {
  if (out.size() != points.size()) throw PreconditionError("evaluate: output span size mismatch");
  const auto values = client_.evaluate(f, points);
  std::copy(values.begin(), values.end(), out.begin());
}

}  // namespace swarmlab::cluster
