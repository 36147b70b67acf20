#pragma once

#include <atomic>
#include <cstdint>
#include <memory>
#include <mutex>
#include <span>
#include <string>
#include <vector>

#include "swarmlab/cluster/protocol.hpp"
#include "swarmlab/evaluator.hpp"

namespace swarmlab::cluster {

class LineChannel;

/// Submits fitness tasks to a head running in another process. The head
/// splits each task over its workers and answers with one result message.
class HeadClient {
 public:
  /// Connects immediately; throws ConnectError.
  explicit HeadClient(const std::string& head_address);
  ~HeadClient();
  HeadClient(const HeadClient&) = delete;
  HeadClient& operator=(const HeadClient&) = delete;

  /// Values in point order. Throws TaskError if the head replies with an
  /// error, ConnectError if the connection drops.
  std::vector<double> evaluate(const ObjectiveExpr& objective, std::span<const Point> points);

  /// Round trip of a ping; false if the head did not answer.
  bool ping();

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

/// Evaluator adaptor over HeadClient; used for `--head` runs.
class RemoteHeadEvaluator final : public Evaluator {
 public:
  explicit RemoteHeadEvaluator(const std::string& head_address) : client_(head_address) {}
  void evaluate(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out) override;

 private:
  HeadClient client_;
};

}  // namespace swarmlab::cluster
