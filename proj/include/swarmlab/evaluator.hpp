#pragma once

#include <array>
#include <cstddef>
#include <span>

#include "swarmlab/expr.hpp"

namespace swarmlab {

/// Search-space dimensionality, fixed by the objective's variable set (x, y).
inline constexpr std::size_t kDimensions = 2;

using Point = std::array<double, kDimensions>;

inline double evaluate_at(const ObjectiveExpr& f, const Point& p) { return f.evaluate(p[0], p[1]); }

/// Batch fitness evaluation. Implementations must write out[i] = f(points[i])
/// exactly as ObjectiveExpr::evaluate would, so that every evaluator yields
/// bit-identical swarm trajectories.
class Evaluator {
 public:
  virtual ~Evaluator() = default;
  virtual void evaluate(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out) = 0;
};

/// Plain loop in index order. The reference every other evaluator is tested against.
class SerialEvaluator final : public Evaluator {
 public:
  void evaluate(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out) override;
};

/// OpenMP parallel-for over points. Batches smaller than min_parallel_batch
/// run inline to avoid fork/join overhead.
class ParallelEvaluator final : public Evaluator {
 public:
  explicit ParallelEvaluator(std::size_t min_parallel_batch = 64) : min_parallel_batch_(min_parallel_batch) {}
  void evaluate(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out) override;

 private:
  std::size_t min_parallel_batch_;
};

/// Free-function kernels behind the two evaluators above.
void evaluate_serial(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out);
void evaluate_parallel(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out);

/// Process-wide serial evaluator used when callers do not supply one.
Evaluator& default_evaluator();

}  // namespace swarmlab
