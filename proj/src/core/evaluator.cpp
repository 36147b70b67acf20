#include "swarmlab/evaluator.hpp"

#include <cstdint>

#include "swarmlab/error.hpp"

namespace swarmlab {

void evaluate_serial(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out) {
  if (out.size() != points.size()) throw PreconditionError("evaluate: output span size mismatch");
  for (std::size_t i = 0; i < points.size(); ++i) out[i] = evaluate_at(f, points[i]);
}

void evaluate_parallel(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out) {
  if (out.size() != points.size()) throw PreconditionError("evaluate: output span size mismatch");
  const auto n = static_cast<std::int64_t>(points.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < n; ++i) out[i] = evaluate_at(f, points[i]);
}

void SerialEvaluator::evaluate(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out) {
  evaluate_serial(f, points, out);
}

void ParallelEvaluator::evaluate(const ObjectiveExpr& f, std::span<const Point> points, std::span<double> out) {
  if (points.size() < min_parallel_batch_) {
    evaluate_serial(f, points, out);
  } else {
    evaluate_parallel(f, points, out);
  }
}

Evaluator& default_evaluator() {
  static SerialEvaluator serial;
  return serial;
}

}  // namespace swarmlab
