#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "swarmlab/evaluator.hpp"
#include "swarmlab/expr.hpp"
#include "swarmlab/rng.hpp"

namespace swarmlab {

struct Interval {
  double lo = 0.0;
  double hi = 0.0;

  double extent() const { return hi - lo; }
  friend bool operator==(const Interval&, const Interval&) = default;
};

/// Axis-aligned search box.
struct Bounds {
  std::array<Interval, kDimensions> axes{};

  static Bounds square(double lo, double hi);
  bool contains(const Point& p) const;
  friend bool operator==(const Bounds&, const Bounds&) = default;
};

enum class BoundsPolicy {
  clamp,    // project onto the box and zero the offending velocity component
  reflect,  // mirror about the violated face and negate that velocity component
};

std::string_view to_string(BoundsPolicy policy);
BoundsPolicy bounds_policy_from_string(std::string_view name);

struct SwarmConfig {
  std::size_t num_particles = 50;
  double c1 = 2.0;          // cognitive: pull toward the particle's own best
  double c2 = 2.0;          // social: pull toward the swarm best
  double inertia_w = 0.729;
  Bounds bounds = Bounds::square(-500.0, 500.0);
  /// Per-axis velocity limit as a fraction of that axis's extent; nullopt disables.
  std::optional<double> v_max_fraction = 0.2;
  BoundsPolicy bounds_policy = BoundsPolicy::clamp;
  std::size_t max_iterations = 1000;
  double error_tolerance = 1e-6;
  std::uint64_t seed = 0;

  /// Throws ConfigError naming the first violated invariant.
  void validate() const;

  /// Per-axis clamp derived from v_max_fraction, if enabled.
  std::optional<Point> v_max() const;

  /// Inertia 1.0 and no velocity clamp: the bare update v <- v + c1 r1 (...) + c2 r2 (...).
  static SwarmConfig unit_inertia();

  friend bool operator==(const SwarmConfig&, const SwarmConfig&) = default;
};

struct Particle {
  Point position{};
  Point velocity{};
  Point best_position{};
  double best_error = 0.0;

  friend bool operator==(const Particle&, const Particle&) = default;
};

struct SwarmState {
  std::vector<Particle> particles;
  Point g_best_position{};
  double g_best_error = 0.0;
  std::uint64_t iteration = 0;
  Rng rng;

  friend bool operator==(const SwarmState&, const SwarmState&) = default;
};

struct GlobalBest {
  std::size_t index = 0;
  Point position{};
  double error = 0.0;
};

/// Minimum personal-best error across the particles; ties go to the lowest index.
/// Throws PreconditionError on an empty list.
GlobalBest g_best_of(std::span<const Particle> particles);

/// Draws num_particles positions uniformly in the box, then velocities
/// uniformly in +-extent/10 per axis. Per particle the draw order is
/// position axes then velocity axes. A position whose objective value is
/// non-finite is redrawn (up to 100 attempts) before moving on.
SwarmState init_swarm(const SwarmConfig& config, const ObjectiveExpr& objective,
                      Evaluator& evaluator = default_evaluator());

/// One synchronous PSO iteration. For every particle in index order and
/// every axis, r1 then r2 are drawn from the state's generator and
///   v <- w v + c1 r1 (p_best - x) + c2 r2 (g_best - x)
/// is applied, followed by the velocity clamp, x <- x + v and the bounds
/// policy. New positions are then evaluated as one batch, personal bests
/// updated on strict improvement, and the global best recomputed.
///
/// Throws EvaluationError (naming the particle and position) if the objective
/// is non-finite at any new position; the state is left unchanged in that case.
void step(SwarmState& state, const SwarmConfig& config, const ObjectiveExpr& objective,
          Evaluator& evaluator = default_evaluator());

enum class TerminationReason { tolerance, max_iterations };

std::string_view to_string(TerminationReason reason);

struct RunReport {
  Point g_best{};
  double error = 0.0;
  std::uint64_t iterations = 0;
  TerminationReason reason = TerminationReason::max_iterations;
  std::vector<double> trace;  // g_best_error after each iteration

  friend bool operator==(const RunReport&, const RunReport&) = default;
};

/// Steps until g_best_error <= error_tolerance or max_iterations is reached.
/// Tolerance is checked after each step, so a run always takes at least one.
RunReport run(const SwarmConfig& config, const ObjectiveExpr& objective,
              Evaluator& evaluator = default_evaluator());

/// Grows the swarm with freshly drawn particles (same draw procedure as
/// init_swarm, from the state's generator) or drops the highest-index
/// particles, then recomputes the global best.
void resize_swarm(SwarmState& state, std::size_t num_particles, const SwarmConfig& config,
                  const ObjectiveExpr& objective, Evaluator& evaluator = default_evaluator());

/// Recomputes every personal-best error at its stored position under a new
/// objective, then the global best. Positions are untouched. Throws
/// EvaluationError if any personal best is non-finite under the new objective.
void rebase_objective(SwarmState& state, const ObjectiveExpr& objective,
                      Evaluator& evaluator = default_evaluator());

}  // namespace swarmlab
