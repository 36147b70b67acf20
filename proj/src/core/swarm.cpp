#include "swarmlab/swarm.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <string>

#include "swarmlab/error.hpp"

namespace swarmlab {

namespace {

constexpr int kMaxInitAttempts = 100;

std::string format_point(const Point& p) {
  std::ostringstream os;
  os.precision(17);
  os << '(';
  for (std::size_t d = 0; d < kDimensions; ++d) os << (d ? ", " : "") << p[d];
  os << ')';
  return os.str();
}

Point draw_position(Rng& rng, const Bounds& bounds) {
  Point p{};
  for (std::size_t d = 0; d < kDimensions; ++d) p[d] = rng.uniform(bounds.axes[d].lo, bounds.axes[d].hi);
  return p;
}

Point draw_velocity(Rng& rng, const Bounds& bounds) {
  Point v{};
  for (std::size_t d = 0; d < kDimensions; ++d) {
    const double limit = bounds.axes[d].extent() / 10.0;
    v[d] = rng.uniform(-limit, limit);
  }
  return v;
}

/// Appends `count` new particles drawn from rng. Positions are evaluated as a
/// batch; any non-finite one is redrawn individually in index order.
void append_particles(std::vector<Particle>& particles, std::size_t count, Rng& rng, const Bounds& bounds,
                      const ObjectiveExpr& objective, Evaluator& evaluator) {
  const std::size_t first = particles.size();
  std::vector<Point> positions(count);
  for (std::size_t i = 0; i < count; ++i) {
    Particle p;
    p.position = draw_position(rng, bounds);
    p.velocity = draw_velocity(rng, bounds);
    p.best_position = p.position;
    positions[i] = p.position;
    particles.push_back(p);
  }
  std::vector<double> errors(count);
  evaluator.evaluate(objective, positions, errors);
  for (std::size_t i = 0; i < count; ++i) {
    Particle& p = particles[first + i];
    double err = errors[i];
    int attempt = 1;
    while (!std::isfinite(err)) {
      if (attempt >= kMaxInitAttempts) {
        throw EvaluationError("objective non-finite at " + std::to_string(kMaxInitAttempts) +
                              " sampled positions for particle " + std::to_string(first + i) +
                              " (last " + format_point(p.position) + ")");
      }
      p.position = draw_position(rng, bounds);
      p.best_position = p.position;
      err = evaluate_at(objective, p.position);
      ++attempt;
    }
    p.best_error = err;
  }
}

void refresh_global_best(SwarmState& state) {
  const GlobalBest best = g_best_of(state.particles);
  state.g_best_position = best.position;
  state.g_best_error = best.error;
}

}  // namespace

Bounds Bounds::square(double lo, double hi) {
  Bounds b;
  for (auto& axis : b.axes) axis = {lo, hi};
  return b;
}

bool Bounds::contains(const Point& p) const {
  for (std::size_t d = 0; d < kDimensions; ++d) {
    if (!(p[d] >= axes[d].lo && p[d] <= axes[d].hi)) return false;
  }
  return true;
}

std::string_view to_string(BoundsPolicy policy) {
  return policy == BoundsPolicy::clamp ? "clamp" : "reflect";
}

BoundsPolicy bounds_policy_from_string(std::string_view name) {
  if (name == "clamp") return BoundsPolicy::clamp;
  if (name == "reflect") return BoundsPolicy::reflect;
  throw ConfigError("unknown bounds policy '" + std::string(name) + "' (expected clamp or reflect)");
}

std::string_view to_string(TerminationReason reason) {
  return reason == TerminationReason::tolerance ? "tolerance" : "max_iterations";
}

void SwarmConfig::validate() const {
  if (num_particles < 1) throw ConfigError("num_particles must be >= 1");
  if (max_iterations < 1) throw ConfigError("max_iterations must be >= 1");
  if (!(c1 >= 0.0) || !std::isfinite(c1)) throw ConfigError("c1 must be a finite nonnegative number");
  if (!(c2 >= 0.0) || !std::isfinite(c2)) throw ConfigError("c2 must be a finite nonnegative number");
  if (!(inertia_w >= 0.0) || !std::isfinite(inertia_w)) {
    throw ConfigError("inertia_w must be a finite nonnegative number");
  }
  if (!(error_tolerance >= 0.0)) throw ConfigError("error_tolerance must be nonnegative");
  static constexpr const char* kAxisNames[] = {"x", "y"};
  for (std::size_t d = 0; d < kDimensions; ++d) {
    const Interval& a = bounds.axes[d];
    if (!std::isfinite(a.lo) || !std::isfinite(a.hi) || !(a.lo < a.hi)) {
      throw ConfigError(std::string("bounds: require finite ") + kAxisNames[d] + "_min < " + kAxisNames[d] +
                        "_max");
    }
  }
  if (v_max_fraction && !(*v_max_fraction > 0.0 && std::isfinite(*v_max_fraction))) {
    throw ConfigError("v_max must be positive when present");
  }
}

std::optional<Point> SwarmConfig::v_max() const {
  if (!v_max_fraction) return std::nullopt;
  Point limit{};
  for (std::size_t d = 0; d < kDimensions; ++d) limit[d] = *v_max_fraction * bounds.axes[d].extent();
  return limit;
}

SwarmConfig SwarmConfig::unit_inertia() {
  SwarmConfig c;
  c.inertia_w = 1.0;
  c.v_max_fraction.reset();
  return c;
}

GlobalBest g_best_of(std::span<const Particle> particles) {
  if (particles.empty()) throw PreconditionError("g_best_of: empty particle list");
  std::size_t best = 0;
  for (std::size_t i = 1; i < particles.size(); ++i) {
    if (particles[i].best_error < particles[best].best_error) best = i;
  }
  return {best, particles[best].best_position, particles[best].best_error};
}

SwarmState init_swarm(const SwarmConfig& config, const ObjectiveExpr& objective, Evaluator& evaluator) {
  config.validate();
  SwarmState state;
  state.rng = Rng(config.seed);
  state.particles.reserve(config.num_particles);
  append_particles(state.particles, config.num_particles, state.rng, config.bounds, objective, evaluator);
  refresh_global_best(state);
  state.iteration = 0;
  return state;
}

void step(SwarmState& state, const SwarmConfig& config, const ObjectiveExpr& objective, Evaluator& evaluator) {
  const std::size_t n = state.particles.size();
  if (n == 0) throw PreconditionError("step: swarm has no particles");
  Rng rng = state.rng;
  const std::optional<Point> v_max = config.v_max();
  const Bounds& box = config.bounds;

  std::vector<Point> positions(n);
  std::vector<Point> velocities(n);
  for (std::size_t i = 0; i < n; ++i) {
    const Particle& p = state.particles[i];
    Point x = p.position;
    Point v = p.velocity;
    for (std::size_t d = 0; d < kDimensions; ++d) {
      const double r1 = rng.uniform01();
      const double r2 = rng.uniform01();
      v[d] = config.inertia_w * v[d] + config.c1 * r1 * (p.best_position[d] - x[d]) +
             config.c2 * r2 * (state.g_best_position[d] - x[d]);
      if (v_max) v[d] = std::clamp(v[d], -(*v_max)[d], (*v_max)[d]);
      x[d] += v[d];

      const double lo = box.axes[d].lo;
      const double hi = box.axes[d].hi;
      if (config.bounds_policy == BoundsPolicy::clamp) {
        if (x[d] < lo) {
          x[d] = lo;
          v[d] = 0.0;
        } else if (x[d] > hi) {
          x[d] = hi;
          v[d] = 0.0;
        }
      } else {
        if (x[d] < lo) {
          x[d] = lo + (lo - x[d]);
          v[d] = -v[d];
        } else if (x[d] > hi) {
          x[d] = hi - (x[d] - hi);
          v[d] = -v[d];
        }
        // An overshoot larger than the box extent is pinned to the face.
        x[d] = std::clamp(x[d], lo, hi);
      }
    }
    positions[i] = x;
    velocities[i] = v;
  }

  std::vector<double> errors(n);
  evaluator.evaluate(objective, positions, errors);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(errors[i])) {
      throw EvaluationError("objective non-finite (" + std::to_string(errors[i]) + ") for particle " +
                            std::to_string(i) + " at " + format_point(positions[i]));
    }
  }

  for (std::size_t i = 0; i < n; ++i) {
    Particle& p = state.particles[i];
    p.position = positions[i];
    p.velocity = velocities[i];
    if (errors[i] < p.best_error) {
      p.best_error = errors[i];
      p.best_position = positions[i];
    }
  }
  state.rng = rng;
  refresh_global_best(state);
  ++state.iteration;
}

RunReport run(const SwarmConfig& config, const ObjectiveExpr& objective, Evaluator& evaluator) {
  SwarmState state = init_swarm(config, objective, evaluator);
  RunReport report;
  report.trace.reserve(config.max_iterations);
  while (true) {
    step(state, config, objective, evaluator);
    report.trace.push_back(state.g_best_error);
    if (state.g_best_error <= config.error_tolerance) {
      report.reason = TerminationReason::tolerance;
      break;
    }
    if (state.iteration >= config.max_iterations) {
      report.reason = TerminationReason::max_iterations;
      break;
    }
  }
  report.g_best = state.g_best_position;
  report.error = state.g_best_error;
  report.iterations = state.iteration;
  return report;
}

void resize_swarm(SwarmState& state, std::size_t num_particles, const SwarmConfig& config,
                  const ObjectiveExpr& objective, Evaluator& evaluator) {
  if (num_particles < 1) throw ConfigError("num_particles must be >= 1");
  if (num_particles < state.particles.size()) {
    state.particles.resize(num_particles);
  } else if (num_particles > state.particles.size()) {
    append_particles(state.particles, num_particles - state.particles.size(), state.rng, config.bounds,
                     objective, evaluator);
  }
  refresh_global_best(state);
}

void rebase_objective(SwarmState& state, const ObjectiveExpr& objective, Evaluator& evaluator) {
  const std::size_t n = state.particles.size();
  std::vector<Point> bests(n);
  for (std::size_t i = 0; i < n; ++i) bests[i] = state.particles[i].best_position;
  std::vector<double> errors(n);
  evaluator.evaluate(objective, bests, errors);
  for (std::size_t i = 0; i < n; ++i) {
    if (!std::isfinite(errors[i])) {
      throw EvaluationError("new objective non-finite at personal best of particle " + std::to_string(i) +
                            " " + format_point(bests[i]));
    }
  }
  for (std::size_t i = 0; i < n; ++i) state.particles[i].best_error = errors[i];
  refresh_global_best(state);
}

}  // namespace swarmlab
