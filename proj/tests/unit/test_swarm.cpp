#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

#include "oracle/reference_pso.hpp"
#include "swarmlab/error.hpp"
#include "swarmlab/swarm.hpp"

using namespace swarmlab;

namespace {

const ObjectiveExpr& sphere() {
  static const ObjectiveExpr f = ObjectiveExpr::parse("x^2+y^2");
  return f;
}

const ObjectiveExpr& bowl() {
  static const ObjectiveExpr f = ObjectiveExpr::parse("x^2+(y-100)^2");
  return f;
}

Particle make_particle(double best_error) {
  Particle p;
  p.best_error = best_error;
  p.best_position = {best_error, -best_error};
  return p;
}

}  // namespace

TEST(SwarmConfig, RejectsDegenerateBounds) {
  SwarmConfig c;
  c.num_particles = 1;
  c.bounds = Bounds::square(0.0, 0.0);
  EXPECT_THROW(c.validate(), ConfigError);
  EXPECT_THROW(init_swarm(c, sphere()), ConfigError);
}

TEST(SwarmConfig, RejectsOtherInvariantViolations) {
  auto bad = [](auto mutate) {
    SwarmConfig c;
    mutate(c);
    EXPECT_THROW(c.validate(), ConfigError);
  };
  bad([](SwarmConfig& c) { c.num_particles = 0; });
  bad([](SwarmConfig& c) { c.max_iterations = 0; });
  bad([](SwarmConfig& c) { c.c1 = -1; });
  bad([](SwarmConfig& c) { c.c2 = std::numeric_limits<double>::quiet_NaN(); });
  bad([](SwarmConfig& c) { c.inertia_w = -0.1; });
  bad([](SwarmConfig& c) { c.v_max_fraction = 0.0; });
  bad([](SwarmConfig& c) { c.bounds.axes[1] = {5, 1}; });
  bad([](SwarmConfig& c) { c.error_tolerance = -1; });
  EXPECT_NO_THROW(SwarmConfig{}.validate());
}

TEST(InitSwarm, GlobalBestIsMinimumOfInitialValues) {
  SwarmConfig c;
  c.num_particles = 50;
  c.seed = 7;
  const SwarmState s = init_swarm(c, bowl());
  ASSERT_EQ(s.particles.size(), 50u);
  EXPECT_EQ(s.iteration, 0u);
  double min_err = std::numeric_limits<double>::infinity();
  for (const auto& p : s.particles) {
    const double direct = bowl().evaluate(p.position[0], p.position[1]);
    EXPECT_EQ(p.best_error, direct);
    EXPECT_EQ(p.best_position, p.position);
    EXPECT_TRUE(c.bounds.contains(p.position));
    for (std::size_t d = 0; d < kDimensions; ++d) EXPECT_LE(std::fabs(p.velocity[d]), 100.0);
    min_err = std::min(min_err, direct);
  }
  EXPECT_EQ(s.g_best_error, min_err);
}

TEST(InitSwarm, DeterministicBySeed) {
  SwarmConfig c;
  c.seed = 7;
  EXPECT_EQ(init_swarm(c, bowl()), init_swarm(c, bowl()));
  SwarmConfig other = c;
  other.seed = 8;
  EXPECT_NE(init_swarm(c, bowl()).particles, init_swarm(other, bowl()).particles);
}

TEST(InitSwarm, ResamplesNonFinitePositions) {
  // log-like pole: 1/x is infinite only at x == 0 exactly; use sqrt to make half the box invalid.
  const auto f = ObjectiveExpr::parse("sqrt(x)+y^2");
  SwarmConfig c;
  c.num_particles = 40;
  c.seed = 1;
  const SwarmState s = init_swarm(c, f);
  for (const auto& p : s.particles) {
    EXPECT_GE(p.position[0], 0.0);
    EXPECT_TRUE(std::isfinite(p.best_error));
  }
}

TEST(InitSwarm, GivesUpAfterRepeatedNonFiniteSamples) {
  const auto f = ObjectiveExpr::parse("sqrt(-1-x^2)");
  SwarmConfig c;
  c.num_particles = 3;
  EXPECT_THROW(init_swarm(c, f), EvaluationError);
}

TEST(GBestOf, PicksMinimum) {
  std::vector<Particle> ps = {make_particle(3), make_particle(1), make_particle(2)};
  const auto best = g_best_of(ps);
  EXPECT_EQ(best.index, 1u);
  EXPECT_EQ(best.error, 1.0);
  EXPECT_EQ(best.position, ps[1].best_position);
}

TEST(GBestOf, TiesGoToLowestIndex) {
  std::vector<Particle> ps = {make_particle(1), make_particle(1)};
  ps[1].best_position = {9, 9};
  EXPECT_EQ(g_best_of(ps).index, 0u);
}

TEST(GBestOf, EmptyIsPreconditionError) {
  std::vector<Particle> ps;
  EXPECT_THROW(g_best_of(ps), PreconditionError);
}

TEST(GBestOf, MatchesExhaustiveScan) {
  std::mt19937_64 gen(50);
  std::uniform_int_distribution<int> err(0, 20);  // small range forces ties
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<Particle> ps;
    for (int i = 0; i < 50; ++i) ps.push_back(make_particle(err(gen)));
    std::size_t want = 0;
    for (std::size_t i = 0; i < ps.size(); ++i) {
      bool is_min = true;
      for (std::size_t j = 0; j < ps.size(); ++j) is_min = is_min && ps[i].best_error <= ps[j].best_error;
      if (is_min) {
        want = i;
        break;
      }
    }
    ASSERT_EQ(g_best_of(ps).index, want);
  }
}

TEST(Step, ParticleAtOptimumStaysPut) {
  SwarmConfig c;
  c.bounds = Bounds::square(-10, 10);
  SwarmState s;
  Particle p;
  p.position = {0, 0};
  p.best_position = {0, 0};
  p.best_error = 0.0;
  s.particles = {p};
  s.g_best_position = {0, 0};
  s.g_best_error = 0.0;
  step(s, c, sphere());
  EXPECT_EQ(s.particles[0].position, (Point{0, 0}));
  EXPECT_EQ(s.particles[0].velocity, (Point{0, 0}));
  EXPECT_EQ(s.iteration, 1u);
}

TEST(Step, BallisticMotionWithoutAttraction) {
  SwarmConfig c;
  c.c1 = 0;
  c.c2 = 0;
  c.inertia_w = 1;
  c.bounds = Bounds::square(-10, 10);
  SwarmState s;
  Particle p;
  p.velocity = {1, 0};
  p.best_error = 0.0;
  s.particles = {p};
  step(s, c, sphere());
  EXPECT_EQ(s.particles[0].position, (Point{1, 0}));
  EXPECT_EQ(s.particles[0].velocity, (Point{1, 0}));
}

TEST(Step, VelocityClampAndClampPolicy) {
  SwarmConfig c;
  c.c1 = 0;
  c.c2 = 0;
  c.inertia_w = 1;
  c.bounds = Bounds::square(-10, 10);  // v_max = 4 per axis
  SwarmState s;
  Particle p;
  p.position = {8, 0};
  p.velocity = {50, -3};
  p.best_error = 1e9;
  s.particles = {p};
  step(s, c, sphere());
  EXPECT_EQ(s.particles[0].position, (Point{10, -3}));
  EXPECT_EQ(s.particles[0].velocity, (Point{0, -3}));
}

TEST(Step, ReflectPolicyMirrorsAtFace) {
  SwarmConfig c;
  c.c1 = 0;
  c.c2 = 0;
  c.inertia_w = 1;
  c.bounds = Bounds::square(-10, 10);
  c.bounds_policy = BoundsPolicy::reflect;
  SwarmState s;
  Particle p;
  p.position = {8, -9};
  p.velocity = {3, -2};
  p.best_error = 1e9;
  s.particles = {p};
  step(s, c, sphere());
  EXPECT_EQ(s.particles[0].position, (Point{9, -9}));
  EXPECT_EQ(s.particles[0].velocity, (Point{-3, 2}));
}

TEST(Step, NonFiniteObjectiveNamesParticleAndLeavesStateIntact) {
  const auto f = ObjectiveExpr::parse("1/(x-1)");
  SwarmConfig c;
  c.c1 = 0;
  c.c2 = 0;
  c.inertia_w = 1;
  c.bounds = Bounds::square(-10, 10);
  SwarmState s;
  Particle a;
  a.position = {-5, 0};
  a.best_error = 1e9;
  Particle b;
  b.position = {0, 0};
  b.velocity = {1, 0};
  b.best_error = 1e9;
  s.particles = {a, b};
  const SwarmState before = s;
  try {
    step(s, c, f);
    FAIL() << "expected EvaluationError";
  } catch (const EvaluationError& e) {
    EXPECT_NE(std::string(e.what()).find("particle 1"), std::string::npos) << e.what();
  }
  EXPECT_EQ(s, before);
}

TEST(Step, MatchesStraightLineOracle) {
  SwarmConfig c;
  c.num_particles = 10;
  c.seed = 3;
  SwarmState s = init_swarm(c, sphere());
  oracle::Params params;
  params.particles = 10;
  params.seed = 3;
  params.steps = 200;
  const auto ref = oracle::run_clamped(params, [](double x, double y) { return x * x + y * y; });
  for (int t = 0; t < 200; ++t) {
    step(s, c, sphere());
    ASSERT_EQ(s.g_best_error, ref.trace[static_cast<std::size_t>(t)]) << "iteration " << t + 1;
  }
  EXPECT_EQ(s.g_best_position, (Point{ref.gx, ref.gy}));
  for (std::size_t i = 0; i < 10; ++i) {
    EXPECT_EQ(s.particles[i].position, (Point{ref.px[i], ref.py[i]}));
    EXPECT_EQ(s.particles[i].velocity, (Point{ref.vx[i], ref.vy[i]}));
  }
}

TEST(Run, ConvergesOnFirstScenario) {
  SwarmConfig c;
  c.seed = 42;
  const RunReport r = run(c, bowl());
  EXPECT_LE(std::hypot(r.g_best[0], r.g_best[1] - 100.0), 1e-2);
  EXPECT_EQ(r.trace.size(), r.iterations);
  EXPECT_EQ(r.trace.back(), r.error);
}

TEST(Run, HugeToleranceStopsAfterFirstSweep) {
  SwarmConfig c;
  c.error_tolerance = 1e300;
  const RunReport r = run(c, bowl());
  EXPECT_EQ(r.iterations, 1u);
  EXPECT_EQ(r.reason, TerminationReason::tolerance);
  EXPECT_EQ(r.trace.size(), 1u);
}

TEST(Run, UnreachableToleranceHitsIterationCap) {
  SwarmConfig c;
  c.max_iterations = 5;
  c.error_tolerance = 0.0;
  const RunReport r = run(c, ObjectiveExpr::parse("x^2+y^2+1"));
  EXPECT_EQ(r.reason, TerminationReason::max_iterations);
  EXPECT_EQ(r.iterations, 5u);
}

TEST(SwarmProperties, TraceIsNonIncreasingAndBestsDominate) {
  std::mt19937_64 gen(9);
  const char* objectives[] = {"x^2+y^2", "x^2+(y-100)^2", "(x^2+y-11)^2+(x+y^2-7)^2",
                              "20+x^2-10*cos(2*3.141592653589793*x)+y^2-10*cos(2*3.141592653589793*y)"};
  for (int trial = 0; trial < 20; ++trial) {
    SwarmConfig c;
    c.seed = gen();
    c.num_particles = 1 + gen() % 40;
    c.inertia_w = std::uniform_real_distribution<double>(0.3, 1.0)(gen);
    c.c1 = std::uniform_real_distribution<double>(0.0, 2.5)(gen);
    c.c2 = std::uniform_real_distribution<double>(0.0, 2.5)(gen);
    c.bounds_policy = gen() % 2 ? BoundsPolicy::clamp : BoundsPolicy::reflect;
    if (gen() % 3 == 0) c.v_max_fraction.reset();
    const auto f = ObjectiveExpr::parse(objectives[trial % 4]);
    SwarmState s = init_swarm(c, f);
    double prev = s.g_best_error;
    for (int t = 0; t < 100; ++t) {
      step(s, c, f);
      ASSERT_LE(s.g_best_error, prev);
      prev = s.g_best_error;
      for (const auto& p : s.particles) {
        ASSERT_TRUE(c.bounds.contains(p.position));
        ASSERT_LE(p.best_error, f.evaluate(p.position[0], p.position[1]));
        ASSERT_EQ(p.best_error, f.evaluate(p.best_position[0], p.best_position[1]));
      }
      ASSERT_EQ(s.g_best_error, g_best_of(s.particles).error);
    }
  }
}

TEST(SwarmProperties, TranslatedProblemGivesTranslatedTrajectory) {
  const double a = 37.5, b = -120.25;
  const auto shifted = ObjectiveExpr::parse("(x-37.5)^2+(y+120.25)^2");
  SwarmConfig base;
  base.seed = 21;
  base.num_particles = 20;
  base.bounds = Bounds::square(-200, 200);
  SwarmConfig moved = base;
  moved.bounds.axes[0] = {-200 + a, 200 + a};
  moved.bounds.axes[1] = {-200 + b, 200 + b};
  SwarmState s0 = init_swarm(base, sphere());
  SwarmState s1 = init_swarm(moved, shifted);
  for (int t = 0; t < 30; ++t) {
    step(s0, base, sphere());
    step(s1, moved, shifted);
    for (std::size_t i = 0; i < s0.particles.size(); ++i) {
      ASSERT_NEAR(s1.particles[i].position[0] - a, s0.particles[i].position[0], 1e-6);
      ASSERT_NEAR(s1.particles[i].position[1] - b, s0.particles[i].position[1], 1e-6);
    }
    ASSERT_NEAR(s1.g_best_position[0] - a, s0.g_best_position[0], 1e-6);
    ASSERT_NEAR(s1.g_best_position[1] - b, s0.g_best_position[1], 1e-6);
  }
}

TEST(SwarmProperties, RunIsDeterministic) {
  SwarmConfig c;
  c.seed = 1234;
  EXPECT_EQ(run(c, bowl()), run(c, bowl()));
}

TEST(ResizeSwarm, GrowRetainsOriginalsAndShrinkDropsTail) {
  SwarmConfig c;
  c.seed = 5;
  SwarmState s = init_swarm(c, bowl());
  for (int t = 0; t < 5; ++t) step(s, c, bowl());
  const SwarmState before = s;
  resize_swarm(s, 100, c, bowl());
  ASSERT_EQ(s.particles.size(), 100u);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(s.particles[i], before.particles[i]);
  for (std::size_t i = 50; i < 100; ++i) {
    EXPECT_TRUE(c.bounds.contains(s.particles[i].position));
    EXPECT_EQ(s.particles[i].best_position, s.particles[i].position);
  }
  EXPECT_LE(s.g_best_error, before.g_best_error);
  EXPECT_EQ(s.g_best_error, g_best_of(s.particles).error);

  resize_swarm(s, 10, c, bowl());
  ASSERT_EQ(s.particles.size(), 10u);
  for (std::size_t i = 0; i < 10; ++i) EXPECT_EQ(s.particles[i], before.particles[i]);
  EXPECT_EQ(s.g_best_error, g_best_of(s.particles).error);
}

TEST(RebaseObjective, RecomputesBestsAtStoredPositions) {
  SwarmConfig c;
  c.seed = 6;
  SwarmState s = init_swarm(c, bowl());
  for (int t = 0; t < 5; ++t) step(s, c, bowl());
  const SwarmState before = s;
  rebase_objective(s, sphere());
  double min_err = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < s.particles.size(); ++i) {
    const auto& p = s.particles[i];
    EXPECT_EQ(p.position, before.particles[i].position);
    EXPECT_EQ(p.best_position, before.particles[i].best_position);
    EXPECT_EQ(p.best_error, sphere().evaluate(p.best_position[0], p.best_position[1]));
    min_err = std::min(min_err, p.best_error);
  }
  EXPECT_EQ(s.g_best_error, min_err);
}
