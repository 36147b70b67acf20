#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <thread>

#include "swarmlab/rng.hpp"
#include "swarmlab/server/registry.hpp"

using namespace swarmlab;
using namespace swarmlab::server;
using namespace std::chrono_literals;

namespace {

SessionOptions manual(std::size_t steps_per_tick = 1, std::size_t frame_buffer = 64) {
  SessionOptions o;
  o.autotick = false;
  o.service.steps_per_tick = steps_per_tick;
  o.service.frame_buffer = frame_buffer;
  o.evaluator_factory = [] { return std::make_unique<SerialEvaluator>(); };
  return o;
}

SwarmConfig sphere_config(std::uint64_t seed = 3) {
  SwarmConfig c;
  c.seed = seed;
  c.error_tolerance = 0.0;
  return c;
}

double min_of(const std::vector<double>& v) { return *std::min_element(v.begin(), v.end()); }

void expect_frame_matches(const Frame& f, const SwarmState& s) {
  ASSERT_EQ(f.positions.size(), s.particles.size());
  EXPECT_EQ(f.iteration, s.iteration);
  for (std::size_t i = 0; i < s.particles.size(); ++i) {
    EXPECT_EQ(f.positions[i], s.particles[i].position) << i;
    EXPECT_EQ(f.p_best_errors[i], s.particles[i].best_error) << i;
  }
  EXPECT_EQ(f.g_best, s.g_best_position);
  EXPECT_EQ(f.g_best_error, s.g_best_error);
}

}  // namespace

TEST(Session, CreatedIdleWithVisiblePositions) {
  Session s("a", sphere_config(), "x^2+y^2", manual());
  EXPECT_EQ(s.status(), SessionStatus::idle);
  const Frame f = s.snapshot();
  EXPECT_EQ(f.positions.size(), 50u);
  EXPECT_EQ(f.iteration, 0u);
  EXPECT_EQ(f.g_best_error, min_of(f.p_best_errors));
  expect_frame_matches(f, init_swarm(sphere_config(), ObjectiveExpr::parse("x^2+y^2")));
}

TEST(Session, BadObjectiveReportsOffset) {
  try {
    Session s("a", sphere_config(), "x +", manual());
    FAIL();
  } catch (const expr::ParseError& e) {
    EXPECT_EQ(e.offset(), 3u);
  }
}

TEST(Session, BadConfigRejected) {
  SwarmConfig c = sphere_config();
  c.num_particles = 0;
  EXPECT_THROW(Session("a", c, "x", manual()), ConfigError);
}

TEST(Registry, DistinctIdsAndLookup) {
  SessionRegistry reg(manual());
  auto a = reg.create("x^2+y^2");
  auto b = reg.create("x^2+y^2");
  EXPECT_NE(a->id(), b->id());
  EXPECT_EQ(reg.find(a->id()), a);
  EXPECT_THROW(reg.find("bogus"), NotFoundError);
  EXPECT_EQ(reg.size(), 2u);
  EXPECT_TRUE(reg.erase(a->id()));
  EXPECT_THROW(reg.find(a->id()), NotFoundError);
}

TEST(Registry, OverridesApplied) {
  SessionRegistry reg(manual());
  auto s = reg.create("x", {{"num_particles", 7}, {"c1", 1.5}, {"tick_interval_ms", 250}});
  EXPECT_EQ(s->config().num_particles, 7u);
  EXPECT_EQ(s->config().c1, 1.5);
  EXPECT_EQ(s->tick_interval(), 250ms);
  EXPECT_THROW(reg.create("x", {{"bogus", 1}}), ConfigError);
  EXPECT_THROW(reg.create("x", {{"tick_interval_ms", 0}}), ConfigError);
}

TEST(Registry, ConcurrentCreateYieldsUniqueIds) {
  SessionRegistry reg(manual());
  std::vector<std::thread> threads;
  std::mutex m;
  std::vector<std::string> ids;
  for (int t = 0; t < 4; ++t) {
    threads.emplace_back([&] {
      for (int i = 0; i < 10; ++i) {
        auto s = reg.create("x+y", {{"num_particles", 3}});
        std::lock_guard lock(m);
        ids.push_back(s->id());
      }
    });
  }
  for (auto& t : threads) t.join();
  std::sort(ids.begin(), ids.end());
  EXPECT_EQ(std::unique(ids.begin(), ids.end()), ids.end());
  EXPECT_EQ(reg.size(), 40u);
}

TEST(SessionLifecycle, LegalAndIllegalTransitions) {
  Session s("a", sphere_config(), "x^2+y^2", manual());
  EXPECT_THROW(s.stop(), StateError);
  EXPECT_THROW(s.tick(), StateError);
  s.start();
  EXPECT_EQ(s.status(), SessionStatus::running);
  try {
    s.start();
    FAIL();
  } catch (const StateError& e) {
    EXPECT_EQ(e.current(), SessionStatus::running);
    EXPECT_NE(std::string(e.what()).find("running"), std::string::npos);
  }
  s.tick();
  s.stop();
  EXPECT_EQ(s.status(), SessionStatus::stopped);
  const Frame frozen = s.snapshot();
  EXPECT_THROW(s.tick(), StateError);
  EXPECT_THROW(s.start(), StateError);
  EXPECT_EQ(to_json(s.snapshot()), to_json(frozen));
  s.reset();
  EXPECT_EQ(s.status(), SessionStatus::idle);
  EXPECT_EQ(s.snapshot().iteration, 0u);
  s.start();
}

TEST(SessionLifecycle, ResetSeedsAreDerivedAndReproducible) {
  const SwarmConfig c = sphere_config(42);
  const auto f = ObjectiveExpr::parse("x^2+y^2");
  Session a("a", c, "x^2+y^2", manual());
  Session b("b", c, "x^2+y^2", manual());
  a.reset();
  const std::uint64_t first = a.config().seed;
  a.reset();
  const std::uint64_t second = a.config().seed;
  EXPECT_EQ(first, derive_seed(42, 1));
  EXPECT_EQ(second, derive_seed(first, 2));
  EXPECT_NE(first, second);
  EXPECT_NE(first, 42u);
  b.reset();
  EXPECT_EQ(b.config().seed, first);
  SwarmConfig expect = c;
  expect.seed = second;
  expect_frame_matches(a.snapshot(), init_swarm(expect, f));
}

TEST(SessionTick, AdvancesByStepsPerTick) {
  Session s("a", sphere_config(), "x^2+y^2", manual(3));
  s.start();
  EXPECT_EQ(s.tick().iteration, 3u);
  EXPECT_EQ(s.tick().iteration, 6u);
}

TEST(SessionTick, MatchesSerialSteps) {
  const SwarmConfig c = sphere_config(9);
  const auto f = ObjectiveExpr::parse("x^2+(y-100)^2");
  Session s("a", c, f.source(), manual(2));
  SwarmState replica = init_swarm(c, f);
  s.start();
  for (int t = 0; t < 20; ++t) {
    step(replica, c, f);
    step(replica, c, f);
    expect_frame_matches(s.tick(), replica);
  }
}

TEST(SessionTick, GrowingSwarmRetainsOriginals) {
  const SwarmConfig c = sphere_config(5);
  const auto f = ObjectiveExpr::parse("x^2+y^2");
  Session s("a", c, f.source(), manual());
  s.start();
  for (int i = 0; i < 5; ++i) s.tick();
  const Frame before = s.snapshot();
  s.enqueue(SetNumParticles{100});
  EXPECT_EQ(s.pending_changes(), 1u);
  EXPECT_EQ(s.snapshot().positions.size(), 50u);
  const Frame after = s.tick();
  EXPECT_EQ(s.pending_changes(), 0u);
  ASSERT_EQ(after.positions.size(), 100u);
  EXPECT_EQ(s.config().num_particles, 100u);
  EXPECT_LE(after.g_best_error, before.g_best_error);
  EXPECT_EQ(after.g_best_error, min_of(after.p_best_errors));
  for (std::size_t i = 0; i < 50; ++i) EXPECT_LE(after.p_best_errors[i], before.p_best_errors[i]);

  // Replica: same swarm, originals untouched, 50 appended, then one step.
  SwarmState replica = init_swarm(c, f);
  for (int i = 0; i < 5; ++i) step(replica, c, f);
  const SwarmState original = replica;
  SwarmConfig grown = c;
  grown.num_particles = 100;
  resize_swarm(replica, 100, grown, f);
  ASSERT_EQ(replica.particles.size(), 100u);
  for (std::size_t i = 0; i < 50; ++i) EXPECT_EQ(replica.particles[i], original.particles[i]);
  for (std::size_t i = 50; i < 100; ++i) EXPECT_TRUE(grown.bounds.contains(replica.particles[i].position));
  EXPECT_LE(replica.g_best_error, original.g_best_error);
  step(replica, grown, f);
  expect_frame_matches(after, replica);
}

TEST(SessionTick, ShrinkingDropsHighestIndices) {
  const SwarmConfig c = sphere_config(6);
  const auto f = ObjectiveExpr::parse("x^2+y^2");
  Session s("a", c, f.source(), manual());
  s.start();
  s.tick();
  s.enqueue(SetNumParticles{10});
  SwarmState replica = init_swarm(c, f);
  step(replica, c, f);
  replica.particles.resize(10);
  const GlobalBest gb = g_best_of(replica.particles);
  replica.g_best_position = gb.position;
  replica.g_best_error = gb.error;
  SwarmConfig small = c;
  small.num_particles = 10;
  step(replica, small, f);
  expect_frame_matches(s.tick(), replica);
}

TEST(SessionTick, ObjectiveChangeRecomputesBests) {
  const SwarmConfig c = sphere_config(7);
  const auto f = ObjectiveExpr::parse("x^2+y^2");
  const auto g = ObjectiveExpr::parse("(x-234)^2+(y+100)^2");
  Session s("a", c, f.source(), manual());
  s.start();
  for (int i = 0; i < 3; ++i) s.tick();
  s.enqueue(SetObjective{g});
  const Frame after = s.tick();
  EXPECT_EQ(after.objective, g.source());

  // Recompute by hand at every stored best position, then step under g.
  SwarmState replica = init_swarm(c, f);
  for (int i = 0; i < 3; ++i) step(replica, c, f);
  std::size_t best = 0;
  for (std::size_t i = 0; i < replica.particles.size(); ++i) {
    auto& p = replica.particles[i];
    p.best_error = g.evaluate(p.best_position[0], p.best_position[1]);
    if (p.best_error < replica.particles[best].best_error) best = i;
  }
  replica.g_best_error = replica.particles[best].best_error;
  replica.g_best_position = replica.particles[best].best_position;
  step(replica, c, g);
  expect_frame_matches(after, replica);
}

TEST(SessionTick, LearningFactorsTakeEffectNextStep) {
  const SwarmConfig c = sphere_config(8);
  const auto f = ObjectiveExpr::parse("x^2+y^2");
  Session s("a", c, f.source(), manual());
  s.start();
  s.tick();
  s.enqueue(SetLearningFactors{0.5, 1.5});
  EXPECT_EQ(s.config().c1, 2.0);
  const Frame after = s.tick();
  SwarmState replica = init_swarm(c, f);
  step(replica, c, f);
  SwarmConfig changed = c;
  changed.c1 = 0.5;
  changed.c2 = 1.5;
  step(replica, changed, f);
  expect_frame_matches(after, replica);
  EXPECT_EQ(s.config().c1, 0.5);
}

TEST(SessionTick, TickIntervalChangeAppliedAtBoundary) {
  Session s("a", sphere_config(), "x", manual());
  s.enqueue(SetTickInterval{250ms});
  EXPECT_EQ(s.tick_interval(), 3000ms);
  s.start();
  s.tick();
  EXPECT_EQ(s.tick_interval(), 250ms);
}

TEST(SessionTick, InvalidChangesRejectedWhole) {
  Session s("a", sphere_config(), "x", manual());
  EXPECT_THROW(s.enqueue(SetNumParticles{0}), ConfigError);
  EXPECT_THROW(s.enqueue(SetLearningFactors{-1, 2}), ConfigError);
  EXPECT_THROW(s.enqueue(SetTickInterval{0ms}), ConfigError);
  std::vector<ParamChange> batch;
  batch.emplace_back(SetNumParticles{20});
  batch.emplace_back(SetNumParticles{0});
  EXPECT_THROW(s.enqueue(std::move(batch)), ConfigError);
  EXPECT_EQ(s.pending_changes(), 0u);
}

TEST(SessionTick, ConvergesAndStops) {
  SwarmConfig c = sphere_config();
  c.error_tolerance = 1e9;
  Session s("a", c, "x^2+y^2", manual());
  s.start();
  EXPECT_EQ(s.tick().status, SessionStatus::converged);
  EXPECT_EQ(s.status(), SessionStatus::converged);
  EXPECT_THROW(s.tick(), StateError);
}

TEST(SessionTick, MaxIterationsEndsInStopped) {
  SwarmConfig c = sphere_config();
  c.max_iterations = 2;
  Session s("a", c, "x^2+y^2", manual());
  s.start();
  EXPECT_EQ(s.tick().status, SessionStatus::running);
  EXPECT_EQ(s.tick().status, SessionStatus::stopped);
}

TEST(SessionTick, EvaluationErrorDuringStepSetsErrored) {
  SwarmConfig c = sphere_config();
  c.bounds = Bounds::square(0.0, 1.0);
  Session s("a", c, "sqrt(x-0.5)", manual());
  auto q = s.subscribe();
  s.start();
  Frame last;
  for (int i = 0; i < 100 && s.status() == SessionStatus::running; ++i) last = s.tick();
  ASSERT_EQ(s.status(), SessionStatus::errored);
  EXPECT_EQ(last.status, SessionStatus::errored);
  ASSERT_TRUE(last.error.has_value());
  EXPECT_NE(last.error->find("particle"), std::string::npos) << *last.error;
  s.reset();
  EXPECT_EQ(s.status(), SessionStatus::idle);
}

TEST(SessionTick, FailedObjectiveChangeIsNotApplied) {
  Session s("a", sphere_config(), "x^2+y^2", manual());
  s.start();
  const Frame before = s.tick();
  s.enqueue(SetObjective{ObjectiveExpr::parse("sqrt(-1-x^2)")});
  const Frame after = s.tick();
  EXPECT_EQ(after.status, SessionStatus::errored);
  ASSERT_TRUE(after.error.has_value());
  EXPECT_NE(after.error->find("set_objective"), std::string::npos);
  EXPECT_EQ(after.objective, "x^2+y^2");
  EXPECT_EQ(after.positions, before.positions);
  EXPECT_EQ(after.iteration, before.iteration);
}

TEST(SessionStream, SubscriberSeesEveryFrameInOrder) {
  Session s("a", sphere_config(), "x^2+y^2", manual());
  auto q = s.subscribe();
  s.start();
  for (int i = 0; i < 3; ++i) s.tick();
  std::uint64_t last = 0;
  for (int i = 0; i < 3; ++i) {
    auto item = q->pop(1s);
    ASSERT_TRUE(item && item->frame);
    const Frame f = frame_from_json(nlohmann::json::parse(*item->frame));
    EXPECT_GT(f.iteration, last);
    last = f.iteration;
  }
  EXPECT_FALSE(q->pop(10ms).has_value());
}

TEST(SessionStream, SubscribersShareIdenticalPayloads) {
  Session s("a", sphere_config(), "x^2+y^2", manual());
  auto a = s.subscribe();
  auto b = s.subscribe();
  EXPECT_EQ(s.subscriber_count(), 2u);
  s.start();
  s.tick();
  s.tick();
  for (int i = 0; i < 2; ++i) {
    auto x = a->pop(1s), y = b->pop(1s);
    ASSERT_TRUE(x && y && x->frame && y->frame);
    EXPECT_EQ(*x->frame, *y->frame);
  }
  s.unsubscribe(a);
  EXPECT_EQ(s.subscriber_count(), 1u);
  EXPECT_TRUE(a->closed());
}

TEST(SessionStream, SlowSubscriberGetsGapMarker) {
  Session s("a", sphere_config(), "x^2+y^2", manual(1, 2));
  auto q = s.subscribe();
  s.start();
  for (int i = 0; i < 5; ++i) s.tick();
  auto gap = q->pop(1s);
  ASSERT_TRUE(gap);
  EXPECT_EQ(gap->frame, nullptr);
  EXPECT_EQ(gap->dropped, 3u);
  for (std::uint64_t it : {4u, 5u}) {
    auto item = q->pop(1s);
    ASSERT_TRUE(item && item->frame);
    EXPECT_EQ(frame_from_json(nlohmann::json::parse(*item->frame)).iteration, it);
  }
  EXPECT_EQ(q->total_dropped(), 3u);
}

TEST(SessionStream, FrameJsonRoundTrip) {
  Session s("a", sphere_config(), "x^2+y^2", manual());
  const Frame f = s.snapshot();
  const Frame back = frame_from_json(to_json(f));
  EXPECT_EQ(to_json(back), to_json(f));
  EXPECT_EQ(back.positions, f.positions);
}

TEST(SessionStream, TraceFileRecordsEveryFrame) {
  const auto dir = std::filesystem::temp_directory_path() / "swarmlab_trace_test";
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  SessionOptions o = manual();
  o.trace_dir = dir;
  {
    Session s("t1", sphere_config(), "x^2+y^2", o);
    s.start();
    for (int i = 0; i < 4; ++i) s.tick();
  }
  std::ifstream in(dir / "t1.jsonl");
  std::string line;
  std::uint64_t expect = 1;
  while (std::getline(in, line)) EXPECT_EQ(frame_from_json(nlohmann::json::parse(line)).iteration, expect++);
  EXPECT_EQ(expect, 5u);
  std::filesystem::remove_all(dir);
}

// Every frame's reported g_best_error must be rederivable from the frame alone.
TEST(SessionProperties, FrameConsistencyUnderChanges) {
  Session s("a", sphere_config(12), "x^2+y^2", manual());
  s.start();
  const std::vector<std::string> objectives = {"(x-234)^2+(y+100)^2", "x^2+(y-100)^2", "x^2+y^2"};
  for (int i = 0; i < 60; ++i) {
    if (i % 7 == 3) s.enqueue(SetNumParticles{static_cast<std::size_t>(10 + (i * 13) % 90)});
    if (i % 11 == 5) s.enqueue(SetObjective{ObjectiveExpr::parse(objectives[i % 3])});
    const Frame f = s.tick();
    ASSERT_EQ(f.positions.size(), f.p_best_errors.size());
    ASSERT_EQ(f.positions.size(), s.config().num_particles);
    EXPECT_EQ(f.g_best_error, min_of(f.p_best_errors)) << "tick " << i;
  }
}

// Changes queued from another thread while ticking never show up half-applied.
TEST(SessionProperties, ChangesAreAtomic) {
  Session s("a", sphere_config(13), "x^2+y^2", manual(1, 512));
  auto q = s.subscribe();
  s.start();
  std::atomic<bool> done{false};
  std::thread changer([&] {
    for (int i = 0; i < 200 && !done; ++i) {
      std::vector<ParamChange> batch;
      batch.emplace_back(SetNumParticles{i % 2 ? 20u : 40u});
      batch.emplace_back(SetObjective{ObjectiveExpr::parse(i % 2 ? "x^2+y^2" : "(x-1)^2+y^2")});
      s.enqueue(std::move(batch));
      std::this_thread::sleep_for(100us);
    }
  });
  for (int i = 0; i < 200; ++i) s.tick();
  done = true;
  changer.join();
  while (auto item = q->pop(10ms)) {
    ASSERT_TRUE(item->frame);
    const Frame f = frame_from_json(nlohmann::json::parse(*item->frame));
    const std::size_t n = f.positions.size();
    EXPECT_TRUE(n == 50 || n == 20 || n == 40) << n;
    EXPECT_EQ(f.p_best_errors.size(), n);
    EXPECT_EQ(f.g_best_error, min_of(f.p_best_errors));
    if (n == 20) {
      EXPECT_EQ(f.objective, "x^2+y^2");
    } else if (n == 40) {
      EXPECT_EQ(f.objective, "(x-1)^2+y^2");
    }
  }
}

TEST(SessionProperties, ConcurrentSessionsMatchSerialRuns) {
  const auto f = ObjectiveExpr::parse("x^2+(y-100)^2");
  std::vector<SwarmConfig> configs;
  for (std::uint64_t seed : {101u, 202u, 303u}) {
    SwarmConfig c = sphere_config(seed);
    c.max_iterations = 150;
    configs.push_back(c);
  }
  std::vector<std::unique_ptr<Session>> sessions;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    sessions.push_back(std::make_unique<Session>("c" + std::to_string(i), configs[i], f.source(), manual()));
    sessions.back()->start();
  }
  std::vector<std::vector<Frame>> frames(configs.size());
  std::vector<std::thread> threads;
  for (std::size_t i = 0; i < configs.size(); ++i) {
    threads.emplace_back([&, i] {
      while (sessions[i]->status() == SessionStatus::running) frames[i].push_back(sessions[i]->tick());
    });
  }
  for (auto& t : threads) t.join();
  for (std::size_t i = 0; i < configs.size(); ++i) {
    const RunReport serial = run(configs[i], f);
    ASSERT_EQ(frames[i].size(), serial.trace.size());
    SwarmState replica = init_swarm(configs[i], f);
    for (std::size_t k = 0; k < frames[i].size(); ++k) {
      step(replica, configs[i], f);
      EXPECT_EQ(frames[i][k].g_best_error, serial.trace[k]);
      expect_frame_matches(frames[i][k], replica);
    }
    EXPECT_EQ(frames[i].back().g_best, serial.g_best);
  }
}

TEST(SessionAutotick, EmitsAtConfiguredCadence) {
  SessionOptions o = manual();
  o.autotick = true;
  o.service.tick_interval = 40ms;
  Session s("a", sphere_config(), "x^2+y^2", o);
  auto q = s.subscribe();
  const auto begin = std::chrono::steady_clock::now();
  s.start();
  std::vector<std::chrono::steady_clock::time_point> arrivals;
  while (arrivals.size() < 6) {
    auto item = q->pop(1s);
    ASSERT_TRUE(item && item->frame);
    arrivals.push_back(std::chrono::steady_clock::now());
  }
  s.stop();
  auto previous = begin;
  for (auto t : arrivals) {
    EXPECT_LE(t - previous, 80ms);
    previous = t;
  }
  EXPECT_EQ(s.status(), SessionStatus::stopped);
  const auto frozen = s.snapshot().iteration;
  std::this_thread::sleep_for(100ms);
  EXPECT_EQ(s.snapshot().iteration, frozen);
}

TEST(SessionAutotick, TickerEndsOnConvergenceAndRestartsAfterReset) {
  SessionOptions o = manual();
  o.autotick = true;
  o.service.tick_interval = 5ms;
  SwarmConfig c = sphere_config();
  c.error_tolerance = 1e-3;
  Session s("a", c, "x^2+y^2", o);
  s.start();
  for (int i = 0; i < 400 && s.status() == SessionStatus::running; ++i) std::this_thread::sleep_for(5ms);
  EXPECT_EQ(s.status(), SessionStatus::converged);
  s.reset();
  s.start();
  std::this_thread::sleep_for(50ms);
  EXPECT_GT(s.snapshot().iteration, 0u);
}
