#include <benchmark/benchmark.h>

#include <random>

#include "swarmlab/evaluator.hpp"
#include "swarmlab/experiment.hpp"
#include "swarmlab/swarm.hpp"

using namespace swarmlab;

namespace {

const ObjectiveExpr& objective() {
  static const ObjectiveExpr f =
      ObjectiveExpr::parse("20+x^2-10*cos(2*3.141592653589793*x)+y^2-10*cos(2*3.141592653589793*y)");
  return f;
}

std::vector<Point> points(std::size_t n) {
  std::mt19937_64 gen(1);
  std::uniform_real_distribution<double> d(-500, 500);
  std::vector<Point> out(n);
  for (auto& p : out) p = {d(gen), d(gen)};
  return out;
}

void BM_EvaluateSerial(benchmark::State& state) {
  const auto pts = points(static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(pts.size());
  for (auto _ : state) {
    evaluate_serial(objective(), pts, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

void BM_EvaluateParallel(benchmark::State& state) {
  const auto pts = points(static_cast<std::size_t>(state.range(0)));
  std::vector<double> out(pts.size());
  for (auto _ : state) {
    evaluate_parallel(objective(), pts, out);
    benchmark::DoNotOptimize(out.data());
  }
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

template <class E>
void BM_Step(benchmark::State& state) {
  SwarmConfig c;
  c.num_particles = static_cast<std::size_t>(state.range(0));
  E evaluator;
  SwarmState s = init_swarm(c, objective(), evaluator);
  for (auto _ : state) step(s, c, objective(), evaluator);
  state.SetItemsProcessed(state.iterations() * state.range(0));
}

ExperimentSpec experiment_spec() {
  ExperimentSpec spec;
  spec.objective_source = "x^2+(y-100)^2";
  spec.repeats = 16;
  spec.target = Point{0, 100};
  return spec;
}

void BM_ExperimentSequential(benchmark::State& state) {
  const ExperimentSpec spec = experiment_spec();
  SerialEvaluator evaluator;
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(spec, evaluator).aggregate);
}

void BM_ExperimentParallelRepeats(benchmark::State& state) {
  const ExperimentSpec spec = experiment_spec();
  for (auto _ : state) benchmark::DoNotOptimize(run_experiment(spec).aggregate);
}

}  // namespace

BENCHMARK(BM_EvaluateSerial)->RangeMultiplier(8)->Range(64, 1 << 18);
BENCHMARK(BM_EvaluateParallel)->RangeMultiplier(8)->Range(64, 1 << 18);
BENCHMARK_TEMPLATE(BM_Step, SerialEvaluator)->Arg(50)->Arg(1000)->Arg(20000);
BENCHMARK_TEMPLATE(BM_Step, ParallelEvaluator)->Arg(50)->Arg(1000)->Arg(20000);
BENCHMARK(BM_ExperimentSequential)->Unit(benchmark::kMillisecond);
BENCHMARK(BM_ExperimentParallelRepeats)->Unit(benchmark::kMillisecond);

BENCHMARK_MAIN();
