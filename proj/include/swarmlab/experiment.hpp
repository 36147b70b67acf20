#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "swarmlab/swarm.hpp"

namespace swarmlab {

struct ExperimentSpec {
  std::string objective_source;
  SwarmConfig config;           // config.seed is the base seed
  std::size_t repeats = 1;
  std::optional<Point> target;  // when set, success means ending within success_radius of it
  double success_radius = 1e-2;
  double success_threshold = 0.95;

  void validate() const;
};

struct ExperimentRun {
  std::uint64_t seed = 0;
  bool success = false;
  RunReport report;

  friend bool operator==(const ExperimentRun&, const ExperimentRun&) = default;
};

struct ExperimentAggregate {
  double success_rate = 0.0;
  double median_iterations = 0.0;
  double median_final_error = 0.0;

  friend bool operator==(const ExperimentAggregate&, const ExperimentAggregate&) = default;
};

struct ExperimentReport {
  ExperimentSpec spec;
  std::vector<ExperimentRun> runs;  // ordered by seed
  ExperimentAggregate aggregate;

  bool passed() const { return aggregate.success_rate >= spec.success_threshold; }
};

/// Runs `repeats` independent runs with seeds seed, seed+1, ... Repeats run
/// in parallel with a serial evaluator each; ordering is by seed regardless.
ExperimentReport run_experiment(const ExperimentSpec& spec);

/// Same, but every run goes through `evaluator`, one run at a time.
ExperimentReport run_experiment(const ExperimentSpec& spec, Evaluator& evaluator);

/// A run succeeds if it ended within success_radius of the target, or, with
/// no target, if it terminated on tolerance.
bool run_succeeded(const ExperimentSpec& spec, const RunReport& report);

ExperimentAggregate aggregate_runs(const std::vector<ExperimentRun>& runs);

nlohmann::json to_json(const ExperimentReport& report);
ExperimentReport experiment_report_from_json(const nlohmann::json& j);

/// CSV with header "run,iteration,g_best_error"; one row per trace entry.
/// `run` is the 0-based repeat index, `iteration` starts at 1.
void write_trace_csv(const ExperimentReport& report, std::ostream& out);

}  // namespace swarmlab
