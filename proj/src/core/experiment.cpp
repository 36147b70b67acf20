#include "swarmlab/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <exception>
#include <ostream>

#include "swarmlab/error.hpp"
#include "swarmlab/report.hpp"

namespace swarmlab {

using nlohmann::json;

namespace {

double median(std::vector<double> values) {
  if (values.empty()) return 0.0;
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  if (values.size() % 2 == 1) return values[mid];
  return 0.5 * (values[mid - 1] + values[mid]);
}

std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void ExperimentSpec::validate() const {
  if (repeats < 1) throw ConfigError("repeats must be >= 1");
  if (!(success_radius >= 0.0)) throw ConfigError("success radius must be nonnegative");
  if (!(success_threshold >= 0.0 && success_threshold <= 1.0)) {
    throw ConfigError("success threshold must lie in [0, 1]");
  }
  config.validate();
}

bool run_succeeded(const ExperimentSpec& spec, const RunReport& report) {
  if (!spec.target) return report.reason == TerminationReason::tolerance;
  double sq = 0.0;
  for (std::size_t d = 0; d < kDimensions; ++d) {
    const double delta = report.g_best[d] - (*spec.target)[d];
    sq += delta * delta;
  }
  return std::sqrt(sq) <= spec.success_radius;
}

ExperimentAggregate aggregate_runs(const std::vector<ExperimentRun>& runs) {
  ExperimentAggregate agg;
  if (runs.empty()) return agg;
  std::vector<double> iterations;
  std::vector<double> errors;
  std::size_t successes = 0;
  for (const auto& r : runs) {
    successes += r.success ? 1 : 0;
    iterations.push_back(static_cast<double>(r.report.iterations));
    errors.push_back(r.report.error);
  }
  agg.success_rate = static_cast<double>(successes) / static_cast<double>(runs.size());
  agg.median_iterations = median(std::move(iterations));
  agg.median_final_error = median(std::move(errors));
  return agg;
}

ExperimentReport run_experiment(const ExperimentSpec& spec) {
  spec.validate();
  const ObjectiveExpr objective = ObjectiveExpr::parse(spec.objective_source);
  ExperimentReport out;
  out.spec = spec;
  out.runs.resize(spec.repeats);
  std::vector<std::exception_ptr> failures(spec.repeats);

  const auto n = static_cast<std::int64_t>(spec.repeats);
#pragma omp parallel for schedule(dynamic)
  for (std::int64_t i = 0; i < n; ++i) {
    try {
      SerialEvaluator evaluator;
      SwarmConfig config = spec.config;
      config.seed = spec.config.seed + static_cast<std::uint64_t>(i);
      ExperimentRun& slot = out.runs[static_cast<std::size_t>(i)];
      slot.seed = config.seed;
      slot.report = run(config, objective, evaluator);
      slot.success = run_succeeded(spec, slot.report);
    } catch (...) {
      failures[static_cast<std::size_t>(i)] = std::current_exception();
    }
  }
  for (const auto& f : failures) {
    if (f) std::rethrow_exception(f);
  }
  out.aggregate = aggregate_runs(out.runs);
  return out;
}

ExperimentReport run_experiment(const ExperimentSpec& spec, Evaluator& evaluator) {
  spec.validate();
  const ObjectiveExpr objective = ObjectiveExpr::parse(spec.objective_source);
  ExperimentReport out;
  out.spec = spec;
  for (std::size_t i = 0; i < spec.repeats; ++i) {
    SwarmConfig config = spec.config;
    config.seed = spec.config.seed + i;
    ExperimentRun r;
    r.seed = config.seed;
    r.report = run(config, objective, evaluator);
    r.success = run_succeeded(spec, r.report);
    out.runs.push_back(std::move(r));
  }
  out.aggregate = aggregate_runs(out.runs);
  return out;
}

json to_json(const ExperimentReport& report) {
  const ExperimentSpec& s = report.spec;
  json runs = json::array();
  for (const auto& r : report.runs) {
    runs.push_back({{"seed", r.seed}, {"success", r.success}, {"report", to_json(r.report)}});
  }
  return json{{"objective", s.objective_source},
              {"config", to_json(s.config)},
              {"repeats", s.repeats},
              {"target", s.target ? point_to_json(*s.target) : json(nullptr)},
              {"success_radius", s.success_radius},
              {"success_threshold", s.success_threshold},
              {"runs", runs},
              {"aggregate",
               {{"success_rate", report.aggregate.success_rate},
                {"median_iterations", report.aggregate.median_iterations},
                {"median_final_error", report.aggregate.median_final_error}}},
              {"passed", report.passed()}};
}

ExperimentReport experiment_report_from_json(const json& j) {
  ExperimentReport r;
  try {
    r.spec.objective_source = j.at("objective").get<std::string>();
    apply_json(r.spec.config, j.at("config"));
    r.spec.repeats = j.at("repeats").get<std::size_t>();
    if (!j.at("target").is_null()) r.spec.target = point_from_json(j.at("target"));
    r.spec.success_radius = j.at("success_radius").get<double>();
    r.spec.success_threshold = j.at("success_threshold").get<double>();
    for (const auto& run_json : j.at("runs")) {
      ExperimentRun run;
      run.seed = run_json.at("seed").get<std::uint64_t>();
      run.success = run_json.at("success").get<bool>();
      run.report = run_report_from_json(run_json.at("report"));
      r.runs.push_back(std::move(run));
    }
    const json& agg = j.at("aggregate");
    r.aggregate.success_rate = agg.at("success_rate").get<double>();
    r.aggregate.median_iterations = agg.at("median_iterations").get<double>();
    r.aggregate.median_final_error = agg.at("median_final_error").get<double>();
  } catch (const json::exception& e) {
    throw ConfigError(std::string("malformed experiment report: ") + e.what());
  }
  return r;
}

void write_trace_csv(const ExperimentReport& report, std::ostream& out) {
  out << "run,iteration,g_best_error\n";
  for (std::size_t run = 0; run < report.runs.size(); ++run) {
    const auto& trace = report.runs[run].report.trace;
    for (std::size_t i = 0; i < trace.size(); ++i) {
      out << run << ',' << (i + 1) << ',' << shortest(trace[i]) << '\n';
    }
  }
}

}  // namespace swarmlab
