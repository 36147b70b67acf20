// swarmlab command-line front end.
//
// Exit codes: 0 success, 1 experiment below its success threshold, 2 usage
// error (bad flags, objective or config), 3 runtime failure (I/O, network).

#include <signal.h>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>

#include <CLI11.hpp>
#include <nlohmann/json.hpp>

#include "swarmlab/cluster/client.hpp"
#include "swarmlab/cluster/head.hpp"
#include "swarmlab/cluster/worker.hpp"
#include "swarmlab/config.hpp"
#include "swarmlab/experiment.hpp"
#include "swarmlab/report.hpp"
#include "swarmlab/server/http_server.hpp"

using namespace swarmlab;
using nlohmann::json;

namespace {

constexpr int kOk = 0;
constexpr int kBelowThreshold = 1;
constexpr int kUsage = 2;
constexpr int kRuntime = 3;

class UsageError : public Error {
 public:
  using Error::Error;
};

struct SwarmFlags {
  std::string objective = "x^2+y^2";
  std::string config_file;
  std::optional<std::uint64_t> seed;
  std::optional<std::size_t> particles;
  std::optional<double> c1, c2, inertia, tolerance, v_max;
  std::optional<std::size_t> max_iters;
  std::vector<double> bounds;
  std::string bounds_policy;

  void attach(CLI::App& app) {
    app.add_option("--objective,-f", objective, "Expression in x and y, or a built-in name (see `functions`)")
        ->capture_default_str();
    app.add_option("--config", config_file, "JSON file with swarm config keys");
    app.add_option("--seed", seed, "Base seed");
    app.add_option("--particles,-n", particles, "Number of particles");
    app.add_option("--c1", c1, "Cognitive coefficient");
    app.add_option("--c2", c2, "Social coefficient");
    app.add_option("--inertia,-w", inertia, "Inertia weight");
    app.add_option("--tolerance", tolerance, "Stop once g_best error <= tolerance");
    app.add_option("--max-iters", max_iters, "Iteration cap");
    app.add_option("--v-max", v_max, "Velocity clamp as a fraction of the axis range (0 disables)");
    app.add_option("--bounds", bounds, "Square search box LO HI")->expected(2);
    app.add_option("--bounds-policy", bounds_policy, "clamp or reflect");
  }

  SwarmConfig config(SwarmConfig c = {}) const {
    if (!config_file.empty()) {
      std::ifstream in(config_file);
      if (!in) throw UsageError("cannot open config file " + config_file);
      json j;
      try {
        in >> j;
      } catch (const json::exception& e) {
        throw UsageError("config file " + config_file + ": " + e.what());
      }
      apply_json(c, j);
    }
    if (seed) c.seed = *seed;
    if (particles) c.num_particles = *particles;
    if (c1) c.c1 = *c1;
    if (c2) c.c2 = *c2;
    if (inertia) c.inertia_w = *inertia;
    if (tolerance) c.error_tolerance = *tolerance;
    if (max_iters) c.max_iterations = *max_iters;
    if (v_max) c.v_max_fraction = *v_max > 0 ? std::optional<double>(*v_max) : std::nullopt;
    if (bounds.size() == 2) c.bounds = Bounds::square(bounds[0], bounds[1]);
    if (!bounds_policy.empty()) c.bounds_policy = bounds_policy_from_string(bounds_policy);
    c.validate();
    return c;
  }
};

std::string resolve_objective(const std::string& text) {
  for (const auto& e : expr::builtin_catalog()) {
    if (e.name == text) return e.source;
  }
  return text;
}

Point parse_point(const std::vector<double>& v) { return {v.at(0), v.at(1)}; }

void write_output(const std::string& path, const std::string& text) {
  if (path.empty() || path == "-") {
    std::cout << text << '\n';
    return;
  }
  std::ofstream out(path);
  if (!out) throw Error("cannot write " + path);
  out << text << '\n';
  if (!out) throw Error("write to " + path + " failed");
}

// Blocks SIGINT/SIGTERM in every thread so the main thread can wait for them.
sigset_t block_termination_signals() {
  sigset_t set;
  sigemptyset(&set);
  sigaddset(&set, SIGINT);
  sigaddset(&set, SIGTERM);
  pthread_sigmask(SIG_BLOCK, &set, nullptr);
  return set;
}

// True once a termination signal arrived; waits at most `slice`.
bool wait_for_signal(const sigset_t& set, std::chrono::milliseconds slice) {
  timespec ts{static_cast<time_t>(slice.count() / 1000), static_cast<long>((slice.count() % 1000) * 1000000)};
  return sigtimedwait(&set, nullptr, &ts) > 0;
}

void announce(const std::string& what, const std::string& port_file) {
  std::cout << what << std::endl;
  if (!port_file.empty()) {
    std::ofstream out(port_file + ".tmp");
    out << what.substr(what.rfind(' ') + 1) << '\n';
    out.close();
    std::rename((port_file + ".tmp").c_str(), port_file.c_str());
  }
}

}  // namespace

int main(int argc, char** argv) {
  const sigset_t termination = block_termination_signals();

  CLI::App app{"swarmlab: particle swarm optimization over 2-D expressions"};
  app.require_subcommand(1);
  app.option_defaults()->multi_option_policy(CLI::MultiOptionPolicy::TakeLast);

  SwarmFlags swarm_flags;
  std::string out_path, csv_path, head_address;

  auto* run_cmd = app.add_subcommand("run", "Single seeded run; prints the run report as JSON");
  swarm_flags.attach(*run_cmd);
  run_cmd->add_option("--out,-o", out_path, "Report path (default stdout)");
  run_cmd->add_option("--csv", csv_path, "Also write the per-iteration trace as CSV");
  run_cmd->add_option("--head", head_address, "Evaluate fitness on a cluster head HOST:PORT");

  std::size_t repeats = 100;
  std::vector<double> target;
  double radius = 1e-2, threshold = 0.95;
  auto* exp_cmd = app.add_subcommand("experiment", "Repeated runs with consecutive seeds; JSON report");
  swarm_flags.attach(*exp_cmd);
  exp_cmd->add_option("--repeats,-r", repeats, "Number of runs")->capture_default_str();
  exp_cmd->add_option("--target", target, "Known optimum X Y; success means ending within --radius")->expected(2);
  exp_cmd->add_option("--radius", radius, "Success radius around --target")->capture_default_str();
  exp_cmd->add_option("--threshold", threshold, "Required success rate for exit code 0")->capture_default_str();
  exp_cmd->add_option("--out,-o", out_path, "Report path (default stdout)");
  exp_cmd->add_option("--csv", csv_path, "Trace CSV path (run, iteration, g_best_error)");
  exp_cmd->add_option("--head", head_address, "Evaluate fitness on a cluster head HOST:PORT");

  std::string listen, service_config, static_dir, trace_dir, port_file;
  auto* serve_cmd = app.add_subcommand("serve", "HTTP + WebSocket session server");
  serve_cmd->add_option("--listen", listen, "HOST:PORT")->default_val("127.0.0.1:8080");
  serve_cmd->add_option("--head", head_address, "Evaluate fitness on a cluster head HOST:PORT");
  serve_cmd->add_option("--config", service_config, "Service defaults JSON");
  serve_cmd->add_option("--static", static_dir, "Directory served for non-API GET requests");
  serve_cmd->add_option("--trace-dir", trace_dir, "Append each session's frames to <dir>/<id>.jsonl");
  serve_cmd->add_option("--port-file", port_file, "Write the bound HOST:PORT here once listening");

  std::size_t batch_size = 64;
  long timeout_ms = 5000;
  auto* head_cmd = app.add_subcommand("head", "Cluster head: accepts workers and fitness submissions");
  head_cmd->add_option("--listen", listen, "HOST:PORT (port 0 picks one)")->default_val("127.0.0.1:7000");
  head_cmd->add_option("--batch-size", batch_size, "Points per worker task")->capture_default_str();
  head_cmd->add_option("--timeout-ms", timeout_ms, "Per-task timeout before reassignment")->capture_default_str();
  head_cmd->add_option("--port-file", port_file, "Write the bound HOST:PORT here once listening");

  std::string worker_name = "worker";
  long give_up_ms = 30000;
  auto* worker_cmd = app.add_subcommand("worker", "Cluster worker");
  worker_cmd->add_option("--head", head_address, "Head HOST:PORT")->required();
  worker_cmd->add_option("--name", worker_name, "Name reported at registration")->capture_default_str();
  worker_cmd->add_option("--give-up-ms", give_up_ms, "Exit after failing to reach the head this long")
      ->capture_default_str();

  bool functions_json = false;
  auto* functions_cmd = app.add_subcommand("functions", "List built-in objectives");
  functions_cmd->add_flag("--json", functions_json, "Print as JSON");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kUsage;
  }

  try {
    if (*functions_cmd) {
      json list = json::array();
      for (const auto& e : expr::builtin_catalog()) {
        if (functions_json) {
          list.push_back({{"name", e.name}, {"source", e.source}});
        } else {
          std::cout << e.name << '\t' << e.source << '\n';
        }
      }
      if (functions_json) std::cout << list.dump(2) << '\n';
      return kOk;
    }

    if (*run_cmd) {
      const SwarmConfig config = swarm_flags.config();
      const ObjectiveExpr f = ObjectiveExpr::parse(resolve_objective(swarm_flags.objective));
      std::optional<cluster::RemoteHeadEvaluator> remote;
      if (!head_address.empty()) remote.emplace(head_address);
      const RunReport report = remote ? run(config, f, *remote) : run(config, f);
      write_output(out_path, to_json(report).dump(2));
      if (!csv_path.empty()) {
        ExperimentReport single;
        single.runs.push_back({config.seed, true, report});
        std::ofstream csv(csv_path);
        if (!csv) throw Error("cannot write " + csv_path);
        write_trace_csv(single, csv);
      }
      return kOk;
    }

    if (*exp_cmd) {
      ExperimentSpec spec;
      spec.objective_source = resolve_objective(swarm_flags.objective);
      spec.config = swarm_flags.config();
      spec.repeats = repeats;
      if (target.size() == 2) spec.target = parse_point(target);
      spec.success_radius = radius;
      spec.success_threshold = threshold;
      spec.validate();
      ObjectiveExpr::parse(spec.objective_source);
      std::optional<cluster::RemoteHeadEvaluator> remote;
      if (!head_address.empty()) remote.emplace(head_address);
      const ExperimentReport report = remote ? run_experiment(spec, *remote) : run_experiment(spec);
      write_output(out_path, to_json(report).dump(2));
      if (!csv_path.empty()) {
        std::ofstream csv(csv_path);
        if (!csv) throw Error("cannot write " + csv_path);
        write_trace_csv(report, csv);
      }
      std::cerr << "success rate " << report.aggregate.success_rate << " (threshold " << spec.success_threshold
                << "), median iterations " << report.aggregate.median_iterations << ", median final error "
                << report.aggregate.median_final_error << '\n';
      return report.passed() ? kOk : kBelowThreshold;
    }

    if (*serve_cmd) {
      server::SessionOptions options;
      if (!service_config.empty()) options.service = load_service_config(service_config);
      if (!trace_dir.empty()) options.trace_dir = trace_dir;
      if (!head_address.empty()) {
        cluster::HeadClient probe(head_address);
        const std::string head = head_address;
        options.evaluator_factory = [head] { return std::make_unique<cluster::RemoteHeadEvaluator>(head); };
      }
      server::SessionRegistry registry(options);
      server::HttpServerOptions http_options;
      http_options.listen = listen;
      if (!static_dir.empty()) http_options.static_dir = static_dir;
      server::HttpServer server(registry, http_options);
      announce("serving on " + server.address().str(), port_file);
      while (!wait_for_signal(termination, std::chrono::milliseconds(1000))) {
      }
      server.shutdown();
      return kOk;
    }

    if (*head_cmd) {
      cluster::ClusterConfig config;
      config.head_address = listen;
      config.batch_size = batch_size;
      config.task_timeout = std::chrono::milliseconds(timeout_ms);
      cluster::Head head(config);
      announce("head listening on " + head.address().str(), port_file);
      while (!wait_for_signal(termination, std::chrono::milliseconds(1000))) {
      }
      head.shutdown();
      return kOk;
    }

    if (*worker_cmd) {
      cluster::WorkerOptions options;
      options.head_address = head_address;
      options.name = worker_name;
      options.give_up = std::chrono::milliseconds(give_up_ms);
      cluster::WorkerHandle worker(options);
      while (!wait_for_signal(termination, std::chrono::milliseconds(100))) {
        const std::string failure = worker.failure();
        if (!failure.empty()) {
          std::cerr << "worker: " << failure << '\n';
          return kRuntime;
        }
      }
      worker.stop();
      return kOk;
    }
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const expr::ParseError& e) {
    std::cerr << "error: objective: " << e.what() << '\n';
    return kUsage;
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kUsage;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kRuntime;
  }
  return kUsage;
}
