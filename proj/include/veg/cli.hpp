#pragma once

// Command-line front end: demo | cost | train | eval | shape.
// Exit codes: 0 success, 1 runtime failure, 2 usage or configuration error.

#include "veg/experiment.hpp"

#include <CLI11.hpp>
#include <spdlog/sinks/stdout_color_sinks.h>
#include <spdlog/spdlog.h>

#include <cstdlib>
#include <future>
#include <iostream>
#include <string>
#include <vector>

namespace veg::cli {

namespace fs = std::filesystem;

inline constexpr int kOk = 0;
inline constexpr int kRuntimeError = 1;
inline constexpr int kUsageError = 2;

/// Configuration problems are usage errors; everything else is a runtime failure.
inline int exit_code(const Error& e) {
  switch (e.code()) {
    case ErrorCode::InvalidConfig:
      return kUsageError;
    default:
      return kRuntimeError;
  }
}

inline std::shared_ptr<spdlog::logger> logger() {
  static auto log = [] {
    auto l = spdlog::stderr_color_mt("veg");
    l->set_pattern("[%l] %v");
    const char* env = std::getenv("VEG_LOG");
    l->set_level(env != nullptr ? spdlog::level::from_str(env) : spdlog::level::info);
    return l;
  }();
  return log;
}

struct Options {
  std::string task;
  std::uint64_t seed = 0;
  bool seed_set = false;
  std::string config;
  std::string out;
  int iters = -1;
  int trials = 5;
  std::string demo;
  std::string imit;
  std::string policy;
};

/// The experiment config from --config with command-line overrides applied.
inline ExperimentConfig experiment(const Options& o) {
  ExperimentConfig c = o.config.empty() ? ExperimentConfig{} : load_experiment(o.config);
  if (!o.task.empty()) c.task = o.task;
  if (o.seed_set) c.seeds = {o.seed};
  if (o.iters >= 0) c.optimizer["iterations"] = o.iters;
  if (!o.out.empty()) c.out = o.out;
  c.validate();
  return c;
}

inline std::optional<EntityTrace> demo_file(const Options& o) {
  if (o.demo.empty()) return std::nullopt;
  return read_trace_file(o.demo);
}

inline int cmd_demo(const Options& o) {
  const TaskSpec task = builtin_task(o.task);
  const std::uint64_t seed = o.seed_set ? o.seed : kDemoSeed;
  const auto trace = generate_demo(task, seed);
  const fs::path out = o.out.empty() ? task.name + "_demo.jsonl" : o.out;
  if (out.has_parent_path()) fs::create_directories(out.parent_path());
  write_trace_file(trace, out);
  logger()->info("wrote {} frames of {} to {}", trace.size(), task.name, out.string());
  return kOk;
}

inline int cmd_cost(const Options& o) {
  if (o.demo.empty() || o.imit.empty()) throw Error(ErrorCode::InvalidConfig, "cost needs --demo and --imit");
  const auto demo = read_trace_file(o.demo);
  const auto imit = read_trace_file(o.imit);
  CostConfig cost;
  if (!o.config.empty())
    cost = experiment(o).resolve_task().cost;
  else if (!o.task.empty())
    cost = builtin_task(o.task).cost;
  else if (std::find(task_names().begin(), task_names().end(), demo.meta.task) != task_names().end())
    cost = builtin_task(demo.meta.task).cost;
  const auto costs = sequence_cost(demo, imit, cost);
  const std::string out = o.out.empty() ? "cost.csv" : o.out;
  write_text_file(out, [&](std::ostream& s) { write_cost_csv(s, costs); });
  logger()->info("wrote {} cost rows to {}", costs.size(), out);
  return kOk;
}

inline int cmd_train(const Options& o) {
  const Experiment exp(experiment(o), demo_file(o));
  const std::filesystem::path dir = exp.config.out;
  write_text_file(dir / "config.json", [&](std::ostream& s) {
    s << Json{{"task", exp.task.name}, {"seeds", exp.config.seeds}, {"perturbation", exp.config.perturbation},
              {"optimizer", optimizer_to_json(exp.optimizer)}}
             .dump(1)
      << '\n';
  });

  // Seeds share nothing mutable and write to distinct directories.
  std::vector<std::future<SeedResult>> jobs;
  for (auto seed : exp.config.seeds)
    jobs.push_back(std::async(std::launch::async, [&exp, seed] {
      auto r = exp.run_seed(seed, [seed](const CurvePoint& p, const std::vector<Sample>&) {
        logger()->debug("seed {} iteration {} cost {:.6g} kl {:.3g} success {:.2f}", seed, p.iteration, p.mean_cost,
                        p.kl_epsilon, p.success_rate);
      });
      const auto sub = std::filesystem::path(exp.config.out) / ("seed_" + std::to_string(seed));
      write_policy_file(r.train.policy, sub / "policy.json");
      write_text_file(sub / "curve.csv", [&](std::ostream& s) { write_curve_csv(s, r.train.curve); });
      write_trace_file(r.evaluation.trace, sub / "eval.jsonl");
      return r;
    }));

  int successes = 0;
  std::vector<SeedResult> results;
  for (auto& j : jobs) results.push_back(j.get());
  write_text_file(dir / "summary.csv", [&](std::ostream& s) {
    write_summary_header(s);
    for (const auto& r : results) write_summary_row(s, r);
  });
  for (const auto& r : results) {
    successes += r.outcome.ok ? 1 : 0;
    logger()->info("seed {}: {} (position error {:.4f} m, yaw error {:.3f} rad, best iteration {})", r.seed,
                   r.outcome.ok ? "success" : "failure", r.outcome.position_error, r.outcome.yaw_error,
                   r.best_iteration);
  }
  logger()->info("{}: {}/{} seeds succeeded; results in {}", exp.task.name, successes, results.size(), dir.string());
  return kOk;
}

inline int cmd_eval(const Options& o) {
  if (o.policy.empty()) throw Error(ErrorCode::InvalidConfig, "eval needs --policy");
  if (o.trials < 1) throw Error(ErrorCode::InvalidConfig, "--trials must be >= 1");
  Options without_seed = o;
  without_seed.seed_set = false;
  const Experiment exp(experiment(without_seed), demo_file(o));
  const auto policy = read_policy_file(o.policy);
  const std::filesystem::path dir = exp.config.out;
  int successes = 0;
  write_text_file(dir / "eval.csv", [&](std::ostream& s) {
    s << "trial,success,position_error,yaw_error,mean_cost\n";
    for (int i = 0; i < o.trials; ++i) {
      const auto r = exp.evaluate(policy, derive_seed(o.seed, static_cast<std::uint64_t>(i)));
      const auto ok = success(exp.task, r.states.back());
      double mean = 0.0;
      for (double c : r.traj.cost) mean += c;
      mean /= static_cast<double>(r.traj.cost.size());
      successes += ok.ok ? 1 : 0;
      s << i << ',' << (ok.ok ? 1 : 0) << ',' << csv_real(ok.position_error) << ',' << csv_real(ok.yaw_error) << ','
        << csv_real(mean) << '\n';
      write_trace_file(r.trace, dir / ("trial_" + std::to_string(i) + ".jsonl"));
    }
  });
  logger()->info("{}: {}/{} trials succeeded; results in {}", exp.task.name, successes, o.trials, dir.string());
  return kOk;
}

inline int cmd_shape(const Options& o) {
  const std::string task = o.task.empty() ? "stack" : o.task;
  if (task != "stack") throw Error(ErrorCode::InvalidConfig, "shape supports only --task stack");
  const auto bundle = shape_variants(o.seed);
  const std::string out = o.out.empty() ? "shape" : o.out;
  write_shape_bundle(bundle, out);
  for (const auto& v : bundle.variants) {
    const auto n = bundle.normalized(v.name);
    logger()->info("{}: max {:.3f} final {:.3f}", v.name, *std::max_element(n.begin(), n.end()), n.back());
  }
  logger()->info("wrote shaping bundle to {}", out);
  return kOk;
}

inline int run(int argc, char** argv) {
  CLI::App app{"Visual entity graph imitation: demos, costs, training, evaluation and cost shaping"};
  app.require_subcommand(1);
  Options o;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("--task", o.task, "Task name");
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t s) { o.seed = s; o.seed_set = true; }, "Seed");
    sub->add_option("--config", o.config, "Experiment config JSON");
    sub->add_option("--out", o.out, "Output file or directory");
    sub->add_option("--demo", o.demo, "Demonstration trace (JSONL)");
  };
  auto* demo = app.add_subcommand("demo", "Record a scripted demonstration");
  add_common(demo);
  demo->get_option("--task")->required();
  auto* cost = app.add_subcommand("cost", "Per-timestep cost of an imitation trace against a demo");
  add_common(cost);
  cost->add_option("--imit", o.imit, "Imitation trace (JSONL)");
  auto* train_cmd = app.add_subcommand("train", "Train policies over the configured seeds");
  add_common(train_cmd);
  train_cmd->add_option("--iters", o.iters, "Override the optimizer iteration count");
  auto* eval = app.add_subcommand("eval", "Evaluate a policy from perturbed starts");
  add_common(eval);
  eval->add_option("--policy", o.policy, "Policy JSON");
  eval->add_option("--trials", o.trials, "Number of perturbed starts");
  auto* shape = app.add_subcommand("shape", "Cost curves for correct and incorrect stacking imitations");
  add_common(shape);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kUsageError;
  }

  try {
    if (*demo) return cmd_demo(o);
    if (*cost) return cmd_cost(o);
    if (*train_cmd) return cmd_train(o);
    if (*eval) return cmd_eval(o);
    return cmd_shape(o);
  } catch (const Error& e) {
    logger()->error("{}", e.what());
    return exit_code(e);
  } catch (const std::exception& e) {
    logger()->error("{}", e.what());
    return kRuntimeError;
  }
}

}  // namespace veg::cli
