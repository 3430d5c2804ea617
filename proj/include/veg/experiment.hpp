#pragma once

// Experiment plumbing shared by the CLI and the acceptance suite: configuration,
// perturbed starts, per-seed training and evaluation, CSV and SVG artifacts, and
// the stacking cost-shaping variants.

#include "veg/rollout.hpp"
#include "veg/trace_io.hpp"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <vector>

namespace veg {

/// Demonstrations are recorded noise-free, so any fixed seed gives the same trace.
inline constexpr std::uint64_t kDemoSeed = 1;

namespace detail {

inline void reject_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw Error(ErrorCode::InvalidConfig, where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    bool ok = false;
    for (const char* a : allowed) ok = ok || key == a;
    if (!ok) throw Error(ErrorCode::InvalidConfig, "unknown config key '" + (where.empty() ? key : where + "." + key) + "'");
  }
}

inline void apply_optimizer_overrides(OptimizerConfig& o, const Json& j) {
  reject_keys(j,
              {"rollouts", "iterations", "kl_epsilon", "ridge_lambda", "action_cost_lambda", "pi2_temperature",
               "pi2_blend", "fit_window", "explore_std", "kl_decrease", "kl_increase", "entropy_weight",
               "dynamics_history"},
              "optimizer");
  try {
    o.rollouts = j.value("rollouts", o.rollouts);
    o.iterations = j.value("iterations", o.iterations);
    o.kl_epsilon = j.value("kl_epsilon", o.kl_epsilon);
    o.ridge_lambda = j.value("ridge_lambda", o.ridge_lambda);
    o.action_cost_lambda = j.value("action_cost_lambda", o.action_cost_lambda);
    o.pi2_temperature = j.value("pi2_temperature", o.pi2_temperature);
    o.pi2_blend = j.value("pi2_blend", o.pi2_blend);
    o.fit_window = j.value("fit_window", o.fit_window);
    o.explore_std = j.value("explore_std", o.explore_std);
    o.kl_decrease = j.value("kl_decrease", o.kl_decrease);
    o.kl_increase = j.value("kl_increase", o.kl_increase);
    o.entropy_weight = j.value("entropy_weight", o.entropy_weight);
    o.dynamics_history = j.value("dynamics_history", o.dynamics_history);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("optimizer: ") + e.what());
  }
}

}  // namespace detail

struct ExperimentConfig {
  std::string task = "push-straight";
  std::vector<std::uint64_t> seeds{0, 1, 2, 3, 4};
  double perturbation = 0.06;  // diameter of the start disk, meters
  std::optional<double> w_hand, w_object, w_point;
  DetectorConfig detector;
  Json optimizer = Json::object();  // overrides on top of the task's optimizer settings
  std::string out = "out";

  void validate() const {
    if (!(perturbation >= 0.0)) throw Error(ErrorCode::InvalidConfig, "perturbation must be >= 0");
    if (seeds.empty()) throw Error(ErrorCode::InvalidConfig, "seeds must not be empty");
    for (const auto* w : {&w_hand, &w_object, &w_point})
      if (*w && !(**w >= 0.0)) throw Error(ErrorCode::InvalidConfig, "weights must be >= 0");
    detector.validate();
    resolve_task();
    resolve_optimizer();
  }

  /// The builtin task with the configured weights applied.
  TaskSpec resolve_task() const {
    TaskSpec t = builtin_task(task);
    if (w_hand) t.cost.w_object_hand = *w_hand;
    if (w_object) t.cost.w_object_object = *w_object;
    if (w_point) t.cost.w_object_point = *w_point;
    return t;
  }

  OptimizerConfig resolve_optimizer() const {
    OptimizerConfig o = task_optimizer(builtin_task(task));
    detail::apply_optimizer_overrides(o, optimizer);
    o.validate();
    return o;
  }
};


inline Json optimizer_to_json(const OptimizerConfig& o) {
  return Json{{"rollouts", o.rollouts},
              {"iterations", o.iterations},
              {"kl_epsilon", o.kl_epsilon},
              {"ridge_lambda", o.ridge_lambda},
              {"action_cost_lambda", o.action_cost_lambda},
              {"pi2_temperature", o.pi2_temperature},
              {"pi2_blend", o.pi2_blend},
              {"fit_window", o.fit_window},
              {"explore_std", o.explore_std},
              {"kl_decrease", o.kl_decrease},
              {"kl_increase", o.kl_increase},
              {"entropy_weight", o.entropy_weight},
              {"dynamics_history", o.dynamics_history}};
}

inline ExperimentConfig experiment_from_json(const Json& j) {
  detail::reject_keys(j, {"task", "seeds", "perturbation", "weights", "detector", "optimizer", "out"}, "");
  ExperimentConfig c;
  try {
    c.task = j.value("task", c.task);
    c.seeds = j.value("seeds", c.seeds);
    c.perturbation = j.value("perturbation", c.perturbation);
    c.out = j.value("out", c.out);
    if (j.contains("weights")) {
      const auto& w = j["weights"];
      detail::reject_keys(w, {"hand", "object", "point"}, "weights");
      if (w.contains("hand")) c.w_hand = w["hand"].get<double>();
      if (w.contains("object")) c.w_object = w["object"].get<double>();
      if (w.contains("point")) c.w_point = w["point"].get<double>();
    }
    if (j.contains("detector")) {
      const auto& d = j["detector"];
      detail::reject_keys(d, {"sigma", "p_occlusion", "points_per_object", "points_seed"}, "detector");
      c.detector.sigma = d.value("sigma", c.detector.sigma);
      c.detector.p_occlusion = d.value("p_occlusion", c.detector.p_occlusion);
      c.detector.points_per_object = d.value("points_per_object", c.detector.points_per_object);
      c.detector.points_seed = d.value("points_seed", c.detector.points_seed);
    }
    if (j.contains("optimizer")) {
      c.optimizer = j["optimizer"];
      detail::reject_keys(c.optimizer, {"rollouts", "iterations", "kl_epsilon", "ridge_lambda", "action_cost_lambda",
                                        "pi2_temperature", "pi2_blend", "fit_window", "explore_std", "kl_decrease",
                                        "kl_increase", "entropy_weight", "dynamics_history"},
                          "optimizer");
    }
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline ExperimentConfig load_experiment(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open config '" + path.string() + "'");
  Json j;
  try {
    j = Json::parse(in);
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, "config '" + path.string() + "' is not valid JSON: " + e.what());
  }
  return experiment_from_json(j);
}

// ---- starts -----------------------------------------------------------------

/// Shifts the effector and every free object uniformly within a horizontal disk of
/// the given diameter, then lets held objects follow and separates any overlaps.
inline WorldState perturb_start(const WorldState& scene, double diameter, std::uint64_t seed,
                                const WorldParams& params = {}) {
  WorldState w = scene;
  if (diameter <= 0.0) return w;
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto disk = [&] {
    const double r = 0.5 * diameter * std::sqrt(u(rng)), a = 2.0 * M_PI * u(rng);
    return Vec3(r * std::cos(a), r * std::sin(a), 0.0);
  };
  w.effector.position += disk();
  for (auto& o : w.objects)
    if (!o.attached) o.position += disk();
  detail::place_held(w);
  detail::resolve_contacts(w, params);
  return w;
}

// ---- CSV --------------------------------------------------------------------

/// Reals in CSV files use the trace precision so reruns are byte-identical.
inline std::string csv_real(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return buf;
}

/// Columns t,raw_cost,normalized_cost. `scale` defaults to the curve's own maximum.
inline void write_cost_csv(std::ostream& out, const std::vector<double>& costs, std::optional<double> scale = {}) {
  double s = scale.value_or(0.0);
  if (!scale)
    for (double c : costs) s = std::max(s, std::abs(c));
  out << "t,raw_cost,normalized_cost\n";
  for (std::size_t t = 0; t < costs.size(); ++t)
    out << t << ',' << csv_real(costs[t]) << ',' << csv_real(s > 0.0 ? costs[t] / s : 0.0) << '\n';
}

inline void write_curve_csv(std::ostream& out, const std::vector<CurvePoint>& curve) {
  out << "iteration,mean_cost,kl_epsilon,success_rate\n";
  for (const auto& p : curve)
    out << p.iteration << ',' << csv_real(p.mean_cost) << ',' << csv_real(p.kl_epsilon) << ','
        << csv_real(p.success_rate) << '\n';
}

// ---- training and evaluation -------------------------------------------------

namespace seed_keys {
inline constexpr std::uint64_t start = 0x5354415254;  // perturbed start
inline constexpr std::uint64_t train = 0x545241494e;  // optimizer sampling
inline constexpr std::uint64_t eval = 0x4556414c;     // evaluation detector
}  // namespace seed_keys

struct SeedResult {
  std::uint64_t seed = 0;
  SuccessResult outcome;
  int best_iteration = 0;
  double eval_cost = 0.0;  // mean per-step cost of the evaluation rollout
  TrainResult train;
  ImitationRollout evaluation;
};

struct Experiment {
  ExperimentConfig config;
  TaskSpec task;
  OptimizerConfig optimizer;
  EntityTrace demo;

  explicit Experiment(ExperimentConfig cfg, std::optional<EntityTrace> demo_trace = {})
      : config(std::move(cfg)), task(config.resolve_task()), optimizer(config.resolve_optimizer()) {
    config.validate();
    demo = demo_trace ? std::move(*demo_trace) : generate_demo(task, kDemoSeed);
    if (static_cast<int>(demo.size()) != task.T)
      throw Error(ErrorCode::LengthMismatch, "demo has " + std::to_string(demo.size()) + " frames, task expects " +
                                                 std::to_string(task.T));
  }

  ImitationSetup setup() const { return ImitationSetup{task, demo, config.detector, {}, {}}; }

  WorldState start(std::uint64_t seed) const {
    return perturb_start(task.scene, config.perturbation, derive_seed(seed, seed_keys::start));
  }

  /// Executes the policy mean once from the seed's start.
  ImitationRollout evaluate(const LinearGaussianPolicy& policy, std::uint64_t seed) const {
    ImitationEnvironment env(setup(), start(seed));
    return env.run(policy, derive_seed(seed, seed_keys::eval), false);
  }

  SeedResult run_seed(std::uint64_t seed, const TrainObserver& observe = {}) const {
    ImitationEnvironment env(setup(), start(seed));
    SeedResult r;
    r.seed = seed;
    r.train = train(env, optimizer, derive_seed(seed, seed_keys::train), observe);
    r.best_iteration = r.train.best_iteration;
    r.evaluation = env.run(r.train.policy, derive_seed(seed, seed_keys::eval), false);
    r.outcome = success(task, r.evaluation.states.back());
    double sum = 0.0;
    for (double c : r.evaluation.traj.cost) sum += c;
    r.eval_cost = sum / static_cast<double>(r.evaluation.traj.cost.size());
    return r;
  }
};

inline void write_summary_header(std::ostream& out) {
  out << "seed,success,position_error,yaw_error,best_iteration,eval_cost\n";
}

inline void write_summary_row(std::ostream& out, const SeedResult& r) {
  out << r.seed << ',' << (r.outcome.ok ? 1 : 0) << ',' << csv_real(r.outcome.position_error) << ','
      << csv_real(r.outcome.yaw_error) << ',' << r.best_iteration << ',' << csv_real(r.eval_cost) << '\n';
}

/// Mean distance between the imitator effector path and the demonstrator hand path.
inline double hand_path_distance(const EntityTrace& demo, const std::vector<WorldState>& states) {
  if (states.size() != demo.size()) throw Error(ErrorCode::LengthMismatch, "path lengths differ");
  double sum = 0.0;
  for (std::size_t t = 0; t < states.size(); ++t) {
    const auto* h = demo[t].hand();
    if (h == nullptr) throw Error(ErrorCode::MissingHand, "demo frame has no hand");
    sum += (states[t].effector.position - h->position).norm();
  }
  return sum / static_cast<double>(states.size());
}

// ---- cost shaping --------------------------------------------------------------

struct ShapeVariant {
  std::string name;
  EntityTrace trace;
  std::vector<double> cost;
};

struct ShapeBundle {
  EntityTrace demo;
  std::vector<ShapeVariant> variants;  // correct, wrong-target, partially-wrong, cluttered, correct_end
  double scale = 0.0;                  // shared normalizer: the largest cost over all variants
  int success_time = 0;                // first frame from which the correct run stays successful

  const ShapeVariant& at(const std::string& name) const {
    for (const auto& v : variants)
      if (v.name == name) return v;
    throw Error(ErrorCode::InvalidConfig, "no shape variant '" + name + "'");
  }

  std::vector<double> normalized(const std::string& name) const {
    auto c = at(name).cost;
    for (auto& x : c) x = scale > 0.0 ? x / scale : 0.0;
    return c;
  }
};

/// Imitations of the stacking demo executed by the scripted expert in a shifted
/// workspace: the correct stack, a stack onto a distractor, a placement beside the
/// base, the correct run with far clutter, and the final frame held throughout.
inline DetectorConfig shape_detector_config() {
  DetectorConfig d;
  d.sigma = 0.001;  // 1 mm observation noise
  return d;
}

inline ShapeBundle shape_variants(std::uint64_t seed, const DetectorConfig& detector = shape_detector_config()) {
  const TaskSpec base = builtin_task("stack");
  ShapeBundle b;
  b.demo = generate_demo(base, kDemoSeed);

  TaskSpec shifted = base;
  const Vec3 offset(0.04, -0.03, 0.0);
  shifted.scene.effector.position += offset;
  for (auto& o : shifted.scene.objects) o.position += offset;
  DetectorConfig det = detector;
  det.seed = derive_seed(seed, 0x5348415045);

  auto run = [&](TaskSpec t) { return run_demo(t, det); };
  auto with_marker = [&](TaskSpec t, const char* id, Vec3 pos, double radius, double height) {
    t.scene.objects.push_back(detail::make_object(id, pos, radius, height));
    t.target = EntityId(id);
    return t;
  };

  const auto correct = run(shifted);
  b.variants.push_back({"correct", correct.trace, {}});

  const Vec3 ring = shifted.scene.at(base.target).position;
  b.variants.push_back({"wrong-target", run(with_marker(shifted, "block", ring + Vec3(-0.05, 0.28, 0.0), 0.04, 0.02)).trace, {}});
  b.variants.push_back({"partially-wrong", run(with_marker(shifted, "spot", ring + Vec3(-0.02, 0.09, 0.0), 0.04, 0.0)).trace, {}});

  TaskSpec cluttered = shifted;
  cluttered.scene.objects.push_back(detail::make_object("cube", Vec3(0.10, 0.30, 0.0), 0.025, 0.05));
  cluttered.scene.objects.push_back(detail::make_object("cylinder", Vec3(0.65, 0.25, 0.0), 0.03, 0.06));
  b.variants.push_back({"cluttered", run(cluttered).trace, {}});

  EntityTrace end = correct.trace;
  for (std::size_t t = 0; t < end.size(); ++t) {
    end.frames[t] = correct.trace.frames.back();
    end.frames[t].t = static_cast<int>(t);
  }
  b.variants.push_back({"correct_end", end, {}});

  const auto anchors = anchor_timeline(b.demo, base.cost);
  for (auto& v : b.variants) {
    v.trace.meta.actor = Actor::Imitator;
    v.cost = sequence_cost(b.demo, v.trace, base.cost, &anchors);
    for (double c : v.cost) b.scale = std::max(b.scale, std::abs(c));
  }

  b.success_time = static_cast<int>(correct.states.size());
  for (int t = static_cast<int>(correct.states.size()) - 1; t >= 0; --t) {
    if (!success(shifted, correct.states[static_cast<std::size_t>(t)]).ok) break;
    b.success_time = t;
  }
  return b;
}

// ---- SVG --------------------------------------------------------------------

struct SvgSeries {
  std::string label;
  std::vector<double> values;
};

/// Line plot of several series over t with values in [0, y_max].
inline void write_svg(std::ostream& out, const std::vector<SvgSeries>& series, const std::string& title,
                      double y_max = 1.0) {
  const double W = 640, H = 400, L = 60, R = 160, Tm = 40, B = 50;
  const double pw = W - L - R, ph = H - Tm - B;
  std::size_t n = 1;
  for (const auto& s : series) n = std::max(n, s.values.size());
  auto X = [&](std::size_t t) { return L + pw * (n > 1 ? static_cast<double>(t) / static_cast<double>(n - 1) : 0.0); };
  auto Y = [&](double v) { return Tm + ph * (1.0 - std::clamp(v / y_max, 0.0, 1.0)); };
  static const char* colors[] = {"#1b9e77", "#d95f02", "#7570b3", "#e7298a", "#66a61e", "#e6ab02"};
  out << "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"" << W << "\" height=\"" << H << "\" font-family=\"sans-serif\" font-size=\"12\">\n";
  out << "<rect width=\"100%\" height=\"100%\" fill=\"white\"/>\n";
  out << "<text x=\"" << L << "\" y=\"24\" font-size=\"15\">" << title << "</text>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << Tm + ph << "\" x2=\"" << L + pw << "\" y2=\"" << Tm + ph << "\" stroke=\"black\"/>\n";
  out << "<line x1=\"" << L << "\" y1=\"" << Tm << "\" x2=\"" << L << "\" y2=\"" << Tm + ph << "\" stroke=\"black\"/>\n";
  for (int i = 0; i <= 4; ++i) {
    const double v = y_max * i / 4.0;
    out << "<text x=\"" << L - 8 << "\" y=\"" << Y(v) + 4 << "\" text-anchor=\"end\">" << csv_real(v) << "</text>\n";
  }
  out << "<text x=\"" << L + pw / 2 << "\" y=\"" << H - 12 << "\" text-anchor=\"middle\">t</text>\n";
  out << "<text x=\"" << L << "\" y=\"" << Tm + ph + 18 << "\" text-anchor=\"middle\">0</text>\n";
  out << "<text x=\"" << L + pw << "\" y=\"" << Tm + ph + 18 << "\" text-anchor=\"middle\">" << n - 1 << "</text>\n";
  for (std::size_t s = 0; s < series.size(); ++s) {
    const char* color = colors[s % (sizeof colors / sizeof *colors)];
    out << "<polyline fill=\"none\" stroke-width=\"2\" stroke=\"" << color << "\" points=\"";
    for (std::size_t t = 0; t < series[s].values.size(); ++t)
      out << (t ? " " : "") << csv_real(X(t)) << ',' << csv_real(Y(series[s].values[t]));
    out << "\"/>\n";
    const double ly = Tm + 16.0 * static_cast<double>(s) + 8;
    out << "<line x1=\"" << L + pw + 12 << "\" y1=\"" << ly << "\" x2=\"" << L + pw + 32 << "\" y2=\"" << ly
        << "\" stroke=\"" << color << "\" stroke-width=\"2\"/>\n";
    out << "<text x=\"" << L + pw + 38 << "\" y=\"" << ly + 4 << "\">" << series[s].label << "</text>\n";
  }
  out << "</svg>\n";
}

// ---- files --------------------------------------------------------------------

inline void write_text_file(const std::filesystem::path& path, const std::function<void(std::ostream&)>& body) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot write '" + path.string() + "'");
  body(out);
  if (!out) throw Error(ErrorCode::IoError, "failed writing '" + path.string() + "'");
}

inline void write_policy_file(const LinearGaussianPolicy& policy, const std::filesystem::path& path) {
  write_text_file(path, [&](std::ostream& o) { o << policy.to_json().dump(1) << '\n'; });
}

inline LinearGaussianPolicy read_policy_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open policy '" + path.string() + "'");
  try {
    return LinearGaussianPolicy::from_json(Json::parse(in));
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::ParseError, "policy '" + path.string() + "': " + e.what());
  }
}

/// Writes the shaping bundle: one CSV and one trace per variant plus an overlay plot.
inline void write_shape_bundle(const ShapeBundle& b, const std::filesystem::path& dir) {
  std::filesystem::create_directories(dir);
  write_trace_file(b.demo, dir / "demo.jsonl");
  std::vector<SvgSeries> series;
  for (const auto& v : b.variants) {
    write_text_file(dir / (v.name + ".csv"), [&](std::ostream& o) { write_cost_csv(o, v.cost, b.scale); });
    write_trace_file(v.trace, dir / (v.name + ".jsonl"));
    series.push_back({v.name, b.normalized(v.name)});
  }
  write_text_file(dir / "shape.svg", [&](std::ostream& o) { write_svg(o, series, "stack: normalized cost"); });
}

}  // namespace veg
