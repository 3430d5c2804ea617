// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include "veg/cli.hpp"
#include "veg/experiment.hpp"

#include "test_support.hpp"

#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <functional>
#include <iterator>
#include <limits>
#include <set>
#include <sstream>
#include <string>
#include <vector>

using namespace veg;
using namespace veg::testing;
namespace fs = std::filesystem;

namespace {

struct Outcome {
  bool pass = true;
  std::string detail;
};

/// Collects the first few failure messages of a criterion.
class Check {
 public:
  void expect(bool ok, const std::string& what) {
    if (ok) return;
    ++failures_;
    if (failures_ <= 3) messages_ += (messages_.empty() ? "" : "; ") + what;
  }
  Outcome done(const std::string& summary) const {
    if (failures_ == 0) return {true, summary};
    return {false, summary + "; " + std::to_string(failures_) + " violations: " + messages_};
  }

 private:
  int failures_ = 0;
  std::string messages_;
};

std::string fmt_num(double v, const char* f = "%.4g") {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

double elapsed(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

CostConfig all_edges() {
  CostConfig c;
  c.w_object_hand = 1.3;
  c.w_object_object = 0.7;
  c.w_object_point = 1.1;
  return c;
}

double frame_cost(const TraceFrame& d, const TraceFrame& i, const CostConfig& cfg) {
  return sequence_cost(trace_of({d}), trace_of({i}, Actor::Imitator), cfg).front();
}

// ---- 1 ----------------------------------------------------------------------
// Graphs are rooted at a fixed anchor so that swapping the roles of the two frames
// swaps only the residual sign; clutter is excluded through the correspondence set.
Outcome cost_properties() {
  const auto t0 = std::chrono::steady_clock::now();
  std::mt19937_64 rng(1001);
  std::uniform_real_distribution<double> alpha(0.05, 5.0);
  const CostConfig cfg = all_edges();
  const EntityId anchor("o0");
  Check c;
  for (int trial = 0; trial < 1000; ++trial) {
    const auto d = random_frame(rng, 1 + trial % 5, trial % 3 != 0, trial % 4);
    const auto i = reposition(d, rng);
    std::set<EntityId> keep;
    for (const auto& e : d.entities) keep.insert(e.id);
    const auto cost_of = [&](const TraceFrame& a, const TraceFrame& b) {
      return graph_cost(build_graph(a, anchor, cfg, &keep), build_graph(b, anchor, cfg, &keep));
    };
    const double cost = cost_of(d, i);
    c.expect(cost_of(d, d) == 0.0, "identity not zero");
    c.expect(cost >= 0.0, "negative cost");
    c.expect(std::abs(cost_of(i, d) - cost) <= 1e-12 * std::max(1.0, cost), "asymmetric");

    auto moved = i;
    const Vec3 off = random_vec(rng, 2.0);
    for (auto& e : moved.entities) e.position += off;
    c.expect(std::abs(cost_of(d, moved) - cost) < 1e-9, "translation changed cost");

    const double a = alpha(rng);
    auto sd = d, si = i;
    for (auto& e : sd.entities) e.position *= a;
    for (auto& e : si.entities) e.position *= a;
    c.expect(std::abs(cost_of(sd, si) - a * cost) < 1e-9 * std::max(1e-300, a * cost), "not positively homogeneous");

    auto cluttered = i;
    const int extra = 1 + trial % 3;
    for (int k = 0; k < extra; ++k) {
      const EntityId id("clutter" + std::to_string(k));
      cluttered.entities.push_back(TraceEntity{id, EntityKind::Object, random_vec(rng, 0.3), {}, {}, false});
      cluttered.entities.push_back(TraceEntity{point_id(id, 0), EntityKind::Point, random_vec(rng, 0.3), id, {}, false});
    }
    c.expect(cost_of(d, cluttered) == cost, "clutter changed cost");
    c.expect(frame_cost(d, cluttered, cfg) == frame_cost(d, i, cfg), "clutter changed the sequence cost");
  }
  const double secs = elapsed(t0);
  c.expect(secs < 10.0, "runtime " + fmt_num(secs) + " s");
  return c.done("1000 random graphs in " + fmt_num(secs, "%.2f") + " s");
}

// ---- 2 ----------------------------------------------------------------------
Outcome hand_computed_costs() {
  auto obj = [](const char* id, Vec3 p) { return TraceEntity{EntityId(id), EntityKind::Object, p, {}, {}, false}; };
  TraceFrame d1, i1;
  d1.entities = {obj("A", Vec3(0, 0, 0)), obj("B", Vec3(1, 0, 0))};
  i1.entities = {obj("A", Vec3(5, 5, 5)), obj("B", Vec3(5, 2, 5))};
  const double c1 = graph_cost(build_graph(d1, "A", CostConfig{}), build_graph(i1, "A", CostConfig{}));

  CostConfig dc;
  dc.w_object_hand = 50.0;
  dc.w_object_object = 1.0;
  TraceFrame d2, i2;
  const auto hand = [](Vec3 p) { return TraceEntity{kHandId, EntityKind::Hand, p, {}, 0.08, false}; };
  d2.entities = {obj("A", Vec3(0, 0, 0)), obj("B", Vec3(1, 0, 0)), hand(Vec3(0, 1, 0))};
  i2.entities = {obj("A", Vec3(0, 0, 0)), obj("B", Vec3(1, 2, 0)), hand(Vec3(0, 1, 1))};
  const double c2 = graph_cost(build_graph(d2, "A", dc), build_graph(i2, "A", dc));

  Check c;
  c.expect(std::abs(c1 - std::sqrt(10.0)) <= 1e-12, "single edge " + fmt_num(c1, "%.15g"));
  c.expect(std::abs(c2 - 52.0) <= 1e-12, "two edges " + fmt_num(c2, "%.15g"));
  return c.done("sqrt(10) case " + fmt_num(c1, "%.12f") + ", weight-52 case " + fmt_num(c2, "%.12f"));
}

// ---- 3 ----------------------------------------------------------------------
Outcome rotation_encoding() {
  std::mt19937_64 rng(1003);
  std::uniform_real_distribution<double> yaw(-M_PI, M_PI), delta(0.02, 2 * M_PI - 0.02), pos(-0.3, 0.3);
  CostConfig cfg;
  cfg.w_object_hand = 0.0;
  cfg.w_object_object = 0.0;
  cfg.w_object_point = 1.0;
  DetectorConfig det;
  det.sigma = 0.0;
  Check c;
  double min_diff = std::numeric_limits<double>::infinity(), max_same = 0.0;
  for (int trial = 0; trial < 1000; ++trial) {
    det.points_per_object = 1 + trial % 8;
    det.points_seed = static_cast<std::uint64_t>(trial);
    WorldState wd;
    ObjectState o;
    o.id = "obj";
    o.radius = 0.04;
    o.height = 0.05;
    o.position = Vec3(pos(rng), pos(rng), 0.0);
    o.yaw = yaw(rng);
    ObjectState other = o;
    other.id = "other";
    other.position = Vec3(pos(rng), pos(rng), 0.0);
    wd.objects = {o, other};
    WorldState wi = wd;
    for (auto& ob : wi.objects) ob.position += Vec3(pos(rng), pos(rng), 0.0);
    const bool same = trial % 2 == 0;
    if (!same)
      for (auto& ob : wi.objects) ob.yaw += delta(rng);
    const double cost = frame_cost(Detector(det).detect(wd), Detector(det).detect(wi), cfg);
    if (same) {
      max_same = std::max(max_same, cost);
      c.expect(cost < 1e-12, "equal yaw gave " + fmt_num(cost));
    } else {
      min_diff = std::min(min_diff, cost);
      c.expect(cost > 1e-9, "different yaw gave " + fmt_num(cost));
    }
  }
  return c.done("1000 rigid configurations; max equal-yaw cost " + fmt_num(max_same) + ", min differing-yaw cost " +
                fmt_num(min_diff));
}

// ---- 4 ----------------------------------------------------------------------
Outcome lqr_oracle() {
  std::mt19937_64 rng(1004);
  Check c;
  double worst = 0.0;
  for (int problem = 0; problem < 20; ++problem) {
    const int T = 3 + problem % 6, n = 1 + problem % 4, m = 1 + problem % 3;
    const auto dyn = random_dynamics(rng, T, n, m);
    const auto cost = random_quadratic_cost(rng, T, n, m);
    const auto res = lqr_backward(dyn, cost, random_policy(rng, T, n, m), std::numeric_limits<double>::infinity());
    const auto oracle = riccati_oracle(dyn, cost);
    for (int t = 0; t < T; ++t) {
      const auto ut = static_cast<std::size_t>(t);
      worst = std::max({worst, (res.policy[t].K - oracle.K[ut]).cwiseAbs().maxCoeff(),
                        (res.policy[t].k - oracle.k[ut]).cwiseAbs().maxCoeff()});
    }
  }
  c.expect(worst <= 1e-6, "gain error " + fmt_num(worst));

  double fit_err = 0.0;
  for (int trial = 0; trial < 5; ++trial) {
    const auto sys = random_stable_system(rng, 5, 4);
    const auto model = fit_dynamics(simulate(sys, rng, 200, 10, 0.0));
    for (const auto& s : model.steps)
      fit_err = std::max({fit_err, (s.A - sys.A).cwiseAbs().maxCoeff(), (s.B - sys.B).cwiseAbs().maxCoeff(),
                          (s.c - sys.c).cwiseAbs().maxCoeff()});
  }
  c.expect(fit_err <= 1e-8, "dynamics fit error " + fmt_num(fit_err));
  return c.done("20 LQ problems, max gain/offset error " + fmt_num(worst) + "; noiseless fit error " + fmt_num(fit_err));
}

// ---- 5 ----------------------------------------------------------------------
Outcome quadratization_gradients() {
  Check c;
  double worst = 0.0;
  int checked = 0;
  for (const char* name : {"push-straight", "push-direction-change", "stack", "pour"}) {
    CostFixture f(name);
    const auto model = build_cost_model(f.demo, f.anchors, f.spec, f.task.cost, f.nominal, 4, 1e-3);
    std::mt19937_64 rng(stable_hash(name) ^ 1005);
    std::uniform_int_distribution<int> pick_t(0, static_cast<int>(f.demo.size()) - 1);
    for (int trial = 0; trial < 100; ++trial) {
      const int t = pick_t(rng);
      const VecX x = random_vecx(rng, f.spec.state_dim(), 0.1), u = random_vecx(rng, 4);
      const auto q = quadratize_cost(model, std::vector<VecX>(f.demo.size(), x), std::vector<VecX>(f.demo.size(), u));
      VecX z(x.size() + 4);
      z << x, u;
      const auto& s = q.steps[static_cast<std::size_t>(t)];
      VecX fd(z.size());
      fd << numeric_gradient(model, t, x, u), 2e-3 * u;
      const double rel = (s.C * z + s.c - fd).norm() / std::max(1e-3, fd.norm());
      worst = std::max(worst, rel);
      ++checked;
      c.expect(rel < 1e-4, std::string(name) + " t=" + std::to_string(t) + " rel " + fmt_num(rel));
    }
  }
  return c.done(std::to_string(checked) + " random nominals, max relative error " + fmt_num(worst));
}

// ---- 6 ----------------------------------------------------------------------
Outcome cost_shaping() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto b = shape_variants(0);
  Check c;
  const auto correct = b.normalized("correct");
  const double correct_max = *std::max_element(correct.begin(), correct.end());
  c.expect(correct_max <= 0.05, "correct peaks at " + fmt_num(correct_max));
  const double wrong_final = b.normalized("wrong-target").back();
  c.expect(wrong_final >= 0.5, "wrong-target ends at " + fmt_num(wrong_final));

  std::ostringstream a, d;
  write_cost_csv(a, b.at("correct").cost, b.scale);
  write_cost_csv(d, b.at("cluttered").cost, b.scale);
  c.expect(a.str() == d.str(), "cluttered CSV differs from correct");

  const auto end = b.normalized("correct_end");
  const auto ts = static_cast<std::size_t>(b.success_time);
  c.expect(ts < end.size(), "correct run never succeeds");
  for (std::size_t t = ts; t + 1 < end.size(); ++t)
    c.expect(end[t + 1] <= end[t], "correct_end rises at t=" + std::to_string(t + 1));
  const double secs = elapsed(t0);
  c.expect(secs < 60.0, "runtime " + fmt_num(secs) + " s");
  return c.done("correct max " + fmt_num(correct_max, "%.3f") + ", wrong-target final " + fmt_num(wrong_final, "%.3f") +
                ", partially-wrong final " + fmt_num(b.normalized("partially-wrong").back(), "%.3f") +
                ", success at t=" + std::to_string(b.success_time) + ", " + fmt_num(secs, "%.2f") + " s");
}

// ---- training helpers ----------------------------------------------------------
std::vector<SeedResult> run_seeds(const ExperimentConfig& cfg) {
  const Experiment exp(cfg);
  std::vector<SeedResult> out;
  for (auto s : cfg.seeds) out.push_back(exp.run_seed(s));
  return out;
}

ExperimentConfig config_for(const std::string& task, int seeds) {
  ExperimentConfig c;
  c.task = task;
  c.seeds.clear();
  for (int s = 0; s < seeds; ++s) c.seeds.push_back(static_cast<std::uint64_t>(s));
  return c;
}

std::string pattern(const std::vector<SeedResult>& rs) {
  std::string s;
  for (const auto& r : rs) s += r.outcome.ok ? '1' : '0';
  return s;
}

int successes(const std::vector<SeedResult>& rs) {
  int n = 0;
  for (const auto& r : rs) n += r.outcome.ok ? 1 : 0;
  return n;
}

// ---- 7 ----------------------------------------------------------------------
Outcome push_straight() {
  const auto t0 = std::chrono::steady_clock::now();
  const auto cfg = config_for("push-straight", 5);
  const auto opt = cfg.resolve_optimizer();
  Check c;
  c.expect(opt.iterations <= 10 && opt.rollouts == 8, "budget is " + std::to_string(opt.iterations) + " x " +
                                                          std::to_string(opt.rollouts));
  const auto rs = run_seeds(cfg);
  const int ok = successes(rs);
  const double secs = elapsed(t0);
  c.expect(ok >= 4, std::to_string(ok) + "/5 succeeded");
  c.expect(secs < 300.0, "runtime " + fmt_num(secs) + " s");
  std::string errs;
  for (const auto& r : rs) errs += (errs.empty() ? "" : " ") + fmt_num(100 * r.outcome.position_error, "%.2f");
  return c.done(std::to_string(ok) + "/5 seeds within 1 cm [" + pattern(rs) + "], errors (cm) " + errs + ", " +
                std::to_string(opt.iterations) + " iterations x " + std::to_string(opt.rollouts) + " rollouts, " +
                fmt_num(secs, "%.1f") + " s");
}

// ---- 8 ----------------------------------------------------------------------
Outcome direction_change_weighting() {
  auto mean_distance = [](double w_hand, std::string& per_seed) {
    auto cfg = config_for("push-direction-change", 3);
    cfg.w_hand = w_hand;
    const Experiment exp(cfg);
    double sum = 0.0;
    for (auto s : cfg.seeds) {
      const auto r = exp.run_seed(s);
      const double d = hand_path_distance(exp.demo, r.evaluation.states);
      per_seed += (per_seed.empty() ? "" : " ") + fmt_num(d, "%.4f");
      sum += d;
    }
    return sum / static_cast<double>(cfg.seeds.size());
  };
  std::string s50, s1;
  const double d50 = mean_distance(50.0, s50), d1 = mean_distance(1.0, s1);
  Check c;
  c.expect(d50 < d1, "w_hand=50 is not closer than w_hand=1");
  return c.done("mean hand-path distance w_hand=50: " + fmt_num(d50, "%.4f") + " m [" + s50 + "], w_hand=1: " +
                fmt_num(d1, "%.4f") + " m [" + s1 + "]");
}

// ---- 9 ----------------------------------------------------------------------
Outcome pour_point_ablation() {
  auto with = config_for("pour", 5);
  with.w_point = 1.0;
  auto without = config_for("pour", 5);
  without.w_point = 0.0;
  const auto a = run_seeds(with), b = run_seeds(without);
  int good = 0, bad = 0;
  std::string ya, yb;
  for (const auto& r : a) {
    good += r.outcome.yaw_error <= 0.15 ? 1 : 0;
    ya += (ya.empty() ? "" : " ") + fmt_num(r.outcome.yaw_error, "%.3f");
  }
  for (const auto& r : b) {
    bad += r.outcome.yaw_error > 0.5 ? 1 : 0;
    yb += (yb.empty() ? "" : " ") + fmt_num(r.outcome.yaw_error, "%.3f");
  }
  Check c;
  c.expect(good >= 4, "only " + std::to_string(good) + "/5 within 0.15 rad with points");
  c.expect(bad >= 4, "only " + std::to_string(bad) + "/5 beyond 0.5 rad without points");
  return c.done("w_point=1: " + std::to_string(good) + "/5 within 0.15 rad [" + ya + "]; w_point=0: " +
                std::to_string(bad) + "/5 beyond 0.5 rad [" + yb + "]");
}

// ---- 10 ---------------------------------------------------------------------
Outcome stacking() {
  const auto cfg = config_for("stack", 5);
  const auto opt = cfg.resolve_optimizer();
  const Experiment exp(cfg);
  const auto demo_events = clone_gripper(exp.demo);
  Check c;
  c.expect(opt.iterations <= 10, "budget is " + std::to_string(opt.iterations) + " iterations");
  std::vector<SeedResult> rs;
  for (auto s : cfg.seeds) {
    rs.push_back(exp.run_seed(s));
    c.expect(clone_gripper(rs.back().evaluation.trace) == demo_events,
             "seed " + std::to_string(s) + " gripper events differ from the demo");
  }
  int changes = 0;
  for (std::size_t t = 1; t < demo_events.size(); ++t) changes += demo_events[t] != demo_events[t - 1] ? 1 : 0;
  const int ok = successes(rs);
  c.expect(ok >= 3, std::to_string(ok) + "/5 stacked");
  return c.done(std::to_string(ok) + "/5 stacked [" + pattern(rs) + "]; " + std::to_string(changes) +
                " grasp/release events match the demo in every seed");
}

// ---- 11 ---------------------------------------------------------------------
Outcome featurizer_dimension() {
  std::mt19937_64 rng(1011);
  std::uniform_int_distribution<int> objects(1, 7), joints(1, 7), anchors(1, 4), points(0, 4);
  Check c;
  for (int trial = 0; trial < 1000; ++trial) {
    const int N = objects(rng), nj = joints(rng), na = std::min(anchors(rng), N);
    const TraceFrame d = random_frame(rng, N, true, points(rng));
    const auto spec = FeatureSpec::from_frame(d, nj, na);
    std::vector<EntityId> chosen(spec.objects.begin(), spec.objects.begin() + na);
    Proprioception p;
    p.position = random_vec(rng);
    p.joints = VecX::Zero(nj);
    const VecX x = featurize(reposition(d, rng), d, chosen, spec, p);
    const long expected = 3 + nj + static_cast<long>(na) * (N - 1) * 3 + na * spec.dim_phi;
    c.expect(x.size() == expected, "N=" + std::to_string(N) + " joints=" + std::to_string(nj) + " anchors=" +
                                       std::to_string(na) + " gave " + std::to_string(x.size()));
  }
  return c.done("1000 random layouts");
}

// ---- 12 ---------------------------------------------------------------------
int cli(std::vector<std::string> args) {
  args.insert(args.begin(), "veg_cli");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::map<std::string, std::string> read_tree(const fs::path& root) {
  std::map<std::string, std::string> files;
  for (const auto& e : fs::recursive_directory_iterator(root)) {
    if (!e.is_regular_file()) continue;
    std::ifstream in(e.path(), std::ios::binary);
    files[fs::relative(e.path(), root).string()] =
        std::string(std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>());
  }
  return files;
}

Outcome determinism() {
  const fs::path base = fs::temp_directory_path() / "veg_acceptance_determinism";
  fs::remove_all(base);
  Check c;
  for (const char* run : {"a", "b"}) {
    const fs::path d = base / run;
    fs::create_directories(d);
    const auto p = [&](const char* name) { return (d / name).string(); };
    c.expect(cli({"demo", "--task", "stack", "--seed", "3", "--out", p("demo.jsonl")}) == 0, "demo failed");
    c.expect(cli({"shape", "--task", "stack", "--seed", "3", "--out", p("shape")}) == 0, "shape failed");
    c.expect(cli({"cost", "--demo", p("demo.jsonl"), "--imit", p("shape/correct.jsonl"), "--out", p("cost.csv")}) == 0,
             "cost failed");
    c.expect(cli({"train", "--task", "push-straight", "--seed", "2", "--iters", "3", "--out", p("train")}) == 0,
             "train failed");
    c.expect(cli({"eval", "--task", "push-straight", "--policy", p("train/seed_2/policy.json"), "--trials", "2",
                  "--seed", "4", "--out", p("eval")}) == 0,
             "eval failed");
  }
  const auto a = read_tree(base / "a"), b = read_tree(base / "b");
  c.expect(a.size() == b.size() && a.size() > 10, "runs produced " + std::to_string(a.size()) + " and " +
                                                      std::to_string(b.size()) + " files");
  for (const auto& [name, bytes] : a) {
    const auto it = b.find(name);
    c.expect(it != b.end() && it->second == bytes, name + " differs between runs");
  }
  fs::remove_all(base);
  return c.done(std::to_string(a.size()) + " trace/CSV/JSON/SVG files byte-identical across reruns of demo, shape, cost, "
                "train and eval");
}

}  // namespace

int main() {
  spdlog::set_level(spdlog::level::warn);
  cli::logger()->set_level(spdlog::level::warn);
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria{
      {"cost-function property suite", cost_properties},
      {"hand-computed graph costs", hand_computed_costs},
      {"rotation encoding through points", rotation_encoding},
      {"LQR oracle and dynamics fit", lqr_oracle},
      {"quadratization gradients", quadratization_gradients},
      {"cost shaping", cost_shaping},
      {"simulated push-straight", push_straight},
      {"direction-change weighting", direction_change_weighting},
      {"pouring point-edge ablation", pour_point_ablation},
      {"stacking with gripper cloning", stacking},
      {"featurizer dimension", featurizer_dimension},
      {"determinism", determinism},
  };
  int failed = 0;
  for (std::size_t i = 0; i < criteria.size(); ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    Outcome o;
    try {
      o = criteria[i].second();
    } catch (const std::exception& e) {
      o = {false, std::string("exception: ") + e.what()};
    }
    failed += o.pass ? 0 : 1;
    std::printf("%s %2zu %s: %s (%.1f s)\n", o.pass ? "PASS" : "FAIL", i + 1, criteria[i].first, o.detail.c_str(),
                elapsed(t0));
    std::fflush(stdout);
  }
  std::printf("%zu/%zu criteria passed\n", criteria.size() - static_cast<std::size_t>(failed), criteria.size());
  return failed == 0 ? 0 : 1;
}
