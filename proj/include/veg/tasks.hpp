#pragma once

// Task catalog, scripted demonstrators, gripper cloning and task success.

#include "veg/detector.hpp"
#include "veg/error.hpp"
#include "veg/graph.hpp"
#include "veg/trace.hpp"
#include "veg/trace_io.hpp"
#include "veg/world.hpp"

#include <cmath>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <string>
#include <vector>

namespace veg {

struct TaskSpec {
  std::string name;
  WorldState scene;
  int T = 30;
  double dt = 0.4;
  double tolerance = 0.01;      // meters
  double yaw_tolerance = 0.15;  // radians, pour only
  double pour_yaw = M_PI / 2.0;
  ControllerGains gains;
  CostConfig cost;
  int rollouts = 8;
  EntityId manipulated{"octagon"};
  EntityId target{"ring"};

  bool is_push() const { return name.rfind("push", 0) == 0; }
  bool is_stack() const { return name == "stack" || name == "simple-stack"; }
  bool is_pour() const { return name == "pour"; }

  void validate() const {
    if (T < 2) throw Error(ErrorCode::InvalidConfig, "task T must be >= 2");
    if (!(tolerance > 0.0)) throw Error(ErrorCode::InvalidConfig, "task tolerance must be > 0");
    if (scene.find(manipulated) == nullptr || scene.find(target) == nullptr)
      throw Error(ErrorCode::InvalidConfig, "task scene lacks its manipulated or target object");
    cost.validate();
  }
};

struct GripperCloneConfig {
  double theta = 0.03;
};

inline const std::vector<std::string>& task_names() {
  static const std::vector<std::string> names{"push-straight", "push-straight-grasped", "push-direction-change",
                                              "stack",         "simple-stack",          "pour"};
  return names;
}

namespace detail {

inline ObjectState make_object(const char* id, Vec3 pos, double radius, double height) {
  ObjectState o;
  o.id = EntityId(id);
  o.position = pos;
  o.radius = radius;
  o.height = height;
  return o;
}

inline void attach(WorldState& w, const EntityId& id) {
  auto* o = w.find(id);
  o->attached = true;
  o->attach_offset = rotate_z(o->position - w.effector.position, -w.effector.yaw);
  o->attach_yaw = o->yaw - w.effector.yaw;
}

}  // namespace detail

/// Built-in task definitions (also shipped as JSON under scenes/).
inline TaskSpec builtin_task(const std::string& name) {
  using detail::make_object;
  TaskSpec t;
  t.name = name;
  auto& s = t.scene;
  if (name == "push-straight" || name == "push-direction-change" || name == "push-straight-grasped") {
    t.gains = {0.001, 0.02};
    t.cost.w_object_point = 0.0;
    t.cost.w_object_hand = name == "push-direction-change" ? 50.0 : 1.0;
    s.effector.position = Vec3(0.20, 0.0, 0.02);
    s.objects.push_back(make_object("octagon", Vec3(0.30, 0.0, 0.0), 0.03, 0.04));
    if (name == "push-direction-change") {
      s.effector.position = Vec3(0.22, 0.0, 0.02);
      s.objects.push_back(make_object("ring", Vec3(0.42, 0.12, 0.0), 0.04, 0.0));
    } else {
      s.objects.push_back(make_object("ring", Vec3(0.50, 0.0, 0.0), 0.04, 0.0));
    }
    if (name == "push-straight-grasped") s.effector.position = Vec3(0.20, 0.0, 0.10);
  } else if (name == "stack" || name == "simple-stack") {
    t.gains = {0.001, 0.0};
    s.effector.position = Vec3(0.25, 0.0, 0.12);
    s.objects.push_back(make_object("octagon", Vec3(0.35, 0.05, 0.0), 0.03, 0.04));
    s.objects.push_back(make_object("ring", Vec3(0.45, -0.10, 0.0), 0.04, 0.02));
    if (name == "simple-stack") {
      s.effector.position = Vec3(0.35, 0.05, 0.10);
      s.effector.gripper_gap = 0.01;
      s.objects[0].position.z() = 0.08;
      detail::attach(s, "octagon");
    }
  } else if (name == "pour") {
    t.T = 20;
    t.gains = {0.00125, 0.02};
    t.rollouts = 10;
    t.tolerance = 0.02;
    t.cost.w_object_point = 1.0;
    t.manipulated = EntityId("can");
    t.target = EntityId("mug");
    s.effector.position = Vec3(0.30, 0.0, 0.17);
    s.effector.gripper_gap = 0.01;
    s.objects.push_back(make_object("can", Vec3(0.30, 0.0, 0.12), 0.035, 0.10));
    s.objects.push_back(make_object("mug", Vec3(0.45, 0.12, 0.0), 0.04, 0.08));
    detail::attach(s, "can");
  } else {
    std::string catalog;
    for (const auto& n : task_names()) catalog += (catalog.empty() ? "" : ", ") + n;
    throw Error(ErrorCode::InvalidConfig, "unknown task '" + name + "'; available: " + catalog);
  }
  t.validate();
  return t;
}

// ---- scene JSON -----------------------------------------------------------

inline Json task_to_json(const TaskSpec& t) {
  Json objects = Json::array();
  for (const auto& o : t.scene.objects) {
    objects.push_back(Json{{"id", o.id.str()},
                           {"position", {o.position.x(), o.position.y(), o.position.z()}},
                           {"yaw", o.yaw},
                           {"radius", o.radius},
                           {"height", o.height},
                           {"attached", o.attached}});
  }
  const auto& e = t.scene.effector;
  return Json{{"name", t.name},
              {"T", t.T},
              {"dt", t.dt},
              {"tolerance", t.tolerance},
              {"yaw_tolerance", t.yaw_tolerance},
              {"pour_yaw", t.pour_yaw},
              {"gains", {{"xyz", t.gains.xyz}, {"rotation", t.gains.rotation}}},
              {"weights",
               {{"hand", t.cost.w_object_hand}, {"object", t.cost.w_object_object}, {"point", t.cost.w_object_point}}},
              {"rollouts", t.rollouts},
              {"manipulated", t.manipulated.str()},
              {"target", t.target.str()},
              {"table_height", t.scene.table_height},
              {"effector",
               {{"position", {e.position.x(), e.position.y(), e.position.z()}},
                {"yaw", e.yaw},
                {"gripper_gap", e.gripper_gap}}},
              {"objects", objects}};
}

namespace detail {

inline Vec3 json_vec3(const Json& j, const std::string& what) {
  if (!j.is_array() || j.size() != 3) throw Error(ErrorCode::InvalidConfig, what + " must be [x,y,z]");
  return Vec3(j[0].get<double>(), j[1].get<double>(), j[2].get<double>());
}

inline void reject_unknown(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  for (auto it = j.begin(); it != j.end(); ++it) {
    bool ok = false;
    for (const char* a : allowed) ok |= it.key() == a;
    if (!ok) throw Error(ErrorCode::InvalidConfig, "unknown key '" + it.key() + "' in " + where);
  }
}

}  // namespace detail

/// Scene description; keys absent from the document keep the built-in value of the named task.
inline TaskSpec task_from_json(const Json& j) {
  try {
    detail::reject_unknown(j,
                           {"name", "T", "dt", "tolerance", "yaw_tolerance", "pour_yaw", "gains", "weights", "rollouts",
                            "manipulated", "target", "table_height", "effector", "objects"},
                           "scene");
    TaskSpec t = builtin_task(j.at("name").get<std::string>());
    if (j.contains("T")) t.T = j["T"].get<int>();
    if (j.contains("dt")) t.dt = j["dt"].get<double>();
    if (j.contains("tolerance")) t.tolerance = j["tolerance"].get<double>();
    if (j.contains("yaw_tolerance")) t.yaw_tolerance = j["yaw_tolerance"].get<double>();
    if (j.contains("pour_yaw")) t.pour_yaw = j["pour_yaw"].get<double>();
    if (j.contains("gains")) {
      detail::reject_unknown(j["gains"], {"xyz", "rotation"}, "gains");
      t.gains.xyz = j["gains"].value("xyz", t.gains.xyz);
      t.gains.rotation = j["gains"].value("rotation", t.gains.rotation);
    }
    if (j.contains("weights")) {
      detail::reject_unknown(j["weights"], {"hand", "object", "point"}, "weights");
      t.cost.w_object_hand = j["weights"].value("hand", t.cost.w_object_hand);
      t.cost.w_object_object = j["weights"].value("object", t.cost.w_object_object);
      t.cost.w_object_point = j["weights"].value("point", t.cost.w_object_point);
    }
    if (j.contains("rollouts")) t.rollouts = j["rollouts"].get<int>();
    if (j.contains("manipulated")) t.manipulated = EntityId(j["manipulated"].get<std::string>());
    if (j.contains("target")) t.target = EntityId(j["target"].get<std::string>());
    if (j.contains("table_height")) t.scene.table_height = j["table_height"].get<double>();
    if (j.contains("effector")) {
      const auto& e = j["effector"];
      detail::reject_unknown(e, {"position", "yaw", "gripper_gap"}, "effector");
      if (e.contains("position")) t.scene.effector.position = detail::json_vec3(e["position"], "effector.position");
      t.scene.effector.yaw = e.value("yaw", t.scene.effector.yaw);
      t.scene.effector.gripper_gap = e.value("gripper_gap", t.scene.effector.gripper_gap);
    }
    if (j.contains("objects")) {
      t.scene.objects.clear();
      std::vector<EntityId> held;
      for (const auto& jo : j["objects"]) {
        detail::reject_unknown(jo, {"id", "position", "yaw", "radius", "height", "attached"}, "objects[]");
        ObjectState o;
        o.id = EntityId(jo.at("id").get<std::string>());
        o.position = detail::json_vec3(jo.at("position"), "object position");
        o.yaw = jo.value("yaw", 0.0);
        o.radius = jo.at("radius").get<double>();
        o.height = jo.at("height").get<double>();
        if (jo.value("attached", false)) held.push_back(o.id);
        t.scene.objects.push_back(o);
      }
      for (const auto& id : held) detail::attach(t.scene, id);
    }
    t.validate();
    return t;
  } catch (const Json::exception& e) {
    throw Error(ErrorCode::InvalidConfig, std::string("scene: ") + e.what());
  }
}

inline TaskSpec load_task_file(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorCode::IoError, "cannot open scene '" + path.string() + "'");
  try {
    return task_from_json(Json::parse(in));
  } catch (const Json::parse_error& e) {
    throw Error(ErrorCode::InvalidConfig, "scene '" + path.string() + "': " + e.what());
  }
}

// ---- scripted demonstrations ------------------------------------------------

/// Straight-line segment of the scripted hand.
struct Segment {
  Vec3 position;
  double yaw = 0.0;
  double weight = 1.0;  // relative share of the episode's steps
  bool grip_close = false;
};

namespace detail {

/// Splits `total` steps over segments in proportion to their weights (largest remainder).
inline std::vector<int> allocate_steps(const std::vector<Segment>& segs, int total) {
  double sum = 0.0;
  for (const auto& s : segs) sum += s.weight;
  std::vector<int> steps(segs.size());
  std::vector<std::pair<double, std::size_t>> rem;
  int used = 0;
  for (std::size_t i = 0; i < segs.size(); ++i) {
    const double exact = total * segs[i].weight / sum;
    steps[i] = static_cast<int>(std::floor(exact));
    used += steps[i];
    rem.emplace_back(exact - steps[i], i);
  }
  std::stable_sort(rem.begin(), rem.end(), [](auto& a, auto& b) { return a.first > b.first; });
  for (int k = 0; k < total - used; ++k) ++steps[rem[static_cast<std::size_t>(k) % rem.size()].second];
  return steps;
}

/// Trapezoidal velocity profile over n steps, normalized to sum 1.
inline std::vector<double> trapezoid(int n) {
  std::vector<double> v(static_cast<std::size_t>(n));
  const double ramp = std::max(1.0, n / 4.0);
  for (int k = 0; k < n; ++k) v[static_cast<std::size_t>(k)] = std::min({1.0, (k + 1) / ramp, (n - k) / ramp});
  const double s = std::accumulate(v.begin(), v.end(), 0.0);
  for (auto& x : v) x /= s;
  return v;
}

inline Vec3 flat(const Vec3& v) { return Vec3(v.x(), v.y(), 0.0); }

inline std::vector<Segment> script(const TaskSpec& task) {
  const auto& s = task.scene;
  const auto& m = s.at(task.manipulated);
  const auto& g = s.at(task.target);
  const Vec3 hand = s.effector.position;
  const double reach = WorldParams{}.effector_radius + m.radius;
  const double hz = hand.z();
  auto at_z = [](Vec3 v, double z) {
    v.z() = z;
    return v;
  };

  if (task.name == "push-straight") {
    const Vec3 dir = flat(g.position - m.position).normalized();
    return {{at_z(m.position - reach * dir, hz), 0.0, 6},
            {at_z(g.position - reach * dir, hz), 0.0, 20},
            {at_z(g.position - reach * dir, hz), 0.0, 3}};
  }
  if (task.name == "push-direction-change") {
    const Vec3 corner(g.position.x(), m.position.y(), m.position.z());
    const Vec3 d1 = flat(corner - m.position).normalized();
    const Vec3 d2 = flat(g.position - corner).normalized();
    return {{at_z(m.position - reach * d1, hz), 0.0, 3},
            {at_z(corner - reach * d1, hz), 0.0, 8},
            {at_z(corner - 0.09 * d1, hz), 0.0, 2},
            {at_z(corner - 0.09 * d1 - 0.08 * d2, hz), 0.0, 2},
            {at_z(corner - 0.08 * d2, hz), 0.0, 3},
            {at_z(corner - reach * d2, hz), 0.0, 2},
            {at_z(g.position - reach * d2, hz), 0.0, 7},
            {at_z(g.position - reach * d2, hz), 0.0, 2}};
  }
  if (task.name == "push-straight-grasped") {
    const double grasp_z = m.center().z();
    const Vec3 above = at_z(m.position, hz);
    return {{above, 0.0, 5},
            {at_z(m.position, grasp_z), 0.0, 3},
            {at_z(m.position, grasp_z), 0.0, 1, true},
            {at_z(g.position, grasp_z), 0.0, 15, true},
            {at_z(g.position, grasp_z), 0.0, 1},
            {at_z(g.position, hz), 0.0, 3},
            {at_z(g.position, hz), 0.0, 1}};
  }
  if (task.name == "stack") {
    const double grasp_z = m.center().z();
    const double half = m.height / 2.0;
    const double carry_z = g.top() + 0.04 + half;
    const double place_z = g.top() + 0.005 + half;
    return {{at_z(m.position, hz), 0.0, 6},
            {at_z(m.position, grasp_z), 0.0, 4},
            {at_z(m.position, grasp_z), 0.0, 1, true},
            {at_z(m.position, carry_z), 0.0, 4, true},
            {at_z(g.position, carry_z), 0.0, 6, true},
            {at_z(g.position, place_z), 0.0, 3, true},
            {at_z(g.position, place_z), 0.0, 1},
            {at_z(g.position, hz), 0.0, 3},
            {at_z(g.position, hz), 0.0, 1}};
  }
  if (task.name == "simple-stack") {
    const double place_z = g.top() + 0.005 - m.attach_offset.z();
    return {{at_z(g.position, hz), 0.0, 12, true},
            {at_z(g.position, place_z), 0.0, 6, true},
            {at_z(g.position, place_z), 0.0, 1},
            {at_z(g.position, place_z + 0.06), 0.0, 6},
            {at_z(g.position, place_z + 0.06), 0.0, 4}};
  }
  if (task.name == "pour") {
    const double z = g.top() + 0.03 - m.attach_offset.z();
    const Vec3 over = at_z(g.position, z) - detail::rotate_z(Vec3(m.attach_offset.x(), m.attach_offset.y(), 0.0),
                                                             s.effector.yaw + task.pour_yaw);
    return {{over, s.effector.yaw + task.pour_yaw, 14, true}, {over, s.effector.yaw + task.pour_yaw, 5, true}};
  }
  throw Error(ErrorCode::InvalidConfig, "no script for task '" + task.name + "'");
}

}  // namespace detail

struct SuccessResult {
  bool ok = false;
  double position_error = 0.0;  // meters
  double yaw_error = 0.0;       // radians, pour only
};

inline double wrap_angle(double a) { return std::remainder(a, 2.0 * M_PI); }

/// Push: object within tolerance of the target object horizontally. Stack: object
/// released on top of the base object. Pour: source above the container and rotated
/// to the pour angle.
inline SuccessResult success(const TaskSpec& task, const WorldState& final_state) {
  const auto& m = final_state.at(task.manipulated);
  const auto& g = final_state.at(task.target);
  SuccessResult r;
  r.position_error = (m.position.head<2>() - g.position.head<2>()).norm();
  if (task.is_push()) {
    r.ok = r.position_error <= task.tolerance;
  } else if (task.is_stack()) {
    const double dz = std::abs(m.position.z() - g.top());
    r.ok = r.position_error <= g.radius && dz <= 0.005 && !m.attached;
    r.position_error += dz;
  } else if (task.is_pour()) {
    r.yaw_error = std::abs(wrap_angle(m.yaw - task.pour_yaw));
    r.ok = r.position_error <= task.tolerance && r.yaw_error <= task.yaw_tolerance;
  }
  return r;
}

struct Demonstration {
  EntityTrace trace;
  std::vector<WorldState> states;  // T ground-truth states
  std::vector<Action> actions;     // T-1 applied actions
};

/// Runs the scripted hand through the task and records what the detector sees.
inline Demonstration run_demo(const TaskSpec& task, const DetectorConfig& det_cfg, const WorldParams& params = {}) {
  task.validate();
  const auto segs = detail::script(task);
  const auto steps = detail::allocate_steps(segs, task.T - 1);

  Demonstration demo;
  demo.trace.meta = TraceMeta{task.T, task.dt, Actor::Demonstrator, task.name};
  Detector detector(det_cfg);
  WorldState w = task.scene;
  demo.states.push_back(w);
  demo.trace.frames.push_back(detector.detect(w));

  for (std::size_t i = 0; i < segs.size(); ++i) {
    const Vec3 from = w.effector.position;
    const double yaw_from = w.effector.yaw;
    const auto profile = detail::trapezoid(steps[i]);
    for (double f : profile) {
      Action a;
      const Vec3 disp = f * (segs[i].position - from);
      const double dyaw = f * (segs[i].yaw - yaw_from);
      a.du.head<3>() = disp / task.gains.xyz;
      if (dyaw != 0.0) {
        if (task.gains.rotation == 0.0) throw Error(ErrorCode::DemoFailed, "script rotates with zero rotation gain");
        a.du[3] = dyaw / task.gains.rotation;
      }
      a.grip_close = segs[i].grip_close;
      w = step(w, a, task.gains, params);
      demo.actions.push_back(a);
      demo.states.push_back(w);
      demo.trace.frames.push_back(detector.detect(w));
    }
  }
  const auto ok = success(task, w);
  if (!ok.ok)
    throw Error(ErrorCode::DemoFailed, "scripted " + task.name + " demo misses its tolerance (position error " +
                                           std::to_string(ok.position_error) + ", yaw error " +
                                           std::to_string(ok.yaw_error) + ")");
  return demo;
}

/// Demonstrations are recorded noise-free unless a detector config says otherwise.
inline DetectorConfig demo_detector_config(std::uint64_t seed, std::uint64_t points_seed = 0) {
  DetectorConfig c;
  c.sigma = 0.0;
  c.seed = seed;
  c.points_seed = points_seed;
  return c;
}

inline EntityTrace generate_demo(const TaskSpec& task, std::uint64_t seed) {
  return run_demo(task, demo_detector_config(seed)).trace;
}

/// Gripper command per frame: closed iff the demonstrator's finger gap is below theta.
inline std::vector<bool> clone_gripper(const EntityTrace& demo, const GripperCloneConfig& cfg = {}) {
  std::vector<bool> closed;
  closed.reserve(demo.size());
  for (const auto& f : demo.frames) {
    const auto* h = f.hand();
    if (h == nullptr || !h->finger_gap)
      throw Error(ErrorCode::MissingHand, "frame t=" + std::to_string(f.t) + " has no hand finger gap");
    closed.push_back(*h->finger_gap < cfg.theta);
  }
  return closed;
}

}  // namespace veg
