#pragma once

// Executes a policy in the simulated world against a demonstration, and wraps
// that as an optimization environment.

#include "veg/detector.hpp"
#include "veg/graph.hpp"
#include "veg/policy.hpp"
#include "veg/quadratize.hpp"
#include "veg/tasks.hpp"
#include "veg/train.hpp"
#include "veg/world.hpp"

#include <random>

namespace veg {

struct ImitationSetup {
  TaskSpec task;
  EntityTrace demo;
  DetectorConfig detector;  // imitator-side detector; its seed is re-derived per rollout
  GripperCloneConfig clone;
  WorldParams params;
};

struct ImitationRollout {
  EntityTrace trace;
  std::vector<WorldState> states;  // T ground-truth states
  Trajectory traj;                 // features, actions, per-step graph cost
};

/// Shared per-demo context: anchors, feature layout and the cloned gripper schedule.
struct DemoContext {
  std::vector<EntityId> anchors;
  FeatureSpec spec;
  std::vector<bool> gripper;

  DemoContext() = default;
  DemoContext(const EntityTrace& demo, const CostConfig& cost, const GripperCloneConfig& clone)
      : anchors(anchor_timeline(demo, cost)), spec(FeatureSpec::from_frame(demo[0])), gripper(clone_gripper(demo, clone)) {}
};

inline Proprioception proprioception(const WorldState& w) {
  Proprioception p;
  p.position = w.effector.position;
  p.joints = VecX::Constant(1, w.effector.yaw);
  return p;
}

/// Runs `policy` from `initial`. Step t applies action u_t with the gripper command
/// cloned from demo frame t+1, so the last action is never applied.
/// Without exploration the policy mean is executed.
inline ImitationRollout rollout(const WorldState& initial, const LinearGaussianPolicy& policy, const ImitationSetup& setup,
                                const DemoContext& ctx, std::uint64_t seed, bool explore = true) {
  const int T = setup.demo.meta.length;
  if (policy.horizon() != T) throw Error(ErrorCode::LengthMismatch, "policy horizon differs from the demo length");
  DetectorConfig det_cfg = setup.detector;
  det_cfg.seed = derive_seed(seed, 1);
  Detector detector(det_cfg);
  std::mt19937_64 rng(derive_seed(seed, 2));
  std::normal_distribution<double> normal(0.0, 1.0);

  ImitationRollout out;
  out.trace.meta = TraceMeta{T, setup.demo.meta.dt, Actor::Imitator, setup.demo.meta.task};
  WorldState w = initial;
  TraceFrame frame = detector.detect(w);
  for (int t = 0; t < T; ++t) {
    const auto& demo_frame = setup.demo[static_cast<std::size_t>(t)];
    const VecX x = featurize(frame, demo_frame, ctx.anchors[static_cast<std::size_t>(t)], ctx.spec, proprioception(w));
    VecX z(policy.action_dim());
    for (int k = 0; k < z.size(); ++k) z[k] = normal(rng);
    const VecX u = explore ? policy.sample(t, x, z) : policy.mean(t, x);
    out.traj.x.push_back(x);
    out.traj.u.push_back(u);
    out.states.push_back(w);
    out.trace.frames.push_back(std::move(frame));
    if (t + 1 < T) {
      Action a;
      a.du = u.head<4>();
      a.grip_close = ctx.gripper[static_cast<std::size_t>(t + 1)];
      w = step(w, a, setup.task.gains, setup.params);
      frame = detector.detect(w);
    }
  }
  out.traj.cost = sequence_cost(setup.demo, out.trace, setup.task.cost, &ctx.anchors);
  return out;
}

/// Optimizer settings tuned per task. Pouring explores yaw more widely and drops the
/// entropy bonus, which otherwise keeps the weakly observed yaw channel too noisy.
/// Stacking keeps a smaller bonus so exploration narrows enough to lift over the base.
inline OptimizerConfig task_optimizer(const TaskSpec& task) {
  OptimizerConfig cfg;
  cfg.rollouts = task.rollouts;
  if (task.is_stack()) cfg.entropy_weight = 0.002;
  if (task.name == "pour") {
    cfg.explore_std = {10.0, 10.0, 10.0, 3.0};
    cfg.kl_epsilon = 30.0;
    cfg.entropy_weight = 0.0;
  }
  return cfg;
}

/// The imitation task from a fixed (possibly perturbed) start, as seen by the optimizer.
class ImitationEnvironment {
 public:
  ImitationEnvironment(ImitationSetup setup, WorldState initial)
      : setup_(std::move(setup)), initial_(std::move(initial)), ctx_(setup_.demo, setup_.task.cost, setup_.clone) {}

  int horizon() const { return setup_.demo.meta.length; }
  int state_dim() const { return ctx_.spec.state_dim(); }
  int action_dim() const { return 4; }
  const DemoContext& context() const { return ctx_; }
  const ImitationSetup& setup() const { return setup_; }
  const WorldState& initial() const { return initial_; }

  ImitationRollout run(const LinearGaussianPolicy& policy, std::uint64_t seed, bool explore) const {
    return rollout(initial_, policy, setup_, ctx_, seed, explore);
  }

  Sample sample(const LinearGaussianPolicy& policy, std::uint64_t seed, bool explore) const {
    auto r = run(policy, seed, explore);
    Sample s;
    s.success = success(setup_.task, r.states.back()).ok;
    s.traj = std::move(r.traj);
    s.trace = std::move(r.trace);
    return s;
  }

  /// Quadratizes around the mean of `samples`, pinning reference objects at their mean detected positions.
  QuadraticCost quadratize(const std::vector<Sample>& samples, double action_lambda) const {
    std::vector<VecX> x, u;
    sample_mean(samples, x, u);
    NominalPositions nominal(static_cast<std::size_t>(horizon()));
    for (std::size_t t = 0; t < nominal.size(); ++t)
      for (const auto& id : ctx_.spec.objects) {
        Vec3 sum = Vec3::Zero();
        for (const auto& s : samples) sum += s.trace[t].at(id).position;
        nominal[t][id] = sum / static_cast<double>(samples.size());
      }
    const auto model = build_cost_model(setup_.demo, ctx_.anchors, ctx_.spec, setup_.task.cost, nominal, action_dim(),
                                        action_lambda);
    return quadratize_cost(model, x, u);
  }

 private:
  ImitationSetup setup_;
  WorldState initial_;
  DemoContext ctx_;
};

}  // namespace veg
