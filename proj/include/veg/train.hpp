#pragma once

// Policy search loop: sample rollouts, fit dynamics, quadratize the cost around
// the sample mean, take a KL-bounded LQR step, then a path-integral correction.
// Works with any environment satisfying the Environment concept.

#include "veg/dynamics.hpp"
#include "veg/lqr.hpp"
#include "veg/pi2.hpp"
#include "veg/policy.hpp"
#include "veg/quadratize.hpp"
#include "veg/trace.hpp"

#include <concepts>
#include <cstdint>
#include <functional>
#include <limits>
#include <vector>

namespace veg {

struct OptimizerConfig {
  int rollouts = 8;
  int iterations = 10;
  double kl_epsilon = 100.0;  // nats per trajectory, adapted during training
  double ridge_lambda = 1e-6;
  double action_cost_lambda = 1e-5;  // per squared raw action unit
  double pi2_temperature = 0.1;
  double pi2_blend = 0.5;
  int fit_window = 2;
  std::vector<double> explore_std{10.0, 10.0, 10.0, 1.0};  // raw action units
  double kl_decrease = 0.5;
  double kl_increase = 1.2;
  double entropy_weight = 0.01;  // keeps exploration from collapsing after the first update
  int dynamics_history = 1;      // earlier iterations whose samples also feed the dynamics fit

  void validate() const {
    auto positive = [](double v, const char* what) {
      if (!(v > 0.0)) throw Error(ErrorCode::InvalidConfig, std::string("optimizer ") + what + " must be > 0");
    };
    if (rollouts < 2) throw Error(ErrorCode::InvalidConfig, "optimizer rollouts must be >= 2");
    if (iterations < 0) throw Error(ErrorCode::InvalidConfig, "optimizer iterations must be >= 0");
    positive(kl_epsilon, "kl_epsilon");
    positive(ridge_lambda, "ridge_lambda");
    positive(action_cost_lambda, "action_cost_lambda");
    positive(pi2_temperature, "pi2_temperature");
    if (!(pi2_blend >= 0.0 && pi2_blend <= 1.0)) throw Error(ErrorCode::InvalidConfig, "optimizer pi2_blend must lie in [0, 1]");
    if (!(entropy_weight >= 0.0)) throw Error(ErrorCode::InvalidConfig, "optimizer entropy_weight must be >= 0");
    if (dynamics_history < 0) throw Error(ErrorCode::InvalidConfig, "optimizer dynamics_history must be >= 0");
    if (!(kl_decrease > 0.0) || !(kl_increase > 0.0)) throw Error(ErrorCode::InvalidConfig, "optimizer kl adaptation factors must be > 0");
    if (fit_window < 0) throw Error(ErrorCode::InvalidConfig, "optimizer fit_window must be >= 0");
    if (explore_std.empty()) throw Error(ErrorCode::InvalidConfig, "optimizer explore_std is empty");
    for (double s : explore_std) positive(s, "explore_std entries");
  }

  VecX explore() const { return Eigen::Map<const VecX>(explore_std.data(), static_cast<Eigen::Index>(explore_std.size())); }
};

/// One sampled episode as the optimizer sees it.
struct Sample {
  Trajectory traj;    // T states, T actions, T per-step reported costs
  EntityTrace trace;  // observed entities, when the environment has any
  bool success = false;

  double mean_cost() const {
    double s = 0.0;
    for (double c : traj.cost) s += c;
    return traj.cost.empty() ? 0.0 : s / static_cast<double>(traj.cost.size());
  }
};

template <class E>
concept Environment = requires(E& env, const LinearGaussianPolicy& policy, std::uint64_t seed, bool explore,
                               const std::vector<Sample>& samples, double action_lambda) {
  { env.horizon() } -> std::convertible_to<int>;
  { env.state_dim() } -> std::convertible_to<int>;
  { env.action_dim() } -> std::convertible_to<int>;
  { env.sample(policy, seed, explore) } -> std::convertible_to<Sample>;
  { env.quadratize(samples, action_lambda) } -> std::convertible_to<QuadraticCost>;
};

struct CurvePoint {
  int iteration = 0;
  double mean_cost = 0.0;
  double kl_epsilon = 0.0;
  double success_rate = 0.0;
};

struct TrainResult {
  LinearGaussianPolicy policy;  // best mean-cost policy seen
  std::vector<CurvePoint> curve;
  int best_iteration = 0;
};

/// Per-iteration observer, called after each round of sampling.
using TrainObserver = std::function<void(const CurvePoint&, const std::vector<Sample>&)>;

template <Environment Env>
TrainResult train(Env& env, const OptimizerConfig& cfg, std::uint64_t seed, const TrainObserver& observe = {}) {
  cfg.validate();
  if (static_cast<int>(cfg.explore_std.size()) != env.action_dim())
    throw Error(ErrorCode::InvalidConfig, "optimizer explore_std size differs from the action dimension");
  LinearGaussianPolicy policy = LinearGaussianPolicy::initial(env.horizon(), env.state_dim(), cfg.explore());

  TrainResult result;
  result.policy = policy;
  double best = std::numeric_limits<double>::infinity();
  double prev_cost = std::numeric_limits<double>::infinity();
  double kl = cfg.kl_epsilon;
  std::vector<std::vector<Trajectory>> history;

  for (int it = 0; it <= cfg.iterations; ++it) {
    std::vector<Sample> samples;
    samples.reserve(static_cast<std::size_t>(cfg.rollouts));
    for (int m = 0; m < cfg.rollouts; ++m)
      samples.push_back(env.sample(policy, derive_seed(seed, static_cast<std::uint64_t>(it), static_cast<std::uint64_t>(m)), true));

    double cost = 0.0, succ = 0.0;
    for (const auto& s : samples) {
      cost += s.mean_cost();
      succ += s.success ? 1.0 : 0.0;
    }
    cost /= static_cast<double>(samples.size());
    succ /= static_cast<double>(samples.size());

    if (it > 0) kl *= cost > prev_cost ? cfg.kl_decrease : cfg.kl_increase;
    prev_cost = cost;
    const CurvePoint point{it, cost, kl, succ};
    result.curve.push_back(point);
    if (observe) observe(point, samples);
    if (cost < best) {
      best = cost;
      result.policy = policy;
      result.best_iteration = it;
    }
    if (it == cfg.iterations) break;

    std::vector<Trajectory> trajs;
    trajs.reserve(samples.size());
    for (const auto& s : samples) trajs.push_back(s.traj);
    history.push_back(trajs);
    if (static_cast<int>(history.size()) > cfg.dynamics_history + 1) history.erase(history.begin());
    std::vector<Trajectory> pooled;
    for (const auto& h : history) pooled.insert(pooled.end(), h.begin(), h.end());
    const auto dyn = fit_dynamics(pooled, DynamicsFitConfig{cfg.ridge_lambda, cfg.fit_window});
    const auto quad = env.quadratize(samples, cfg.action_cost_lambda);
    LqrConfig lqr_cfg;
    lqr_cfg.entropy_weight = cfg.entropy_weight;
    policy = lqr_backward(dyn, quad, policy, kl, lqr_cfg).policy;
    if (cfg.pi2_blend > 0.0) policy = pi2_update(std::move(policy), trajs, Pi2Config{cfg.pi2_temperature, cfg.pi2_blend});
  }
  return result;
}

/// Sample mean of states and actions across rollouts.
inline void sample_mean(const std::vector<Sample>& samples, std::vector<VecX>& x, std::vector<VecX>& u) {
  const std::size_t T = samples.front().traj.x.size();
  x.assign(T, VecX::Zero(samples.front().traj.x.front().size()));
  u.assign(T, VecX::Zero(samples.front().traj.u.front().size()));
  for (const auto& s : samples)
    for (std::size_t t = 0; t < T; ++t) {
      x[t] += s.traj.x[t];
      u[t] += s.traj.u[t];
    }
  const double n = static_cast<double>(samples.size());
  for (std::size_t t = 0; t < T; ++t) {
    x[t] /= n;
    u[t] /= n;
  }
}

}  // namespace veg
