#pragma once

// Path-integral correction of the policy offsets: per timestep, rollouts are
// weighted by their exponentiated negative cost-to-go and the offset moves toward
// the weighted mean of the sampled actions with the feedback term removed.

#include "veg/dynamics.hpp"
#include "veg/policy.hpp"

#include <algorithm>
#include <cmath>
#include <vector>

namespace veg {

struct Pi2Config {
  double temperature = 1.0;
  double blend = 0.5;
};

/// Normalized weights exp(-(S_m - min S) / temperature).
inline std::vector<double> pi2_weights(const std::vector<double>& cost_to_go, double temperature) {
  if (cost_to_go.empty()) return {};
  const double lo = *std::min_element(cost_to_go.begin(), cost_to_go.end());
  std::vector<double> w(cost_to_go.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) sum += w[i] = std::exp(-(cost_to_go[i] - lo) / temperature);
  for (auto& x : w) x /= sum;
  return w;
}

inline LinearGaussianPolicy pi2_update(LinearGaussianPolicy policy, const std::vector<Trajectory>& rollouts,
                                       const Pi2Config& cfg = {}) {
  if (rollouts.size() < 2) throw Error(ErrorCode::InsufficientData, "pi2 needs at least 2 rollouts");
  const int T = policy.horizon();
  std::vector<double> to_go(rollouts.size(), 0.0);
  for (int t = T - 1; t >= 0; --t) {
    for (std::size_t r = 0; r < rollouts.size(); ++r) to_go[r] += rollouts[r].cost.at(static_cast<std::size_t>(t));
    const auto w = pi2_weights(to_go, cfg.temperature);
    auto& s = policy[t];
    VecX target = VecX::Zero(s.k.size());
    for (std::size_t r = 0; r < rollouts.size(); ++r) {
      const auto& ro = rollouts[r];
      target += w[r] * (ro.u.at(static_cast<std::size_t>(t)) - s.K * ro.x.at(static_cast<std::size_t>(t)));
    }
    s.k = (1.0 - cfg.blend) * s.k + cfg.blend * target;
  }
  return policy;
}

}  // namespace veg
