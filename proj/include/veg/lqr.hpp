#pragma once

// LQR backward pass on fitted linear-Gaussian dynamics with a KL trust region
// around the previous policy. For a dual variable eta the per-step surrogate is
//   l(x, u) / eta - log pbar(u | x),
// whose maximum-entropy optimum is linear-Gaussian with Sigma = Quu^{-1}. eta is
// found by log-space bisection so that the expected KL(new || prev), summed over
// the horizon, does not exceed the step bound.

#include "veg/dynamics.hpp"
#include "veg/policy.hpp"
#include "veg/quadratize.hpp"

#include <Eigen/Cholesky>

#include <cmath>
#include <limits>
#include <optional>

namespace veg {

struct LqrResult {
  LinearGaussianPolicy policy;
  double eta = 0.0;
  double kl = 0.0;  // expected KL(new || prev) over the trajectory
};

namespace detail {

/// Backward recursion for a fixed eta. Empty when an action Hessian is not PD.
/// A positive entropy weight nu scales cost by 1/(eta+nu) and the previous policy by eta/(eta+nu).
inline std::optional<LinearGaussianPolicy> lqr_pass(const DynamicsModel& dyn, const QuadraticCost& cost,
                                                    const LinearGaussianPolicy& prev, double eta, double nu = 0.0) {
  const double cs_scale = 1.0 / (eta + nu), prev_scale = eta / (eta + nu);
  const int T = prev.horizon(), n = prev.state_dim(), m = prev.action_dim();
  std::vector<PolicyStep> steps(static_cast<std::size_t>(T));
  MatX V = MatX::Zero(n, n);
  VecX v = VecX::Zero(n);
  for (int t = T - 1; t >= 0; --t) {
    const auto& p = prev[t];
    const MatX P = prev_scale * p.Sigma.llt().solve(MatX::Identity(m, m));
    const auto& cs = cost.steps[static_cast<std::size_t>(t)];
    MatX Qxx = cs_scale * cs.C.topLeftCorner(n, n) + p.K.transpose() * P * p.K;
    MatX Quu = cs_scale * cs.C.bottomRightCorner(m, m) + P;
    MatX Qux = cs_scale * cs.C.bottomLeftCorner(m, n) - P * p.K;
    VecX qx = cs_scale * cs.c.head(n) + p.K.transpose() * P * p.k;
    VecX qu = cs_scale * cs.c.tail(m) - P * p.k;
    if (t < T - 1) {
      const auto& d = dyn.steps[static_cast<std::size_t>(t)];
      const VecX Vf = V * d.c + v;
      Qxx += d.A.transpose() * V * d.A;
      Quu += d.B.transpose() * V * d.B;
      Qux += d.B.transpose() * V * d.A;
      qx += d.A.transpose() * Vf;
      qu += d.B.transpose() * Vf;
    }
    Quu = 0.5 * (Quu + Quu.transpose());
    Eigen::LLT<MatX> llt(Quu);
    if (llt.info() != Eigen::Success) return std::nullopt;
    auto& s = steps[static_cast<std::size_t>(t)];
    s.K = -llt.solve(Qux);
    s.k = -llt.solve(qu);
    s.Sigma = llt.solve(MatX::Identity(m, m));
    s.Sigma = 0.5 * (s.Sigma + s.Sigma.transpose());
    if (!s.K.allFinite() || !s.k.allFinite() || !s.Sigma.allFinite()) return std::nullopt;
    V = Qxx + Qux.transpose() * s.K;
    V = 0.5 * (V + V.transpose());
    v = qx + Qux.transpose() * s.k;
  }
  return LinearGaussianPolicy(n, m, std::move(steps));
}

}  // namespace detail

/// Expected KL(p || q) of two policies under the state distribution p induces on the model.
inline double trajectory_kl(const DynamicsModel& dyn, const LinearGaussianPolicy& p, const LinearGaussianPolicy& q) {
  const int T = p.horizon(), m = p.action_dim();
  VecX mu = dyn.x0_mean;
  MatX S = dyn.x0_cov;
  double kl = 0.0;
  for (int t = 0; t < T; ++t) {
    const auto& a = p[t];
    const auto& b = q[t];
    Eigen::LLT<MatX> lb(b.Sigma);
    Eigen::LLT<MatX> la(a.Sigma);
    const MatX Pb = lb.solve(MatX::Identity(m, m));
    const MatX dK = a.K - b.K;
    const VecX delta = dK * mu + (a.k - b.k);
    const double logdet_b = 2.0 * lb.matrixLLT().diagonal().array().log().sum();
    const double logdet_a = 2.0 * la.matrixLLT().diagonal().array().log().sum();
    kl += 0.5 * ((Pb * a.Sigma).trace() - m + logdet_b - logdet_a + delta.dot(Pb * delta) +
                 (dK.transpose() * Pb * dK * S).trace());
    if (t + 1 < T) {
      const auto& d = dyn.steps[static_cast<std::size_t>(t)];
      const VecX u = a.K * mu + a.k;
      const MatX F = d.A + d.B * a.K;
      mu = d.A * mu + d.B * u + d.c;
      const MatX S_next = F * S * F.transpose() + d.B * a.Sigma * d.B.transpose() + d.W;
      S = 0.5 * (S_next + S_next.transpose());
    }
  }
  return std::max(0.0, kl);
}

struct LqrConfig {
  double eta_min = 1e-14;
  double eta_max = 1e14;
  int bisection_steps = 80;
  double kl_tolerance = 0.01;  // relative
  double entropy_weight = 0.0;  // nu; 0 gives the plain KL-penalized surrogate
};

inline LqrResult lqr_backward(const DynamicsModel& dyn, const QuadraticCost& cost, const LinearGaussianPolicy& prev,
                              double kl_epsilon, const LqrConfig& cfg = {}) {
  if (dyn.horizon() != prev.horizon() || static_cast<int>(cost.steps.size()) != prev.horizon() ||
      dyn.state_dim() != prev.state_dim() || cost.state_dim != prev.state_dim() || cost.action_dim != prev.action_dim())
    throw Error(ErrorCode::InvalidConfig, "lqr: dynamics, cost and policy dimensions disagree");

  auto solve = [&](double eta) -> std::optional<LqrResult> {
    auto pol = detail::lqr_pass(dyn, cost, prev, eta, cfg.entropy_weight);
    if (!pol) return std::nullopt;
    const double kl = trajectory_kl(dyn, *pol, prev);
    if (!std::isfinite(kl)) return std::nullopt;
    return LqrResult{std::move(*pol), eta, kl};
  };

  if (auto r = solve(cfg.eta_min); r && r->kl <= kl_epsilon) return *r;
  auto hi = solve(cfg.eta_max);
  if (!hi) throw Error(ErrorCode::NonPSD, "lqr: action Hessian not positive definite even at maximal eta");
  if (hi->kl > kl_epsilon) return *hi;  // cannot do better than the previous policy

  // KL decreases with eta: keep `hi` feasible and shrink the bracket in log space.
  double lo_log = std::log(cfg.eta_min), hi_log = std::log(cfg.eta_max);
  LqrResult best = *hi;
  for (int i = 0; i < cfg.bisection_steps; ++i) {
    const double mid = 0.5 * (lo_log + hi_log);
    auto r = solve(std::exp(mid));
    if (r && r->kl <= kl_epsilon) {
      hi_log = mid;
      best = *r;
      if (r->kl >= (1.0 - cfg.kl_tolerance) * kl_epsilon) break;
    } else {
      lo_log = mid;
    }
  }
  return best;
}

}  // namespace veg
