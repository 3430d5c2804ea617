#pragma once

// Quadratic expansion of the graph cost as seen through the policy state.
//
// Every attended edge becomes a residual that is affine in the state, r = J x + r0:
//   anchor-object k:  r = rel_demo_k - rel_k(x)
//   anchor-hand:      r = (xD_a - xD_h) - (x_a - e), with x_a = x_ref + rel_ref(x) and the
//                     reference object held at its nominal position
//   anchor points:    r = phi(x), weighted by the point count (phi is their mean residual)
// The per-edge penalty is w sqrt(gamma + |r|^2); the expansion uses its exact gradient and
// the Gauss-Newton curvature w J^T J / sqrt(gamma + |r|^2). An action term lambda |u|^2 is added.

#include "veg/graph.hpp"
#include "veg/policy.hpp"

#include <Eigen/Eigenvalues>

#include <map>
#include <vector>

namespace veg {

enum class Penalty { SmoothedNorm, HalfSquared };

struct ResidualBlock {
  double weight = 1.0;
  MatX J;   // rows = residual dimension, cols = state_dim
  VecX r0;
};

/// Per-timestep cost on (x, u): sum of residual penalties plus lambda |u|^2.
struct StateCostModel {
  int state_dim = 0;
  int action_dim = 0;
  double gamma = 1e-5;
  double action_lambda = 1e-3;
  Penalty penalty = Penalty::SmoothedNorm;
  std::vector<std::vector<ResidualBlock>> blocks;  // per t

  int horizon() const { return static_cast<int>(blocks.size()); }

  double penalty_value(double w, const VecX& r) const {
    return penalty == Penalty::SmoothedNorm ? w * std::sqrt(gamma + r.squaredNorm()) : 0.5 * w * r.squaredNorm();
  }

  double value(int t, const VecX& x, const VecX& u) const {
    double v = action_lambda * u.squaredNorm();
    for (const auto& b : blocks.at(static_cast<std::size_t>(t))) v += penalty_value(b.weight, b.J * x + b.r0);
    return v;
  }

  VecX state_gradient(int t, const VecX& x) const {
    VecX g = VecX::Zero(state_dim);
    for (const auto& b : blocks.at(static_cast<std::size_t>(t))) {
      const VecX r = b.J * x + b.r0;
      const double s = penalty == Penalty::SmoothedNorm ? b.weight / std::sqrt(gamma + r.squaredNorm()) : b.weight;
      g += s * (b.J.transpose() * r);
    }
    return g;
  }
};

/// Nominal absolute object positions per timestep (used to pin the hand-edge reference).
using NominalPositions = std::vector<std::map<EntityId, Vec3>>;

inline StateCostModel build_cost_model(const EntityTrace& demo, const std::vector<EntityId>& anchors,
                                       const FeatureSpec& spec, const CostConfig& cfg, const NominalPositions& nominal,
                                       int action_dim, double action_lambda, Penalty penalty = Penalty::SmoothedNorm) {
  if (anchors.size() != demo.size() || nominal.size() != demo.size())
    throw Error(ErrorCode::LengthMismatch, "cost model inputs differ in length");
  StateCostModel model;
  model.state_dim = spec.state_dim();
  model.action_dim = action_dim;
  model.gamma = cfg.smoothing_gamma;
  model.action_lambda = action_lambda;
  model.penalty = penalty;
  const int n = spec.state_dim();
  const Eigen::Matrix3d I = Eigen::Matrix3d::Identity();
  for (std::size_t t = 0; t < demo.size(); ++t) {
    const auto& f = demo[t];
    const auto& a = anchors[t];
    const Vec3 xa = f.at(a).position;
    const auto others = spec.others(a);
    std::vector<ResidualBlock> blocks;
    // With several anchor slots, the timestep's anchor occupies slot 0.
    const int rel0 = spec.rel_offset(0);
    if (cfg.w_object_object > 0.0) {
      for (std::size_t j = 0; j < others.size(); ++j) {
        ResidualBlock b;
        b.weight = cfg.w_object_object;
        b.J = MatX::Zero(3, n);
        b.J.block<3, 3>(0, rel0 + 3 * static_cast<int>(j)) = -I;
        b.r0 = xa - f.at(others[j]).position;
        blocks.push_back(std::move(b));
      }
    }
    if (const auto* h = f.hand(); h != nullptr && cfg.w_object_hand > 0.0) {
      ResidualBlock b;
      b.weight = cfg.w_object_hand;
      b.J = MatX::Zero(3, n);
      b.J.block<3, 3>(0, 0) = I;
      const auto& nom = nominal[t];
      if (others.empty()) {
        b.r0 = (xa - h->position) - nom.at(a);
      } else {
        b.J.block<3, 3>(0, rel0) = -I;
        b.r0 = (xa - h->position) - nom.at(others.front());
      }
      blocks.push_back(std::move(b));
    }
    int points = 0;
    for (const auto& e : f.entities) points += e.kind == EntityKind::Point && e.parent == a;
    if (points > 0 && cfg.w_object_point > 0.0) {
      ResidualBlock b;
      b.weight = cfg.w_object_point * points;
      b.J = MatX::Zero(1, n);
      b.J(0, spec.phi_offset(0)) = 1.0;
      b.r0 = VecX::Zero(1);
      blocks.push_back(std::move(b));
    }
    model.blocks.push_back(std::move(blocks));
  }
  return model;
}

/// l_t(z) ~ 0.5 z^T C z + c^T z + c0 over z = [x; u].
struct QuadraticCostStep {
  MatX C;
  VecX c;
  double c0 = 0.0;
};

struct QuadraticCost {
  std::vector<QuadraticCostStep> steps;
  int state_dim = 0;
  int action_dim = 0;

  double evaluate(int t, const VecX& z) const {
    const auto& s = steps.at(static_cast<std::size_t>(t));
    return 0.5 * z.dot(s.C * z) + s.c.dot(z) + s.c0;
  }
};

inline MatX clamp_psd(const MatX& H, double floor = 1e-8) {
  Eigen::SelfAdjointEigenSolver<MatX> es(0.5 * (H + H.transpose()));
  const VecX ev = es.eigenvalues().cwiseMax(floor);
  MatX out = es.eigenvectors() * ev.asDiagonal() * es.eigenvectors().transpose();
  return 0.5 * (out + out.transpose());
}

/// Expands the cost model around a nominal trajectory (x_t, u_t), t < T.
inline QuadraticCost quadratize_cost(const StateCostModel& model, const std::vector<VecX>& x_nom,
                                     const std::vector<VecX>& u_nom) {
  const int n = model.state_dim, m = model.action_dim;
  QuadraticCost q;
  q.state_dim = n;
  q.action_dim = m;
  for (int t = 0; t < model.horizon(); ++t) {
    const VecX& xb = x_nom.at(static_cast<std::size_t>(t));
    const VecX& ub = u_nom.at(static_cast<std::size_t>(t));
    MatX Hxx = MatX::Zero(n, n);
    for (const auto& b : model.blocks[static_cast<std::size_t>(t)]) {
      const VecX r = b.J * xb + b.r0;
      const double s =
          model.penalty == Penalty::SmoothedNorm ? b.weight / std::sqrt(model.gamma + r.squaredNorm()) : b.weight;
      Hxx += s * (b.J.transpose() * b.J);
    }
    QuadraticCostStep step;
    step.C = MatX::Zero(n + m, n + m);
    step.C.topLeftCorner(n, n) = clamp_psd(Hxx);
    step.C.bottomRightCorner(m, m) = 2.0 * model.action_lambda * MatX::Identity(m, m);
    VecX zb(n + m);
    zb << xb, ub;
    VecX g(n + m);
    g << model.state_gradient(t, xb), 2.0 * model.action_lambda * ub;
    step.c = g - step.C * zb;
    step.c0 = model.value(t, xb, ub) - g.dot(zb) + 0.5 * zb.dot(step.C * zb);
    q.steps.push_back(std::move(step));
  }
  return q;
}

}  // namespace veg
