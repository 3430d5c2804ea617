#pragma once

// Time-varying linear-Gaussian dynamics x_{t+1} = A_t x_t + B_t u_t + c_t + w,
// w ~ N(0, W_t), fitted by ridge regression over a window of neighbouring steps.

#include "veg/error.hpp"
#include "veg/types.hpp"

#include <Eigen/Cholesky>

#include <algorithm>
#include <vector>

namespace veg {

/// One sampled trajectory: T states and T actions (the last action may be unused).
struct Trajectory {
  std::vector<VecX> x;
  std::vector<VecX> u;
  std::vector<double> cost;  // per-step cost, length T
};

struct DynamicsStep {
  MatX A;
  MatX B;
  VecX c;
  MatX W;
};

struct DynamicsModel {
  std::vector<DynamicsStep> steps;  // transitions t -> t+1, length T-1
  VecX x0_mean;
  MatX x0_cov;

  int state_dim() const { return static_cast<int>(x0_mean.size()); }
  int horizon() const { return static_cast<int>(steps.size()) + 1; }
};

struct DynamicsFitConfig {
  double ridge_lambda = 1e-6;
  int window = 2;
};

inline DynamicsModel fit_dynamics(const std::vector<Trajectory>& rollouts, const DynamicsFitConfig& cfg = {}) {
  if (rollouts.size() < 2) throw Error(ErrorCode::InsufficientData, "dynamics fit needs at least 2 rollouts");
  const std::size_t T = rollouts.front().x.size();
  if (T < 2) throw Error(ErrorCode::InsufficientData, "dynamics fit needs trajectories of length >= 2");
  const int n = static_cast<int>(rollouts.front().x.front().size());
  const int m = static_cast<int>(rollouts.front().u.front().size());
  for (const auto& r : rollouts)
    if (r.x.size() != T || r.u.size() < T - 1)
      throw Error(ErrorCode::LengthMismatch, "dynamics fit needs rollouts of equal length");

  DynamicsModel model;
  const double M = static_cast<double>(rollouts.size());
  model.x0_mean = VecX::Zero(n);
  for (const auto& r : rollouts) model.x0_mean += r.x[0];
  model.x0_mean /= M;
  model.x0_cov = MatX::Zero(n, n);
  for (const auto& r : rollouts) model.x0_cov += (r.x[0] - model.x0_mean) * (r.x[0] - model.x0_mean).transpose();
  model.x0_cov /= M;

  const int d = n + m;
  for (std::size_t t = 0; t + 1 < T; ++t) {
    const std::size_t lo = t >= static_cast<std::size_t>(cfg.window) ? t - static_cast<std::size_t>(cfg.window) : 0;
    const std::size_t hi = std::min(T - 2, t + static_cast<std::size_t>(cfg.window));
    const int samples = static_cast<int>((hi - lo + 1) * rollouts.size());
    if (samples < d + 1)
      throw Error(ErrorCode::InsufficientData, "dynamics fit at t=" + std::to_string(t) + " pools " +
                                                   std::to_string(samples) + " samples, needs " + std::to_string(d + 1));
    MatX Z(samples, d), Y(samples, n);
    int row = 0;
    for (std::size_t s = lo; s <= hi; ++s)
      for (const auto& r : rollouts) {
        Z.row(row).head(n) = r.x[s].transpose();
        Z.row(row).tail(m) = r.u[s].transpose();
        Y.row(row) = r.x[s + 1].transpose();
        ++row;
      }
    const Eigen::RowVectorXd zmean = Z.colwise().mean(), ymean = Y.colwise().mean();
    const MatX Zc = Z.rowwise() - zmean, Yc = Y.rowwise() - ymean;
    const MatX G = (Zc.transpose() * Zc + cfg.ridge_lambda * MatX::Identity(d, d)).ldlt().solve(Zc.transpose() * Yc)
                       .transpose();  // n x d
    DynamicsStep step;
    step.A = G.leftCols(n);
    step.B = G.rightCols(m);
    step.c = ymean.transpose() - G * zmean.transpose();
    const MatX resid = Yc - Zc * G.transpose();
    step.W = resid.transpose() * resid / samples;
    step.W = 0.5 * (step.W + step.W.transpose());
    model.steps.push_back(std::move(step));
  }
  return model;
}

}  // namespace veg
