#pragma once

// State featurization and time-varying linear-Gaussian policies.
//
// State layout (for anchors a_1..a_n, objects sorted by id):
//   [effector position (3) | joints (n_joints) | per anchor: x_a - x_k for every other object k (3 each)
//    | per anchor: phi]
// phi is the mean over the anchor's points of |(x_a - x_p)_imit - (x_a - x_p)_demo|.

#include "veg/error.hpp"
#include "veg/trace.hpp"
#include "veg/trace_io.hpp"
#include "veg/types.hpp"

#include <Eigen/Cholesky>
#include <Eigen/Eigenvalues>

#include <algorithm>
#include <string>
#include <vector>

namespace veg {

struct FeatureSpec {
  int n_effector = 3;
  int n_joints = 1;
  std::vector<EntityId> objects;  // N_total corresponded objects, sorted
  int n_anchors = 1;
  int dim_phi = 1;

  int n_total() const { return static_cast<int>(objects.size()); }
  int state_dim() const { return n_effector + n_joints + n_anchors * (n_total() - 1) * 3 + n_anchors * dim_phi; }
  int rel_offset(int anchor_index) const { return n_effector + n_joints + anchor_index * (n_total() - 1) * 3; }
  int phi_offset(int anchor_index) const {
    return n_effector + n_joints + n_anchors * (n_total() - 1) * 3 + anchor_index * dim_phi;
  }

  /// Objects other than `anchor`, in state order.
  std::vector<EntityId> others(const EntityId& anchor) const {
    std::vector<EntityId> out;
    for (const auto& o : objects)
      if (o != anchor) out.push_back(o);
    return out;
  }

  static FeatureSpec from_frame(const TraceFrame& demo_frame, int n_joints = 1, int n_anchors = 1) {
    FeatureSpec s;
    s.n_joints = n_joints;
    s.n_anchors = n_anchors;
    s.objects = demo_frame.ids_of(EntityKind::Object);
    if (s.objects.empty()) throw Error(ErrorCode::NoObjects, "feature spec needs at least one object");
    return s;
  }
};

/// The robot's own reading of its configuration.
struct Proprioception {
  Vec3 position = Vec3::Zero();
  VecX joints;  // size n_joints
};

/// Mean anchor-point residual between imitation and demonstration (0 without points).
inline double point_feature(const TraceFrame& frame, const TraceFrame& demo_frame, const EntityId& anchor) {
  const Vec3 ai = frame.at(anchor).position;
  const Vec3 ad = demo_frame.at(anchor).position;
  double sum = 0.0;
  int n = 0;
  for (const auto& p : demo_frame.entities) {
    if (p.kind != EntityKind::Point || p.parent != anchor) continue;
    sum += ((ai - frame.at(p.id).position) - (ad - p.position)).norm();
    ++n;
  }
  return n == 0 ? 0.0 : sum / n;
}

inline VecX featurize(const TraceFrame& frame, const TraceFrame& demo_frame, const std::vector<EntityId>& anchors,
                      const FeatureSpec& spec, const Proprioception& proprio) {
  if (static_cast<int>(anchors.size()) != spec.n_anchors)
    throw Error(ErrorCode::InvalidConfig, "featurize: anchor count differs from the feature spec");
  if (proprio.joints.size() != spec.n_joints)
    throw Error(ErrorCode::InvalidConfig, "featurize: joint count differs from the feature spec");
  VecX x(spec.state_dim());
  x.head<3>() = proprio.position;
  x.segment(3, spec.n_joints) = proprio.joints;
  for (int a = 0; a < spec.n_anchors; ++a) {
    const auto& anchor = anchors[static_cast<std::size_t>(a)];
    const Vec3 xa = frame.at(anchor).position;
    int off = spec.rel_offset(a);
    for (const auto& k : spec.others(anchor)) {
      x.segment<3>(off) = xa - frame.at(k).position;
      off += 3;
    }
    if (off != spec.rel_offset(a) + (spec.n_total() - 1) * 3)
      throw Error(ErrorCode::MissingEntity, "anchor '" + anchor.str() + "' is not one of the feature objects");
    x[spec.phi_offset(a)] = point_feature(frame, demo_frame, anchor);
  }
  return x;
}

inline VecX featurize(const TraceFrame& frame, const TraceFrame& demo_frame, const EntityId& anchor,
                      const FeatureSpec& spec, const Proprioception& proprio) {
  return featurize(frame, demo_frame, std::vector<EntityId>{anchor}, spec, proprio);
}

struct PolicyStep {
  MatX K;      // action_dim x state_dim
  VecX k;      // action_dim
  MatX Sigma;  // action_dim x action_dim, SPD
};

class LinearGaussianPolicy {
 public:
  LinearGaussianPolicy() = default;
  LinearGaussianPolicy(int state_dim, int action_dim, std::vector<PolicyStep> steps)
      : state_dim_(state_dim), action_dim_(action_dim), steps_(std::move(steps)) {
    validate();
  }

  /// Zero gains and offsets with diagonal exploration covariance.
  static LinearGaussianPolicy initial(int T, int state_dim, const VecX& explore_std) {
    std::vector<PolicyStep> steps(static_cast<std::size_t>(T));
    const int m = static_cast<int>(explore_std.size());
    for (auto& s : steps) {
      s.K = MatX::Zero(m, state_dim);
      s.k = VecX::Zero(m);
      s.Sigma = explore_std.array().square().matrix().asDiagonal();
    }
    return LinearGaussianPolicy(state_dim, m, std::move(steps));
  }

  int horizon() const { return static_cast<int>(steps_.size()); }
  int state_dim() const { return state_dim_; }
  int action_dim() const { return action_dim_; }
  const PolicyStep& operator[](int t) const { return steps_.at(static_cast<std::size_t>(t)); }
  PolicyStep& operator[](int t) { return steps_.at(static_cast<std::size_t>(t)); }
  const std::vector<PolicyStep>& steps() const { return steps_; }

  VecX mean(int t, const VecX& x) const {
    const auto& s = (*this)[t];
    return s.K * x + s.k;
  }

  /// Draws u ~ N(K x + k, Sigma) using standard normal draws `z`.
  VecX sample(int t, const VecX& x, const VecX& z) const {
    const auto& s = (*this)[t];
    Eigen::LLT<MatX> llt(s.Sigma);
    return mean(t, x) + llt.matrixL() * z;
  }

  void validate() const {
    for (std::size_t t = 0; t < steps_.size(); ++t) {
      const auto& s = steps_[t];
      const auto where = " at t=" + std::to_string(t);
      if (s.K.rows() != action_dim_ || s.K.cols() != state_dim_ || s.k.size() != action_dim_ ||
          s.Sigma.rows() != action_dim_ || s.Sigma.cols() != action_dim_)
        throw Error(ErrorCode::ValidationError, "policy dimensions inconsistent" + where);
      if (!s.K.allFinite() || !s.k.allFinite() || !s.Sigma.allFinite())
        throw Error(ErrorCode::ValidationError, "policy has non-finite entries" + where);
      if ((s.Sigma - s.Sigma.transpose()).cwiseAbs().maxCoeff() > 1e-9 * std::max(1.0, s.Sigma.cwiseAbs().maxCoeff()))
        throw Error(ErrorCode::ValidationError, "policy covariance not symmetric" + where);
      Eigen::SelfAdjointEigenSolver<MatX> es(s.Sigma, Eigen::EigenvaluesOnly);
      if (!(es.eigenvalues().minCoeff() > 0.0))
        throw Error(ErrorCode::ValidationError, "policy covariance not positive definite" + where);
    }
  }

  Json to_json() const {
    auto flat = [](const MatX& m) {
      Json a = Json::array();
      for (int r = 0; r < m.rows(); ++r)
        for (int c = 0; c < m.cols(); ++c) a.push_back(m(r, c));
      return a;
    };
    Json steps = Json::array();
    for (const auto& s : steps_) steps.push_back(Json{{"K", flat(s.K)}, {"k", flat(s.k)}, {"Sigma", flat(s.Sigma)}});
    return Json{{"T", horizon()}, {"state_dim", state_dim_}, {"action_dim", action_dim_}, {"steps", steps}};
  }

  static LinearGaussianPolicy from_json(const Json& j) {
    try {
      const int T = j.at("T").get<int>();
      const int n = j.at("state_dim").get<int>();
      const int m = j.at("action_dim").get<int>();
      const auto& js = j.at("steps");
      if (!js.is_array() || static_cast<int>(js.size()) != T)
        throw Error(ErrorCode::ValidationError, "policy step count differs from T");
      auto mat = [](const Json& a, int rows, int cols, const char* what) {
        if (!a.is_array() || static_cast<int>(a.size()) != rows * cols)
          throw Error(ErrorCode::ValidationError, std::string("policy ") + what + " has the wrong size");
        MatX out(rows, cols);
        for (int r = 0; r < rows; ++r)
          for (int c = 0; c < cols; ++c) out(r, c) = a[static_cast<std::size_t>(r * cols + c)].get<double>();
        return out;
      };
      std::vector<PolicyStep> steps;
      for (const auto& s : js) steps.push_back({mat(s.at("K"), m, n, "K"), mat(s.at("k"), m, 1, "k"), mat(s.at("Sigma"), m, m, "Sigma")});
      return LinearGaussianPolicy(n, m, std::move(steps));
    } catch (const Json::exception& e) {
      throw Error(ErrorCode::ParseError, std::string("policy: ") + e.what());
    }
  }

 private:
  int state_dim_ = 0;
  int action_dim_ = 0;
  std::vector<PolicyStep> steps_;
};

}  // namespace veg
