#pragma once

// Deterministic kinematic tabletop. Objects are upright cylinders (disk
// footprints); the effector is a small disk that pushes objects quasi-statically
// and can hold one object rigidly.

#include "veg/error.hpp"
#include "veg/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <optional>
#include <vector>

namespace veg {

struct EffectorState {
  Vec3 position = Vec3::Zero();
  double yaw = 0.0;
  double gripper_gap = 0.08;
};

struct ObjectState {
  EntityId id;
  Vec3 position = Vec3::Zero();  // footprint center; z is the bottom face
  double yaw = 0.0;
  double radius = 0.03;
  double height = 0.04;
  bool attached = false;
  Vec3 attach_offset = Vec3::Zero();  // base position in the effector frame
  double attach_yaw = 0.0;

  Vec3 center() const { return position + Vec3(0.0, 0.0, 0.5 * height); }
  double top() const { return position.z() + height; }
};

struct WorldState {
  EffectorState effector;
  std::vector<ObjectState> objects;
  double table_height = 0.0;

  ObjectState* find(const EntityId& id) {
    for (auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
  const ObjectState* find(const EntityId& id) const {
    for (const auto& o : objects)
      if (o.id == id) return &o;
    return nullptr;
  }
  const ObjectState& at(const EntityId& id) const {
    if (const auto* o = find(id)) return *o;
    throw Error(ErrorCode::MissingEntity, "object '" + id.str() + "' not in world");
  }
  const ObjectState* held() const {
    for (const auto& o : objects)
      if (o.attached) return &o;
    return nullptr;
  }
};

/// Raw 4-D action [dx, dy, dz, dyaw] plus the gripper command.
struct Action {
  Vec4 du = Vec4::Zero();
  bool grip_close = false;
};

/// Raw action times gain is the commanded displacement.
struct ControllerGains {
  double xyz = 0.001;
  double rotation = 0.02;
};

struct WorldParams {
  double effector_radius = 0.02;
  double grasp_radius = 0.02;
  double grasp_z_tolerance = 0.02;
  double gap_open = 0.08;
  double gap_closed = 0.01;
  double gap_max = 0.08;
  double step_clip = 0.05;  // meters per axis per step
  double yaw_clip = 0.2;    // radians per step
  double substep = 0.005;   // max effector travel between contact resolutions
};

namespace detail {

inline Eigen::Vector2d xy(const Vec3& v) { return v.head<2>(); }

inline Vec3 rotate_z(const Vec3& v, double yaw) {
  const double c = std::cos(yaw), s = std::sin(yaw);
  return Vec3(c * v.x() - s * v.y(), s * v.x() + c * v.y(), v.z());
}

inline bool vertical_overlap(const ObjectState& a, const ObjectState& b) {
  const double lo = std::max(a.position.z(), b.position.z());
  const double hi = std::min(a.top(), b.top());
  return hi - lo > 1e-9;
}

inline bool effector_level(const EffectorState& e, const ObjectState& o) {
  return o.height > 0.0 && e.position.z() >= o.position.z() - 1e-9 && e.position.z() <= o.top() + 1e-9;
}

inline void place_held(WorldState& w) {
  for (auto& o : w.objects) {
    if (!o.attached) continue;
    o.position = w.effector.position + rotate_z(o.attach_offset, w.effector.yaw);
    o.yaw = w.effector.yaw + o.attach_yaw;
  }
}

/// Moves `o` out of a disk of `radius` around `center` along the horizontal normal.
inline bool push_out(ObjectState& o, const Vec3& center, double radius, double fraction = 1.0) {
  Eigen::Vector2d n = xy(o.position) - xy(center);
  const double d = n.norm();
  const double depth = radius + o.radius - d;
  if (depth <= 1e-12) return false;
  if (d < 1e-12) n = Eigen::Vector2d(1.0, 0.0);
  else n /= d;
  o.position.head<2>() += fraction * depth * n;
  return true;
}

inline void resolve_contacts(WorldState& w, const WorldParams& p) {
  for (int iter = 0; iter < 100; ++iter) {
    bool moved = false;
    for (auto& o : w.objects) {
      if (o.attached || !effector_level(w.effector, o)) continue;
      const double d = (xy(o.position) - xy(w.effector.position)).norm();
      if (d < p.grasp_radius) continue;  // fingers straddle the object
      moved |= push_out(o, w.effector.position, p.effector_radius);
    }
    for (std::size_t i = 0; i < w.objects.size(); ++i) {
      for (std::size_t j = i + 1; j < w.objects.size(); ++j) {
        auto& a = w.objects[i];
        auto& b = w.objects[j];
        if (!vertical_overlap(a, b)) continue;
        if (a.attached && b.attached) continue;
        if (a.attached) moved |= push_out(b, a.position, a.radius);
        else if (b.attached) moved |= push_out(a, b.position, b.radius);
        else {
          const Eigen::Vector2d n = xy(b.position) - xy(a.position);
          const double d = n.norm();
          const double depth = a.radius + b.radius - d;
          if (depth > 1e-12) {
            const Eigen::Vector2d dir = d < 1e-12 ? Eigen::Vector2d(1.0, 0.0) : Eigen::Vector2d(n / d);
            a.position.head<2>() -= 0.5 * depth * dir;
            b.position.head<2>() += 0.5 * depth * dir;
            moved = true;
          }
        }
      }
    }
    if (!moved) return;
  }
}

inline void try_grasp(WorldState& w, const WorldParams& p) {
  if (w.held() != nullptr) return;
  ObjectState* best = nullptr;
  double best_d = std::numeric_limits<double>::infinity();
  for (auto& o : w.objects) {
    if (o.height <= 0.0) continue;
    const double d = (xy(o.position) - xy(w.effector.position)).norm();
    const double dz = std::abs(w.effector.position.z() - o.center().z());
    if (d < p.grasp_radius && dz <= p.grasp_z_tolerance && (d < best_d || (d == best_d && o.id < best->id))) {
      best = &o;
      best_d = d;
    }
  }
  if (best == nullptr) return;
  best->attached = true;
  best->attach_offset = rotate_z(best->position - w.effector.position, -w.effector.yaw);
  best->attach_yaw = best->yaw - w.effector.yaw;
}

/// Height an object released at its current pose comes to rest on.
inline double support_height(const WorldState& w, const ObjectState& o) {
  double z = w.table_height;
  for (const auto& s : w.objects) {
    if (&s == &o || s.attached) continue;
    const double d = (xy(o.position) - xy(s.position)).norm();
    if (d < s.radius && s.top() <= o.position.z() + 1e-6) z = std::max(z, s.top());
  }
  return z;
}

inline void release(WorldState& w) {
  for (auto& o : w.objects) {
    if (!o.attached) continue;
    o.attached = false;
    o.position.z() = support_height(w, o);
  }
}

}  // namespace detail

/// Advances the world by one control step. Actions are scaled by the gains and
/// clipped, never rejected.
inline WorldState step(const WorldState& state, const Action& action, const ControllerGains& gains,
                       const WorldParams& params = {}) {
  WorldState w = state;
  auto finite_or_zero = [](double v) { return std::isfinite(v) ? v : 0.0; };

  Vec3 d;
  for (int k = 0; k < 3; ++k)
    d[k] = std::clamp(finite_or_zero(action.du[k]) * gains.xyz, -params.step_clip, params.step_clip);
  const double dyaw =
      std::clamp(finite_or_zero(action.du[3]) * gains.rotation, -params.yaw_clip, params.yaw_clip);
  d.z() = std::max(d.z(), w.table_height - w.effector.position.z());

  if (action.grip_close) {
    w.effector.gripper_gap = params.gap_closed;
    detail::try_grasp(w, params);
  } else {
    w.effector.gripper_gap = params.gap_open;
    if (w.held() != nullptr) {
      detail::release(w);
      detail::resolve_contacts(w, params);
    }
  }

  if (d.isZero(0.0) && dyaw == 0.0) return w;

  const int n = std::max(1, static_cast<int>(std::ceil(std::max(d.norm() / params.substep, std::abs(dyaw) / 0.05))));
  const Vec3 start = w.effector.position;
  const double yaw0 = w.effector.yaw;
  for (int k = 1; k <= n; ++k) {
    const double f = static_cast<double>(k) / n;
    w.effector.position = start + f * d;
    w.effector.yaw = yaw0 + f * dyaw;
    detail::place_held(w);
    if (action.grip_close) detail::try_grasp(w, params);
    detail::resolve_contacts(w, params);
  }
  // Exact end pose (no accumulated interpolation error).
  w.effector.position = start + d;
  w.effector.yaw = yaw0 + dyaw;
  detail::place_held(w);
  return w;
}

/// Smallest signed footprint clearance over vertically overlapping object pairs.
inline double min_footprint_clearance(const WorldState& w) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < w.objects.size(); ++i)
    for (std::size_t j = i + 1; j < w.objects.size(); ++j) {
      const auto& a = w.objects[i];
      const auto& b = w.objects[j];
      if (!detail::vertical_overlap(a, b)) continue;
      m = std::min(m, (detail::xy(a.position) - detail::xy(b.position)).norm() - a.radius - b.radius);
    }
  return m;
}

}  // namespace veg
