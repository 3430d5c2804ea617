#pragma once

// Simulated entity detector. Reports the hand, every object center, and K points
// per object. Points are fixed body-frame samples (uniform over the cylinder
// footprint) carried through the current object pose, so demonstrations and
// imitations built with the same points_seed share point identities.
//
// Noise and occlusion draws are keyed by (seed, frame, entity id): adding or
// removing entities never changes what the others report.

#include "veg/error.hpp"
#include "veg/trace.hpp"
#include "veg/world.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <map>
#include <random>
#include <string>
#include <vector>

namespace veg {

inline const EntityId kHandId{"hand"};

struct DetectorConfig {
  double sigma = 0.002;
  double p_occlusion = 0.0;
  int points_per_object = 8;
  std::uint64_t seed = 0;
  std::uint64_t points_seed = 0;

  void validate() const {
    if (!(sigma >= 0.0)) throw Error(ErrorCode::InvalidConfig, "detector sigma must be >= 0");
    // p = 1 is admitted so that a run can hold every entity after its first sighting.
    if (!(p_occlusion >= 0.0 && p_occlusion <= 1.0))
      throw Error(ErrorCode::InvalidConfig, "p_occlusion must lie in [0, 1]");
    if (points_per_object < 0) throw Error(ErrorCode::InvalidConfig, "points_per_object must be >= 0");
  }
};

inline EntityId point_id(const EntityId& object, int k) { return EntityId(object.str() + "/p" + std::to_string(k)); }

/// Body-frame point samples of an object, relative to its center.
inline std::vector<Vec3> body_frame_points(const ObjectState& o, int count, std::uint64_t points_seed) {
  std::mt19937_64 rng(derive_seed(points_seed, stable_hash(o.id.str())));
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  std::vector<Vec3> pts;
  pts.reserve(static_cast<std::size_t>(count));
  for (int k = 0; k < count; ++k) {
    const double r = o.radius * std::sqrt(unit(rng));
    const double a = 2.0 * M_PI * unit(rng);
    const double z = (unit(rng) - 0.5) * o.height;
    pts.emplace_back(r * std::cos(a), r * std::sin(a), z);
  }
  return pts;
}

/// World position of a body-frame point on an object.
inline Vec3 point_world(const ObjectState& o, const Vec3& body) { return o.center() + detail::rotate_z(body, o.yaw); }

class Detector {
 public:
  explicit Detector(DetectorConfig cfg) : cfg_(cfg) { cfg_.validate(); }

  const DetectorConfig& config() const noexcept { return cfg_; }
  int frames_emitted() const noexcept { return frame_; }

  TraceFrame detect(const WorldState& world) { return detect(world, cfg_); }

  /// Detects with an explicit config for this frame (seeds and point samples stay those of construction).
  TraceFrame detect(const WorldState& world, const DetectorConfig& frame_cfg) {
    frame_cfg.validate();
    TraceFrame frame;
    frame.t = frame_;

    TraceEntity hand;
    hand.id = kHandId;
    hand.kind = EntityKind::Hand;
    hand.position = world.effector.position;
    hand.finger_gap = world.effector.gripper_gap;
    frame.entities.push_back(observe(std::move(hand), frame_cfg));

    std::vector<const ObjectState*> objects;
    for (const auto& o : world.objects) objects.push_back(&o);
    std::sort(objects.begin(), objects.end(), [](auto* a, auto* b) { return a->id < b->id; });
    for (const auto* o : objects) {
      TraceEntity obj;
      obj.id = o->id;
      obj.kind = EntityKind::Object;
      obj.position = o->center();
      frame.entities.push_back(observe(std::move(obj), frame_cfg));

      const auto& body = body_points(*o);
      for (std::size_t k = 0; k < body.size(); ++k) {
        TraceEntity p;
        p.id = point_id(o->id, static_cast<int>(k));
        p.kind = EntityKind::Point;
        p.parent = o->id;
        p.position = point_world(*o, body[k]);
        frame.entities.push_back(observe(std::move(p), frame_cfg));
      }
    }
    ++frame_;
    return frame;
  }

  const std::vector<Vec3>& body_points(const ObjectState& o) {
    auto it = body_.find(o.id);
    if (it == body_.end())
      it = body_.emplace(o.id, body_frame_points(o, cfg_.points_per_object, cfg_.points_seed)).first;
    return it->second;
  }

 private:
  TraceEntity observe(TraceEntity truth, const DetectorConfig& frame_cfg) {
    std::mt19937_64 rng(derive_seed(cfg_.seed, static_cast<std::uint64_t>(frame_), stable_hash(truth.id.str())));
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const bool occluded = unit(rng) < frame_cfg.p_occlusion;
    auto last = last_.find(truth.id);
    if (occluded && last != last_.end()) {
      TraceEntity held = last->second;
      held.occluded = true;
      return held;
    }
    if (frame_cfg.sigma > 0.0) {
      std::normal_distribution<double> noise(0.0, frame_cfg.sigma);
      for (int k = 0; k < 3; ++k) truth.position[k] += noise(rng);
    }
    truth.occluded = false;
    last_[truth.id] = truth;
    return truth;
  }

  DetectorConfig cfg_;
  int frame_ = 0;
  std::map<EntityId, TraceEntity> last_;
  std::map<EntityId, std::vector<Vec3>> body_;
};

}  // namespace veg
