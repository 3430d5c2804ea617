#pragma once

#include "veg/error.hpp"
#include "veg/types.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <optional>
#include <set>
#include <string>
#include <vector>

namespace veg {

enum class Actor { Demonstrator, Imitator };

inline std::string_view to_string(Actor actor) {
  return actor == Actor::Demonstrator ? "demonstrator" : "imitator";
}

/// One detected entity in one frame.
struct TraceEntity {
  EntityId id;
  EntityKind kind = EntityKind::Object;
  Vec3 position = Vec3::Zero();
  std::optional<EntityId> parent;   // points only
  std::optional<double> finger_gap; // hands only, meters
  bool occluded = false;

  bool operator==(const TraceEntity&) const = default;
};

struct TraceFrame {
  int t = 0;
  std::vector<TraceEntity> entities;

  const TraceEntity* find(const EntityId& id) const {
    for (const auto& e : entities) {
      if (e.id == id) return &e;
    }
    return nullptr;
  }

  const TraceEntity& at(const EntityId& id) const {
    if (const auto* e = find(id)) return *e;
    throw Error(ErrorCode::MissingEntity, "entity '" + id.str() + "' absent at t=" + std::to_string(t));
  }

  /// Ids of the given kind, sorted.
  std::vector<EntityId> ids_of(EntityKind kind) const {
    std::vector<EntityId> out;
    for (const auto& e : entities) {
      if (e.kind == kind) out.push_back(e.id);
    }
    std::sort(out.begin(), out.end());
    return out;
  }

  /// First hand entity by id order, if any.
  const TraceEntity* hand() const {
    const TraceEntity* best = nullptr;
    for (const auto& e : entities) {
      if (e.kind == EntityKind::Hand && (best == nullptr || e.id < best->id)) best = &e;
    }
    return best;
  }

  bool operator==(const TraceFrame&) const = default;
};

struct TraceMeta {
  int length = 0;  // T
  double dt = 0.4;
  Actor actor = Actor::Demonstrator;
  std::string task;

  bool operator==(const TraceMeta&) const = default;
};

/// Time-indexed log of detected entities for one actor.
struct EntityTrace {
  TraceMeta meta;
  std::vector<TraceFrame> frames;

  std::size_t size() const noexcept { return frames.size(); }
  const TraceFrame& operator[](std::size_t t) const { return frames.at(t); }

  /// Every id that appears in any frame.
  std::set<EntityId> all_ids() const {
    std::set<EntityId> ids;
    for (const auto& f : frames) {
      for (const auto& e : f.entities) ids.insert(e.id);
    }
    return ids;
  }

  bool operator==(const EntityTrace&) const = default;
};

inline void validate_meta(const TraceMeta& meta) {
  if (meta.length < 1) throw Error(ErrorCode::InvalidMeta, "T must be >= 1");
  if (!(meta.dt > 0.0)) throw Error(ErrorCode::InvalidMeta, "dt must be > 0");
}

namespace detail {
[[noreturn]] inline void invalid(const std::string& what, int t) {
  throw Error(ErrorCode::ValidationError, what + " (frame t=" + std::to_string(t) + ")");
}
}  // namespace detail

/// Checks every frame-level invariant of a trace; throws ValidationError naming the first violation.
inline void validate_frames(const std::vector<TraceFrame>& frames) {
  struct Identity {
    EntityKind kind;
    std::optional<EntityId> parent;
  };
  std::map<EntityId, Identity> seen;
  std::optional<int> prev_t;
  for (const auto& frame : frames) {
    if (prev_t && frame.t <= *prev_t) detail::invalid("t not strictly increasing", frame.t);
    prev_t = frame.t;
    std::set<EntityId> ids;
    for (const auto& e : frame.entities) {
      if (e.id.empty()) detail::invalid("empty entity id", frame.t);
      if (!ids.insert(e.id).second) detail::invalid("duplicate id '" + e.id.str() + "'", frame.t);
      if (!e.position.allFinite()) detail::invalid("non-finite position for '" + e.id.str() + "'", frame.t);
      if (e.kind == EntityKind::Point && !e.parent)
        detail::invalid("point '" + e.id.str() + "' lacks parent", frame.t);
      if (e.kind != EntityKind::Point && e.parent)
        detail::invalid("non-point '" + e.id.str() + "' has parent", frame.t);
      if (e.finger_gap) {
        if (e.kind != EntityKind::Hand)
          detail::invalid("finger_gap on non-hand '" + e.id.str() + "'", frame.t);
        if (!(*e.finger_gap >= 0.0) || !std::isfinite(*e.finger_gap))
          detail::invalid("negative finger_gap for '" + e.id.str() + "'", frame.t);
      }
      auto [it, inserted] = seen.try_emplace(e.id, Identity{e.kind, e.parent});
      if (!inserted && (it->second.kind != e.kind || it->second.parent != e.parent))
        detail::invalid("kind/parent of '" + e.id.str() + "' changed across frames", frame.t);
    }
    for (const auto& e : frame.entities) {
      if (!e.parent) continue;
      const auto* p = frame.find(*e.parent);
      if (p == nullptr || p->kind != EntityKind::Object)
        detail::invalid("parent '" + e.parent->str() + "' of '" + e.id.str() + "' is not an object in frame",
                        frame.t);
    }
  }
}

inline void validate_trace(const EntityTrace& trace) {
  validate_meta(trace.meta);
  if (static_cast<int>(trace.frames.size()) != trace.meta.length)
    throw Error(ErrorCode::ValidationError, "frame count " + std::to_string(trace.frames.size()) +
                                                " does not match T=" + std::to_string(trace.meta.length));
  validate_frames(trace.frames);
}

}  // namespace veg
