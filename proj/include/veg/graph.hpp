#pragma once

// Visual entity graphs, motion-saliency attention and the relative-arrangement
// dissimilarity between a demonstrator graph and an imitator graph.
//
// Per timestep the cost is
//
//   C(G_D, G_I) = sum_{i<j} w(E_ij) * att(E_ij) * || (x_Di - x_Dj) - (x_Ii - x_Ij) ||_2
//
// with weights tied per edge type and att() set by the anchor rule: only edges
// rooted at the anchor object are attended.

#include "veg/error.hpp"
#include "veg/trace.hpp"
#include "veg/types.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <optional>
#include <set>
#include <vector>

namespace veg {

struct Node {
  EntityId id;
  EntityKind kind = EntityKind::Object;
  Vec3 position = Vec3::Zero();
  std::optional<EntityId> parent;
};

enum class EdgeKind { ObjectObject, ObjectHand, ObjectPoint };

struct Edge {
  EntityId a;  // always the object end (for ObjectObject, the smaller id)
  EntityId b;
  EdgeKind kind = EdgeKind::ObjectObject;
  double weight = 0.0;
  bool attended = false;

  bool operator==(const Edge&) const = default;
};

struct CostConfig {
  double w_object_hand = 1.0;
  double w_object_object = 1.0;
  double w_object_point = 0.0;
  double smoothing_gamma = 1e-5;
  double motion_threshold = 0.005;  // meters over the window
  int motion_window = 3;            // frames

  double weight(EdgeKind kind) const {
    switch (kind) {
      case EdgeKind::ObjectObject: return w_object_object;
      case EdgeKind::ObjectHand: return w_object_hand;
      case EdgeKind::ObjectPoint: return w_object_point;
    }
    return 0.0;
  }

  void validate() const {
    if (!(w_object_hand >= 0.0 && w_object_object >= 0.0 && w_object_point >= 0.0))
      throw Error(ErrorCode::InvalidConfig, "edge weights must be >= 0");
    if (!(smoothing_gamma > 0.0)) throw Error(ErrorCode::InvalidConfig, "smoothing_gamma must be > 0");
    if (!(motion_threshold > 0.0)) throw Error(ErrorCode::InvalidConfig, "motion_threshold must be > 0");
    if (motion_window < 1) throw Error(ErrorCode::InvalidConfig, "motion_window must be >= 1");
  }
};

/// G^t: nodes sorted by id, full hierarchical edge set with attention flags.
struct VisualEntityGraph {
  int timestep = 0;
  std::vector<Node> nodes;
  std::vector<Edge> edges;

  const Node* find(const EntityId& id) const {
    auto it = std::lower_bound(nodes.begin(), nodes.end(), id,
                               [](const Node& n, const EntityId& key) { return n.id < key; });
    return (it != nodes.end() && it->id == id) ? &*it : nullptr;
  }

  const Node& at(const EntityId& id) const {
    if (const auto* n = find(id)) return *n;
    throw Error(ErrorCode::MissingEntity, "node '" + id.str() + "' not in graph");
  }

  std::size_t attended_edge_count() const {
    return static_cast<std::size_t>(
        std::count_if(edges.begin(), edges.end(), [](const Edge& e) { return e.attended; }));
  }
};

namespace detail {

inline std::set<EntityId> object_ids(const EntityTrace& trace) {
  std::set<EntityId> ids;
  for (const auto& f : trace.frames)
    for (const auto& e : f.entities)
      if (e.kind == EntityKind::Object) ids.insert(e.id);
  return ids;
}

/// Trailing-window displacement of an object at t, or nullopt if it is not observed at both ends.
inline std::optional<double> trailing_displacement(const EntityTrace& trace, int t, const EntityId& id,
                                                   int window) {
  const int t0 = std::max(0, t - window);
  const auto* now = trace.frames[static_cast<std::size_t>(t)].find(id);
  const auto* then = trace.frames[static_cast<std::size_t>(t0)].find(id);
  if (now == nullptr || then == nullptr) return std::nullopt;
  return (now->position - then->position).norm();
}

/// Fastest mover at t above threshold (ties: smallest id).
inline std::optional<EntityId> mover_at(const EntityTrace& trace, int t, const CostConfig& cfg) {
  std::optional<EntityId> best;
  double best_disp = -1.0;
  for (const auto& id : trace.frames[static_cast<std::size_t>(t)].ids_of(EntityKind::Object)) {
    const auto d = trailing_displacement(trace, t, id, cfg.motion_window);
    if (d && *d > cfg.motion_threshold && *d > best_disp) {
      best = id;
      best_disp = *d;
    }
  }
  return best;
}

}  // namespace detail

/// Anchor object at t: the object in motion; otherwise the closest-in-the-future
/// mover; otherwise the object nearest the hand (ties lexicographic).
inline EntityId select_anchor(const EntityTrace& trace, int t, const CostConfig& cfg) {
  if (detail::object_ids(trace).empty()) throw Error(ErrorCode::NoObjects, "trace has no object entities");
  if (t < 0 || t >= static_cast<int>(trace.size()))
    throw Error(ErrorCode::MissingEntity, "timestep " + std::to_string(t) + " outside trace");

  for (int s = t; s < static_cast<int>(trace.size()); ++s) {
    if (auto mover = detail::mover_at(trace, s, cfg)) {
      // A future mover must also be visible now to root edges at t.
      if (s == t || trace.frames[static_cast<std::size_t>(t)].find(*mover) != nullptr) return *mover;
    }
  }

  const auto& frame = trace.frames[static_cast<std::size_t>(t)];
  const auto objects = frame.ids_of(EntityKind::Object);
  if (objects.empty()) throw Error(ErrorCode::NoObjects, "no object visible at t=" + std::to_string(t));
  const auto* hand = frame.hand();
  if (hand == nullptr) return objects.front();
  EntityId best = objects.front();
  double best_d = std::numeric_limits<double>::infinity();
  for (const auto& id : objects) {
    const double d = (frame.at(id).position - hand->position).norm();
    if (d < best_d) {
      best_d = d;
      best = id;
    }
  }
  return best;
}

/// Anchor for every timestep of a (demonstrator) trace.
inline std::vector<EntityId> anchor_timeline(const EntityTrace& trace, const CostConfig& cfg) {
  std::vector<EntityId> out;
  out.reserve(trace.size());
  for (int t = 0; t < static_cast<int>(trace.size()); ++t) out.push_back(select_anchor(trace, t, cfg));
  return out;
}

/// Graph for one frame. When `keep` is given, entities outside it (and points of
/// excluded objects) are dropped: they have no demonstrator correspondent.
inline VisualEntityGraph build_graph(const TraceFrame& frame, const EntityId& anchor, const CostConfig& cfg,
                                     const std::set<EntityId>* keep = nullptr) {
  const auto* anchor_entity = frame.find(anchor);
  if (anchor_entity == nullptr || anchor_entity->kind != EntityKind::Object ||
      (keep != nullptr && !keep->contains(anchor)))
    throw Error(ErrorCode::MissingEntity, "anchor '" + anchor.str() + "' absent at t=" + std::to_string(frame.t));

  auto kept = [&](const EntityId& id) { return keep == nullptr || keep->contains(id); };

  VisualEntityGraph g;
  g.timestep = frame.t;
  for (const auto& e : frame.entities) {
    if (!kept(e.id)) continue;
    if (e.parent && !kept(*e.parent)) continue;
    g.nodes.push_back(Node{e.id, e.kind, e.position, e.parent});
  }
  std::sort(g.nodes.begin(), g.nodes.end(), [](const Node& x, const Node& y) { return x.id < y.id; });

  std::vector<const Node*> objects, hands, points;
  for (const auto& n : g.nodes) {
    if (n.kind == EntityKind::Object) objects.push_back(&n);
    else if (n.kind == EntityKind::Hand) hands.push_back(&n);
    else points.push_back(&n);
  }
  auto add = [&](const EntityId& a, const EntityId& b, EdgeKind kind, bool attended) {
    g.edges.push_back(Edge{a, b, kind, cfg.weight(kind), attended});
  };
  for (std::size_t i = 0; i < objects.size(); ++i)
    for (std::size_t j = i + 1; j < objects.size(); ++j)
      add(objects[i]->id, objects[j]->id, EdgeKind::ObjectObject,
          objects[i]->id == anchor || objects[j]->id == anchor);
  for (const auto* o : objects)
    for (const auto* h : hands) add(o->id, h->id, EdgeKind::ObjectHand, o->id == anchor);
  for (const auto* p : points) add(*p->parent, p->id, EdgeKind::ObjectPoint, *p->parent == anchor);
  return g;
}

inline VisualEntityGraph build_graph(const EntityTrace& trace, int t, const EntityId& anchor, const CostConfig& cfg,
                                     const std::set<EntityId>* keep = nullptr) {
  if (t < 0 || t >= static_cast<int>(trace.size()))
    throw Error(ErrorCode::MissingEntity, "timestep " + std::to_string(t) + " outside trace");
  return build_graph(trace.frames[static_cast<std::size_t>(t)], anchor, cfg, keep);
}

namespace detail {

inline void require_same_structure(const VisualEntityGraph& d, const VisualEntityGraph& i) {
  if (d.nodes.size() != i.nodes.size())
    throw Error(ErrorCode::GraphMismatch, "node counts differ (" + std::to_string(d.nodes.size()) + " vs " +
                                              std::to_string(i.nodes.size()) + ")");
  for (std::size_t k = 0; k < d.nodes.size(); ++k) {
    if (d.nodes[k].id != i.nodes[k].id || d.nodes[k].kind != i.nodes[k].kind)
      throw Error(ErrorCode::GraphMismatch, "node '" + d.nodes[k].id.str() + "' has no counterpart");
  }
  if (d.edges != i.edges) throw Error(ErrorCode::GraphMismatch, "edge sets differ");
}

inline Vec3 edge_residual(const VisualEntityGraph& d, const VisualEntityGraph& i, const Edge& e) {
  return (d.at(e.a).position - d.at(e.b).position) - (i.at(e.a).position - i.at(e.b).position);
}

}  // namespace detail

/// Exact relative-arrangement dissimilarity (Euclidean norm per attended edge).
inline double graph_cost(const VisualEntityGraph& demo, const VisualEntityGraph& imit) {
  detail::require_same_structure(demo, imit);
  double cost = 0.0;
  for (const auto& e : demo.edges) {
    if (!e.attended || e.weight == 0.0) continue;
    cost += e.weight * detail::edge_residual(demo, imit, e).norm();
  }
  return cost;
}

struct SmoothedCost {
  double value = 0.0;
  std::map<EntityId, Vec3> gradient;  // d value / d imitator node position
};

/// sum w * sqrt(gamma + ||r||^2): differentiable everywhere, >= graph_cost, and
/// within |attended edges| * sqrt(gamma) of it.
inline SmoothedCost smoothed_graph_cost(const VisualEntityGraph& demo, const VisualEntityGraph& imit,
                                        const CostConfig& cfg) {
  detail::require_same_structure(demo, imit);
  SmoothedCost out;
  for (const auto& n : imit.nodes) out.gradient.emplace(n.id, Vec3::Zero());
  for (const auto& e : demo.edges) {
    if (!e.attended) continue;
    const Vec3 r = detail::edge_residual(demo, imit, e);
    const double rho = std::sqrt(cfg.smoothing_gamma + r.squaredNorm());
    out.value += e.weight * rho;
    // r depends on imitator positions as -(x_Ia - x_Ib).
    const Vec3 g = e.weight * r / rho;
    out.gradient[e.a] -= g;
    out.gradient[e.b] += g;
  }
  return out;
}

/// Per-timestep cost of an imitation against a demonstration. The anchor at each t
/// comes from the demonstrator timeline; imitator entities without a demonstrator
/// counterpart are ignored.
inline std::vector<double> sequence_cost(const EntityTrace& demo, const EntityTrace& imit, const CostConfig& cfg,
                                         const std::vector<EntityId>* anchors = nullptr) {
  if (demo.size() != imit.size())
    throw Error(ErrorCode::LengthMismatch, "demo has " + std::to_string(demo.size()) + " frames, imitation " +
                                               std::to_string(imit.size()));
  std::vector<EntityId> own;
  if (anchors == nullptr) {
    own = anchor_timeline(demo, cfg);
    anchors = &own;
  }
  std::vector<double> costs(demo.size(), 0.0);
  for (std::size_t t = 0; t < demo.size(); ++t) {
    std::set<EntityId> keep;
    for (const auto& e : demo.frames[t].entities) keep.insert(e.id);
    const auto gd = build_graph(demo.frames[t], (*anchors)[t], cfg);
    const auto gi = build_graph(imit.frames[t], (*anchors)[t], cfg, &keep);
    costs[t] = graph_cost(gd, gi);
  }
  return costs;
}

}  // namespace veg
