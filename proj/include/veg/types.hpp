#pragma once

#include <Eigen/Dense>

#include <compare>
#include <cstdint>
#include <functional>
#include <string>
#include <string_view>

namespace veg {

using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;
using VecX = Eigen::VectorXd;
using MatX = Eigen::MatrixXd;

/// Entity identifier shared between the demonstrator and imitator traces.
/// Ordering is lexicographic and is the tie-break used throughout.
class EntityId {
 public:
  EntityId() = default;
  EntityId(std::string value) : value_(std::move(value)) {}  // NOLINT implicit
  EntityId(const char* value) : value_(value) {}             // NOLINT implicit

  const std::string& str() const noexcept { return value_; }
  bool empty() const noexcept { return value_.empty(); }

  friend bool operator==(const EntityId&, const EntityId&) = default;
  friend auto operator<=>(const EntityId&, const EntityId&) = default;

 private:
  std::string value_;
};

enum class EntityKind { Object, Point, Hand };

inline std::string_view to_string(EntityKind kind) {
  switch (kind) {
    case EntityKind::Object: return "object";
    case EntityKind::Point: return "point";
    case EntityKind::Hand: return "hand";
  }
  return "object";
}

// FNV-1a; stable across platforms, used to key per-entity random streams.
inline std::uint64_t stable_hash(std::string_view s) {
  std::uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Derives an independent stream seed from a base seed and a list of keys.
template <typename... Keys>
std::uint64_t derive_seed(std::uint64_t base, Keys... keys) {
  std::uint64_t s = splitmix64(base);
  ((s = splitmix64(s ^ static_cast<std::uint64_t>(keys))), ...);
  return s;
}

inline bool all_finite(const Vec3& v) { return v.allFinite(); }

}  // namespace veg

template <>
struct std::hash<veg::EntityId> {
  std::size_t operator()(const veg::EntityId& id) const noexcept {
    return std::hash<std::string>{}(id.str());
  }
};
