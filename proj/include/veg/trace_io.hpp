#pragma once

// Entity traces on disk: newline-delimited JSON. Line 1 is the header
//   {"T":30,"actor":"demonstrator","dt":0.4,"task":"push-straight"}
// followed by one object per frame
//   {"entities":[{"id":"hand","kind":"hand","position":[x,y,z],"finger_gap":0.08,"occluded":false},...],"t":0}
// Reals are written with 9 significant digits.

#include "veg/error.hpp"
#include "veg/trace.hpp"

#include "json.hpp"

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

namespace veg {

using Json = nlohmann::json;

/// Rounds to 9 significant digits; the result prints back as at most 9 digits.
inline double round9(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::strtod(buf, nullptr);
}

namespace detail {

inline Json vec_json(const Vec3& v) { return Json::array({round9(v.x()), round9(v.y()), round9(v.z())}); }

inline Json meta_json(const TraceMeta& meta) {
  return Json{{"T", meta.length}, {"dt", round9(meta.dt)}, {"actor", std::string(to_string(meta.actor))},
              {"task", meta.task}};
}

inline Json frame_json(const TraceFrame& frame) {
  Json entities = Json::array();
  for (const auto& e : frame.entities) {
    Json j{{"id", e.id.str()}, {"kind", std::string(to_string(e.kind))}, {"position", vec_json(e.position)},
           {"occluded", e.occluded}};
    if (e.parent) j["parent"] = e.parent->str();
    if (e.finger_gap) j["finger_gap"] = round9(*e.finger_gap);
    entities.push_back(std::move(j));
  }
  return Json{{"t", frame.t}, {"entities", std::move(entities)}};
}

[[noreturn]] inline void parse_fail(std::size_t line, const std::string& what) {
  throw Error(ErrorCode::ParseError, "line " + std::to_string(line) + ": " + what);
}

inline const Json& field(const Json& j, const char* key, std::size_t line) {
  auto it = j.find(key);
  if (it == j.end()) parse_fail(line, std::string("missing field '") + key + "'");
  return *it;
}

inline double number(const Json& j, const char* what, std::size_t line) {
  if (!j.is_number()) parse_fail(line, std::string(what) + " is not a number");
  return j.get<double>();
}

inline std::string text(const Json& j, const char* what, std::size_t line) {
  if (!j.is_string()) parse_fail(line, std::string(what) + " is not a string");
  return j.get<std::string>();
}

inline int integer(const Json& j, const char* what, std::size_t line) {
  if (!j.is_number_integer()) parse_fail(line, std::string(what) + " is not an integer");
  return j.get<int>();
}

inline TraceMeta parse_meta(const Json& j, std::size_t line) {
  if (!j.is_object()) parse_fail(line, "header is not an object");
  TraceMeta meta;
  meta.length = integer(field(j, "T", line), "T", line);
  meta.dt = j.contains("dt") ? number(j["dt"], "dt", line) : 0.4;
  const auto actor = text(field(j, "actor", line), "actor", line);
  if (actor == "demonstrator") meta.actor = Actor::Demonstrator;
  else if (actor == "imitator") meta.actor = Actor::Imitator;
  else parse_fail(line, "unknown actor '" + actor + "'");
  meta.task = j.contains("task") ? text(j["task"], "task", line) : std::string{};
  return meta;
}

inline EntityKind parse_kind(const std::string& s, std::size_t line) {
  if (s == "object") return EntityKind::Object;
  if (s == "point") return EntityKind::Point;
  if (s == "hand") return EntityKind::Hand;
  parse_fail(line, "unknown kind '" + s + "'");
}

inline TraceFrame parse_frame(const Json& j, std::size_t line) {
  if (!j.is_object()) parse_fail(line, "frame is not an object");
  TraceFrame frame;
  frame.t = integer(field(j, "t", line), "t", line);
  const auto& entities = field(j, "entities", line);
  if (!entities.is_array()) parse_fail(line, "entities is not an array");
  for (const auto& je : entities) {
    if (!je.is_object()) parse_fail(line, "entity is not an object");
    TraceEntity e;
    e.id = EntityId(text(field(je, "id", line), "id", line));
    e.kind = parse_kind(text(field(je, "kind", line), "kind", line), line);
    const auto& pos = field(je, "position", line);
    if (!pos.is_array() || pos.size() != 3) parse_fail(line, "position must be [x,y,z]");
    for (int k = 0; k < 3; ++k) e.position[k] = number(pos[static_cast<std::size_t>(k)], "position", line);
    if (je.contains("parent")) e.parent = EntityId(text(je["parent"], "parent", line));
    if (je.contains("finger_gap")) e.finger_gap = number(je["finger_gap"], "finger_gap", line);
    if (je.contains("occluded")) {
      if (!je["occluded"].is_boolean()) parse_fail(line, "occluded is not a boolean");
      e.occluded = je["occluded"].get<bool>();
    }
    frame.entities.push_back(std::move(e));
  }
  return frame;
}

}  // namespace detail

/// Validates then writes the trace; returns bytes written.
inline std::size_t write_trace(const TraceMeta& meta, const std::vector<TraceFrame>& frames, std::ostream& sink) {
  validate_trace(EntityTrace{meta, frames});
  std::size_t bytes = 0;
  auto emit = [&](const Json& j) {
    const std::string line = j.dump() + "\n";
    sink.write(line.data(), static_cast<std::streamsize>(line.size()));
    bytes += line.size();
  };
  emit(detail::meta_json(meta));
  for (const auto& f : frames) emit(detail::frame_json(f));
  if (!sink) throw Error(ErrorCode::IoError, "write failed");
  return bytes;
}

inline std::size_t write_trace(const EntityTrace& trace, std::ostream& sink) {
  return write_trace(trace.meta, trace.frames, sink);
}

inline EntityTrace read_trace(std::istream& source) {
  EntityTrace trace;
  std::string line;
  std::size_t lineno = 0;
  bool have_header = false;
  while (std::getline(source, line)) {
    ++lineno;
    if (line.empty()) continue;
    Json j;
    try {
      j = Json::parse(line);
    } catch (const Json::parse_error& e) {
      detail::parse_fail(lineno, e.what());
    }
    if (!have_header) {
      trace.meta = detail::parse_meta(j, lineno);
      have_header = true;
    } else {
      trace.frames.push_back(detail::parse_frame(j, lineno));
    }
  }
  if (!have_header) detail::parse_fail(lineno, "missing header line");
  validate_trace(trace);
  return trace;
}

inline std::size_t write_trace_file(const EntityTrace& trace, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "' for writing");
  return write_trace(trace, out);
}

inline EntityTrace read_trace_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error(ErrorCode::IoError, "cannot open '" + path.string() + "'");
  return read_trace(in);
}

/// Correspondence between a demonstration and an imitation. Demo entities the
/// imitation never shows are errors; imitation-only entities are clutter.
struct CorrespondenceReport {
  std::vector<EntityId> missing_in_imitation;
  std::vector<EntityId> clutter;
  std::optional<std::pair<std::size_t, std::size_t>> length_mismatch;

  bool ok() const { return missing_in_imitation.empty() && !length_mismatch; }
  bool empty() const { return ok() && clutter.empty(); }
};

inline CorrespondenceReport check_correspondence(const EntityTrace& demo, const EntityTrace& imit) {
  CorrespondenceReport report;
  if (demo.size() != imit.size()) report.length_mismatch = std::make_pair(demo.size(), imit.size());
  const auto d = demo.all_ids();
  const auto i = imit.all_ids();
  std::set_difference(d.begin(), d.end(), i.begin(), i.end(), std::back_inserter(report.missing_in_imitation));
  std::set_difference(i.begin(), i.end(), d.begin(), d.end(), std::back_inserter(report.clutter));
  return report;
}

}  // namespace veg
