#pragma once

#include <json.hpp>
#include <stdexcept>
#include <string>

#include "gapflight/geometry.hpp"
#include "gapflight/track.hpp"

namespace gapflight {

using Json = nlohmann::json;

/// Schema or value error in a configuration or data file. `where` is a
/// dotted field path, optionally prefixed with "line N".
class ConfigError : public std::runtime_error {
 public:
  ConfigError(std::string where, const std::string& message)
      : std::runtime_error(where.empty() ? message : where + ": " + message),
        where_(std::move(where)),
        message_(message) {}

  const std::string& where() const { return where_; }
  const std::string& message() const { return message_; }

  /// Same error with an outer location prepended.
  ConfigError within(const std::string& outer) const {
    return ConfigError(where_.empty() ? outer : outer + ": " + where_, message_);
  }

 private:
  std::string where_;
  std::string message_;
};

namespace io {

inline std::string join_path(const std::string& base, const std::string& key) {
  return base.empty() ? key : base + "." + key;
}

inline std::string index_path(const std::string& base, std::size_t i) {
  return base + "[" + std::to_string(i) + "]";
}

inline const Json& require(const Json& obj, const std::string& key, const std::string& path) {
  if (!obj.is_object()) throw ConfigError(path, "expected an object");
  auto it = obj.find(key);
  if (it == obj.end()) throw ConfigError(join_path(path, key), "missing required field");
  return *it;
}

inline double get_number(const Json& j, const std::string& path) {
  if (!j.is_number()) throw ConfigError(path, "expected a number");
  const double v = j.get<double>();
  if (!std::isfinite(v)) throw ConfigError(path, "value must be finite");
  return v;
}

inline double number_field(const Json& obj, const std::string& key, const std::string& path) {
  return get_number(require(obj, key, path), join_path(path, key));
}

inline double number_or(const Json& obj, const std::string& key, double fallback,
                        const std::string& path) {
  if (!obj.contains(key)) return fallback;
  return get_number(obj.at(key), join_path(path, key));
}

inline long long integer_or(const Json& obj, const std::string& key, long long fallback,
                            const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const Json& j = obj.at(key);
  if (!j.is_number_integer()) throw ConfigError(join_path(path, key), "expected an integer");
  return j.get<long long>();
}

inline bool bool_or(const Json& obj, const std::string& key, bool fallback,
                    const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const Json& j = obj.at(key);
  if (!j.is_boolean()) throw ConfigError(join_path(path, key), "expected true or false");
  return j.get<bool>();
}

inline std::string string_or(const Json& obj, const std::string& key, const std::string& fallback,
                             const std::string& path) {
  if (!obj.contains(key)) return fallback;
  const Json& j = obj.at(key);
  if (!j.is_string()) throw ConfigError(join_path(path, key), "expected a string");
  return j.get<std::string>();
}

template <std::size_t N>
std::array<double, N> get_array(const Json& j, const std::string& path) {
  if (!j.is_array() || j.size() != N)
    throw ConfigError(path, "expected an array of " + std::to_string(N) + " numbers");
  std::array<double, N> out{};
  for (std::size_t i = 0; i < N; ++i) out[i] = get_number(j[i], index_path(path, i));
  return out;
}

inline Vec3 get_vec3(const Json& j, const std::string& path) {
  const auto a = get_array<3>(j, path);
  return {a[0], a[1], a[2]};
}

inline Vec2 get_vec2(const Json& j, const std::string& path) {
  const auto a = get_array<2>(j, path);
  return {a[0], a[1]};
}

// Quaternions are stored as [w, x, y, z].
inline Quat get_quat(const Json& j, const std::string& path, double unit_tol = 1e-6) {
  const auto a = get_array<4>(j, path);
  const Quat q(a[0], a[1], a[2], a[3]);
  if (std::abs(q.norm() - 1.0) > unit_tol) throw ConfigError(path, "quaternion is not unit norm");
  return q;
}

inline Json to_json(const Vec3& v) { return Json::array({v.x(), v.y(), v.z()}); }
inline Json to_json(const Vec2& v) { return Json::array({v.x(), v.y()}); }
inline Json to_json(const Quat& q) { return Json::array({q.w(), q.x(), q.y(), q.z()}); }

inline Json shape_to_json(const GapShape& shape) {
  Json j;
  j["kind"] = shape_kind(shape);
  std::visit(
      [&](const auto& s) {
        using T = std::decay_t<decltype(s)>;
        if constexpr (std::is_same_v<T, Rectangle>) {
          j["width"] = s.width;
          j["height"] = s.height;
        } else if constexpr (std::is_same_v<T, Triangle>) {
          j["vertices"] = Json::array();
          for (const auto& v : s.vertices) j["vertices"].push_back(to_json(v));
        } else if constexpr (std::is_same_v<T, Parallelogram>) {
          j["base"] = s.base;
          j["side"] = s.side;
          j["angle"] = s.angle;
        } else if constexpr (std::is_same_v<T, Ellipse>) {
          j["semi_u"] = s.semi_u;
          j["semi_v"] = s.semi_v;
        } else if constexpr (std::is_same_v<T, Diamond>) {
          j["diagonal_u"] = s.diagonal_u;
          j["diagonal_v"] = s.diagonal_v;
        } else {
          j["radius"] = s.radius;
          j["leg_height"] = s.leg_height;
          j["width"] = s.width;
        }
      },
      shape);
  return j;
}

// Missing dimensions fall back to the shape's defaults.
inline GapShape shape_from_json(const Json& j, const std::string& path) {
  if (!j.is_object()) throw ConfigError(path, "expected a shape object");
  const std::string kind = string_or(j, "kind", "", path);
  GapShape out;
  if (kind == "rectangle") {
    Rectangle r;
    r.width = number_or(j, "width", r.width, path);
    r.height = number_or(j, "height", r.height, path);
    out = r;
  } else if (kind == "triangle") {
    Triangle t;
    if (j.contains("vertices")) {
      const Json& v = j.at("vertices");
      const std::string vp = join_path(path, "vertices");
      if (!v.is_array() || v.size() != 3) throw ConfigError(vp, "expected 3 vertices");
      for (std::size_t i = 0; i < 3; ++i) t.vertices[i] = get_vec2(v[i], index_path(vp, i));
    }
    out = t;
  } else if (kind == "parallelogram") {
    Parallelogram p;
    p.base = number_or(j, "base", p.base, path);
    p.side = number_or(j, "side", p.side, path);
    p.angle = number_or(j, "angle", p.angle, path);
    out = p;
  } else if (kind == "ellipse") {
    Ellipse e;
    e.semi_u = number_or(j, "semi_u", e.semi_u, path);
    e.semi_v = number_or(j, "semi_v", e.semi_v, path);
    out = e;
  } else if (kind == "diamond") {
    Diamond d;
    d.diagonal_u = number_or(j, "diagonal_u", d.diagonal_u, path);
    d.diagonal_v = number_or(j, "diagonal_v", d.diagonal_v, path);
    out = d;
  } else if (kind == "arch") {
    Arch a;
    a.radius = number_or(j, "radius", a.radius, path);
    a.leg_height = number_or(j, "leg_height", a.leg_height, path);
    a.width = number_or(j, "width", a.width, path);
    out = a;
  } else {
    throw ConfigError(join_path(path, "kind"),
                      "unknown shape kind '" + kind +
                          "' (expected rectangle, triangle, parallelogram, ellipse, diamond, arch)");
  }
  try {
    validate(out);
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return out;
}

inline Json gap_to_json(const GapSpec& g) {
  return {{"center", to_json(g.center)}, {"frame", to_json(g.frame)},
          {"shape", shape_to_json(g.shape)}};
}

inline GapSpec gap_from_json(const Json& j, const std::string& path) {
  GapSpec g;
  g.center = get_vec3(require(j, "center", path), join_path(path, "center"));
  g.frame = get_quat(require(j, "frame", path), join_path(path, "frame")).normalized();
  g.shape = shape_from_json(require(j, "shape", path), join_path(path, "shape"));
  return g;
}

inline Json interval_to_json(const Interval& i) { return Json::array({i.lo, i.hi}); }

// Either a scalar (fixed value) or [lo, hi].
inline Interval interval_from_json(const Json& j, const std::string& path) {
  if (j.is_number()) return Interval::point(get_number(j, path));
  const auto a = get_array<2>(j, path);
  if (a[0] > a[1]) throw ConfigError(path, "range lower bound exceeds upper bound");
  return {a[0], a[1]};
}

inline Json box_to_json(const Box3& b) {
  return {{"x", interval_to_json(b.x)}, {"y", interval_to_json(b.y)}, {"z", interval_to_json(b.z)}};
}

inline Box3 box_from_json(const Json& j, const std::string& path) {
  Box3 b;
  b.x = interval_from_json(require(j, "x", path), join_path(path, "x"));
  b.y = interval_from_json(require(j, "y", path), join_path(path, "y"));
  b.z = interval_from_json(require(j, "z", path), join_path(path, "z"));
  return b;
}

inline Json track_to_json(const TrackConfig& t) {
  Json gaps = Json::array();
  for (const auto& g : t.gaps)
    gaps.push_back({{"shape", shape_to_json(g.shape)},
                    {"normal", to_json(g.normal)},
                    {"position", box_to_json(g.position)},
                    {"roll", interval_to_json(g.roll)}});
  return {{"name", t.name},
          {"gaps", gaps},
          {"start_region", box_to_json(t.start_region)},
          {"exit_margin", t.exit_margin}};
}

/// A track is either a preset name, or an object optionally naming a
/// preset as its base and overriding fields.
inline TrackConfig track_from_json(const Json& j, const std::string& path) {
  if (j.is_string()) {
    try {
      return presets::track(j.get<std::string>());
    } catch (const std::invalid_argument& e) {
      throw ConfigError(path, e.what());
    }
  }
  if (!j.is_object()) throw ConfigError(path, "expected a preset name or a track object");
  TrackConfig t;
  if (j.contains("preset")) t = track_from_json(j.at("preset"), join_path(path, "preset"));
  t.name = string_or(j, "name", t.name, path);
  if (j.contains("gaps")) {
    const Json& gs = j.at("gaps");
    const std::string gp = join_path(path, "gaps");
    if (!gs.is_array() || gs.empty()) throw ConfigError(gp, "expected a non-empty array");
    t.gaps.clear();
    for (std::size_t i = 0; i < gs.size(); ++i) {
      const std::string p = index_path(gp, i);
      const Json& g = gs[i];
      if (!g.is_object()) throw ConfigError(p, "expected an object");
      TrackGap tg;
      if (g.contains("shape")) tg.shape = shape_from_json(g.at("shape"), join_path(p, "shape"));
      if (g.contains("normal")) tg.normal = get_vec3(g.at("normal"), join_path(p, "normal"));
      if (g.contains("position")) tg.position = box_from_json(g.at("position"), join_path(p, "position"));
      if (g.contains("roll")) tg.roll = interval_from_json(g.at("roll"), join_path(p, "roll"));
      t.gaps.push_back(tg);
    }
  }
  if (j.contains("start_region"))
    t.start_region = box_from_json(j.at("start_region"), join_path(path, "start_region"));
  t.exit_margin = number_or(j, "exit_margin", t.exit_margin, path);
  try {
    t.validate();
  } catch (const std::invalid_argument& e) {
    throw ConfigError(path, e.what());
  }
  return t;
}

}  // namespace io
}  // namespace gapflight
