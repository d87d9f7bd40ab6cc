// Procedural multi-view scenes with exact ground-truth depth.
//
// Scenes are unions of planes (optionally bounded to a rectangle) and
// spheres. Albedo is a world-anchored solid texture, so every view sees the
// same color at the same surface point; there is no shading.
#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <limits>
#include <optional>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"

#include "atv/common.hpp"
#include "atv/geometry.hpp"
#include "atv/parallel.hpp"

namespace atv {

struct PlanePrimitive {
  Vec3 point = Vec3::Zero();
  Vec3 normal = Vec3::UnitZ();
  std::optional<std::array<double, 2>> half_extent;  // along the plane's tangent axes, centered at `point`
};

struct SpherePrimitive {
  Vec3 center = Vec3::Zero();
  double radius = 1.0;
};

struct Primitive {
  std::variant<PlanePrimitive, SpherePrimitive> shape;
  std::uint32_t texture_seed = 0;
  double albedo_scale = 1.0;
};

struct TextureParams {
  double checker_size = 0.15;  // world units
  double noise_cell = 0.04;    // finest value-noise lattice spacing, world units
  int octaves = 3;
  double checker_weight = 0.35;
};

struct SceneSpec {
  std::string name;
  std::vector<Primitive> primitives;
  std::vector<CameraModel> cameras;
  double d_min = 0.0;
  double d_max = 0.0;
  TextureParams texture;
  int supersample = 3;  // per-axis color samples per pixel; depth uses the pixel center

  void validate() const;
};

struct RenderedViews {
  std::vector<ViewImage> images;
  std::vector<DepthMap> depths;  // 0 where the mask is false
  std::vector<Mask> masks;
};

namespace detail {

// Fixed permutation of 0..63 for the value-noise lattice.
inline constexpr std::array<std::uint8_t, 64> kNoisePermutation = {
    11, 56, 34, 57, 40, 32, 39, 52, 58, 14, 43, 62, 26, 29, 3,  33, 50, 4,  41, 63, 28, 38,
    53, 0,  48, 59, 60, 25, 30, 37, 51, 46, 5,  10, 20, 8,  45, 7,  54, 24, 49, 22, 19, 36,
    44, 61, 1,  55, 12, 9,  6,  31, 17, 21, 35, 16, 23, 2,  27, 15, 18, 42, 13, 47};

inline double lattice_value(std::int64_t ix, std::int64_t iy, std::int64_t iz, std::uint32_t seed) {
  const auto& p = kNoisePermutation;
  const auto m = [](std::int64_t v) { return static_cast<std::size_t>(((v % 64) + 64) % 64); };
  const std::size_t a = p[m(ix + seed)];
  const std::size_t b = p[m(static_cast<std::int64_t>(a) + iy + (seed >> 6))];
  const std::size_t c = p[m(static_cast<std::int64_t>(b) + iz + (seed >> 12))];
  return c / 63.0;
}

inline double smoothstep(double t) { return t * t * (3.0 - 2.0 * t); }

// Trilinear value noise in [0, 1].
inline double value_noise(const Vec3& q, std::uint32_t seed) {
  const double fx = std::floor(q.x());
  const double fy = std::floor(q.y());
  const double fz = std::floor(q.z());
  const auto ix = static_cast<std::int64_t>(fx);
  const auto iy = static_cast<std::int64_t>(fy);
  const auto iz = static_cast<std::int64_t>(fz);
  const double tx = smoothstep(q.x() - fx);
  const double ty = smoothstep(q.y() - fy);
  const double tz = smoothstep(q.z() - fz);
  double acc = 0.0;
  for (int dz = 0; dz < 2; ++dz) {
    for (int dy = 0; dy < 2; ++dy) {
      for (int dx = 0; dx < 2; ++dx) {
        const double w = (dx ? tx : 1.0 - tx) * (dy ? ty : 1.0 - ty) * (dz ? tz : 1.0 - tz);
        acc += w * lattice_value(ix + dx, iy + dy, iz + dz, seed);
      }
    }
  }
  return acc;
}

inline Vec3 albedo(const Vec3& p, const Primitive& prim, const TextureParams& tex) {
  const double cs = tex.checker_size;
  const auto parity = static_cast<std::int64_t>(std::floor(p.x() / cs) + std::floor(p.y() / cs) + std::floor(p.z() / cs));
  const double checker = (parity % 2 == 0) ? 1.0 : 0.0;

  double noise = 0.0;
  double norm = 0.0;
  double amplitude = 1.0;
  double cell = tex.noise_cell;
  for (int o = 0; o < tex.octaves; ++o) {
    noise += amplitude * value_noise(p / cell, prim.texture_seed + 17u * static_cast<std::uint32_t>(o));
    norm += amplitude;
    amplitude *= 0.7;
    cell *= 2.0;
  }
  noise /= norm;

  const double level = tex.checker_weight * checker + (1.0 - tex.checker_weight) * noise;
  const double tint[3] = {0.7 + 0.3 * lattice_value(prim.texture_seed, 1, 2, 7),
                          0.7 + 0.3 * lattice_value(prim.texture_seed, 3, 5, 11),
                          0.7 + 0.3 * lattice_value(prim.texture_seed, 8, 13, 19)};
  Vec3 rgb;
  for (int c = 0; c < 3; ++c) rgb[c] = std::clamp(prim.albedo_scale * tint[c] * (0.1 + 0.85 * level), 0.0, 1.0);
  return rgb;
}

inline void tangent_axes(const Vec3& n, Vec3& u, Vec3& v) {
  const Vec3 helper = std::abs(n.y()) < 0.9 ? Vec3::UnitY() : Vec3::UnitX();
  u = helper.cross(n).normalized();
  v = n.cross(u).normalized();
}

// Ray origin + s * dir, where dir has unit camera-frame z so s is depth.
inline std::optional<double> intersect(const Primitive& prim, const Vec3& origin, const Vec3& dir) {
  if (const auto* plane = std::get_if<PlanePrimitive>(&prim.shape)) {
    const Vec3 n = plane->normal.normalized();
    const double denom = n.dot(dir);
    if (std::abs(denom) < 1e-12) return std::nullopt;
    const double s = n.dot(plane->point - origin) / denom;
    if (!(s > 1e-9)) return std::nullopt;
    if (plane->half_extent) {
      Vec3 u;
      Vec3 v;
      tangent_axes(n, u, v);
      const Vec3 offset = origin + s * dir - plane->point;
      if (std::abs(offset.dot(u)) > (*plane->half_extent)[0] || std::abs(offset.dot(v)) > (*plane->half_extent)[1]) {
        return std::nullopt;
      }
    }
    return s;
  }
  const auto& sphere = std::get<SpherePrimitive>(prim.shape);
  const Vec3 oc = origin - sphere.center;
  const double a = dir.squaredNorm();
  const double b = 2.0 * dir.dot(oc);
  const double c = oc.squaredNorm() - sphere.radius * sphere.radius;
  const double disc = b * b - 4.0 * a * c;
  if (disc < 0.0) return std::nullopt;
  const double root = std::sqrt(disc);
  const double s0 = (-b - root) / (2.0 * a);
  const double s1 = (-b + root) / (2.0 * a);
  if (s0 > 1e-9) return s0;
  if (s1 > 1e-9) return s1;
  return std::nullopt;
}

struct Hit {
  double depth;
  std::size_t primitive;
};

inline std::optional<Hit> cast(const SceneSpec& scene, const CameraModel& cam, double x, double y) {
  const Vec3 origin = cam.center();
  const Vec3 dir = cam.rotation.transpose() *
                   cam.intrinsics.triangularView<Eigen::Upper>().solve(Vec3(x, y, 1.0));
  std::optional<Hit> best;
  for (std::size_t i = 0; i < scene.primitives.size(); ++i) {
    const auto s = intersect(scene.primitives[i], origin, dir);
    if (s && (!best || *s < best->depth)) best = Hit{*s, i};
  }
  return best;
}

}  // namespace detail

inline void SceneSpec::validate() const {
  if (primitives.empty()) throw InputError("scene '" + name + "' has no primitives");
  if (cameras.empty()) throw InputError("scene '" + name + "' has no cameras");
  if (!(d_min > 0.0) || !(d_min < d_max)) throw InputError("scene depth range must satisfy 0 < d_min < d_max");
  if (supersample < 1) throw InputError("supersample must be >= 1");
  for (const auto& cam : cameras) {
    if (!(cam.intrinsics(0, 0) > 0.0) || !(cam.intrinsics(1, 1) > 0.0)) {
      throw InputError("scene '" + name + "' has a camera with a degenerate focal length");
    }
    try {
      cam.validate();
    } catch (const GeometryError& e) {
      throw InputError(std::string("scene camera: ") + e.what());
    }
    const Size s = cam.image_size;
    if (!detail::cast(*this, cam, (s.width - 1) * 0.5, (s.height - 1) * 0.5)) {
      throw InputError("scene '" + name + "': a camera's center ray hits nothing");
    }
  }
}

/// Ray-casts every camera. Depth is the camera-frame z of the nearest hit.
inline RenderedViews render_views(const SceneSpec& scene) {
  scene.validate();
  RenderedViews out;
  const int ss = scene.supersample;
  for (const auto& cam : scene.cameras) {
    const Size size = cam.image_size;
    ViewImage image(size, 3);
    DepthMap depth(size);
    Mask mask(size);
    const Vec3 origin = cam.center();
    parallel_for(0, size.height, [&](std::ptrdiff_t yy) {
      const int y = static_cast<int>(yy);
      for (int x = 0; x < size.width; ++x) {
        if (const auto hit = detail::cast(scene, cam, x, y)) {
          depth(x, y) = hit->depth;
          mask(x, y) = 1;
        }
        Vec3 color = Vec3::Zero();
        for (int sy = 0; sy < ss; ++sy) {
          for (int sx = 0; sx < ss; ++sx) {
            const double px = x + (sx + 0.5) / ss - 0.5;
            const double py = y + (sy + 0.5) / ss - 0.5;
            if (const auto hit = detail::cast(scene, cam, px, py)) {
              const Vec3 dir = cam.rotation.transpose() *
                               cam.intrinsics.triangularView<Eigen::Upper>().solve(Vec3(px, py, 1.0));
              color += detail::albedo(origin + hit->depth * dir, scene.primitives[hit->primitive], scene.texture);
            }
          }
        }
        color /= static_cast<double>(ss * ss);
        for (int c = 0; c < 3; ++c) image(x, y, c) = static_cast<float>(color[c]);
      }
    });
    out.images.push_back(std::move(image));
    out.depths.push_back(std::move(depth));
    out.masks.push_back(std::move(mask));
  }
  return out;
}

/// Five cameras on a shallow arc around `target`, all looking at it.
/// View 0 sits on the arc center.
inline std::vector<CameraModel> arc_rig(const Vec3& target, double distance, double focal, Size size) {
  constexpr double kDeg = 3.14159265358979323846 / 180.0;
  const std::array<std::array<double, 2>, 5> angles = {{{0.0, 0.0}, {-9.0, 3.0}, {9.0, -3.0}, {-18.0, -2.0}, {18.0, 2.0}}};
  std::vector<CameraModel> cams;
  for (const auto& a : angles) {
    const double th = a[0] * kDeg;
    const double ph = a[1] * kDeg;
    const Vec3 offset(std::sin(th) * std::cos(ph), std::sin(ph), -std::cos(th) * std::cos(ph));
    cams.push_back(look_at_camera(target + distance * offset, target, Vec3(0.0, -1.0, 0.0), focal, size));
  }
  return cams;
}

inline constexpr Size kDefaultRenderSize{320, 256};

/// "flat", "two-plane" and "sphere-on-plane".
inline std::vector<SceneSpec> builtin_scenes() {
  const Vec3 target(0.0, 0.0, 3.0);
  const auto rig = arc_rig(target, 3.0, 320.0, kDefaultRenderSize);
  std::vector<SceneSpec> scenes;

  SceneSpec flat;
  flat.name = "flat";
  flat.primitives.push_back({PlanePrimitive{Vec3(0.0, 0.0, 3.0), Vec3(0.0, 0.0, -1.0), std::nullopt}, 3u, 1.0});
  flat.cameras = rig;
  flat.d_min = 2.0;
  flat.d_max = 4.5;
  scenes.push_back(flat);

  SceneSpec two;
  two.name = "two-plane";
  two.primitives.push_back({PlanePrimitive{Vec3(0.0, 0.0, 3.4), Vec3(0.0, 0.0, -1.0), std::nullopt}, 5u, 1.0});
  two.primitives.push_back(
      {PlanePrimitive{Vec3(-2.0, 0.0, 2.6), Vec3(0.0, 0.0, -1.0), std::array<double, 2>{2.0, 3.0}}, 29u, 0.9});
  two.cameras = rig;
  two.d_min = 1.75;
  two.d_max = 4.6;
  scenes.push_back(two);

  SceneSpec sphere;
  sphere.name = "sphere-on-plane";
  sphere.primitives.push_back({PlanePrimitive{Vec3(0.0, 0.0, 3.4), Vec3(0.0, 0.0, -1.0), std::nullopt}, 7u, 1.0});
  sphere.primitives.push_back({SpherePrimitive{Vec3(0.0, 0.0, 2.9), 0.45}, 41u, 0.95});
  sphere.cameras = rig;
  sphere.d_min = 2.0;
  sphere.d_max = 4.5;
  scenes.push_back(sphere);
  return scenes;
}

inline SceneSpec builtin_scene(const std::string& name) {
  for (auto& s : builtin_scenes()) {
    if (s.name == name) return s;
  }
  throw InputError("unknown scene '" + name + "'");
}

// ---------------------------------------------------------------------------
// JSON scene descriptions

namespace detail {
inline Vec3 json_vec3(const nlohmann::json& j, const char* key) {
  const auto& a = j.at(key);
  if (!a.is_array() || a.size() != 3) throw InputError(std::string("scene field '") + key + "' must be a 3-vector");
  return {a[0].get<double>(), a[1].get<double>(), a[2].get<double>()};
}
}  // namespace detail

/// Parses a scene document:
///   {"name", "width", "height", "d_min", "d_max",
///    "cameras": [{"position", "target", "up", "focal"} | {"intrinsics", "rotation", "translation"}],
///    "primitives": [{"type": "plane", "point", "normal", "half_extent"?, "seed", "albedo"} |
///                   {"type": "sphere", "center", "radius", "seed", "albedo"}],
///    "texture": {...}?, "supersample"?}
inline SceneSpec scene_from_json(const nlohmann::json& j) {
  try {
    SceneSpec s;
    s.name = j.value("name", std::string("custom"));
    const Size size{j.at("width").get<int>(), j.at("height").get<int>()};
    s.d_min = j.at("d_min").get<double>();
    s.d_max = j.at("d_max").get<double>();
    s.supersample = j.value("supersample", 3);
    for (const auto& c : j.at("cameras")) {
      if (c.contains("position")) {
        const Vec3 up = c.contains("up") ? detail::json_vec3(c, "up") : Vec3(0.0, -1.0, 0.0);
        s.cameras.push_back(look_at_camera(detail::json_vec3(c, "position"), detail::json_vec3(c, "target"), up,
                                           c.at("focal").get<double>(), size));
      } else {
        CameraModel cam;
        for (int r = 0; r < 3; ++r) {
          for (int k = 0; k < 3; ++k) {
            cam.intrinsics(r, k) = c.at("intrinsics").at(r).at(k).get<double>();
            cam.rotation(r, k) = c.at("rotation").at(r).at(k).get<double>();
          }
        }
        cam.translation = detail::json_vec3(c, "translation");
        cam.image_size = size;
        s.cameras.push_back(cam);
      }
    }
    for (const auto& p : j.at("primitives")) {
      Primitive prim;
      prim.texture_seed = p.value("seed", 0u);
      prim.albedo_scale = p.value("albedo", 1.0);
      const std::string type = p.at("type").get<std::string>();
      if (type == "plane") {
        PlanePrimitive plane{detail::json_vec3(p, "point"), detail::json_vec3(p, "normal"), std::nullopt};
        if (p.contains("half_extent")) {
          plane.half_extent = std::array<double, 2>{p.at("half_extent").at(0).get<double>(),
                                                    p.at("half_extent").at(1).get<double>()};
        }
        prim.shape = plane;
      } else if (type == "sphere") {
        prim.shape = SpherePrimitive{detail::json_vec3(p, "center"), p.at("radius").get<double>()};
      } else {
        throw InputError("unknown primitive type '" + type + "'");
      }
      s.primitives.push_back(prim);
    }
    if (j.contains("texture")) {
      const auto& t = j.at("texture");
      s.texture.checker_size = t.value("checker_size", s.texture.checker_size);
      s.texture.noise_cell = t.value("noise_cell", s.texture.noise_cell);
      s.texture.octaves = t.value("octaves", s.texture.octaves);
      s.texture.checker_weight = t.value("checker_weight", s.texture.checker_weight);
    }
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(std::string("invalid scene description: ") + e.what());
  }
}

}  // namespace atv
