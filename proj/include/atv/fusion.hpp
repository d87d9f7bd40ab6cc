// Geometric-consistency fusion of per-view depth maps, and ASCII PLY IO.
#pragma once

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "atv/common.hpp"
#include "atv/geometry.hpp"
#include "atv/parallel.hpp"

namespace atv {

struct CloudPoint {
  Vec3 position = Vec3::Zero();
  Vec3 color = Vec3::Zero();  // RGB in [0, 1]
  int source_view = -1;
};

struct PointCloud {
  std::vector<CloudPoint> points;

  std::size_t size() const noexcept { return points.size(); }
  bool empty() const noexcept { return points.empty(); }
};

struct FusionConfig {
  double max_relative_depth_diff = 0.01;
  double max_reprojection_dist = 1.0;  // pixels
  int min_consistent_views = 3;

  void validate() const {
    if (!(max_relative_depth_diff > 0.0) || !(max_reprojection_dist > 0.0) || min_consistent_views < 1) {
      throw InputError("fusion thresholds must be positive");
    }
  }
};

struct FusionResult {
  PointCloud cloud;
  std::vector<double> kept_fraction;  // emitted / valid pixels, per view
};

namespace detail {

inline bool lexicographic_less(const Vec3& a, const Vec3& b) {
  if (a.x() != b.x()) return a.x() < b.x();
  if (a.y() != b.y()) return a.y() < b.y();
  return a.z() < b.z();
}

}  // namespace detail

/// Every view acts as reference in turn. A reference pixel survives when at
/// least `min_consistent_views` other views agree on its depth (relative
/// depth test plus forward-backward reprojection); the emitted position is
/// the mean of the mutually consistent 3D points, summed in a canonical
/// order so the result does not depend on how the other views are ordered.
inline FusionResult fuse_depth_maps(std::span<const DepthMap> depths, std::span<const CameraModel> cameras,
                                    std::span<const ViewImage> images, const FusionConfig& config) {
  config.validate();
  const std::size_t n = depths.size();
  if (n < 2) throw InputError("fusion needs at least two views");
  if (cameras.size() != n || images.size() != n) throw InputError("fusion needs one camera and image per depth map");
  for (std::size_t v = 0; v < n; ++v) {
    if (depths[v].size() != cameras[v].image_size || images[v].size() != cameras[v].image_size) {
      throw InputError("fusion inputs differ in shape for view " + std::to_string(v));
    }
    if (images[v].channels() != 3) throw InputError("fusion expects RGB images");
  }

  FusionResult result;
  result.kept_fraction.assign(n, 0.0);
  for (std::size_t r = 0; r < n; ++r) {
    const CameraModel& ref = cameras[r];
    const DepthMap& depth = depths[r];
    const int h = depth.height();
    const int w = depth.width();
    std::vector<std::vector<CloudPoint>> rows(static_cast<std::size_t>(h));
    std::vector<std::size_t> valid_per_row(static_cast<std::size_t>(h), 0);

    parallel_for(0, h, [&](std::ptrdiff_t yy) {
      const int y = static_cast<int>(yy);
      std::vector<Vec3> agreeing;
      for (int x = 0; x < w; ++x) {
        const double d = depth(x, y);
        if (!(d > 0.0) || !std::isfinite(d)) continue;
        ++valid_per_row[static_cast<std::size_t>(y)];
        const Vec3 point = ref.unproject(x, y, d);
        agreeing.clear();
        agreeing.push_back(point);
        for (std::size_t v = 0; v < n; ++v) {
          if (v == r) continue;
          const auto proj = cameras[v].project(point);
          if (!proj) continue;
          const long xi = std::lround((*proj)[0]);
          const long yi = std::lround((*proj)[1]);
          if (!depths[v].contains(static_cast<int>(xi), static_cast<int>(yi))) continue;
          const double other = depths[v](static_cast<int>(xi), static_cast<int>(yi));
          if (!(other > 0.0) || !std::isfinite(other)) continue;
          if (std::abs((*proj)[2] - other) / other > config.max_relative_depth_diff) continue;
          const Vec3 back = cameras[v].unproject(static_cast<double>(xi), static_cast<double>(yi), other);
          const auto reproj = ref.project(back);
          if (!reproj) continue;
          if (std::hypot((*reproj)[0] - x, (*reproj)[1] - y) > config.max_reprojection_dist) continue;
          agreeing.push_back(back);
        }
        if (static_cast<int>(agreeing.size()) - 1 < config.min_consistent_views) continue;
        std::sort(agreeing.begin(), agreeing.end(), detail::lexicographic_less);
        Vec3 sum = Vec3::Zero();
        for (const auto& p : agreeing) sum += p;
        CloudPoint out;
        out.position = sum / static_cast<double>(agreeing.size());
        const auto px = images[r].pixel(x, y);
        out.color = Vec3(px[0], px[1], px[2]);
        out.source_view = static_cast<int>(r);
        rows[static_cast<std::size_t>(y)].push_back(out);
      }
    });

    std::size_t kept = 0;
    std::size_t valid = 0;
    for (int y = 0; y < h; ++y) {
      const auto& row = rows[static_cast<std::size_t>(y)];
      result.cloud.points.insert(result.cloud.points.end(), row.begin(), row.end());
      kept += row.size();
      valid += valid_per_row[static_cast<std::size_t>(y)];
    }
    result.kept_fraction[r] = valid == 0 ? 0.0 : static_cast<double>(kept) / static_cast<double>(valid);
  }
  return result;
}

// ---------------------------------------------------------------------------
// ASCII PLY

namespace detail {
inline std::string shortest(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return {buf, res.ptr};
}

inline int quantize_color(double c) {
  return static_cast<int>(std::clamp(std::floor(c * 255.0), 0.0, 255.0));
}
}  // namespace detail

/// Vertex lines are "x y z red green blue": positions in shortest
/// round-trip form, colors floor-quantized to 0..255.
inline std::string format_ply(const PointCloud& cloud) {
  std::string out;
  out += "ply\nformat ascii 1.0\nelement vertex " + std::to_string(cloud.size()) +
         "\nproperty double x\nproperty double y\nproperty double z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  for (const auto& p : cloud.points) {
    out += detail::shortest(p.position.x()) + " " + detail::shortest(p.position.y()) + " " +
           detail::shortest(p.position.z()) + " " + std::to_string(detail::quantize_color(p.color.x())) + " " +
           std::to_string(detail::quantize_color(p.color.y())) + " " +
           std::to_string(detail::quantize_color(p.color.z())) + "\n";
  }
  return out;
}

inline void write_ply(const PointCloud& cloud, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write " + path);
  out << format_ply(cloud);
  if (!out) throw InputError("failed writing " + path);
}

inline PointCloud parse_ply(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  auto next = [&]() {
    if (!std::getline(in, line)) throw ParseError(number + 1, "unexpected end of PLY file");
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    return line;
  };

  if (next() != "ply") throw ParseError(number, "missing 'ply' magic");
  if (next() != "format ascii 1.0") throw ParseError(number, "only 'format ascii 1.0' is supported");
  std::size_t count = 0;
  bool have_count = false;
  std::vector<std::string> props;
  for (;;) {
    const std::string l = next();
    std::istringstream s(l);
    std::string word;
    s >> word;
    if (word == "end_header") break;
    if (word == "comment" || word == "obj_info") continue;
    if (word == "element") {
      std::string name;
      long long c = -1;
      s >> name >> c;
      if (name != "vertex" || c < 0) throw ParseError(number, "expected 'element vertex <count>'");
      count = static_cast<std::size_t>(c);
      have_count = true;
    } else if (word == "property") {
      std::string type;
      std::string name;
      s >> type >> name;
      if (name.empty()) throw ParseError(number, "malformed property line");
      props.push_back(name);
    } else {
      throw ParseError(number, "unexpected header line '" + l + "'");
    }
  }
  const std::vector<std::string> expected = {"x", "y", "z", "red", "green", "blue"};
  if (!have_count) throw ParseError(number, "missing vertex element");
  if (props != expected) throw ParseError(number, "vertex properties must be x y z red green blue");

  PointCloud cloud;
  cloud.points.reserve(count);
  for (std::size_t i = 0; i < count; ++i) {
    const std::string l = next();
    const char* p = l.data();
    const char* end = l.data() + l.size();
    double xyz[3];
    int rgb[3];
    auto skip = [&]() {
      while (p < end && (*p == ' ' || *p == '\t')) ++p;
    };
    for (double& v : xyz) {
      skip();
      const auto res = std::from_chars(p, end, v);
      if (res.ec != std::errc()) throw ParseError(number, "bad vertex coordinate");
      p = res.ptr;
    }
    for (int& c : rgb) {
      skip();
      const auto res = std::from_chars(p, end, c);
      if (res.ec != std::errc() || c < 0 || c > 255) throw ParseError(number, "bad vertex color");
      p = res.ptr;
    }
    skip();
    if (p != end) throw ParseError(number, "trailing data on vertex line");
    CloudPoint pt;
    pt.position = Vec3(xyz[0], xyz[1], xyz[2]);
    pt.color = Vec3(rgb[0] / 255.0, rgb[1] / 255.0, rgb[2] / 255.0);
    cloud.points.push_back(pt);
  }
  return cloud;
}

inline PointCloud read_ply(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_ply(buf.str());
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.message());
  }
}

}  // namespace atv
