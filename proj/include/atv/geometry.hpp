// Pinhole camera algebra: warp composition, homogeneous pixel warping and
// bilinear sampling.
//
// Conventions: extrinsics map world to camera (X_cam = R X_world + t), the
// camera looks down +z, and pixel centers sit at integer coordinates so the
// image domain is [0, W-1] x [0, H-1].
#pragma once

#include <Eigen/Dense>

#include <cmath>
#include <cstdio>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "atv/common.hpp"

namespace atv {

using Mat3 = Eigen::Matrix3d;
using Mat4 = Eigen::Matrix4d;
using Vec3 = Eigen::Vector3d;
using Vec4 = Eigen::Vector4d;

struct CameraModel {
  Mat3 intrinsics = Mat3::Identity();
  Mat3 rotation = Mat3::Identity();
  Vec3 translation = Vec3::Zero();
  Size image_size{1, 1};

  /// Throws GeometryError when a type invariant is violated.
  void validate() const {
    if (!intrinsics.allFinite() || !rotation.allFinite() || !translation.allFinite()) {
      throw GeometryError("camera has non-finite entries");
    }
    const double ortho = (rotation.transpose() * rotation - Mat3::Identity()).cwiseAbs().maxCoeff();
    if (ortho >= 1e-9) throw GeometryError("camera rotation is not orthonormal");
    if (!(intrinsics(0, 0) > 0.0) || !(intrinsics(1, 1) > 0.0)) {
      throw GeometryError("camera focal lengths must be positive");
    }
    if (intrinsics(2, 2) != 1.0 || intrinsics(1, 0) != 0.0 || intrinsics(2, 0) != 0.0 || intrinsics(2, 1) != 0.0) {
      throw GeometryError("camera intrinsics must be upper-triangular with K(2,2) = 1");
    }
    if (image_size.width < 1 || image_size.height < 1) throw GeometryError("camera image size must be >= 1");
  }

  /// 4x4 world-to-camera rigid transform.
  Mat4 extrinsic() const {
    Mat4 t = Mat4::Identity();
    t.topLeftCorner<3, 3>() = rotation;
    t.topRightCorner<3, 1>() = translation;
    return t;
  }

  Vec3 center() const { return -rotation.transpose() * translation; }

  Vec3 to_camera(const Vec3& world) const { return rotation * world + translation; }

  /// Pixel coordinates and camera-frame depth of a world point, or nullopt
  /// when the point is at or behind the camera plane.
  std::optional<Vec3> project(const Vec3& world) const {
    const Vec3 cam = to_camera(world);
    if (!(cam.z() > 1e-12)) return std::nullopt;
    const Vec3 p = intrinsics * cam;
    return Vec3(p.x() / p.z(), p.y() / p.z(), cam.z());
  }

  Vec3 unproject(double x, double y, double depth) const {
    const Vec3 cam = intrinsics.triangularView<Eigen::Upper>().solve(Vec3(x * depth, y * depth, depth));
    return rotation.transpose() * (cam - translation);
  }

  /// Camera for the same view resampled to `target` pixels. Scales focal
  /// lengths by the size ratio and maps pixel centers consistently with
  /// area-averaging downsampling: c' = (c + 0.5) * s - 0.5.
  CameraModel rescaled(Size target) const {
    CameraModel out = *this;
    const double sx = static_cast<double>(target.width) / image_size.width;
    const double sy = static_cast<double>(target.height) / image_size.height;
    out.intrinsics(0, 0) *= sx;
    out.intrinsics(0, 1) *= sx;
    out.intrinsics(0, 2) = (intrinsics(0, 2) + 0.5) * sx - 0.5;
    out.intrinsics(1, 1) *= sy;
    out.intrinsics(1, 2) = (intrinsics(1, 2) + 0.5) * sy - 0.5;
    out.image_size = target;
    return out;
  }

  friend bool operator==(const CameraModel& a, const CameraModel& b) {
    return a.intrinsics == b.intrinsics && a.rotation == b.rotation && a.translation == b.translation &&
           a.image_size == b.image_size;
  }
};

/// Builds a camera at `position` looking at `target`. Image y points along
/// the projection of -up.
inline CameraModel look_at_camera(const Vec3& position, const Vec3& target, const Vec3& up, double focal,
                                  Size image_size) {
  const Vec3 forward = (target - position).normalized();
  const Vec3 right = (-up).cross(forward).normalized();
  const Vec3 down = forward.cross(right).normalized();
  CameraModel cam;
  cam.rotation.row(0) = right.transpose();
  cam.rotation.row(1) = down.transpose();
  cam.rotation.row(2) = forward.transpose();
  cam.translation = -cam.rotation * position;
  cam.intrinsics << focal, 0.0, (image_size.width - 1) * 0.5, 0.0, focal, (image_size.height - 1) * 0.5, 0.0, 0.0,
      1.0;
  cam.image_size = image_size;
  return cam;
}

struct WarpMatrix {
  Mat4 entries = Mat4::Identity();
};

namespace detail {
inline Mat4 embed_intrinsics(const Mat3& k) {
  Mat4 out = Mat4::Identity();
  out.topLeftCorner<3, 3>() = k;
  return out;
}
}  // namespace detail

/// K_src * T_src * T_ref^-1 * K_ref^-1 with 3x3 intrinsics embedded as 4x4.
/// The product is depth-independent; depth enters through the homogeneous
/// vector passed to warp_pixel.
inline WarpMatrix compose_warp(const CameraModel& src, const CameraModel& ref) {
  src.validate();
  ref.validate();
  if (std::abs(src.intrinsics.determinant()) < 1e-12 || std::abs(ref.intrinsics.determinant()) < 1e-12) {
    throw GeometryError("singular intrinsics");
  }
  Mat4 ref_inverse = Mat4::Identity();
  ref_inverse.topLeftCorner<3, 3>() = ref.rotation.transpose();
  ref_inverse.topRightCorner<3, 1>() = -ref.rotation.transpose() * ref.translation;

  WarpMatrix h;
  h.entries = detail::embed_intrinsics(src.intrinsics) * src.extrinsic() * ref_inverse *
              detail::embed_intrinsics(ref.intrinsics.inverse());
  if (!h.entries.allFinite()) throw GeometryError("warp matrix is not finite");
  return h;
}

struct WarpedPixel {
  double x;
  double y;
  double depth;  // projected depth in the target camera
};

/// Applies H to (x*d, y*d, d, 1). Returns nullopt when the projected depth
/// is numerically zero.
inline std::optional<WarpedPixel> warp_pixel(const WarpMatrix& h, double x, double y, double d) {
  if (!(d > 0.0)) throw InputError("warp_pixel requires a positive depth");
  const Mat4& m = h.entries;
  const double a = x * d;
  const double b = y * d;
  const double p0 = m(0, 0) * a + m(0, 1) * b + m(0, 2) * d + m(0, 3);
  const double p1 = m(1, 0) * a + m(1, 1) * b + m(1, 2) * d + m(1, 3);
  const double p2 = m(2, 0) * a + m(2, 1) * b + m(2, 2) * d + m(2, 3);
  if (std::abs(p2) < 1e-12) return std::nullopt;
  return WarpedPixel{p0 / p2, p1 / p2, p2};
}

template <typename T>
struct SampleResult {
  std::vector<T> value;
  bool valid = false;
};

/// Bilinear interpolation into `out` (one entry per channel). Returns false,
/// leaving `out` untouched, when the footprint leaves the image domain.
template <typename T>
bool bilinear_sample_into(const Image<T>& image, double x, double y, std::span<T> out) {
  const int w = image.width();
  const int h = image.height();
  if (!(x >= 0.0 && y >= 0.0 && x <= w - 1 && y <= h - 1)) return false;
  const int x0 = static_cast<int>(x);
  const int y0 = static_cast<int>(y);
  const int x1 = std::min(x0 + 1, w - 1);
  const int y1 = std::min(y0 + 1, h - 1);
  const double fx = x - x0;
  const double fy = y - y0;
  const double w00 = (1.0 - fx) * (1.0 - fy);
  const double w10 = fx * (1.0 - fy);
  const double w01 = (1.0 - fx) * fy;
  const double w11 = fx * fy;
  const auto p00 = image.pixel(x0, y0);
  const auto p10 = image.pixel(x1, y0);
  const auto p01 = image.pixel(x0, y1);
  const auto p11 = image.pixel(x1, y1);
  for (int c = 0; c < image.channels(); ++c) {
    out[static_cast<std::size_t>(c)] =
        static_cast<T>(w00 * p00[c] + w10 * p10[c] + w01 * p01[c] + w11 * p11[c]);
  }
  return true;
}

template <typename T>
SampleResult<T> bilinear_sample(const Image<T>& image, double x, double y) {
  if (image.empty()) throw InputError("bilinear_sample on an empty image");
  SampleResult<T> result;
  result.value.assign(static_cast<std::size_t>(image.channels()), T{});
  result.valid = bilinear_sample_into<T>(image, x, y, result.value);
  return result;
}

// ---------------------------------------------------------------------------
// Camera text files

struct DepthRange {
  double d_min = 0.0;
  double d_interval = 0.0;
  int d_count = 0;
  double d_max = 0.0;
};

struct CameraFile {
  CameraModel camera;
  DepthRange range;
};

namespace detail {
inline std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}
}  // namespace detail

inline std::string format_camera_file(const CameraModel& cam, const DepthRange& range) {
  std::ostringstream out;
  const Mat4 t = cam.extrinsic();
  out << "extrinsic\n";
  for (int r = 0; r < 4; ++r) {
    for (int c = 0; c < 4; ++c) out << (c ? " " : "") << detail::format_double(t(r, c));
    out << "\n";
  }
  out << "intrinsic\n";
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) out << (c ? " " : "") << detail::format_double(cam.intrinsics(r, c));
    out << "\n";
  }
  out << detail::format_double(range.d_min) << " " << detail::format_double(range.d_interval) << " "
      << range.d_count << " " << detail::format_double(range.d_max) << "\n";
  return out.str();
}

/// Parses the extrinsic/intrinsic/depth-range text format. Blank lines are
/// skipped so files with MVSNet-style spacing parse too. Rotations that are
/// orthonormal only to single precision (common in published files) are
/// projected onto the nearest rotation.
inline CameraFile parse_camera_file(const std::string& text, Size image_size) {
  std::istringstream in(text);
  std::vector<std::pair<std::size_t, std::string>> lines;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    lines.emplace_back(number, line);
  }
  auto expect_tag = [&](std::size_t i, const char* tag) {
    if (i >= lines.size()) throw ParseError(number, std::string("missing '") + tag + "' section");
    std::istringstream s(lines[i].second);
    std::string word;
    s >> word;
    if (word != tag) throw ParseError(lines[i].first, std::string("expected '") + tag + "'");
  };
  auto read_row = [&](std::size_t i, int count) {
    if (i >= lines.size()) throw ParseError(number, "unexpected end of camera file");
    std::istringstream s(lines[i].second);
    std::vector<double> values;
    double v;
    while (s >> v) values.push_back(v);
    if (!s.eof()) throw ParseError(lines[i].first, "non-numeric token");
    if (count > 0 && static_cast<int>(values.size()) != count) {
      throw ParseError(lines[i].first, "expected " + std::to_string(count) + " values");
    }
    return values;
  };

  CameraFile result;
  expect_tag(0, "extrinsic");
  Mat4 t;
  for (int r = 0; r < 4; ++r) {
    const auto row = read_row(1 + r, 4);
    for (int c = 0; c < 4; ++c) t(r, c) = row[static_cast<std::size_t>(c)];
  }
  if (t(3, 0) != 0.0 || t(3, 1) != 0.0 || t(3, 2) != 0.0 || t(3, 3) != 1.0) {
    throw ParseError(lines[4].first, "extrinsic bottom row must be 0 0 0 1");
  }
  expect_tag(5, "intrinsic");
  Mat3 k;
  for (int r = 0; r < 3; ++r) {
    const auto row = read_row(6 + r, 3);
    for (int c = 0; c < 3; ++c) k(r, c) = row[static_cast<std::size_t>(c)];
  }
  if (lines.size() > 9) {
    const auto row = read_row(9, 0);
    if (row.size() != 2 && row.size() != 4) throw ParseError(lines[9].first, "expected 2 or 4 depth-range values");
    result.range.d_min = row[0];
    result.range.d_interval = row[1];
    if (row.size() == 4) {
      result.range.d_count = static_cast<int>(row[2]);
      result.range.d_max = row[3];
    }
  }

  Mat3 r = t.topLeftCorner<3, 3>();
  const double ortho = (r.transpose() * r - Mat3::Identity()).cwiseAbs().maxCoeff();
  if (ortho >= 1e-9 && ortho < 1e-4) {
    Eigen::JacobiSVD<Mat3> svd(r, Eigen::ComputeFullU | Eigen::ComputeFullV);
    r = svd.matrixU() * svd.matrixV().transpose();
  }
  result.camera.rotation = r;
  result.camera.translation = t.topRightCorner<3, 1>();
  result.camera.intrinsics = k;
  result.camera.image_size = image_size;
  try {
    result.camera.validate();
  } catch (const GeometryError& e) {
    throw ParseError(0, e.what());
  }
  return result;
}

inline CameraFile read_camera_file(const std::string& path, Size image_size) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open camera file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  try {
    return parse_camera_file(buf.str(), image_size);
  } catch (const ParseError& e) {
    throw ParseError(e.line(), path + ": " + e.message());
  }
}

inline void write_camera_file(const std::string& path, const CameraModel& cam, const DepthRange& range) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw InputError("cannot write camera file " + path);
  out << format_camera_file(cam, range);
}

}  // namespace atv
