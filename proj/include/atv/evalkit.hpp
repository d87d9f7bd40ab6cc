// Point-cloud accuracy/completeness, depth-map error metrics and the
// ground-truth helpers used to score synthetic scenes.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "atv/common.hpp"
#include "atv/fusion.hpp"
#include "atv/geometry.hpp"
#include "atv/parallel.hpp"

namespace atv {

struct ReconstructionScore {
  double accuracy = 0.0;
  double completeness = 0.0;
  double overall = 0.0;
  double max_dist = 0.0;
  std::size_t pred_points = 0;
  std::size_t gt_points = 0;
  bool empty_prediction = false;
};

/// Uniform hash grid over a fixed point set. Queries return the exact
/// nearest distance when it is below the cell size, otherwise the cap.
class SpatialGrid {
 public:
  SpatialGrid(std::span<const Vec3> points, double cell) : points_(points.begin(), points.end()), cell_(cell) {
    if (!(cell > 0.0)) throw InputError("grid cell size must be positive");
    entries_.reserve(points_.size());
    for (std::size_t i = 0; i < points_.size(); ++i) entries_.push_back({key_of(points_[i]), i});
    std::sort(entries_.begin(), entries_.end(), [](const Entry& a, const Entry& b) {
      return a.key != b.key ? a.key < b.key : a.index < b.index;
    });
  }

  double nearest(const Vec3& q, double cap) const {
    const Key k = key_of(q);
    double best = cap * cap;
    for (std::int64_t dz = -1; dz <= 1; ++dz) {
      for (std::int64_t dy = -1; dy <= 1; ++dy) {
        for (std::int64_t dx = -1; dx <= 1; ++dx) {
          const Key c{k[0] + dx, k[1] + dy, k[2] + dz};
          auto it = std::lower_bound(entries_.begin(), entries_.end(), c,
                                     [](const Entry& e, const Key& key) { return e.key < key; });
          for (; it != entries_.end() && it->key == c; ++it) {
            best = std::min(best, (points_[it->index] - q).squaredNorm());
          }
        }
      }
    }
    return std::min(cap, std::sqrt(best));
  }

 private:
  using Key = std::array<std::int64_t, 3>;
  struct Entry {
    Key key;
    std::size_t index;
  };

  Key key_of(const Vec3& p) const {
    return {static_cast<std::int64_t>(std::floor(p.x() / cell_)), static_cast<std::int64_t>(std::floor(p.y() / cell_)),
            static_cast<std::int64_t>(std::floor(p.z() / cell_))};
  }

  std::vector<Vec3> points_;
  double cell_;
  std::vector<Entry> entries_;
};

namespace detail {
inline std::vector<Vec3> positions(const PointCloud& cloud) {
  std::vector<Vec3> out;
  out.reserve(cloud.size());
  for (const auto& p : cloud.points) out.push_back(p.position);
  return out;
}

inline double mean_capped_distance(std::span<const Vec3> queries, const SpatialGrid& grid, double cap) {
  std::vector<double> d(queries.size());
  parallel_for(0, static_cast<std::ptrdiff_t>(queries.size()),
               [&](std::ptrdiff_t i) { d[static_cast<std::size_t>(i)] = grid.nearest(queries[static_cast<std::size_t>(i)], cap); });
  return fixed_tree_sum(d) / static_cast<double>(d.size());
}
}  // namespace detail

/// Mean capped nearest-neighbor distance from pred to gt (accuracy) and
/// from gt to pred (completeness).
inline ReconstructionScore accuracy_completeness(const PointCloud& pred, const PointCloud& gt, double max_dist) {
  if (!(max_dist > 0.0)) throw InputError("max_dist must be positive");
  if (gt.empty()) throw InputError("ground-truth cloud is empty");
  ReconstructionScore s;
  s.max_dist = max_dist;
  s.pred_points = pred.size();
  s.gt_points = gt.size();
  if (pred.empty()) {
    s.accuracy = s.completeness = s.overall = max_dist;
    s.empty_prediction = true;
    return s;
  }
  const auto p = detail::positions(pred);
  const auto g = detail::positions(gt);
  const SpatialGrid gt_grid(g, max_dist);
  const SpatialGrid pred_grid(p, max_dist);
  s.accuracy = detail::mean_capped_distance(p, gt_grid, max_dist);
  s.completeness = detail::mean_capped_distance(g, pred_grid, max_dist);
  s.overall = 0.5 * (s.accuracy + s.completeness);
  return s;
}

struct InlierFraction {
  double threshold = 0.0;
  double fraction = 0.0;
};

struct DepthErrorStats {
  double mae = 0.0;
  double rmse = 0.0;
  std::size_t pixels = 0;
  std::vector<InlierFraction> inliers;
};

/// Masked depth errors. A pixel is an inlier at threshold t when |pred - gt| <= t.
inline DepthErrorStats depth_error(const DepthMap& pred, const DepthMap& gt, const Mask& mask,
                                   std::span<const double> thresholds) {
  if (pred.size() != gt.size() || mask.size() != gt.size()) throw InputError("depth_error inputs differ in shape");
  std::vector<double> abs_err;
  std::vector<double> sq_err;
  for (std::size_t i = 0; i < gt.pixel_count(); ++i) {
    if (!mask.data()[i]) continue;
    const double e = std::abs(pred.data()[i] - gt.data()[i]);
    abs_err.push_back(e);
    sq_err.push_back(e * e);
  }
  if (abs_err.empty()) throw StatisticsError("depth_error: mask selects no pixels");
  DepthErrorStats s;
  s.pixels = abs_err.size();
  const double n = static_cast<double>(s.pixels);
  s.mae = fixed_tree_sum(abs_err) / n;
  s.rmse = std::sqrt(fixed_tree_sum(sq_err) / n);
  for (double t : thresholds) {
    const auto hits = std::count_if(abs_err.begin(), abs_err.end(), [t](double e) { return e <= t; });
    s.inliers.push_back({t, static_cast<double>(hits) / n});
  }
  return s;
}

/// Thresholds at 1x, 2x and 4x of `spacing`.
inline DepthErrorStats depth_error(const DepthMap& pred, const DepthMap& gt, const Mask& mask, double spacing) {
  const std::array<double, 3> t{spacing, 2.0 * spacing, 4.0 * spacing};
  return depth_error(pred, gt, mask, t);
}

namespace detail {
/// Number of views other than `ref` that see the ground-truth point of
/// pixel (x, y) unoccluded: it projects inside the view and that view's
/// ground-truth depth agrees within `rel_tol`.
inline int observing_views(std::span<const DepthMap> depths, std::span<const CameraModel> cameras, std::size_t ref,
                           int x, int y, double rel_tol) {
  const double d = depths[ref](x, y);
  if (!(d > 0.0) || !std::isfinite(d)) return 0;
  const Vec3 p = cameras[ref].unproject(x, y, d);
  int count = 0;
  for (std::size_t v = 0; v < depths.size(); ++v) {
    if (v == ref) continue;
    const auto q = cameras[v].project(p);
    if (!q) continue;
    const long xi = std::lround((*q)[0]);
    const long yi = std::lround((*q)[1]);
    if (!depths[v].contains(static_cast<int>(xi), static_cast<int>(yi))) continue;
    const double other = depths[v](static_cast<int>(xi), static_cast<int>(yi));
    if (other > 0.0 && std::abs(other - (*q)[2]) <= rel_tol * (*q)[2]) ++count;
  }
  return count;
}
}  // namespace detail

/// One point per valid ground-truth pixel of every view that at least
/// `min_observers` other views also see, keeping only the first point that
/// lands in each `dedup_cell` grid cell (views in order, rows top to
/// bottom). `dedup_cell <= 0` keeps every point.
inline PointCloud gt_cloud_from_depths(std::span<const DepthMap> depths, std::span<const CameraModel> cameras,
                                       std::span<const ViewImage> images, double dedup_cell, int min_observers = 0,
                                       double rel_tol = 0.01) {
  if (depths.size() != cameras.size() || images.size() != cameras.size()) {
    throw InputError("gt_cloud_from_depths needs one camera and image per depth map");
  }
  PointCloud all;
  for (std::size_t v = 0; v < depths.size(); ++v) {
    if (depths[v].size() != cameras[v].image_size || images[v].size() != cameras[v].image_size) {
      throw InputError("gt_cloud_from_depths inputs differ in shape");
    }
    for (int y = 0; y < depths[v].height(); ++y) {
      for (int x = 0; x < depths[v].width(); ++x) {
        const double d = depths[v](x, y);
        if (!(d > 0.0) || !std::isfinite(d)) continue;
        if (min_observers > 0 && detail::observing_views(depths, cameras, v, x, y, rel_tol) < min_observers) continue;
        CloudPoint p;
        p.position = cameras[v].unproject(x, y, d);
        const auto px = images[v].pixel(x, y);
        p.color = Vec3(px[0], px[1], px[2]);
        p.source_view = static_cast<int>(v);
        all.points.push_back(p);
      }
    }
  }
  if (!(dedup_cell > 0.0)) return all;

  using Key = std::array<std::int64_t, 3>;
  std::vector<std::pair<Key, std::size_t>> keys;
  keys.reserve(all.size());
  for (std::size_t i = 0; i < all.size(); ++i) {
    const Vec3& q = all.points[i].position;
    keys.push_back({{static_cast<std::int64_t>(std::floor(q.x() / dedup_cell)),
                     static_cast<std::int64_t>(std::floor(q.y() / dedup_cell)),
                     static_cast<std::int64_t>(std::floor(q.z() / dedup_cell))},
                    i});
  }
  std::sort(keys.begin(), keys.end());
  std::vector<std::uint8_t> keep(all.size(), 0);
  for (std::size_t i = 0; i < keys.size(); ++i) {
    if (i == 0 || keys[i].first != keys[i - 1].first) keep[keys[i].second] = 1;
  }
  PointCloud out;
  for (std::size_t i = 0; i < all.size(); ++i) {
    if (keep[i]) out.points.push_back(all.points[i]);
  }
  return out;
}

/// Pixels of view `ref` scored in depth comparisons: valid ground truth,
/// at least `margin` pixels from the border, and seen unoccluded by every
/// other view (its ground-truth depth agrees within `rel_tol`).
inline Mask interior_mask(std::span<const DepthMap> depths, std::span<const CameraModel> cameras, std::size_t ref,
                          int margin, double rel_tol = 0.01) {
  if (ref >= depths.size() || depths.size() != cameras.size()) throw InputError("interior_mask: bad view index");
  const DepthMap& gt = depths[ref];
  Mask mask(gt.size(), 1, 0);
  const int others = static_cast<int>(depths.size()) - 1;
  parallel_for(0, gt.height(), [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    if (y < margin || y >= gt.height() - margin) return;
    for (int x = margin; x < gt.width() - margin; ++x) {
      if (!(gt(x, y) > 0.0)) continue;
      mask(x, y) = detail::observing_views(depths, cameras, ref, x, y, rel_tol) == others ? 1 : 0;
    }
  });
  return mask;
}

/// Block-mean downsampling of a ground-truth depth map by an integer
/// factor. A block with any invalid pixel is invalid (0).
inline DepthMap downsample_depth(const DepthMap& depth, int factor) {
  if (factor < 1) throw InputError("downsample factor must be >= 1");
  const Size out_size{ceil_div(depth.width(), factor), ceil_div(depth.height(), factor)};
  DepthMap out(out_size);
  for (int y = 0; y < out_size.height; ++y) {
    for (int x = 0; x < out_size.width; ++x) {
      double s = 0.0;
      int n = 0;
      bool ok = true;
      for (int yy = y * factor; yy < std::min(depth.height(), (y + 1) * factor); ++yy) {
        for (int xx = x * factor; xx < std::min(depth.width(), (x + 1) * factor); ++xx) {
          const double d = depth(xx, yy);
          ok = ok && d > 0.0 && std::isfinite(d);
          s += d;
          ++n;
        }
      }
      out(x, y) = ok ? s / n : 0.0;
    }
  }
  return out;
}

/// A coarse pixel is set when every pixel of its block is set.
inline Mask downsample_mask(const Mask& mask, int factor) {
  if (factor < 1) throw InputError("downsample factor must be >= 1");
  const Size out_size{ceil_div(mask.width(), factor), ceil_div(mask.height(), factor)};
  Mask out(out_size, 1, 0);
  for (int y = 0; y < out_size.height; ++y) {
    for (int x = 0; x < out_size.width; ++x) {
      bool all = true;
      for (int yy = y * factor; yy < std::min(mask.height(), (y + 1) * factor); ++yy) {
        for (int xx = x * factor; xx < std::min(mask.width(), (x + 1) * factor); ++xx) all = all && mask(xx, yy);
      }
      out(x, y) = all ? 1 : 0;
    }
  }
  return out;
}

/// 64-bit FNV-1a over raw bytes.
inline std::uint64_t fnv1a(std::span<const unsigned char> bytes, std::uint64_t h = 0xcbf29ce484222325ULL) {
  for (unsigned char b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

inline std::string hex64(std::uint64_t v) {
  static const char* digits = "0123456789abcdef";
  std::string s(16, '0');
  for (int i = 15; i >= 0; --i, v >>= 4) s[static_cast<std::size_t>(i)] = digits[v & 0xf];
  return s;
}

inline std::string file_hash(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open " + path);
  std::vector<unsigned char> buf((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  return hex64(fnv1a(buf));
}

inline void to_json(nlohmann::json& j, const ReconstructionScore& s) {
  j = {{"accuracy", s.accuracy},       {"completeness", s.completeness}, {"overall", s.overall},
       {"max_dist", s.max_dist},       {"pred_points", s.pred_points},   {"gt_points", s.gt_points},
       {"empty_prediction", s.empty_prediction}};
}

inline void to_json(nlohmann::json& j, const DepthErrorStats& s) {
  nlohmann::json inl = nlohmann::json::array();
  for (const auto& i : s.inliers) inl.push_back({{"threshold", i.threshold}, {"fraction", i.fraction}});
  j = {{"mae", s.mae}, {"rmse", s.rmse}, {"pixels", s.pixels}, {"inliers", inl}};
}

}  // namespace atv
