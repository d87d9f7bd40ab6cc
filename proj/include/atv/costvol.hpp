// Depth hypotheses and variance cost volumes.
#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <span>
#include <vector>

#include "atv/common.hpp"
#include "atv/features.hpp"
#include "atv/geometry.hpp"
#include "atv/parallel.hpp"

namespace atv {

enum class HypothesisKind { kUniform, kAdaptive };

struct HypothesisVolume {
  Volume<double> depths;
  HypothesisKind kind = HypothesisKind::kUniform;
  int stage_index = 1;

  int planes() const noexcept { return depths.depth(); }
  Size size() const noexcept { return depths.size(); }

  /// Throws InputError unless depths are positive and strictly increasing
  /// (by at least 1e-9) along the plane axis at every pixel.
  void validate() const {
    const int d = depths.depth();
    for (int y = 0; y < depths.height(); ++y) {
      for (int x = 0; x < depths.width(); ++x) {
        for (int j = 0; j < d; ++j) {
          if (!(depths(j, x, y) > 0.0)) throw InputError("hypothesis depths must be positive");
          if (j + 1 < d && !(depths(j + 1, x, y) - depths(j, x, y) >= 1e-9)) {
            throw InputError("hypothesis depths must be strictly increasing");
          }
        }
      }
    }
  }
};

/// Center of cell j when [lo, hi] is split into `count` equal cells.
inline double cell_center(double lo, double hi, int count, int j) {
  return lo + (j + 0.5) * ((hi - lo) / count);
}

inline HypothesisVolume uniform_hypotheses(double d_min, double d_max, int planes, Size size, int stage_index = 1) {
  if (!(d_min > 0.0) || !(d_min < d_max)) throw InputError("uniform_hypotheses needs 0 < d_min < d_max");
  if (planes < 1) throw InputError("uniform_hypotheses needs at least one plane");
  HypothesisVolume hyps;
  hyps.depths = Volume<double>(planes, size.width, size.height);
  hyps.kind = HypothesisKind::kUniform;
  hyps.stage_index = stage_index;
  for (int j = 0; j < planes; ++j) {
    const double d = cell_center(d_min, d_max, planes, j);
    auto slice = hyps.depths.slice(j);
    std::fill(slice.begin(), slice.end(), d);
  }
  return hyps;
}

/// Cost assigned where fewer than two views contribute.
inline constexpr double kSentinelCost = 1e6;

inline bool is_sentinel(double cost) { return cost >= kSentinelCost; }

struct CostVolume {
  Volume<double> costs;
  Volume<std::uint8_t> valid_views;

  int planes() const noexcept { return costs.depth(); }
  Size size() const noexcept { return costs.size(); }
};

namespace detail {

struct CostContext {
  std::span<const FeatureMap> features;
  std::vector<WarpMatrix> warps;  // one per source view (index 1..N-1)
  const HypothesisVolume* hyps;
  int channels;
};

inline CostContext make_cost_context(std::span<const FeatureMap> features, std::span<const CameraModel> cameras,
                                     const HypothesisVolume& hyps) {
  if (features.size() < 2) throw InputError("cost volume needs at least two views");
  if (features.size() != cameras.size()) throw InputError("one camera per feature map is required");
  if (features.size() > 255) throw InputError("at most 255 views are supported");
  const FeatureMap& ref = features.front();
  if (ref.values.empty()) throw InputError("reference feature map is empty");
  for (std::size_t i = 0; i < features.size(); ++i) {
    const FeatureMap& f = features[i];
    if (f.scale_index != ref.scale_index || f.values.channels() != ref.values.channels()) {
      throw InputError("feature maps must share scale and channel count");
    }
    if (cameras[i].image_size != f.values.size()) throw InputError("camera size must match its feature map");
  }
  if (hyps.size() != ref.values.size()) throw InputError("hypotheses must match the reference feature size");

  CostContext ctx{features, {}, &hyps, ref.values.channels()};
  ctx.warps.reserve(features.size() - 1);
  for (std::size_t i = 1; i < features.size(); ++i) ctx.warps.push_back(compose_warp(cameras[i], cameras[0]));
  return ctx;
}

// Fills one row of one plane. `scratch` holds N*C samples.
inline void cost_row(const CostContext& ctx, int plane, int y, CostVolume& out, std::vector<float>& scratch) {
  const int c = ctx.channels;
  const int width = ctx.features.front().values.width();
  const std::size_t n_views = ctx.features.size();
  scratch.resize(n_views * static_cast<std::size_t>(c));
  for (int x = 0; x < width; ++x) {
    const double d = ctx.hyps->depths(plane, x, y);
    const auto ref = ctx.features.front().values.pixel(x, y);
    std::copy(ref.begin(), ref.end(), scratch.begin());
    std::size_t valid = 1;
    for (std::size_t v = 1; v < n_views; ++v) {
      const auto warped = warp_pixel(ctx.warps[v - 1], x, y, d);
      if (!warped || !(warped->depth > 0.0)) continue;
      std::span<float> dst(scratch.data() + valid * c, static_cast<std::size_t>(c));
      if (bilinear_sample_into<float>(ctx.features[v].values, warped->x, warped->y, dst)) ++valid;
    }
    out.valid_views(plane, x, y) = static_cast<std::uint8_t>(valid);
    if (valid < 2) {
      out.costs(plane, x, y) = kSentinelCost;
      continue;
    }
    // Ascending-order sums: the cost is bit-identical under any permutation
    // of the source views.
    double total = 0.0;
    std::array<float, 256> column;
    for (int ch = 0; ch < c; ++ch) {
      for (std::size_t v = 0; v < valid; ++v) column[v] = scratch[v * c + ch];
      std::sort(column.begin(), column.begin() + static_cast<std::ptrdiff_t>(valid));
      double mean = 0.0;
      for (std::size_t v = 0; v < valid; ++v) mean += column[v];
      mean /= static_cast<double>(valid);
      double var = 0.0;
      for (std::size_t v = 0; v < valid; ++v) {
        const double e = column[v] - mean;
        var += e * e;
      }
      total += var / static_cast<double>(valid);
    }
    out.costs(plane, x, y) = total / c;
  }
}

}  // namespace detail

/// Cross-view feature variance at every (plane, pixel). View 0 is the
/// reference; its features enter unwarped. Out-of-image samples are
/// excluded; cells with fewer than two contributing views get
/// kSentinelCost.
inline CostVolume build_cost_volume(std::span<const FeatureMap> features, std::span<const CameraModel> cameras,
                                    const HypothesisVolume& hyps) {
  const auto ctx = detail::make_cost_context(features, cameras, hyps);
  const int planes = hyps.planes();
  const int w = hyps.size().width;
  const int h = hyps.size().height;
  CostVolume out{Volume<double>(planes, w, h), Volume<std::uint8_t>(planes, w, h)};
  parallel_for(0, static_cast<std::ptrdiff_t>(planes) * h, [&](std::ptrdiff_t task) {
    thread_local std::vector<float> scratch;
    detail::cost_row(ctx, static_cast<int>(task / h), static_cast<int>(task % h), out, scratch);
  });

  bool any = false;
  for (auto v : out.valid_views.data()) {
    if (v >= 2) {
      any = true;
      break;
    }
  }
  if (!any) throw PipelineError("no source view overlaps the reference at any hypothesis");
  return out;
}

/// Costs of a single plane, computed in isolation (row-major W x H).
inline std::vector<double> build_cost_slice(std::span<const FeatureMap> features, std::span<const CameraModel> cameras,
                                            const HypothesisVolume& hyps, int plane) {
  if (plane < 0 || plane >= hyps.planes()) throw InputError("plane index out of range");
  const auto ctx = detail::make_cost_context(features, cameras, hyps);
  const int w = hyps.size().width;
  const int h = hyps.size().height;
  CostVolume tmp{Volume<double>(hyps.planes(), w, h), Volume<std::uint8_t>(hyps.planes(), w, h)};
  std::vector<float> scratch;
  for (int y = 0; y < h; ++y) detail::cost_row(ctx, plane, y, tmp, scratch);
  const auto s = tmp.costs.slice(plane);
  return {s.begin(), s.end()};
}

}  // namespace atv
