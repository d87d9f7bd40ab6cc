// Variance-based confidence intervals, adaptive thin volume sampling and
// interval statistics (coverage, width, unit sampling distance).
#pragma once

#include <algorithm>
#include <cmath>
#include <utility>
#include <vector>

#include "json.hpp"

#include "atv/common.hpp"
#include "atv/costvol.hpp"
#include "atv/parallel.hpp"
#include "atv/probability.hpp"

namespace atv {

struct IntervalMap {
  DepthMap lower;
  DepthMap upper;
  double lambda_used = 0.0;

  Size size() const noexcept { return lower.size(); }
};

/// Constant interval [lo, hi] at every pixel.
inline IntervalMap constant_interval(double lo, double hi, Size size) {
  return {DepthMap(size, 1, lo), DepthMap(size, 1, hi), 0.0};
}

/// [L - lambda*sigma, L + lambda*sigma] per pixel, widened symmetrically to
/// `min_width`, then clipped to [d_min, d_max]. An interval that clipping
/// left narrower than `min_width` is slid back inside the range. When the
/// range itself is narrower than `min_width` the whole range is used.
inline IntervalMap confidence_interval(const DepthEstimate& est, double lambda, double min_width, double d_min,
                                       double d_max) {
  if (!(lambda > 0.0)) throw InputError("lambda must be positive");
  if (!(min_width > 0.0)) throw InputError("min_width must be positive");
  if (!(d_min < d_max)) throw InputError("confidence_interval needs d_min < d_max");
  if (est.sigma.size() != est.depth.size()) throw InputError("depth and sigma maps differ in shape");
  const Size size = est.depth.size();
  IntervalMap out{DepthMap(size), DepthMap(size), lambda};
  const bool narrow_range = d_max - d_min <= min_width;
  parallel_for(0, size.height, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < size.width; ++x) {
      if (narrow_range) {
        out.lower(x, y) = d_min;
        out.upper(x, y) = d_max;
        continue;
      }
      const double center = est.depth(x, y);
      const double half = lambda * est.sigma(x, y);
      double lo = center - half;
      double hi = center + half;
      if (hi - lo < min_width) {
        lo = center - 0.5 * min_width;
        hi = center + 0.5 * min_width;
      }
      if (lo < d_min) {
        lo = d_min;
        hi = std::max(std::min(hi, d_max), d_min + min_width);
      } else if (hi > d_max) {
        hi = d_max;
        lo = std::min(lo, d_max - min_width);
      }
      out.lower(x, y) = lo;
      out.upper(x, y) = hi;
    }
  });
  return out;
}

/// Per-pixel cell-centered samples of each interval: an adaptive thin volume.
inline HypothesisVolume atv_hypotheses(const IntervalMap& intervals, int planes, int stage_index) {
  if (planes < 1) throw InputError("atv_hypotheses needs at least one plane");
  const Size size = intervals.size();
  HypothesisVolume hyps;
  hyps.depths = Volume<double>(planes, size.width, size.height);
  hyps.kind = HypothesisKind::kAdaptive;
  hyps.stage_index = stage_index;
  parallel_for(0, size.height, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    for (int x = 0; x < size.width; ++x) {
      const double lo = intervals.lower(x, y);
      const double hi = intervals.upper(x, y);
      for (int j = 0; j < planes; ++j) hyps.depths(j, x, y) = cell_center(lo, hi, planes, j);
    }
  });
  return hyps;
}

struct HistogramBin {
  double lower = 0.0;
  double upper = 0.0;
  std::size_t count = 0;
};

struct UncertaintyStats {
  double coverage_ratio = 0.0;
  double mean_width = 0.0;
  double median_width = 0.0;
  double unit_distance = 0.0;
  int planes = 0;  // D of the volume the intervals feed
  std::size_t valid_pixels = 0;
  std::vector<HistogramBin> histogram;
};

/// Coverage of `gt_depth` by the intervals and width statistics over valid
/// pixels. unit_distance = mean_width / planes.
inline UncertaintyStats uncertainty_stats(const IntervalMap& intervals, const DepthMap& gt_depth, const Mask& valid,
                                          int planes, double bin_width = 0.5) {
  if (gt_depth.size() != intervals.size() || valid.size() != intervals.size()) {
    throw InputError("uncertainty_stats inputs differ in shape");
  }
  if (planes < 1) throw InputError("uncertainty_stats needs planes >= 1");
  if (!(bin_width > 0.0)) throw InputError("histogram bin width must be positive");

  std::vector<double> widths;
  std::size_t covered = 0;
  const Size size = intervals.size();
  for (int y = 0; y < size.height; ++y) {
    for (int x = 0; x < size.width; ++x) {
      if (!valid(x, y) || !std::isfinite(gt_depth(x, y))) continue;
      const double lo = intervals.lower(x, y);
      const double hi = intervals.upper(x, y);
      widths.push_back(hi - lo);
      if (lo <= gt_depth(x, y) && gt_depth(x, y) <= hi) ++covered;
    }
  }
  if (widths.empty()) throw StatisticsError("uncertainty_stats: no valid pixels");

  UncertaintyStats stats;
  stats.valid_pixels = widths.size();
  stats.planes = planes;
  stats.coverage_ratio = static_cast<double>(covered) / static_cast<double>(widths.size());
  stats.mean_width = fixed_tree_sum(widths) / static_cast<double>(widths.size());
  stats.unit_distance = stats.mean_width / planes;

  const double max_width = *std::max_element(widths.begin(), widths.end());
  const std::size_t bins = static_cast<std::size_t>(std::floor(max_width / bin_width)) + 1;
  stats.histogram.resize(bins);
  for (std::size_t b = 0; b < bins; ++b) {
    stats.histogram[b].lower = b * bin_width;
    stats.histogram[b].upper = (b + 1) * bin_width;
  }
  for (double wdt : widths) {
    const auto b = std::min(bins - 1, static_cast<std::size_t>(std::floor(wdt / bin_width)));
    ++stats.histogram[b].count;
  }

  std::sort(widths.begin(), widths.end());
  const std::size_t n = widths.size();
  stats.median_width = n % 2 == 1 ? widths[n / 2] : 0.5 * (widths[n / 2 - 1] + widths[n / 2]);
  return stats;
}

/// (gt - lower, upper - gt). Both nonnegative exactly where the interval
/// covers the ground truth.
inline std::pair<DepthMap, DepthMap> bound_maps(const IntervalMap& intervals, const DepthMap& gt_depth) {
  if (gt_depth.size() != intervals.size()) throw InputError("bound_maps inputs differ in shape");
  DepthMap below(gt_depth.size());
  DepthMap above(gt_depth.size());
  for (std::size_t i = 0; i < gt_depth.data().size(); ++i) {
    below.data()[i] = gt_depth.data()[i] - intervals.lower.data()[i];
    above.data()[i] = intervals.upper.data()[i] - gt_depth.data()[i];
  }
  return {std::move(below), std::move(above)};
}

inline void to_json(nlohmann::json& j, const UncertaintyStats& s) {
  nlohmann::json hist = nlohmann::json::array();
  for (const auto& b : s.histogram) hist.push_back({{"bin_lower", b.lower}, {"bin_upper", b.upper}, {"count", b.count}});
  j = {{"coverage_ratio", s.coverage_ratio}, {"mean_width", s.mean_width},   {"median_width", s.median_width},
       {"unit_distance", s.unit_distance},   {"planes", s.planes},           {"valid_pixels", s.valid_pixels},
       {"histogram", hist}};
}

inline void from_json(const nlohmann::json& j, UncertaintyStats& s) {
  s.coverage_ratio = j.at("coverage_ratio").get<double>();
  s.mean_width = j.at("mean_width").get<double>();
  s.median_width = j.at("median_width").get<double>();
  s.unit_distance = j.at("unit_distance").get<double>();
  s.planes = j.at("planes").get<int>();
  s.valid_pixels = j.at("valid_pixels").get<std::size_t>();
  s.histogram.clear();
  for (const auto& b : j.at("histogram")) {
    s.histogram.push_back({b.at("bin_lower").get<double>(), b.at("bin_upper").get<double>(), b.at("count").get<std::size_t>()});
  }
}

}  // namespace atv
