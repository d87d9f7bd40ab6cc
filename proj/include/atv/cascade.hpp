// Three-stage coarse-to-fine depth estimation.
//
// Stage 1 sweeps uniform fronto-parallel planes over [d_min, d_max] at
// quarter resolution. Each later stage doubles the resolution and samples an
// adaptive thin volume inside the previous stage's confidence intervals.
#pragma once

#include <array>
#include <optional>
#include <span>
#include <vector>

#include "atv/common.hpp"
#include "atv/costvol.hpp"
#include "atv/features.hpp"
#include "atv/geometry.hpp"
#include "atv/probability.hpp"
#include "atv/uncertainty.hpp"

namespace atv {

struct CascadeConfig {
  int n_views = 5;
  double d_min = 0.0;
  double d_max = 0.0;
  std::array<int, 3> planes{64, 32, 8};  // 0 disables a stage and every later one
  double lambda = 1.5;
  double beta = 10.0;
  std::array<int, 3> smoothing_radii{2, 1, 1};
  double min_interval_width = 0.1;
  FeatureConfig features;
  bool keep_probabilities = false;

  int stage_count() const {
    int n = 0;
    while (n < 3 && planes[static_cast<std::size_t>(n)] > 0) ++n;
    return n;
  }

  void validate() const {
    if (n_views < 2) throw InputError("cascade needs n_views >= 2");
    if (!(d_min > 0.0) || !(d_min < d_max)) throw InputError("cascade needs 0 < d_min < d_max");
    if (planes[0] < 1) throw InputError("stage 1 needs at least one plane");
    for (int k = 0; k < 3; ++k) {
      if (planes[static_cast<std::size_t>(k)] < 0) throw InputError("plane counts must be >= 0");
      if (k > 0 && planes[static_cast<std::size_t>(k)] > 0 && planes[static_cast<std::size_t>(k - 1)] == 0) {
        throw InputError("a stage cannot follow a disabled stage");
      }
    }
    for (int r : smoothing_radii) {
      if (r < 0) throw InputError("smoothing radii must be >= 0");
    }
    if (!(lambda > 0.0)) throw InputError("lambda must be positive");
    if (!(beta > 0.0)) throw InputError("beta must be positive");
    if (!(min_interval_width > 0.0)) throw InputError("min_interval_width must be positive");
    features.validate();
  }
};

struct StageOutput {
  int stage = 1;
  Size size;
  int planes = 0;
  IntervalMap span;        // depth range this stage's hypotheses were sampled from
  DepthEstimate estimate;
  IntervalMap intervals;   // confidence intervals of this stage's estimate
  std::optional<ProbabilityVolume> probabilities;
};

/// Stage resolutions: quarter, half, full (ceil division).
inline Size stage_size(Size full, int stage) { return scale_size(full, stage); }

inline StageOutput run_stage(int stage, std::span<const FeatureMap> features, std::span<const CameraModel> cameras,
                             const HypothesisVolume& hyps, const CascadeConfig& config) {
  if (stage < 1 || stage > 3) throw InputError("stage index must be 1, 2 or 3");
  for (const auto& f : features) {
    if (f.scale_index != stage) throw InputError("feature scale does not match the stage");
  }
  const auto k = static_cast<std::size_t>(stage - 1);

  const CostVolume raw = build_cost_volume(features, cameras, hyps);
  const CostVolume smoothed = regularize_cost(raw, config.smoothing_radii[k]);
  ProbabilityVolume probs = softmax_probability(smoothed, config.beta);

  StageOutput out;
  out.stage = stage;
  out.size = hyps.size();
  out.planes = hyps.planes();
  out.estimate = estimate_depth(probs, hyps, stage);
  out.intervals =
      confidence_interval(out.estimate, config.lambda, config.min_interval_width, config.d_min, config.d_max);
  if (config.keep_probabilities) out.probabilities = std::move(probs);
  return out;
}

/// Bilinear resampling of both bounds to `target`, pixel centers aligned
/// the same way as area-averaging downsampling. Lower <= upper survives
/// because both maps use the same nonnegative weights.
inline IntervalMap upsample_intervals(const IntervalMap& intervals, Size target) {
  const Size src = intervals.size();
  if (src.width < 1 || src.height < 1 || target.width < 1 || target.height < 1) {
    throw InputError("upsample_intervals needs nonempty maps");
  }
  const double rx = static_cast<double>(src.width) / target.width;
  const double ry = static_cast<double>(src.height) / target.height;
  IntervalMap out{DepthMap(target), DepthMap(target), intervals.lambda_used};
  parallel_for(0, target.height, [&](std::ptrdiff_t yy) {
    const int y = static_cast<int>(yy);
    const double sy = std::clamp((y + 0.5) * ry - 0.5, 0.0, static_cast<double>(src.height - 1));
    double lo_v = 0.0;
    double hi_v = 0.0;
    for (int x = 0; x < target.width; ++x) {
      const double sx = std::clamp((x + 0.5) * rx - 0.5, 0.0, static_cast<double>(src.width - 1));
      bilinear_sample_into<double>(intervals.lower, sx, sy, std::span<double>(&lo_v, 1));
      bilinear_sample_into<double>(intervals.upper, sx, sy, std::span<double>(&hi_v, 1));
      out.lower(x, y) = lo_v;
      out.upper(x, y) = std::max(lo_v, hi_v);
    }
  });
  return out;
}

inline IntervalMap upsample_estimate(const IntervalMap& intervals, int factor = 2) {
  if (factor != 2) throw InputError("upsample factor must be 2");
  return upsample_intervals(intervals, {intervals.size().width * 2, intervals.size().height * 2});
}

/// Runs every enabled stage. `pyramids[i]` and `cameras[i]` describe view i;
/// view 0 is the reference. Cameras are given at full resolution.
inline std::vector<StageOutput> run_cascade(std::span<const FeaturePyramid> pyramids,
                                            std::span<const CameraModel> cameras, const CascadeConfig& config) {
  config.validate();
  if (pyramids.size() < 2) throw InputError("cascade needs at least two views");
  if (pyramids.size() != cameras.size()) throw InputError("one camera per view is required");
  const Size full = cameras.front().image_size;
  for (const auto& cam : cameras) {
    cam.validate();
  }

  std::vector<StageOutput> stages;
  const int count = config.stage_count();
  for (int stage = 1; stage <= count; ++stage) {
    const auto k = static_cast<std::size_t>(stage - 1);
    const Size size = stage_size(full, stage);
    std::vector<FeatureMap> features;
    std::vector<CameraModel> scaled;
    for (std::size_t v = 0; v < pyramids.size(); ++v) {
      features.push_back(pyramids[v][k]);
      scaled.push_back(cameras[v].rescaled(pyramids[v][k].values.size()));
    }
    if (features.front().values.size() != size) throw InputError("reference features do not match the stage size");

    IntervalMap span;
    HypothesisVolume hyps;
    if (stage == 1) {
      span = constant_interval(config.d_min, config.d_max, size);
      hyps = uniform_hypotheses(config.d_min, config.d_max, config.planes[k], size, stage);
    } else {
      span = upsample_intervals(stages.back().intervals, size);
      hyps = atv_hypotheses(span, config.planes[k], stage);
    }
    StageOutput out = run_stage(stage, features, scaled, hyps, config);
    out.span = std::move(span);
    stages.push_back(std::move(out));
  }
  return stages;
}

inline std::vector<StageOutput> run_cascade(std::span<const ViewImage> views, std::span<const CameraModel> cameras,
                                            const CascadeConfig& config) {
  if (views.size() != cameras.size()) throw InputError("one camera per view is required");
  std::vector<FeaturePyramid> pyramids;
  pyramids.reserve(views.size());
  for (std::size_t v = 0; v < views.size(); ++v) {
    if (views[v].size() != cameras[v].image_size) throw InputError("image size does not match its camera");
    pyramids.push_back(build_feature_pyramid(views[v], config.features, static_cast<int>(v)));
  }
  return run_cascade(std::span<const FeaturePyramid>(pyramids), cameras, config);
}

}  // namespace atv
