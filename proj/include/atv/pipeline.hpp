// Per-view reconstruction on a dataset and the stage reports built from it.
#pragma once

#include <span>
#include <string>
#include <vector>

#include "json.hpp"

#include "atv/cascade.hpp"
#include "atv/config.hpp"
#include "atv/dataset.hpp"
#include "atv/evalkit.hpp"
#include "atv/uncertainty.hpp"

namespace atv {

/// Views used when `ref` is the reference: `ref` first, then the other
/// views in index order, at most `n_views` in total.
inline std::vector<std::size_t> view_selection(std::size_t total, std::size_t ref, int n_views) {
  if (ref >= total) throw InputError("reference view " + std::to_string(ref) + " does not exist");
  std::vector<std::size_t> order{ref};
  for (std::size_t v = 0; v < total && order.size() < static_cast<std::size_t>(n_views); ++v) {
    if (v != ref) order.push_back(v);
  }
  return order;
}

/// Cascade config with the depth range taken from the run config when set,
/// otherwise from the dataset.
inline CascadeConfig cascade_for(const RunConfig& cfg, const Dataset& ds) {
  CascadeConfig c = cfg.cascade;
  c.d_min = cfg.d_min.value_or(ds.d_min);
  c.d_max = cfg.d_max.value_or(ds.d_max);
  return c;
}

inline std::vector<FeaturePyramid> dataset_pyramids(const Dataset& ds, const FeatureConfig& features) {
  std::vector<FeaturePyramid> out;
  out.reserve(ds.views());
  for (std::size_t v = 0; v < ds.views(); ++v) {
    out.push_back(build_feature_pyramid(ds.images[v], features, static_cast<int>(v)));
  }
  return out;
}

inline std::vector<StageOutput> reconstruct_view(std::span<const FeaturePyramid> pyramids,
                                                 std::span<const CameraModel> cameras, std::size_t ref,
                                                 const CascadeConfig& config) {
  std::vector<FeaturePyramid> p;
  std::vector<CameraModel> c;
  for (std::size_t v : view_selection(pyramids.size(), ref, config.n_views)) {
    p.push_back(pyramids[v]);
    c.push_back(cameras[v]);
  }
  return run_cascade(std::span<const FeaturePyramid>(p), std::span<const CameraModel>(c), config);
}

/// Downsampling factor from full resolution to `stage`.
inline int stage_factor(int stage) { return 1 << (3 - stage); }

struct StageTruth {
  DepthMap depth;
  Mask mask;
};

/// Ground truth and evaluation mask for each stage of reference view `ref`.
inline std::vector<StageTruth> stage_truths(const Dataset& ds, std::size_t ref, const EvaluationConfig& eval,
                                            int stages) {
  if (!ds.has_ground_truth()) throw InputError("dataset has no ground-truth depth");
  const Mask full = interior_mask(ds.depths, ds.cameras, ref, eval.interior_margin, eval.visibility_tolerance);
  std::vector<StageTruth> out;
  for (int s = 1; s <= stages; ++s) {
    const int f = stage_factor(s);
    out.push_back({downsample_depth(ds.depths[ref], f), downsample_mask(full, f)});
  }
  return out;
}

/// JSON report of one stage. Statistics need ground truth; without it only
/// shape fields are written.
inline nlohmann::json stage_report(const StageOutput& st, const std::string& view, const StageTruth* truth,
                                   double d_min, double d_max) {
  nlohmann::json j = {{"view", view},
                      {"stage", st.stage},
                      {"width", st.size.width},
                      {"height", st.size.height},
                      {"planes", st.planes},
                      {"d_min", d_min},
                      {"d_max", d_max}};
  if (truth != nullptr) {
    const UncertaintyStats span = uncertainty_stats(st.span, truth->depth, truth->mask, st.planes);
    const UncertaintyStats intervals = uncertainty_stats(st.intervals, truth->depth, truth->mask, st.planes);
    j["span_stats"] = span;
    j["interval_stats"] = intervals;
    j["depth_error"] = depth_error(st.estimate.depth, truth->depth, truth->mask, span.unit_distance);
  } else {
    j["span_stats"] = nullptr;
    j["interval_stats"] = nullptr;
    j["depth_error"] = nullptr;
  }
  return j;
}

}  // namespace atv
