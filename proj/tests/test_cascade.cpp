#include <gtest/gtest.h>

#include <cmath>
#include <map>

#include "atv/cascade.hpp"
#include "atv/evalkit.hpp"
#include "atv/synth.hpp"

using namespace atv;

namespace {

struct SceneRun {
  SceneSpec scene;
  RenderedViews views;
};

const SceneRun& rendered(const std::string& name) {
  static std::map<std::string, SceneRun> cache;
  auto it = cache.find(name);
  if (it == cache.end()) {
    SceneRun r{builtin_scene(name), {}};
    r.views = render_views(r.scene);
    it = cache.emplace(name, std::move(r)).first;
  }
  return it->second;
}

CascadeConfig config_for(const SceneSpec& s) {
  CascadeConfig c;
  c.d_min = s.d_min;
  c.d_max = s.d_max;
  return c;
}

double masked_mae(const DepthMap& est, const DepthMap& gt, const Mask& mask) {
  return depth_error(est, gt, mask, 1.0).mae;
}

}  // namespace

TEST(Cascade, StageSizesAt1600x1184) {
  EXPECT_EQ(stage_size({1600, 1184}, 1), (Size{400, 296}));
  EXPECT_EQ(stage_size({1600, 1184}, 2), (Size{800, 592}));
  EXPECT_EQ(stage_size({1600, 1184}, 3), (Size{1600, 1184}));
  EXPECT_EQ(stage_size({321, 257}, 1), (Size{81, 65}));
}

TEST(Cascade, DefaultPlaneBudget) {
  const CascadeConfig c;
  EXPECT_EQ(c.planes[0], 64);
  EXPECT_EQ(c.planes[1], 32);
  EXPECT_EQ(c.planes[2], 8);
  EXPECT_EQ(c.planes[0] + c.planes[1] + c.planes[2], 104);
  EXPECT_DOUBLE_EQ(c.lambda, 1.5);
  EXPECT_EQ(c.n_views, 5);
  EXPECT_EQ(c.stage_count(), 3);
}

TEST(Cascade, ConfigValidation) {
  CascadeConfig c;
  c.d_min = 2.0;
  c.d_max = 4.0;
  EXPECT_NO_THROW(c.validate());
  CascadeConfig gap = c;
  gap.planes = {64, 0, 8};
  EXPECT_THROW(gap.validate(), InputError);
  CascadeConfig range = c;
  range.d_max = 1.0;
  EXPECT_THROW(range.validate(), InputError);
  CascadeConfig none = c;
  none.planes = {0, 0, 0};
  EXPECT_THROW(none.validate(), InputError);
}

TEST(Cascade, ConstantViewsGiveUniformDistribution) {
  const SceneRun& r = rendered("flat");
  std::vector<ViewImage> flat(r.views.images.size(), ViewImage(r.views.images[0].size(), 3, 0.5f));
  CascadeConfig c = config_for(r.scene);
  c.planes = {64, 0, 0};
  c.keep_probabilities = true;
  const auto stages = run_cascade(std::span<const ViewImage>(flat), std::span<const CameraModel>(r.scene.cameras), c);
  ASSERT_EQ(stages.size(), 1u);
  const StageOutput& s = stages[0];
  const double step = (c.d_max - c.d_min) / 64;
  const double uniform_var = (64.0 * 64.0 - 1.0) / 12.0 * step * step;
  const int cx = s.size.width / 2;
  const int cy = s.size.height / 2;
  for (int j = 0; j < 64; ++j) EXPECT_NEAR(s.probabilities->probs(j, cx, cy), 1.0 / 64, 1e-12);
  EXPECT_NEAR(s.estimate.depth(cx, cy), 0.5 * (c.d_min + c.d_max), 1e-12);
  EXPECT_NEAR(s.estimate.sigma(cx, cy) * s.estimate.sigma(cx, cy), uniform_var, 1e-9);
}

TEST(Cascade, StageOneFindsFlatPlane) {
  const SceneRun& r = rendered("flat");
  CascadeConfig c = config_for(r.scene);
  c.planes = {64, 0, 0};
  const auto stages =
      run_cascade(std::span<const ViewImage>(r.views.images), std::span<const CameraModel>(r.scene.cameras), c);
  const Mask interior = downsample_mask(interior_mask(r.views.depths, r.scene.cameras, 0, 16), 4);
  const DepthMap gt = downsample_depth(r.views.depths[0], 4);
  const double unit = (c.d_max - c.d_min) / 64;
  const DepthErrorStats e = depth_error(stages[0].estimate.depth, gt, interior, unit);
  EXPECT_GE(e.inliers[0].fraction, 0.90) << "mae " << e.mae;
}

TEST(Cascade, SingleStageEqualsPlainPlaneSweep) {
  const SceneRun& r = rendered("sphere-on-plane");
  CascadeConfig c = config_for(r.scene);
  c.planes = {64, 0, 0};
  const auto stages =
      run_cascade(std::span<const ViewImage>(r.views.images), std::span<const CameraModel>(r.scene.cameras), c);
  ASSERT_EQ(stages.size(), 1u);

  std::vector<FeatureMap> feats;
  std::vector<CameraModel> cams;
  for (std::size_t v = 0; v < r.views.images.size(); ++v) {
    feats.push_back(extract_features(r.views.images[v], 1, c.features.channels[0], c.features, static_cast<int>(v)));
    cams.push_back(r.scene.cameras[v].rescaled(feats.back().values.size()));
  }
  const HypothesisVolume h = uniform_hypotheses(c.d_min, c.d_max, 64, feats[0].values.size());
  const CostVolume cv = regularize_cost(build_cost_volume(feats, cams, h), c.smoothing_radii[0]);
  const DepthEstimate est = estimate_depth(softmax_probability(cv, c.beta), h, 1);
  EXPECT_EQ(stages[0].estimate.depth, est.depth);
  EXPECT_EQ(stages[0].estimate.sigma, est.sigma);
}

TEST(Cascade, TwoPlaneErrorDecreasesAndWidthsShrink) {
  const SceneRun& r = rendered("two-plane");
  const CascadeConfig c = config_for(r.scene);
  const auto stages =
      run_cascade(std::span<const ViewImage>(r.views.images), std::span<const CameraModel>(r.scene.cameras), c);
  ASSERT_EQ(stages.size(), 3u);
  const Mask full = interior_mask(r.views.depths, r.scene.cameras, 0, 16);
  std::vector<double> mae;
  std::vector<double> width;
  for (const auto& s : stages) {
    const int f = 1 << (3 - s.stage);
    EXPECT_EQ(s.size, stage_size(r.scene.cameras[0].image_size, s.stage));
    const Mask m = downsample_mask(full, f);
    const DepthMap gt = downsample_depth(r.views.depths[0], f);
    mae.push_back(masked_mae(s.estimate.depth, gt, m));
    width.push_back(uncertainty_stats(s.span, gt, m, s.planes).mean_width);
    // Every estimate lies inside the span its hypotheses sampled.
    for (std::size_t i = 0; i < s.estimate.depth.pixel_count(); ++i) {
      ASSERT_GE(s.estimate.depth.data()[i], s.span.lower.data()[i]);
      ASSERT_LE(s.estimate.depth.data()[i], s.span.upper.data()[i]);
    }
  }
  EXPECT_GT(mae[0], mae[1]);
  EXPECT_GT(mae[1], mae[2]);
  EXPECT_NEAR(width[0], c.d_max - c.d_min, 1e-9);  // mean of many equal widths
  EXPECT_LT(width[1], width[0]);
  EXPECT_LT(width[2], width[1]);
}

TEST(Cascade, DeterministicAcrossRunsAndWorkers) {
  const SceneRun& r = rendered("two-plane");
  const CascadeConfig c = config_for(r.scene);
  set_num_workers(1);
  const auto a =
      run_cascade(std::span<const ViewImage>(r.views.images), std::span<const CameraModel>(r.scene.cameras), c);
  set_num_workers(3);
  const auto b =
      run_cascade(std::span<const ViewImage>(r.views.images), std::span<const CameraModel>(r.scene.cameras), c);
  set_num_workers(0);
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    EXPECT_EQ(a[k].estimate.depth, b[k].estimate.depth);
    EXPECT_EQ(a[k].estimate.sigma, b[k].estimate.sigma);
    EXPECT_EQ(a[k].intervals.lower, b[k].intervals.lower);
    EXPECT_EQ(a[k].intervals.upper, b[k].intervals.upper);
  }
}

TEST(Upsample, ConstantStaysConstantAndDoublesSize) {
  const IntervalMap m = constant_interval(2.0, 3.5, {7, 5});
  const IntervalMap u = upsample_estimate(m, 2);
  EXPECT_EQ(u.size(), (Size{14, 10}));
  for (double v : u.lower.data()) EXPECT_EQ(v, 2.0);
  for (double v : u.upper.data()) EXPECT_EQ(v, 3.5);
  EXPECT_THROW(upsample_estimate(m, 3), InputError);
}

TEST(Upsample, AffineRoundTripThroughAreaDownsampling) {
  IntervalMap m{DepthMap(20, 16), DepthMap(20, 16), 1.5};
  for (int y = 0; y < 16; ++y) {
    for (int x = 0; x < 20; ++x) {
      m.lower(x, y) = 2.0 + 0.03 * x - 0.02 * y;
      m.upper(x, y) = m.lower(x, y) + 0.4 + 0.01 * x;
    }
  }
  const IntervalMap u = upsample_estimate(m);
  const DepthMap lo = area_downsample(u.lower, 2);
  const DepthMap hi = area_downsample(u.upper, 2);
  for (int y = 1; y < 15; ++y) {
    for (int x = 1; x < 19; ++x) {
      EXPECT_NEAR(lo(x, y), m.lower(x, y), 1e-5);
      EXPECT_NEAR(hi(x, y), m.upper(x, y), 1e-5);
    }
  }
  for (std::size_t i = 0; i < u.lower.pixel_count(); ++i) EXPECT_LE(u.lower.data()[i], u.upper.data()[i]);
}
