#include <gtest/gtest.h>

#include <algorithm>
#include <fstream>
#include <random>

#include "atv/fusion.hpp"
#include "atv/synth.hpp"
#include "support.hpp"

using namespace atv;

namespace {

std::vector<std::array<double, 3>> sorted_positions(const PointCloud& c) {
  std::vector<std::array<double, 3>> out;
  for (const auto& p : c.points) out.push_back({p.position.x(), p.position.y(), p.position.z()});
  std::sort(out.begin(), out.end());
  return out;
}

struct GtViews {
  SceneSpec scene;
  RenderedViews views;
};

const GtViews& two_plane() {
  static const GtViews g = [] {
    GtViews v{builtin_scene("two-plane"), {}};
    v.views = render_views(v.scene);
    return v;
  }();
  return g;
}

}  // namespace

TEST(Fusion, IdenticalCamerasKeepEveryValidPixel) {
  CameraModel cam;
  cam.intrinsics << 20.0, 0.0, 7.5, 0.0, 20.0, 5.5, 0.0, 0.0, 1.0;
  cam.image_size = {16, 12};
  DepthMap d(16, 12, 1, 2.0);
  d(3, 3) = 0.0;  // invalid
  d(4, 3) = 2.5;
  const std::vector<DepthMap> depths(4, d);
  const std::vector<CameraModel> cams(4, cam);
  const std::vector<ViewImage> images(4, ViewImage(16, 12, 3, 0.5f));
  const FusionResult r = fuse_depth_maps(depths, cams, images, FusionConfig{});
  EXPECT_EQ(r.cloud.size(), 4u * (16 * 12 - 1));
  for (double k : r.kept_fraction) EXPECT_DOUBLE_EQ(k, 1.0);
  // The first reference pass emits its pixels in row order.
  EXPECT_EQ(r.cloud.points.front().source_view, 0);
  EXPECT_LT((r.cloud.points.front().position - cam.unproject(0.0, 0.0, 2.0)).norm(), 1e-12);
}

TEST(Fusion, ThresholdOnConsistentViews) {
  CameraModel cam;
  cam.intrinsics << 20.0, 0.0, 3.5, 0.0, 20.0, 3.5, 0.0, 0.0, 1.0;
  cam.image_size = {8, 8};
  const DepthMap good(8, 8, 1, 2.0);
  const DepthMap bad(8, 8, 1, 3.0);
  // Reference plus two agreeing views and one disagreeing view.
  const std::vector<DepthMap> depths{good, good, good, bad};
  const std::vector<CameraModel> cams(4, cam);
  const std::vector<ViewImage> images(4, ViewImage(8, 8, 3, 0.2f));
  FusionConfig cfg;
  cfg.min_consistent_views = 3;
  const FusionResult r3 = fuse_depth_maps(depths, cams, images, cfg);
  EXPECT_EQ(r3.cloud.size(), 0u);
  cfg.min_consistent_views = 2;
  const FusionResult r2 = fuse_depth_maps(depths, cams, images, cfg);
  EXPECT_EQ(r2.cloud.size(), 3u * 64);
  EXPECT_DOUBLE_EQ(r2.kept_fraction[3], 0.0);
}

TEST(Fusion, RejectsMismatchedInputs) {
  CameraModel cam;
  cam.image_size = {4, 4};
  const std::vector<DepthMap> depths{DepthMap(4, 4), DepthMap(4, 4)};
  const std::vector<CameraModel> one{cam};
  const std::vector<ViewImage> images(2, ViewImage(4, 4, 3));
  EXPECT_THROW(fuse_depth_maps(depths, one, images, FusionConfig{}), InputError);
  FusionConfig bad;
  bad.max_reprojection_dist = 0.0;
  EXPECT_THROW(fuse_depth_maps(depths, std::vector<CameraModel>(2, cam), images, bad), InputError);
}

TEST(Fusion, GroundTruthDepthsFusePreciselyAndOrderInvariantly) {
  const GtViews& g = two_plane();
  const FusionResult a = fuse_depth_maps(g.views.depths, g.scene.cameras, g.views.images, FusionConfig{});
  ASSERT_GT(a.cloud.size(), 1000u);

  // Reverse the non-reference views: same multiset of points.
  std::vector<DepthMap> d{g.views.depths[0], g.views.depths[4], g.views.depths[3], g.views.depths[2],
                          g.views.depths[1]};
  std::vector<CameraModel> c{g.scene.cameras[0], g.scene.cameras[4], g.scene.cameras[3], g.scene.cameras[2],
                             g.scene.cameras[1]};
  std::vector<ViewImage> i{g.views.images[0], g.views.images[4], g.views.images[3], g.views.images[2],
                           g.views.images[1]};
  const FusionResult b = fuse_depth_maps(d, c, i, FusionConfig{});
  EXPECT_EQ(sorted_positions(a.cloud), sorted_positions(b.cloud));

  // Every point reprojects into its reference view near a pixel center and
  // lies on the surface.
  const FusionConfig cfg;
  for (std::size_t k = 0; k < a.cloud.size(); k += 97) {
    const CloudPoint& p = a.cloud.points[k];
    const auto q = g.scene.cameras[static_cast<std::size_t>(p.source_view)].project(p.position);
    ASSERT_TRUE(q.has_value());
    EXPECT_LE(std::hypot((*q)[0] - std::round((*q)[0]), (*q)[1] - std::round((*q)[1])), cfg.max_reprojection_dist);
    const double z = p.position.z();
    EXPECT_TRUE(std::abs(z - 2.6) < 0.03 || std::abs(z - 3.4) < 0.04) << z;
  }
}

TEST(Fusion, RaisingTheThresholdNeverAddsPoints) {
  const GtViews& g = two_plane();
  std::size_t prev = static_cast<std::size_t>(-1);
  for (int m = 1; m <= 4; ++m) {
    FusionConfig cfg;
    cfg.min_consistent_views = m;
    const std::size_t n = fuse_depth_maps(g.views.depths, g.scene.cameras, g.views.images, cfg).cloud.size();
    EXPECT_LE(n, prev);
    prev = n;
  }
}

TEST(Ply, VertexLineFormat) {
  PointCloud c;
  CloudPoint p;
  p.position = Vec3(1.5, -2.0, 3.0);
  p.color = Vec3(1.0, 0.0, 0.5);
  c.points.push_back(p);
  const std::string text = format_ply(c);
  EXPECT_NE(text.find("element vertex 1\n"), std::string::npos);
  EXPECT_NE(text.find("end_header\n1.5 -2 3 255 0 127\n"), std::string::npos);
}

TEST(Ply, EmptyCloudIsValid) {
  const auto dir = testkit::temp_dir("ply_empty");
  const std::string path = (dir / "e.ply").string();
  write_ply(PointCloud{}, path);
  EXPECT_EQ(read_ply(path).size(), 0u);
}

TEST(Ply, RoundTripPositionsExactColorsQuantized) {
  const auto dir = testkit::temp_dir("ply_rt");
  std::mt19937_64 rng(6);
  std::uniform_real_distribution<double> u(-100.0, 100.0);
  std::uniform_real_distribution<double> c(0.0, 1.0);
  PointCloud cloud;
  for (int i = 0; i < 500; ++i) {
    CloudPoint p;
    p.position = Vec3(u(rng), u(rng) * 1e-7, u(rng) * 1e9);
    p.color = Vec3(c(rng), c(rng), c(rng));
    cloud.points.push_back(p);
  }
  const std::string path = (dir / "c.ply").string();
  write_ply(cloud, path);
  const PointCloud back = read_ply(path);
  ASSERT_EQ(back.size(), cloud.size());
  for (std::size_t i = 0; i < cloud.size(); ++i) {
    EXPECT_EQ(back.points[i].position, cloud.points[i].position);
    for (int k = 0; k < 3; ++k) {
      EXPECT_LE(cloud.points[i].color[k] - back.points[i].color[k], 1.0 / 255.0);
      EXPECT_GE(cloud.points[i].color[k] - back.points[i].color[k], 0.0);
    }
  }
}

TEST(Ply, MalformedFilesReportLineNumbers) {
  const std::string header =
      "ply\nformat ascii 1.0\nelement vertex 2\nproperty double x\nproperty double y\nproperty double z\n"
      "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  try {
    parse_ply(header + "1 2 3 4 5 6\n1 2 x 4 5 6\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 12u);
  }
  try {
    parse_ply(header + "1 2 3 4 5 6\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 12u);
  }
  try {
    parse_ply("ply\nformat binary_little_endian 1.0\n");
    FAIL();
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 2u);
  }
  EXPECT_THROW(parse_ply(header + "1 2 3 256 0 0\n0 0 0 0 0 0\n"), ParseError);
}
