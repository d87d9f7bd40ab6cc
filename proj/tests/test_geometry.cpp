#include <gtest/gtest.h>

#include <random>

#include "atv/geometry.hpp"
#include "support.hpp"

using namespace atv;

namespace {

// Independent oracle: back-project the reference pixel, move it into the
// source frame, project with the source intrinsics.
Vec3 oracle_warp(const CameraModel& src, const CameraModel& ref, double x, double y, double d) {
  const Vec3 ray = ref.intrinsics.inverse() * Vec3(x, y, 1.0);
  const Vec3 cam_ref = ray * d;
  const Vec3 world = ref.rotation.transpose() * (cam_ref - ref.translation);
  const Vec3 cam_src = src.rotation * world + src.translation;
  const Vec3 pix = src.intrinsics * cam_src;
  return {pix.x() / pix.z(), pix.y() / pix.z(), cam_src.z()};
}

// Plain triple-loop 4x4 product, no Eigen expression templates.
Mat4 naive_product(const Mat4& a, const Mat4& b) {
  Mat4 out;
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double s = 0.0;
      for (int k = 0; k < 4; ++k) s += a(i, k) * b(k, j);
      out(i, j) = s;
    }
  }
  return out;
}

}  // namespace

TEST(ComposeWarp, SameCameraIsIdentity) {
  std::mt19937_64 rng(1);
  for (int i = 0; i < 50; ++i) {
    const CameraModel c = testkit::random_camera(rng);
    const WarpMatrix h = compose_warp(c, c);
    EXPECT_LT((h.entries - Mat4::Identity()).cwiseAbs().maxCoeff(), 1e-12);
  }
}

TEST(ComposeWarp, PureTranslationMatchesStraightLineProduct) {
  CameraModel ref;
  ref.intrinsics << 500.0, 0.0, 320.0, 0.0, 510.0, 240.0, 0.0, 0.0, 1.0;
  ref.image_size = {640, 480};
  CameraModel src = ref;
  src.translation = Vec3(0.25, 0.0, 0.0);

  Mat4 k4 = Mat4::Identity();
  k4.topLeftCorner<3, 3>() = ref.intrinsics;
  Mat4 k4_inv = Mat4::Identity();
  k4_inv(0, 0) = 1.0 / 500.0;
  k4_inv(0, 2) = -320.0 / 500.0;
  k4_inv(1, 1) = 1.0 / 510.0;
  k4_inv(1, 2) = -240.0 / 510.0;
  Mat4 t_src = Mat4::Identity();
  t_src(0, 3) = 0.25;
  const Mat4 expected = naive_product(naive_product(k4, t_src), k4_inv);  // T_ref = I

  const WarpMatrix h = compose_warp(src, ref);
  EXPECT_LT((h.entries - expected).cwiseAbs().maxCoeff(), 1e-12);
  // Translation by t_x shifts pixels by f * t_x / d.
  const auto w = warp_pixel(h, 100.0, 50.0, 2.0);
  ASSERT_TRUE(w.has_value());
  EXPECT_NEAR(w->x, 100.0 + 500.0 * 0.25 / 2.0, 1e-9);
  EXPECT_NEAR(w->y, 50.0, 1e-9);
}

TEST(ComposeWarp, DtuRangeMatrixIsFiniteAndInvertible) {
  CameraModel ref;
  ref.intrinsics << 2892.33, 0.0, 823.2, 0.0, 2883.18, 619.07, 0.0, 0.0, 1.0;
  ref.image_size = {1600, 1184};
  CameraModel src = ref;
  const double a = 0.12;
  src.rotation << std::cos(a), 0.0, std::sin(a), 0.0, 1.0, 0.0, -std::sin(a), 0.0, std::cos(a);
  src.translation = Vec3(-60.0, 2.0, 8.0);
  const WarpMatrix h = compose_warp(src, ref);
  EXPECT_TRUE(h.entries.allFinite());
  EXPECT_GT(std::abs(h.entries.determinant()), 1e-12);
  for (double d : {425.0, 933.8}) {
    const auto w = warp_pixel(h, 800.0, 592.0, d);
    ASSERT_TRUE(w.has_value());
    const Vec3 o = oracle_warp(src, ref, 800.0, 592.0, d);
    EXPECT_NEAR(w->x, o.x(), 1e-9);
    EXPECT_NEAR(w->y, o.y(), 1e-9);
  }
}

TEST(ComposeWarp, RejectsSingularIntrinsics) {
  CameraModel ref;
  ref.image_size = {10, 10};
  CameraModel bad = ref;
  bad.intrinsics(0, 0) = 0.0;
  EXPECT_THROW(compose_warp(bad, ref), GeometryError);
  bad.intrinsics(0, 0) = 1e-14;
  bad.intrinsics(1, 1) = 1e-14;
  EXPECT_THROW(compose_warp(ref, bad), GeometryError);
}

TEST(WarpPixel, IdentityIsDepthInvariant) {
  const WarpMatrix id;
  for (double d : {1.0, 100.0, 0.37}) {
    const auto w = warp_pixel(id, 12.5, -3.25, d);
    ASSERT_TRUE(w.has_value());
    EXPECT_DOUBLE_EQ(w->x, 12.5);
    EXPECT_DOUBLE_EQ(w->y, -3.25);
  }
}

TEST(WarpPixel, RejectsNonPositiveDepth) {
  const WarpMatrix id;
  EXPECT_THROW(warp_pixel(id, 0.0, 0.0, 0.0), InputError);
  EXPECT_THROW(warp_pixel(id, 0.0, 0.0, -1.0), InputError);
}

TEST(WarpPixel, PointOnCameraPlaneIsInvalid) {
  // Source camera sits at the point's depth, looking along +x: z_src = 0.
  CameraModel ref;
  ref.image_size = {10, 10};
  CameraModel src = ref;
  src.rotation << 0.0, 0.0, -1.0, 0.0, 1.0, 0.0, 1.0, 0.0, 0.0;  // z_src = x_world
  src.translation = Vec3::Zero();
  const auto w = warp_pixel(compose_warp(src, ref), 0.0, 0.0, 2.0);
  EXPECT_FALSE(w.has_value());
}

TEST(WarpPixel, MatchesUnprojectTransformProjectOracle) {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  double worst = 0.0;
  for (int pair = 0; pair < 20; ++pair) {
    const CameraModel ref = testkit::random_camera(rng);
    const CameraModel src = testkit::random_camera(rng);
    const WarpMatrix h = compose_warp(src, ref);
    for (int i = 0; i < 100; ++i) {
      const double x = u(rng) * (ref.image_size.width - 1);
      const double y = u(rng) * (ref.image_size.height - 1);
      const double d = 2.0 + 6.0 * u(rng);
      const auto w = warp_pixel(h, x, y, d);
      const Vec3 o = oracle_warp(src, ref, x, y, d);
      if (o.z() <= 1e-9) continue;
      ASSERT_TRUE(w.has_value());
      worst = std::max({worst, std::abs(w->x - o.x()), std::abs(w->y - o.y())});
      EXPECT_NEAR(w->depth, o.z(), 1e-9);
    }
  }
  EXPECT_LT(worst, 1e-9);
}

TEST(WarpPixel, RoundTripThroughInverseComposition) {
  std::mt19937_64 rng(11);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (int pair = 0; pair < 20; ++pair) {
    const CameraModel ref = testkit::random_camera(rng);
    const CameraModel src = testkit::random_camera(rng);
    const WarpMatrix fwd = compose_warp(src, ref);
    const WarpMatrix back = compose_warp(ref, src);
    for (int i = 0; i < 50; ++i) {
      const double x = u(rng) * (ref.image_size.width - 1);
      const double y = u(rng) * (ref.image_size.height - 1);
      const auto w = warp_pixel(fwd, x, y, 3.0 + 4.0 * u(rng));
      if (!w || w->depth <= 0.0) continue;
      const auto r = warp_pixel(back, w->x, w->y, w->depth);
      ASSERT_TRUE(r.has_value());
      EXPECT_NEAR(r->x, x, 1e-6);
      EXPECT_NEAR(r->y, y, 1e-6);
    }
  }
}

TEST(BilinearSample, LatticeMidpointAndBounds) {
  Image<float> img(4, 3, 2);
  for (int y = 0; y < 3; ++y) {
    for (int x = 0; x < 4; ++x) {
      img(x, y, 0) = static_cast<float>(10 * y + x);
      img(x, y, 1) = static_cast<float>(-x);
    }
  }
  const auto at = bilinear_sample(img, 2.0, 1.0);
  EXPECT_TRUE(at.valid);
  EXPECT_FLOAT_EQ(at.value[0], 12.0f);
  EXPECT_FLOAT_EQ(at.value[1], -2.0f);

  const auto mid = bilinear_sample(img, 1.5, 2.0);
  EXPECT_TRUE(mid.valid);
  EXPECT_FLOAT_EQ(mid.value[0], (21.0f + 22.0f) / 2.0f);

  EXPECT_FALSE(bilinear_sample(img, -0.5, 1.0).valid);
  EXPECT_FALSE(bilinear_sample(img, 1.0, 2.0001).valid);
  EXPECT_TRUE(bilinear_sample(img, 3.0, 2.0).valid);
  EXPECT_FALSE(bilinear_sample(img, 3.0001, 0.0).valid);
}

TEST(BilinearSample, ExactOnConstantImages) {
  Image<float> img(7, 5, 3, 0.625f);
  std::mt19937_64 rng(3);
  std::uniform_real_distribution<double> u(-1.0, 8.0);
  for (int i = 0; i < 500; ++i) {
    const auto s = bilinear_sample(img, u(rng), u(rng));
    if (!s.valid) continue;
    for (float v : s.value) EXPECT_EQ(v, 0.625f);
  }
}

TEST(BilinearSample, EmptyImageIsAnError) {
  Image<float> empty;
  EXPECT_THROW(bilinear_sample(empty, 0.0, 0.0), InputError);
}

TEST(CameraModel, ValidateRejectsBrokenInvariants) {
  CameraModel c;
  c.image_size = {8, 8};
  EXPECT_NO_THROW(c.validate());
  CameraModel r = c;
  r.rotation(0, 0) = 1.0 + 1e-6;
  EXPECT_THROW(r.validate(), GeometryError);
  CameraModel f = c;
  f.intrinsics(1, 1) = -1.0;
  EXPECT_THROW(f.validate(), GeometryError);
  CameraModel s = c;
  s.image_size = {0, 8};
  EXPECT_THROW(s.validate(), GeometryError);
}

TEST(CameraModel, RescaleKeepsPixelCentersAligned) {
  CameraModel c;
  c.intrinsics << 320.0, 0.0, 159.5, 0.0, 320.0, 127.5, 0.0, 0.0, 1.0;
  c.image_size = {320, 256};
  const CameraModel q = c.rescaled({80, 64});
  EXPECT_DOUBLE_EQ(q.intrinsics(0, 0), 80.0);
  EXPECT_DOUBLE_EQ(q.intrinsics(1, 1), 80.0);
  // The optical axis hits the image center at both resolutions.
  EXPECT_DOUBLE_EQ(q.intrinsics(0, 2), 39.5);
  EXPECT_DOUBLE_EQ(q.intrinsics(1, 2), 31.5);
  // A full-resolution 4x4 block's center maps to the coarse pixel center.
  const Vec3 p = c.unproject(4 * 10 + 1.5, 4 * 7 + 1.5, 3.0);
  const auto pq = q.project(p);
  ASSERT_TRUE(pq.has_value());
  EXPECT_NEAR((*pq)[0], 10.0, 1e-12);
  EXPECT_NEAR((*pq)[1], 7.0, 1e-12);
}

TEST(CameraFile, RoundTripIsExact) {
  std::mt19937_64 rng(5);
  for (int i = 0; i < 20; ++i) {
    const CameraModel c = testkit::random_camera(rng);
    const DepthRange range{2.0, 2.5 / 64, 64, 4.5};
    const CameraFile back = parse_camera_file(format_camera_file(c, range), c.image_size);
    EXPECT_EQ(back.camera, c);
    EXPECT_EQ(back.range.d_min, 2.0);
    EXPECT_EQ(back.range.d_count, 64);
    EXPECT_EQ(back.range.d_max, 4.5);
  }
}

TEST(CameraFile, ParsesMvsNetStyleWithBlankLinesAndTwoRangeValues) {
  const std::string text =
      "extrinsic\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\n\n"
      "intrinsic\n361.54125 0.0 82.900625\n0.0 360.3975 66.383875\n0.0 0.0 1.0\n\n425.0 2.5\n";
  const CameraFile f = parse_camera_file(text, {160, 128});
  EXPECT_DOUBLE_EQ(f.camera.intrinsics(0, 0), 361.54125);
  EXPECT_DOUBLE_EQ(f.range.d_min, 425.0);
  EXPECT_DOUBLE_EQ(f.range.d_interval, 2.5);
}

TEST(CameraFile, SinglePrecisionRotationIsReorthonormalized) {
  const double a = 0.3;
  const std::string text = "extrinsic\n" + std::to_string(std::cos(a)) + " 0 " + std::to_string(std::sin(a)) +
                           " 1\n0 1 0 2\n" + std::to_string(-std::sin(a)) + " 0 " + std::to_string(std::cos(a)) +
                           " 3\n0 0 0 1\nintrinsic\n100 0 50\n0 100 50\n0 0 1\n";
  const CameraFile f = parse_camera_file(text, {100, 100});
  EXPECT_LT((f.camera.rotation.transpose() * f.camera.rotation - Mat3::Identity()).cwiseAbs().maxCoeff(), 1e-12);
}

TEST(CameraFile, ErrorsCarryLineNumbers) {
  const std::string bad_row = "extrinsic\n1 0 0 0\n0 1 0 0\n0 0 x 0\n0 0 0 1\n";
  try {
    parse_camera_file(bad_row, {4, 4});
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 4u);
  }
  const std::string bad_tag = "extrinsic\n1 0 0 0\n0 1 0 0\n0 0 1 0\n0 0 0 1\nintrinsics?\n";
  try {
    parse_camera_file(bad_tag, {4, 4});
    FAIL() << "expected a parse error";
  } catch (const ParseError& e) {
    EXPECT_EQ(e.line(), 6u);
  }
}
