#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>

#include "atv/imageio.hpp"
#include "support.hpp"

using namespace atv;

TEST(Pfm, RoundTripIsBitExact) {
  const auto dir = testkit::temp_dir("pfm");
  std::mt19937_64 rng(2);
  std::uniform_real_distribution<float> u(-1e4f, 1e4f);
  for (int ch : {1, 3}) {
    Image<float> img(13, 7, ch);
    for (float& v : img.data()) v = u(rng);
    img(0, 0, 0) = 0.0f;
    img(1, 0, 0) = -0.0f;
    img(2, 0, 0) = 1e-40f;  // subnormal
    const std::string path = (dir / ("img" + std::to_string(ch) + ".pfm")).string();
    write_pfm(path, img);
    const Image<float> back = read_pfm(path);
    ASSERT_EQ(back.size(), img.size());
    ASSERT_EQ(back.channels(), ch);
    EXPECT_EQ(std::memcmp(back.data().data(), img.data().data(), img.data().size() * sizeof(float)), 0);
  }
}

TEST(Pfm, HeaderIsLittleEndianWithRowsBottomUp) {
  const auto dir = testkit::temp_dir("pfm_layout");
  Image<float> img(2, 2, 1);
  img(0, 0) = 1.0f;  // top-left
  img(0, 1) = 2.0f;  // bottom-left
  const std::string path = (dir / "x.pfm").string();
  write_pfm(path, img);
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  const std::string header = "Pf\n2 2\n-1.0\n";
  ASSERT_EQ(bytes.substr(0, header.size()), header);
  float first = 0.0f;
  std::memcpy(&first, bytes.data() + header.size(), 4);
  EXPECT_EQ(first, 2.0f);
}

TEST(Pfm, ReadsBigEndianFiles) {
  const auto dir = testkit::temp_dir("pfm_be");
  const std::string path = (dir / "be.pfm").string();
  std::ofstream out(path, std::ios::binary);
  out << "Pf\n1 1\n1.0\n";
  const unsigned char be[4] = {0x40, 0x49, 0x0f, 0xdb};  // 3.14159274f
  out.write(reinterpret_cast<const char*>(be), 4);
  out.close();
  EXPECT_FLOAT_EQ(read_pfm(path)(0, 0), 3.14159274f);
}

TEST(Pfm, RejectsMalformedFiles) {
  const auto dir = testkit::temp_dir("pfm_bad");
  const std::string path = (dir / "bad.pfm").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "P7\n1 1\n-1.0\n";
  }
  EXPECT_THROW(read_pfm(path), ParseError);
  {
    std::ofstream out(path, std::ios::binary);
    out << "Pf\n4 4\n-1.0\nxx";
  }
  EXPECT_THROW(read_pfm(path), ParseError);
  EXPECT_THROW(read_pfm((dir / "missing.pfm").string()), InputError);
}

TEST(Ppm, RoundTripQuantizesToEightBits) {
  const auto dir = testkit::temp_dir("ppm");
  std::mt19937_64 rng(4);
  const ViewImage img = testkit::random_image(rng, 9, 5);
  const std::string path = (dir / "a.ppm").string();
  write_ppm(path, img);
  const ViewImage back = read_ppm(path);
  ASSERT_EQ(back.size(), img.size());
  for (std::size_t i = 0; i < img.data().size(); ++i) {
    EXPECT_LE(std::abs(back.data()[i] - img.data()[i]), 0.5f / 255.0f + 1e-6f);
  }
  // A second write of the decoded image is byte-stable.
  const std::string again = (dir / "b.ppm").string();
  write_ppm(again, back);
  EXPECT_EQ(read_ppm(again), back);
}

TEST(Ppm, HeaderCommentsAreSkipped) {
  const auto dir = testkit::temp_dir("ppm_comment");
  const std::string path = (dir / "c.ppm").string();
  {
    std::ofstream out(path, std::ios::binary);
    out << "P6\n# made by hand\n1 1\n255\n";
    const unsigned char px[3] = {255, 0, 51};
    out.write(reinterpret_cast<const char*>(px), 3);
  }
  const ViewImage img = read_ppm(path);
  EXPECT_FLOAT_EQ(img(0, 0, 0), 1.0f);
  EXPECT_FLOAT_EQ(img(0, 0, 2), 0.2f);
}
