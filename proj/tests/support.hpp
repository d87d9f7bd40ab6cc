// Shared helpers for the test suites.
#pragma once

#include <sys/wait.h>
#include <unistd.h>

#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <iterator>
#include <map>
#include <filesystem>
#include <random>
#include <string>

#include "atv/common.hpp"
#include "atv/geometry.hpp"

namespace atv::testkit {

/// Camera looking roughly at `target` from a random position on a shell.
inline CameraModel random_camera(std::mt19937_64& rng, const Vec3& target = Vec3(0.0, 0.0, 5.0)) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::uniform_real_distribution<double> f(200.0, 900.0);
  std::uniform_int_distribution<int> dim(64, 800);
  const Vec3 pos(2.0 * u(rng), 2.0 * u(rng), 0.5 * u(rng));
  const Vec3 jitter(0.3 * u(rng), 0.3 * u(rng), 0.3 * u(rng));
  const Size size{dim(rng), dim(rng)};
  CameraModel cam = look_at_camera(pos, target + jitter, Vec3(0.0, -1.0, 0.0), f(rng), size);
  cam.intrinsics(0, 1) = 0.5 * u(rng);             // small skew
  cam.intrinsics(1, 1) *= 1.0 + 0.05 * u(rng);     // non-square pixels
  cam.intrinsics(0, 2) += 10.0 * u(rng);
  cam.intrinsics(1, 2) += 10.0 * u(rng);
  return cam;
}

inline std::filesystem::path temp_dir(const std::string& name) {
  const auto dir = std::filesystem::temp_directory_path() / ("atv_test_" + name + "_" + std::to_string(::getpid()));
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

inline ViewImage random_image(std::mt19937_64& rng, int w, int h, int channels = 3) {
  std::uniform_real_distribution<float> u(0.0f, 1.0f);
  ViewImage img(w, h, channels);
  for (float& v : img.data()) v = u(rng);
  return img;
}

struct CommandResult {
  int exit_code = -1;
  std::string output;  // stdout and stderr interleaved
};

inline CommandResult run_command(const std::string& command) {
  CommandResult r;
  FILE* pipe = ::popen((command + " 2>&1").c_str(), "r");
  if (pipe == nullptr) return r;
  char buf[4096];
  std::size_t n = 0;
  while ((n = std::fread(buf, 1, sizeof(buf), pipe)) > 0) r.output.append(buf, n);
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

inline std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

/// Relative path -> contents of every regular file under `root`.
inline std::map<std::string, std::string> tree_contents(const std::filesystem::path& root) {
  std::map<std::string, std::string> out;
  for (const auto& e : std::filesystem::recursive_directory_iterator(root)) {
    if (e.is_regular_file()) out[std::filesystem::relative(e.path(), root).string()] = read_file(e.path());
  }
  return out;
}

}  // namespace atv::testkit
