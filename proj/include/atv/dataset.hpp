// On-disk multi-view datasets: PPM images, PFM ground-truth depth, camera
// text files and a JSON manifest.
//
//   <dir>/manifest.json
//   <dir>/images/view_000.ppm
//   <dir>/depths/view_000.pfm
//   <dir>/cams/view_000_cam.txt
#pragma once

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "atv/common.hpp"
#include "atv/geometry.hpp"
#include "atv/imageio.hpp"
#include "atv/synth.hpp"

namespace atv {

struct Dataset {
  std::string name;
  Size size;
  double d_min = 0.0;
  double d_max = 0.0;
  std::vector<std::string> view_names;
  std::vector<ViewImage> images;
  std::vector<CameraModel> cameras;
  std::vector<DepthMap> depths;  // empty when no ground truth ships with the dataset

  std::size_t views() const noexcept { return images.size(); }
  bool has_ground_truth() const noexcept { return !depths.empty(); }
};

inline std::string view_name(std::size_t v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03zu", v);
  return buf;
}

/// Stage-1 plane count used for the depth-range line of camera files.
inline constexpr int kCameraFilePlanes = 64;

inline void write_dataset(const std::string& dir, const SceneSpec& scene, const RenderedViews& views) {
  namespace fs = std::filesystem;
  std::error_code ec;
  for (const char* sub : {"images", "depths", "cams"}) {
    fs::create_directories(fs::path(dir) / sub, ec);
    if (ec) throw InputError("cannot create " + (fs::path(dir) / sub).string() + ": " + ec.message());
  }
  const DepthRange range{scene.d_min, (scene.d_max - scene.d_min) / kCameraFilePlanes, kCameraFilePlanes,
                         scene.d_max};
  nlohmann::json list = nlohmann::json::array();
  for (std::size_t v = 0; v < scene.cameras.size(); ++v) {
    const std::string n = view_name(v);
    write_ppm((fs::path(dir) / "images" / (n + ".ppm")).string(), views.images[v]);
    write_pfm((fs::path(dir) / "depths" / (n + ".pfm")).string(), views.depths[v]);
    write_camera_file((fs::path(dir) / "cams" / (n + "_cam.txt")).string(), scene.cameras[v], range);
    list.push_back({{"id", v},
                    {"name", n},
                    {"image", "images/" + n + ".ppm"},
                    {"depth", "depths/" + n + ".pfm"},
                    {"camera", "cams/" + n + "_cam.txt"}});
  }
  const Size size = scene.cameras.front().image_size;
  const nlohmann::json manifest = {{"name", scene.name}, {"width", size.width}, {"height", size.height},
                                   {"d_min", scene.d_min}, {"d_max", scene.d_max}, {"views", list}};
  std::ofstream out((fs::path(dir) / "manifest.json").string());
  if (!out) throw InputError("cannot write manifest in " + dir);
  out << manifest.dump(2) << "\n";
}

inline Dataset load_dataset(const std::string& dir, bool load_ground_truth = true) {
  namespace fs = std::filesystem;
  const fs::path root(dir);
  std::ifstream in((root / "manifest.json").string());
  if (!in) throw InputError("missing manifest.json in " + dir);
  nlohmann::json m;
  try {
    in >> m;
  } catch (const nlohmann::json::exception& e) {
    throw InputError(dir + "/manifest.json: " + e.what());
  }
  Dataset ds;
  try {
    ds.name = m.value("name", std::string("dataset"));
    ds.size = {m.at("width").get<int>(), m.at("height").get<int>()};
    ds.d_min = m.at("d_min").get<double>();
    ds.d_max = m.at("d_max").get<double>();
    bool all_depths = load_ground_truth;
    for (const auto& v : m.at("views")) {
      ds.view_names.push_back(v.at("name").get<std::string>());
      ds.images.push_back(read_ppm((root / v.at("image").get<std::string>()).string()));
      ds.cameras.push_back(read_camera_file((root / v.at("camera").get<std::string>()).string(), ds.size).camera);
      if (ds.images.back().size() != ds.size) throw InputError("image size differs from the manifest");
      if (all_depths && v.contains("depth") && fs::exists(root / v.at("depth").get<std::string>())) {
        ds.depths.push_back(read_pfm_depth((root / v.at("depth").get<std::string>()).string()));
      } else {
        all_depths = false;
      }
    }
    if (!all_depths) ds.depths.clear();
  } catch (const nlohmann::json::exception& e) {
    throw InputError(dir + "/manifest.json: " + e.what());
  }
  if (ds.views() < 2) throw InputError("dataset needs at least two views");
  return ds;
}

}  // namespace atv
