// atv_stereo: synthesize datasets, run the cascade, fuse, evaluate, report.
//
// Exit codes: 0 success, 1 pipeline failure, 2 usage, config or input error.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "atv/cascade.hpp"
#include "atv/config.hpp"
#include "atv/dataset.hpp"
#include "atv/evalkit.hpp"
#include "atv/fusion.hpp"
#include "atv/imageio.hpp"
#include "atv/parallel.hpp"
#include "atv/pipeline.hpp"
#include "atv/synth.hpp"

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

/// Missing or unusable inputs named on the command line.
class UsageError : public atv::Error {
 public:
  using atv::Error::Error;
};

void apply_threads(int flag, const atv::RunConfig& cfg) {
  int n = flag;
  if (n <= 0) n = atv::workers_from_env();
  if (n <= 0) n = cfg.io.threads;
  atv::set_num_workers(n);
}

atv::RunConfig load_config(const std::string& path) {
  if (path.empty()) return atv::run_config_from_json(json::object());
  return atv::load_run_config(path);
}

void write_json(const fs::path& path, const json& j) {
  std::ofstream out(path);
  if (!out) throw UsageError("cannot write " + path.string());
  out << j.dump(2) << "\n";
}

json read_json(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw UsageError("missing " + path.string());
  try {
    json j;
    in >> j;
    return j;
  } catch (const json::exception& e) {
    throw UsageError(path.string() + ": " + e.what());
  }
}

void require_dir(const fs::path& p, const char* what) {
  if (!fs::is_directory(p)) throw UsageError(std::string(what) + " '" + p.string() + "' does not exist");
}

std::string config_hash(const atv::RunConfig& cfg) {
  const std::string text = atv::to_json(cfg).dump();
  return atv::hex64(atv::fnv1a({reinterpret_cast<const unsigned char*>(text.data()), text.size()}));
}

json dataset_hashes(const fs::path& dir) {
  json hashes = json::object();
  const json manifest = read_json(dir / "manifest.json");
  hashes["manifest.json"] = atv::file_hash((dir / "manifest.json").string());
  for (const auto& v : manifest.at("views")) {
    for (const char* key : {"image", "camera", "depth"}) {
      if (!v.contains(key)) continue;
      const auto rel = v.at(key).get<std::string>();
      if (fs::exists(dir / rel)) hashes[rel] = atv::file_hash((dir / rel).string());
    }
  }
  return hashes;
}

// ---------------------------------------------------------------------------

int cmd_synth(const std::string& scene_arg, const std::string& out_dir) {
  atv::SceneSpec scene;
  if (fs::exists(scene_arg) && fs::is_regular_file(scene_arg)) {
    scene = atv::scene_from_json(read_json(scene_arg));
  } else {
    try {
      scene = atv::builtin_scene(scene_arg);
    } catch (const atv::InputError&) {
      std::string names;
      for (const auto& s : atv::builtin_scenes()) names += " " + s.name;
      throw UsageError("unknown scene '" + scene_arg + "' (builtin:" + names + ")");
    }
  }
  const atv::RenderedViews views = atv::render_views(scene);
  try {
    atv::write_dataset(out_dir, scene, views);
  } catch (const atv::InputError& e) {
    throw UsageError(e.what());
  }
  std::printf("wrote %zu views of '%s' to %s\n", scene.cameras.size(), scene.name.c_str(), out_dir.c_str());
  return 0;
}

struct ReconstructArgs {
  std::string dataset;
  std::string config;
  std::string out;
  bool dump_stages = false;
  int reference = -1;
  int threads = 0;
};

int cmd_reconstruct(const ReconstructArgs& args) {
  const atv::RunConfig cfg = load_config(args.config);
  apply_threads(args.threads, cfg);
  require_dir(args.dataset, "dataset");
  const fs::path dataset_dir = fs::absolute(args.dataset).lexically_normal();
  atv::Dataset ds;
  try {
    ds = atv::load_dataset(dataset_dir.string());
  } catch (const atv::InputError& e) {
    throw UsageError(e.what());
  }
  const atv::CascadeConfig cascade = atv::cascade_for(cfg, ds);
  try {
    cascade.validate();
  } catch (const atv::InputError& e) {
    throw atv::ConfigError(e.what());
  }
  if (args.reference >= static_cast<int>(ds.views())) {
    throw UsageError("--reference " + std::to_string(args.reference) + " is out of range");
  }
  const bool dump = args.dump_stages || cfg.io.dump_stages;

  const fs::path out(args.out);
  std::error_code ec;
  for (const char* sub : {"depths", "reports"}) fs::create_directories(out / sub, ec);
  if (dump) fs::create_directories(out / "stages", ec);
  if (ec) throw UsageError("cannot create output directory " + out.string());

  std::vector<std::size_t> refs;
  if (args.reference >= 0) {
    refs.push_back(static_cast<std::size_t>(args.reference));
  } else {
    for (std::size_t v = 0; v < ds.views(); ++v) refs.push_back(v);
  }

  const auto pyramids = atv::dataset_pyramids(ds, cascade.features);
  json reconstructed = json::array();
  for (std::size_t ref : refs) {
    const std::string name = ds.view_names[ref];
    const auto stages = atv::reconstruct_view(pyramids, ds.cameras, ref, cascade);
    std::vector<atv::StageTruth> truths;
    if (ds.has_ground_truth()) truths = atv::stage_truths(ds, ref, cfg.evaluation, static_cast<int>(stages.size()));
    json reports = json::array();
    for (std::size_t k = 0; k < stages.size(); ++k) {
      const auto& st = stages[k];
      const json report =
          atv::stage_report(st, name, truths.empty() ? nullptr : &truths[k], cascade.d_min, cascade.d_max);
      const std::string stem = name + "_stage" + std::to_string(st.stage);
      write_json(out / "reports" / (stem + ".json"), report);
      reports.push_back("reports/" + stem + ".json");
      if (dump) {
        atv::write_pfm((out / "stages" / (stem + "_depth.pfm")).string(), st.estimate.depth);
        atv::write_pfm((out / "stages" / (stem + "_sigma.pfm")).string(), st.estimate.sigma);
        atv::write_pfm((out / "stages" / (stem + "_lower.pfm")).string(), st.intervals.lower);
        atv::write_pfm((out / "stages" / (stem + "_upper.pfm")).string(), st.intervals.upper);
        atv::write_pfm((out / "stages" / (stem + "_span_lower.pfm")).string(), st.span.lower);
        atv::write_pfm((out / "stages" / (stem + "_span_upper.pfm")).string(), st.span.upper);
      }
    }
    atv::write_pfm((out / "depths" / (name + ".pfm")).string(), stages.back().estimate.depth);
    reconstructed.push_back({{"id", ref}, {"name", name}, {"depth", "depths/" + name + ".pfm"}, {"reports", reports}});
    std::printf("%s: %zu stages, final %dx%d\n", name.c_str(), stages.size(), stages.back().size.width,
                stages.back().size.height);
  }

  write_json(out / "recon.json", {{"dataset", dataset_dir.string()},
                                  {"scene", ds.name},
                                  {"d_min", cascade.d_min},
                                  {"d_max", cascade.d_max},
                                  {"views", reconstructed},
                                  {"config", atv::to_json(cfg)},
                                  {"config_hash", config_hash(cfg)},
                                  {"input_hashes", dataset_hashes(dataset_dir)}});
  return 0;
}

struct Recon {
  json meta;
  atv::Dataset dataset;
  std::vector<std::size_t> ids;
  std::vector<atv::DepthMap> depths;
};

Recon load_recon(const fs::path& dir, bool need_depths) {
  require_dir(dir, "reconstruction directory");
  Recon r;
  r.meta = read_json(dir / "recon.json");
  try {
    r.dataset = atv::load_dataset(r.meta.at("dataset").get<std::string>());
    for (const auto& v : r.meta.at("views")) {
      r.ids.push_back(v.at("id").get<std::size_t>());
      if (need_depths) {
        const fs::path p = dir / v.at("depth").get<std::string>();
        if (!fs::exists(p)) throw UsageError("missing depth map " + p.string());
        r.depths.push_back(atv::read_pfm_depth(p.string()));
      }
    }
  } catch (const json::exception& e) {
    throw UsageError((dir / "recon.json").string() + ": " + e.what());
  } catch (const atv::InputError& e) {
    throw UsageError(e.what());
  }
  return r;
}

int cmd_fuse(const std::string& recon_dir, const std::string& config_path, const std::string& out_ply, int threads) {
  const atv::RunConfig cfg = load_config(config_path);
  apply_threads(threads, cfg);
  Recon r = load_recon(recon_dir, true);
  if (r.ids.size() < 2) throw UsageError("fusion needs reconstructions of at least two views");
  std::vector<atv::CameraModel> cams;
  std::vector<atv::ViewImage> images;
  for (std::size_t id : r.ids) {
    cams.push_back(r.dataset.cameras[id]);
    images.push_back(r.dataset.images[id]);
  }
  const atv::FusionResult fused = atv::fuse_depth_maps(r.depths, cams, images, cfg.fusion);
  atv::write_ply(fused.cloud, out_ply);
  json kept = json::object();
  for (std::size_t i = 0; i < r.ids.size(); ++i) kept[r.dataset.view_names[r.ids[i]]] = fused.kept_fraction[i];
  write_json(out_ply + ".json", {{"points", fused.cloud.size()},
                                 {"kept_fraction", kept},
                                 {"fusion",
                                  {{"max_relative_depth_diff", cfg.fusion.max_relative_depth_diff},
                                   {"max_reprojection_dist", cfg.fusion.max_reprojection_dist},
                                   {"min_consistent_views", cfg.fusion.min_consistent_views}}},
                                 {"recon_config_hash", r.meta.value("config_hash", std::string())}});
  std::printf("fused %zu points into %s\n", fused.cloud.size(), out_ply.c_str());
  return 0;
}

struct EvalArgs {
  std::string ply;
  std::string dataset;
  std::string config;
  std::string recon;
  std::string out;
  std::string csv;
  int threads = 0;
};

int cmd_eval(const EvalArgs& args) {
  const atv::RunConfig cfg = load_config(args.config);
  apply_threads(args.threads, cfg);
  if (!fs::exists(args.ply)) throw UsageError("missing point cloud " + args.ply);
  require_dir(args.dataset, "dataset");
  atv::Dataset ds;
  try {
    ds = atv::load_dataset(args.dataset);
  } catch (const atv::InputError& e) {
    throw UsageError(e.what());
  }
  if (!ds.has_ground_truth()) throw UsageError("dataset has no ground-truth depth");

  fs::path recon_dir = args.recon;
  if (recon_dir.empty() && fs::exists(fs::path(args.ply).parent_path() / "recon.json")) {
    recon_dir = fs::path(args.ply).parent_path();
  }
  std::optional<json> recon;
  if (!recon_dir.empty()) recon = read_json(recon_dir / "recon.json");

  // Per-stage depth error and unit distances from the stage reports.
  json stages = json::array();
  double unit3 = 0.0;
  if (recon) {
    for (const auto& v : recon->at("views")) {
      for (const auto& rel : v.at("reports")) {
        const json rep = read_json(recon_dir / rel.get<std::string>());
        if (rep.at("depth_error").is_null()) continue;
        const double unit = rep.at("span_stats").at("unit_distance").get<double>();
        if (unit3 == 0.0 && rep.at("stage").get<int>() == 3) unit3 = unit;
        stages.push_back({{"view", rep.at("view")},
                          {"stage", rep.at("stage")},
                          {"mae", rep.at("depth_error").at("mae")},
                          {"rmse", rep.at("depth_error").at("rmse")},
                          {"unit_distance", unit}});
      }
    }
  }
  double max_dist = cfg.evaluation.max_dist;
  if (max_dist <= 0.0) {
    if (unit3 <= 0.0) {
      throw UsageError("evaluation.max_dist is 0 and no stage-3 report was found (pass --recon)");
    }
    max_dist = 20.0 * unit3;
  }
  const double dedup = cfg.evaluation.gt_dedup_cell > 0.0 ? cfg.evaluation.gt_dedup_cell : max_dist / 40.0;

  atv::PointCloud pred;
  try {
    pred = atv::read_ply(args.ply);
  } catch (const atv::ParseError& e) {
    throw UsageError(std::string(e.what()) + " (line " + std::to_string(e.line()) + ")");
  }
  const atv::PointCloud gt = atv::gt_cloud_from_depths(ds.depths, ds.cameras, ds.images, dedup,
                                                       cfg.fusion.min_consistent_views,
                                                       cfg.evaluation.visibility_tolerance);
  const atv::ReconstructionScore score = atv::accuracy_completeness(pred, gt, max_dist);

  std::printf("%-10s %-6s %-12s %-12s %-12s\n", "view", "stage", "mae", "rmse", "unit");
  for (const auto& s : stages) {
    std::printf("%-10s %-6d %-12.6f %-12.6f %-12.6f\n", s.at("view").get<std::string>().c_str(),
                s.at("stage").get<int>(), s.at("mae").get<double>(), s.at("rmse").get<double>(),
                s.at("unit_distance").get<double>());
  }
  std::printf("accuracy %.6f completeness %.6f overall %.6f (max_dist %.6f%s)\n", score.accuracy,
              score.completeness, score.overall, score.max_dist, score.empty_prediction ? ", EMPTY PREDICTION" : "");

  const std::string cfg_hash = config_hash(cfg);
  const json report = {{"scene", ds.name},
                       {"score", score},
                       {"stage_depth_error", stages},
                       {"stage3_unit_distance", unit3},
                       {"gt_dedup_cell", dedup},
                       {"config", atv::to_json(cfg)},
                       {"config_hash", cfg_hash},
                       {"input_hashes", {{"ply", atv::file_hash(args.ply)}, {"dataset", dataset_hashes(args.dataset)}}}};
  write_json(args.out.empty() ? args.ply + ".eval.json" : args.out, report);
  if (!args.csv.empty()) {
    const bool fresh = !fs::exists(args.csv);
    std::ofstream csv(args.csv, std::ios::app);
    if (!csv) throw UsageError("cannot write " + args.csv);
    if (fresh) csv << "scene,config_hash,accuracy,completeness,overall,max_dist,pred_points,gt_points,empty\n";
    char line[512];
    std::snprintf(line, sizeof(line), "%s,%s,%.9g,%.9g,%.9g,%.9g,%zu,%zu,%d\n", ds.name.c_str(), cfg_hash.c_str(),
                  score.accuracy, score.completeness, score.overall, score.max_dist, score.pred_points,
                  score.gt_points, score.empty_prediction ? 1 : 0);
    csv << line;
  }
  return 0;
}

int cmd_report(const std::string& recon_dir, const std::string& out_csv, const std::string& hist_csv) {
  const fs::path dir(recon_dir);
  const json meta = read_json(dir / "recon.json");
  std::ostringstream rows;
  std::ostringstream hist;
  rows << "view,stage,coverage,mean_width,median_width,D,unit_distance\n";
  hist << "view,stage,bin_lower,bin_upper,count\n";
  for (const auto& v : meta.at("views")) {
    for (const auto& rel : v.at("reports")) {
      const json rep = read_json(dir / rel.get<std::string>());
      if (rep.at("span_stats").is_null()) continue;
      const auto stats = rep.at("span_stats").get<atv::UncertaintyStats>();
      const std::string view = rep.at("view").get<std::string>();
      const int stage = rep.at("stage").get<int>();
      char line[256];
      std::snprintf(line, sizeof(line), "%s,%d,%.9g,%.9g,%.9g,%d,%.9g\n", view.c_str(), stage, stats.coverage_ratio,
                    stats.mean_width, stats.median_width, stats.planes, stats.unit_distance);
      rows << line;
      for (const auto& b : stats.histogram) {
        std::snprintf(line, sizeof(line), "%s,%d,%.9g,%.9g,%zu\n", view.c_str(), stage, b.lower, b.upper, b.count);
        hist << line;
      }
    }
  }
  std::ofstream out(out_csv);
  if (!out) throw UsageError("cannot write " + out_csv);
  out << rows.str();
  if (!hist_csv.empty()) {
    std::ofstream h(hist_csv);
    if (!h) throw UsageError("cannot write " + hist_csv);
    h << hist.str();
  }
  std::cout << rows.str();
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Adaptive thin volume multi-view stereo on synthetic and calibrated datasets"};
  app.require_subcommand(1);
  app.option_defaults()->always_capture_default();

  std::string synth_scene;
  std::string synth_out;
  auto* synth = app.add_subcommand("synth", "Render a builtin scene (or a scene JSON) into a dataset directory");
  synth->add_option("scene", synth_scene, "builtin scene name (flat, two-plane, sphere-on-plane) or scene JSON path")
      ->required();
  synth->add_option("out_dir", synth_out, "output dataset directory")->required();

  ReconstructArgs rec;
  auto* reconstruct = app.add_subcommand("reconstruct", "Run the three-stage cascade for each reference view");
  reconstruct->add_option("dataset", rec.dataset, "dataset directory with manifest.json")->required();
  reconstruct->add_option("--config", rec.config, "run config JSON (defaults apply when omitted)");
  reconstruct->add_option("--out", rec.out, "output directory")->required();
  reconstruct->add_flag("--dump-stages", rec.dump_stages, "also write per-stage depth, sigma and interval PFMs");
  reconstruct->add_option("--reference", rec.reference, "reconstruct only this view id (-1: every view)");
  reconstruct->add_option("--threads", rec.threads, "worker threads (0: ATV_STEREO_THREADS, then hardware)");

  std::string fuse_recon;
  std::string fuse_config;
  std::string fuse_out;
  int fuse_threads = 0;
  auto* fuse = app.add_subcommand("fuse", "Fuse reconstructed depth maps into an ASCII PLY point cloud");
  fuse->add_option("recon_dir", fuse_recon, "output directory of 'reconstruct'")->required();
  fuse->add_option("--config", fuse_config, "run config JSON (defaults apply when omitted)");
  fuse->add_option("--out", fuse_out, "output PLY path")->required();
  fuse->add_option("--threads", fuse_threads, "worker threads (0: ATV_STEREO_THREADS, then hardware)");

  EvalArgs ev;
  auto* eval = app.add_subcommand("eval", "Score a point cloud against the dataset's ground truth");
  eval->add_option("ply", ev.ply, "point cloud to score")->required();
  eval->add_option("dataset", ev.dataset, "dataset directory with ground-truth depth")->required();
  eval->add_option("--config", ev.config, "run config JSON (defaults apply when omitted)");
  eval->add_option("--recon", ev.recon, "reconstruction directory (default: the PLY's directory if it has recon.json)");
  eval->add_option("--out", ev.out, "scores JSON path (default: <ply>.eval.json)");
  eval->add_option("--csv", ev.csv, "append one CSV row per run to this file");
  eval->add_option("--threads", ev.threads, "worker threads (0: ATV_STEREO_THREADS, then hardware)");

  std::string report_recon;
  std::string report_out;
  std::string report_hist;
  auto* report = app.add_subcommand("report", "Aggregate stage reports into one CSV");
  report->add_option("recon_dir", report_recon, "output directory of 'reconstruct'")->required();
  report->add_option("--out", report_out, "CSV path")->required();
  report->add_option("--histogram", report_hist, "optional width-histogram CSV path");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  try {
    if (*synth) return cmd_synth(synth_scene, synth_out);
    if (*reconstruct) return cmd_reconstruct(rec);
    if (*fuse) return cmd_fuse(fuse_recon, fuse_config, fuse_out, fuse_threads);
    if (*eval) return cmd_eval(ev);
    if (*report) return cmd_report(report_recon, report_out, report_hist);
  } catch (const atv::ConfigError& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const UsageError& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 2;
  } catch (const atv::ParseError& e) {
    std::cerr << "parse error: " << e.what() << "\n";
    return 2;
  } catch (const atv::InputError& e) {
    std::cerr << "input error: " << e.what() << "\n";
    return 2;
  } catch (const atv::Error& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception& e) {
    std::cerr << "pipeline error: " << e.what() << "\n";
    return 1;
  }
  return 2;
}
