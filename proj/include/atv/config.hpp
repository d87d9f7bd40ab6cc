// Run configuration: one JSON document covering the cascade, features,
// fusion, evaluation and IO. Unknown keys are rejected.
#pragma once

#include <fstream>
#include <optional>
#include <set>
#include <sstream>
#include <string>

#include "json.hpp"

#include "atv/cascade.hpp"
#include "atv/common.hpp"
#include "atv/fusion.hpp"

namespace atv {

struct EvaluationConfig {
  double max_dist = 0.0;        // 0: 20 x stage-3 unit distance of the reference view
  double gt_dedup_cell = 0.0;   // 0: max_dist / 40
  int interior_margin = 16;     // full-resolution pixels
  double visibility_tolerance = 0.01;
};

struct IoConfig {
  bool dump_stages = false;
  int threads = 0;  // 0: ATV_STEREO_THREADS or hardware parallelism
};

struct RunConfig {
  CascadeConfig cascade;
  FusionConfig fusion;
  EvaluationConfig evaluation;
  IoConfig io;
  std::optional<double> d_min;  // overrides the dataset manifest when set
  std::optional<double> d_max;
};

namespace detail {

inline void reject_unknown(const nlohmann::json& j, const std::string& where, const std::set<std::string>& allowed) {
  if (!j.is_object()) throw ConfigError(where + " must be a JSON object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) throw ConfigError("unknown key '" + where + "." + key + "'");
  }
}

template <typename T>
void read_field(const nlohmann::json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const nlohmann::json::exception&) {
    throw ConfigError("invalid value for '" + where + "." + key + "'");
  }
}

}  // namespace detail

/// Builds a RunConfig from defaults overlaid with `j`.
inline RunConfig run_config_from_json(const nlohmann::json& j) {
  RunConfig cfg;
  detail::reject_unknown(j, "config", {"cascade", "features", "fusion", "evaluation", "io"});

  if (j.contains("cascade")) {
    const auto& c = j.at("cascade");
    const std::string w = "cascade";
    detail::reject_unknown(c, w,
                           {"n_views", "d_min", "d_max", "planes", "lambda", "beta", "smoothing_radii",
                            "min_interval_width"});
    detail::read_field(c, "n_views", cfg.cascade.n_views, w);
    detail::read_field(c, "planes", cfg.cascade.planes, w);
    detail::read_field(c, "lambda", cfg.cascade.lambda, w);
    detail::read_field(c, "beta", cfg.cascade.beta, w);
    detail::read_field(c, "smoothing_radii", cfg.cascade.smoothing_radii, w);
    detail::read_field(c, "min_interval_width", cfg.cascade.min_interval_width, w);
    if (c.contains("d_min")) {
      double v = 0.0;
      detail::read_field(c, "d_min", v, w);
      cfg.d_min = v;
    }
    if (c.contains("d_max")) {
      double v = 0.0;
      detail::read_field(c, "d_max", v, w);
      cfg.d_max = v;
    }
  }
  if (j.contains("features")) {
    const auto& f = j.at("features");
    detail::reject_unknown(f, "features", {"channels", "gaussian_radii", "window_radii"});
    detail::read_field(f, "channels", cfg.cascade.features.channels, "features");
    detail::read_field(f, "gaussian_radii", cfg.cascade.features.gaussian_radii, "features");
    detail::read_field(f, "window_radii", cfg.cascade.features.window_radii, "features");
  }
  if (j.contains("fusion")) {
    const auto& f = j.at("fusion");
    detail::reject_unknown(f, "fusion", {"max_relative_depth_diff", "max_reprojection_dist", "min_consistent_views"});
    detail::read_field(f, "max_relative_depth_diff", cfg.fusion.max_relative_depth_diff, "fusion");
    detail::read_field(f, "max_reprojection_dist", cfg.fusion.max_reprojection_dist, "fusion");
    detail::read_field(f, "min_consistent_views", cfg.fusion.min_consistent_views, "fusion");
  }
  if (j.contains("evaluation")) {
    const auto& e = j.at("evaluation");
    detail::reject_unknown(e, "evaluation", {"max_dist", "gt_dedup_cell", "interior_margin", "visibility_tolerance"});
    detail::read_field(e, "max_dist", cfg.evaluation.max_dist, "evaluation");
    detail::read_field(e, "gt_dedup_cell", cfg.evaluation.gt_dedup_cell, "evaluation");
    detail::read_field(e, "interior_margin", cfg.evaluation.interior_margin, "evaluation");
    detail::read_field(e, "visibility_tolerance", cfg.evaluation.visibility_tolerance, "evaluation");
  }
  if (j.contains("io")) {
    const auto& o = j.at("io");
    detail::reject_unknown(o, "io", {"dump_stages", "threads"});
    detail::read_field(o, "dump_stages", cfg.io.dump_stages, "io");
    detail::read_field(o, "threads", cfg.io.threads, "io");
  }

  if (cfg.evaluation.max_dist < 0.0 || cfg.evaluation.gt_dedup_cell < 0.0 || cfg.evaluation.interior_margin < 0 ||
      !(cfg.evaluation.visibility_tolerance > 0.0)) {
    throw ConfigError("evaluation thresholds out of range");
  }
  if (cfg.io.threads < 0) throw ConfigError("io.threads must be >= 0");
  try {
    cfg.fusion.validate();
    if (cfg.cascade.n_views < 2) throw InputError("cascade.n_views must be >= 2");
    cfg.cascade.features.validate();
    CascadeConfig probe = cfg.cascade;
    probe.d_min = cfg.d_min.value_or(1.0);
    probe.d_max = cfg.d_max.value_or(probe.d_min + 1.0);
    probe.validate();
  } catch (const InputError& e) {
    throw ConfigError(e.what());
  }
  return cfg;
}

inline RunConfig load_run_config(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config " + path);
  nlohmann::json j;
  try {
    in >> j;
  } catch (const nlohmann::json::parse_error& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return run_config_from_json(j);
}

inline nlohmann::json to_json(const RunConfig& cfg) {
  nlohmann::json cascade = {{"n_views", cfg.cascade.n_views},
                            {"planes", cfg.cascade.planes},
                            {"lambda", cfg.cascade.lambda},
                            {"beta", cfg.cascade.beta},
                            {"smoothing_radii", cfg.cascade.smoothing_radii},
                            {"min_interval_width", cfg.cascade.min_interval_width}};
  if (cfg.d_min) cascade["d_min"] = *cfg.d_min;
  if (cfg.d_max) cascade["d_max"] = *cfg.d_max;
  return {{"cascade", cascade},
          {"features",
           {{"channels", cfg.cascade.features.channels},
            {"gaussian_radii", cfg.cascade.features.gaussian_radii},
            {"window_radii", cfg.cascade.features.window_radii}}},
          {"fusion",
           {{"max_relative_depth_diff", cfg.fusion.max_relative_depth_diff},
            {"max_reprojection_dist", cfg.fusion.max_reprojection_dist},
            {"min_consistent_views", cfg.fusion.min_consistent_views}}},
          {"evaluation",
           {{"max_dist", cfg.evaluation.max_dist},
            {"gt_dedup_cell", cfg.evaluation.gt_dedup_cell},
            {"interior_margin", cfg.evaluation.interior_margin},
            {"visibility_tolerance", cfg.evaluation.visibility_tolerance}}},
          {"io", {{"dump_stages", cfg.io.dump_stages}, {"threads", cfg.io.threads}}}};
}

}  // namespace atv
