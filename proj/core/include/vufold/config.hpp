#pragma once

#include <optional>
#include <string>

#include <json.hpp>

#include "vufold/dynamics.hpp"
#include "vufold/preprocess.hpp"
#include "vufold/unfold_geometry.hpp"
#include "vufold/unfolded_view.hpp"
#include "vufold/wall_model.hpp"

namespace vufold {

struct ViewParams {
  double margin_mm = 5.0;
  double window_center = 40.0;
  double window_width = 400.0;
  RenderMode mode = RenderMode::kMip;

  void validate() const;
};

// Every tunable of a run. JSON layout:
//   { "input": {"volume", "labels"}, "output": {"directory"},
//     "landmarks": {"cardia": [x,y,z], "pylorus": [x,y,z]},
//     "preprocess": {...}, "model": {...}, "geometry": {...},
//     "dynamics": {...}, "view": {...} }
struct PipelineConfig {
  std::string volume_path;
  std::string label_path;  // optional; drives segmentation when set
  std::string output_dir = ".";
  std::optional<Vec3> cardia;
  std::optional<Vec3> pylorus;

  PreprocessParams preprocess;
  ModelParams model;
  BaselineOrientation orientation = BaselineOrientation::kReverse;
  DynamicsConfig dynamics;
  ViewParams view;

  // Range checks for all parameters; paths and landmarks are checked by the
  // commands that need them.
  void validate() const;
};

nlohmann::json to_json(const PipelineConfig& cfg);

// Overlays `j` on `base`. Unknown keys and wrongly typed values throw
// ConfigError naming the offending key.
PipelineConfig config_from_json(const nlohmann::json& j, PipelineConfig base = {});

PipelineConfig load_config(const std::string& path, PipelineConfig base = {});

// "x,y,z" in millimeters.
Vec3 parse_point(const std::string& text);

}  // namespace vufold
