#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "vufold/config.hpp"
#include "vufold/dynamics.hpp"
#include "vufold/preprocess.hpp"
#include "vufold/unfold_geometry.hpp"
#include "vufold/unfolded_view.hpp"
#include "vufold/volume.hpp"
#include "vufold/wall_model.hpp"

namespace vufold {

// A failure inside one pipeline stage, tagged with the stage name.
class StageError : public Error {
 public:
  StageError(std::string stage, const std::string& what)
      : Error(stage + ": " + what), stage_(std::move(stage)) {}
  const std::string& stage() const { return stage_; }

 private:
  std::string stage_;
};

// Intensities standing in for a label volume: lumen -1000, wall 40, else -1024.
ScalarVolume labels_to_scalar(const LabelVolume& labels);

// Everything computed before the simulation.
struct PreparedModel {
  LabelVolume air;
  LabelVolume wall;
  Centerline centerline;
  IncisionLine incision;
  WallModel model;
  UnfoldGeometry geometry;
};

struct StageTime {
  std::string stage;
  double seconds = 0.0;
};

struct PipelineResult {
  PreparedModel prepared;
  UnfoldResult unfold;
  UnfoldedVolume view;
  Image image;
  std::vector<StageTime> stage_times;
};

// preprocess -> model -> geometry.
PreparedModel prepare_model(const PipelineConfig& cfg, const ScalarVolume& scalar,
                            std::vector<StageTime>* times = nullptr);

// dynamics -> view, on an already prepared model.
void simulate_and_view(const PipelineConfig& cfg, const ScalarVolume& scalar,
                       PipelineResult& result);

// Whole run; `labels`, when given, replaces threshold segmentation input.
PipelineResult run_pipeline(const PipelineConfig& cfg, const ScalarVolume& scalar,
                            const LabelVolume* labels = nullptr);

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes);
std::string checksum_file(const std::string& path);

struct OutputPaths {
  std::string volume;
  std::string mask;
  std::string image;
  std::string log;
  std::string manifest;
};

OutputPaths output_paths(const std::string& directory);

// Run manifest; stage timings are kept under "stage_times_s" so that
// reproducibility checks can drop that single key.
nlohmann::json build_manifest(const PipelineConfig& cfg, const PipelineResult& result,
                              const nlohmann::json& checksums, const OutputPaths& paths);

void write_iteration_log(const UnfoldResult& unfold, std::ostream& out);

// Writes the unfolded volume, mask, image, iteration log and manifest.
nlohmann::json write_outputs(const PipelineConfig& cfg, const PipelineResult& result,
                             const nlohmann::json& checksums);

// One row of a kappa sweep.
struct SweepRow {
  double kappa = 0.0;
  bool ok = false;
  std::string error;
  int iterations = 0;
  std::string stop_reason;
  double final_d = 0.0;
  double overlap_fraction = 0.0;
  double broken_fraction = 0.0;
  double bending_rms_mm = 0.0;
};

std::vector<SweepRow> run_sweep(const PipelineConfig& cfg, const ScalarVolume& scalar,
                                const LabelVolume* labels, std::span<const double> kappas);

void write_sweep_table(std::span<const SweepRow> rows, std::ostream& out);

}  // namespace vufold
