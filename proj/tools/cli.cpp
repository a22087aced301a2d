#include "cli.hpp"

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <optional>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>

#include "vufold/config.hpp"
#include "vufold/pipeline.hpp"
#include "vufold/volume_io.hpp"

namespace vufold::cli {

using nlohmann::json;

namespace {

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

json points_json(const std::vector<Vec3>& pts) {
  json a = json::array();
  for (const Vec3& p : pts) a.push_back(vec_json(p));
  return a;
}

// Flags shared by `unfold` and `sweep`; unset optionals leave the config alone.
struct RunFlags {
  std::string config_path;
  std::string volume;
  std::string labels;
  std::string out_dir;
  std::string cardia;
  std::string pylorus;
  std::optional<double> kappa;
  std::optional<int> d;
  std::optional<int> max_iterations;
  std::optional<std::string> orientation;
  std::optional<std::string> cell_rule;
  std::optional<std::string> render_mode;
  std::optional<double> window_center;
  std::optional<double> window_width;
};

void add_run_flags(CLI::App* cmd, RunFlags& f) {
  cmd->add_option("--config", f.config_path, "JSON config; flags override its values");
  cmd->add_option("--volume", f.volume, "Scalar GVOL volume");
  cmd->add_option("--labels", f.labels, "Label GVOL volume used for segmentation");
  cmd->add_option("--out", f.out_dir, "Output directory");
  cmd->add_option("--cardia", f.cardia, "Cardia landmark x,y,z in mm");
  cmd->add_option("--pylorus", f.pylorus, "Pylorus landmark x,y,z in mm");
  cmd->add_option("--kappa", f.kappa, "Termination threshold on |D change| in mm");
  cmd->add_option("--d", f.d, "Hexahedron edge in voxels");
  cmd->add_option("--max-iterations", f.max_iterations, "Iteration limit");
  cmd->add_option("--orientation", f.orientation, "Base line orientation: reverse or forward");
  cmd->add_option("--cell-rule", f.cell_rule, "Cell rule: wall-fraction or center");
  cmd->add_option("--render-mode", f.render_mode, "mip or slab-average");
  cmd->add_option("--window-center", f.window_center, "Display window center");
  cmd->add_option("--window-width", f.window_width, "Display window width");
}

PipelineConfig resolve_config(const RunFlags& f) {
  PipelineConfig c = f.config_path.empty() ? PipelineConfig{} : load_config(f.config_path);
  if (!f.volume.empty()) c.volume_path = f.volume;
  if (!f.labels.empty()) c.label_path = f.labels;
  if (!f.out_dir.empty()) c.output_dir = f.out_dir;
  if (!f.cardia.empty()) c.cardia = parse_point(f.cardia);
  if (!f.pylorus.empty()) c.pylorus = parse_point(f.pylorus);
  if (f.kappa) c.dynamics.kappa = *f.kappa;
  if (f.d) c.model.d = *f.d;
  if (f.max_iterations) c.dynamics.max_iterations = *f.max_iterations;
  if (f.orientation) c.orientation = parse_baseline_orientation(*f.orientation);
  if (f.cell_rule) c.model.cell_rule = parse_cell_rule(*f.cell_rule);
  if (f.render_mode) c.view.mode = parse_render_mode(*f.render_mode);
  if (f.window_center) c.view.window_center = *f.window_center;
  if (f.window_width) c.view.window_width = *f.window_width;
  c.validate();
  if (c.volume_path.empty()) throw ConfigError("--volume is required");
  if (!c.cardia) throw ConfigError("--cardia is required");
  if (!c.pylorus) throw ConfigError("--pylorus is required");
  return c;
}

struct Inputs {
  ScalarVolume scalar;
  std::optional<LabelVolume> labels;
  json checksums = json::object();
};

Inputs load_inputs(const PipelineConfig& c) {
  Inputs in;
  in.scalar = read_scalar_volume(c.volume_path);
  in.checksums["volume"] = checksum_file(c.volume_path);
  if (!c.label_path.empty()) {
    in.labels = read_label_volume(c.label_path);
    in.checksums["labels"] = checksum_file(c.label_path);
  }
  return in;
}

int cmd_phantom(const std::string& shape, double radius, double wall, double length,
                double bend_radius, double spacing, const std::string& out_dir,
                const std::string& prefix, std::ostream& out) {
  PhantomSpec spec;
  spec.shape = parse_tube_shape(shape);
  spec.radius = radius;
  spec.wall = wall;
  spec.length = length;
  spec.bend_radius = bend_radius;
  spec.spacing = Vec3::Constant(spacing);
  const Phantom ph = generate_phantom(spec);
  std::filesystem::create_directories(out_dir);
  const std::filesystem::path base(out_dir);
  const auto scalar_path = base / (prefix + ".gvol");
  const auto label_path = base / (prefix + "_labels.gvol");
  const auto truth_path = base / (prefix + "_truth.json");
  write_volume(ph.scalar, scalar_path);
  write_volume(ph.labels, label_path);
  std::ofstream f(truth_path);
  if (!f) throw Error("cannot open '" + truth_path.string() + "' for writing");
  f << truth_to_json(ph.truth).dump(2) << '\n';
  out << scalar_path.string() << '\n' << label_path.string() << '\n' << truth_path.string() << '\n';
  return kExitConverged;
}

int cmd_unfold(const RunFlags& flags, std::ostream& out) {
  const PipelineConfig c = resolve_config(flags);
  const Inputs in = load_inputs(c);
  const PipelineResult r = run_pipeline(c, in.scalar, in.labels ? &*in.labels : nullptr);
  write_outputs(c, r, in.checksums);
  out << "stop: " << to_string(r.unfold.reason) << " after " << r.unfold.state.iteration
      << " iterations, D " << r.unfold.state.d_history.front() << " -> "
      << r.unfold.state.d_history.back() << '\n';
  out << "manifest: " << output_paths(c.output_dir).manifest << '\n';
  return r.unfold.reason == StopReason::kConverged ? kExitConverged : kExitNotConverged;
}

std::vector<double> parse_list(const std::string& text) {
  std::vector<double> values;
  std::stringstream ss(text);
  std::string part;
  while (std::getline(ss, part, ',')) {
    if (part.empty()) continue;
    try {
      std::size_t used = 0;
      values.push_back(std::stod(part, &used));
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("bad kappa value '" + part + "'");
    }
  }
  if (values.empty()) throw ConfigError("kappa list is empty");
  return values;
}

int cmd_sweep(const RunFlags& flags, const std::string& kappas, const std::string& report,
              std::ostream& out) {
  const std::vector<double> list = parse_list(kappas);
  const PipelineConfig c = resolve_config(flags);
  for (double k : list) {
    PipelineConfig probe = c;
    probe.dynamics.kappa = k;
    probe.validate();
  }
  const Inputs in = load_inputs(c);
  const auto rows = run_sweep(c, in.scalar, in.labels ? &*in.labels : nullptr, list);
  write_sweep_table(rows, out);
  if (!report.empty()) {
    std::ofstream f(report);
    if (!f) throw Error("cannot open '" + report + "' for writing");
    write_sweep_table(rows, f);
  }
  const bool all_ok = std::all_of(rows.begin(), rows.end(), [](const SweepRow& r) { return r.ok; });
  return all_ok ? kExitConverged : kExitStageError;
}

int cmd_render(const std::string& input, const std::string& mask_path, const std::string& output,
               double center, double width, const std::string& mode, std::ostream& out) {
  const RenderMode m = parse_render_mode(mode);
  if (!(width > 0.0)) throw ConfigError("window width must be positive");
  const ScalarVolume values = read_scalar_volume(input);
  LabelVolume mask;
  if (mask_path.empty()) {
    mask = LabelVolume(values.dims(), values.spacing(), 0);
    for (std::size_t i = 0; i < values.data().size(); ++i) {
      mask.data()[i] = values.data()[i] != kBackgroundValue ? 1 : 0;
    }
  } else {
    mask = read_label_volume(mask_path);
  }
  write_pgm(render_view(values, mask, center, width, m), output);
  out << output << '\n';
  return kExitConverged;
}

}  // namespace

json truth_to_json(const PhantomTruth& t) {
  return {{"shape", to_string(t.shape)},
          {"radius", t.radius},
          {"wall", t.wall},
          {"inner_radius", t.inner_radius()},
          {"axis_length", t.axis_length},
          {"cardia", vec_json(t.cardia)},
          {"pylorus", vec_json(t.pylorus)},
          {"bend_center", vec_json(t.bend_center)},
          {"bend_radius", t.bend_radius},
          {"bend_normal", vec_json(t.bend_normal)},
          {"axis", points_json(t.axis)},
          {"ridge", points_json(t.ridge)}};
}

int run(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Virtual unfolding of tubular organs from CT-like volumes", "vufold"};
  app.require_subcommand(1);

  std::string shape = "straight", out_dir = ".", prefix = "phantom";
  double radius = 0, wall = 0, length = 0, bend_radius = 0, spacing = 1.0;
  auto* phantom = app.add_subcommand("phantom", "Generate a capped tube phantom");
  phantom->add_option("--shape", shape, "straight or j-tube")->capture_default_str();
  phantom->add_option("--radius", radius, "Outer radius in mm")->required();
  phantom->add_option("--wall", wall, "Wall thickness in mm")->required();
  phantom->add_option("--length", length, "Straight length in mm")->required();
  phantom->add_option("--bend-radius", bend_radius, "Axis bend radius in mm (0: twice the radius)");
  phantom->add_option("--spacing", spacing, "Isotropic voxel spacing in mm")->capture_default_str();
  phantom->add_option("--out", out_dir, "Output directory")->capture_default_str();
  phantom->add_option("--prefix", prefix, "Output file prefix")->capture_default_str();

  RunFlags unfold_flags;
  auto* unfold = app.add_subcommand("unfold", "Run the unfolding pipeline");
  add_run_flags(unfold, unfold_flags);

  RunFlags sweep_flags;
  std::string kappas, report;
  auto* sweep = app.add_subcommand("sweep", "Repeat the simulation over several kappa values");
  add_run_flags(sweep, sweep_flags);
  sweep->add_option("--kappas", kappas, "Comma-separated kappa list")->required();
  sweep->add_option("--report", report, "Also write the table to this file");

  std::string input, mask, image;
  double center = 40.0, width = 400.0;
  std::string mode = "mip";
  auto* render = app.add_subcommand("render", "Re-render an unfolded volume");
  render->add_option("--input", input, "Unfolded GVOL volume")->required();
  render->add_option("--mask", mask, "Mask GVOL; defaults to non-background voxels");
  render->add_option("--out", image, "Output PGM image")->required();
  render->add_option("--window-center", center, "Display window center")->capture_default_str();
  render->add_option("--window-width", width, "Display window width")->capture_default_str();
  render->add_option("--mode", mode, "mip or slab-average")->capture_default_str();

  try {
    std::vector<std::string> reversed(args.rbegin(), args.rend());
    app.parse(reversed);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err);
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitUsage;
  }

  try {
    if (*phantom) {
      return cmd_phantom(shape, radius, wall, length, bend_radius, spacing, out_dir, prefix, out);
    }
    if (*unfold) return cmd_unfold(unfold_flags, out);
    if (*sweep) return cmd_sweep(sweep_flags, kappas, report, out);
    if (*render) return cmd_render(input, mask, image, center, width, mode, out);
  } catch (const ConfigError& e) {
    err << "usage error: " << e.what() << '\n';
    return kExitUsage;
  } catch (const StageError& e) {
    err << "error in stage " << e.what() << '\n';
    return kExitStageError;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitStageError;
  }
  return kExitUsage;
}

}  // namespace vufold::cli
