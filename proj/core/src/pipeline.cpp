#include "vufold/pipeline.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include "vufold/volume_io.hpp"

namespace vufold {

using nlohmann::json;

namespace {

using Clock = std::chrono::steady_clock;

// Runs fn as a named stage: records its duration and tags any library error
// with the stage name. Configuration errors pass through untouched.
template <typename Fn>
auto stage(const char* name, std::vector<StageTime>* times, Fn&& fn) {
  const auto t0 = Clock::now();
  auto finish = [&] {
    if (times) {
      times->push_back({name, std::chrono::duration<double>(Clock::now() - t0).count()});
    }
  };
  try {
    if constexpr (std::is_void_v<decltype(fn())>) {
      fn();
      finish();
    } else {
      auto out = fn();
      finish();
      return out;
    }
  } catch (const ConfigError&) {
    throw;
  } catch (const StageError&) {
    throw;
  } catch (const std::exception& e) {
    throw StageError(name, e.what());
  }
}

// Nearest lumen-intensity voxel to p within radius_mm.
Vec3 snap_seed(const ScalarVolume& scalar, const Vec3& p, double radius_mm, double threshold) {
  const Vec3& sp = scalar.spacing();
  const Index3 c = scalar.nearest_voxel(p);
  double best = std::numeric_limits<double>::infinity();
  Vec3 found = p;
  for (int k = c.k - static_cast<int>(std::ceil(radius_mm / sp.z()));
       k <= c.k + static_cast<int>(std::ceil(radius_mm / sp.z())); ++k)
    for (int j = c.j - static_cast<int>(std::ceil(radius_mm / sp.y()));
         j <= c.j + static_cast<int>(std::ceil(radius_mm / sp.y())); ++j)
      for (int i = c.i - static_cast<int>(std::ceil(radius_mm / sp.x()));
           i <= c.i + static_cast<int>(std::ceil(radius_mm / sp.x())); ++i) {
        if (!scalar.contains(i, j, k) || scalar.at(i, j, k) > threshold) continue;
        const double d = (scalar.world(i, j, k) - p).norm();
        if (d <= radius_mm + 1e-9 && d < best) {
          best = d;
          found = scalar.world(i, j, k);
        }
      }
  if (!std::isfinite(best)) {
    throw Error("cardia is not within " + std::to_string(radius_mm) + " mm of a lumen voxel");
  }
  return found;
}

json vec_json(const Vec3& v) { return json::array({v.x(), v.y(), v.z()}); }

std::string hex64(std::uint64_t v) {
  std::ostringstream s;
  s << std::hex << std::setw(16) << std::setfill('0') << v;
  return s.str();
}

}  // namespace

ScalarVolume labels_to_scalar(const LabelVolume& labels) {
  ScalarVolume s(labels.dims(), labels.spacing(), kBackgroundValue);
  auto out = s.data();
  const auto in = labels.data();
  for (std::size_t i = 0; i < in.size(); ++i) {
    if (in[i] == label::kAir) out[i] = -1000;
    if (in[i] == label::kWall) out[i] = 40;
  }
  return s;
}

PreparedModel prepare_model(const PipelineConfig& cfg, const ScalarVolume& scalar,
                            std::vector<StageTime>* times) {
  cfg.validate();
  if (!cfg.cardia || !cfg.pylorus) throw ConfigError("both --cardia and --pylorus are required");
  const Vec3 cardia = *cfg.cardia, pylorus = *cfg.pylorus;
  PreparedModel out;
  stage("preprocess", times, [&] {
    const Vec3 seed = snap_seed(scalar, cardia, cfg.preprocess.landmark_snap_mm,
                                cfg.preprocess.air_threshold);
    out.air = extract_air_region(scalar, seed, cfg.preprocess);
    out.wall = extract_wall_region(scalar, out.air, cfg.preprocess);
    out.centerline = extract_centerline(out.air, cardia, pylorus, cfg.preprocess);
    out.incision = determine_incision_line(out.wall, out.air, out.centerline, cardia, pylorus,
                                           cfg.preprocess);
  });
  stage("wall_model", times, [&] {
    out.model = build_hex_model(out.wall, out.air, out.incision, cfg.model);
    out.model.sets = classify_vertex_sets(out.model, out.air, out.incision);
  });
  stage("unfold_geometry", times, [&] {
    out.geometry = compute_unfold_geometry(out.centerline, out.incision, out.model, cfg.orientation);
  });
  return out;
}

void simulate_and_view(const PipelineConfig& cfg, const ScalarVolume& scalar,
                       PipelineResult& result) {
  const PreparedModel& p = result.prepared;
  result.unfold = stage("dynamics", &result.stage_times, [&] {
    return run_unfold(p.model, p.geometry.destinations, p.geometry.plane, cfg.dynamics);
  });
  stage("unfolded_view", &result.stage_times, [&] {
    const auto& deformed = result.unfold.state.position;
    const UnfoldedGrid grid =
        build_unfolded_grid(p.geometry.plane, deformed, scalar.spacing(), cfg.view.margin_mm);
    result.view = resample_unfolded(scalar, p.model, p.model.rest, deformed, grid, p.geometry.plane);
    result.image = render_view(result.view.values, result.view.mask, cfg.view.window_center,
                               cfg.view.window_width, cfg.view.mode);
  });
}

PipelineResult run_pipeline(const PipelineConfig& cfg, const ScalarVolume& scalar,
                            const LabelVolume* labels) {
  PipelineResult result;
  if (labels) {
    if (!(labels->dims() == scalar.dims()) || labels->spacing() != scalar.spacing()) {
      throw ConfigError("label volume geometry differs from the scalar volume");
    }
    result.prepared = prepare_model(cfg, labels_to_scalar(*labels), &result.stage_times);
  } else {
    result.prepared = prepare_model(cfg, scalar, &result.stage_times);
  }
  simulate_and_view(cfg, scalar, result);
  return result;
}

std::uint64_t fnv1a64(std::span<const std::uint8_t> bytes) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (std::uint8_t b : bytes) {
    h ^= b;
    h *= 0x100000001b3ULL;
  }
  return h;
}

std::string checksum_file(const std::string& path) {
  std::ifstream f(path, std::ios::binary);
  if (!f) throw Error("cannot open '" + path + "'");
  std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(f)),
                                  std::istreambuf_iterator<char>());
  return "fnv1a64:" + hex64(fnv1a64(bytes));
}

OutputPaths output_paths(const std::string& directory) {
  const std::filesystem::path d(directory);
  return {(d / "unfolded.gvol").string(), (d / "unfolded_mask.gvol").string(),
          (d / "unfolded.pgm").string(), (d / "iterations.log").string(),
          (d / "manifest.json").string()};
}

json build_manifest(const PipelineConfig& cfg, const PipelineResult& r, const json& checksums,
                    const OutputPaths& paths) {
  const auto& g = r.prepared.geometry;
  const auto& u = r.unfold;
  const auto& m = r.view.metrics;
  json times = json::object();
  for (const auto& t : r.stage_times) times[t.stage] = t.seconds;
  json grid = {{"origin", vec_json(r.view.grid.origin)},
               {"axes", json::array({vec_json(r.view.grid.axes[0]), vec_json(r.view.grid.axes[1]),
                                     vec_json(r.view.grid.axes[2])})},
               {"dims", {r.view.grid.dims.nx, r.view.grid.dims.ny, r.view.grid.dims.nz}},
               {"spacing", vec_json(r.view.grid.spacing)}};
  return {
      {"config", to_json(cfg)},
      {"input_checksums", checksums},
      {"stage_times_s", times},
      {"model",
       {{"vertices", r.prepared.model.vertex_count()},
        {"hexahedra", r.prepared.model.hexahedra.size()},
        {"springs", r.prepared.model.springs.size()},
        {"incision_cells", r.prepared.model.incision_cells.size()},
        {"outer_vertices", r.prepared.model.sets.outer.size()},
        {"inner_vertices", r.prepared.model.sets.inner.size()},
        {"cut_edge_vertices", r.prepared.model.sets.boundary.size()}}},
      {"plane",
       {{"normal", vec_json(g.plane.normal)},
        {"point", vec_json(g.plane.point)},
        {"v1", vec_json(g.plane.v1)},
        {"v2", vec_json(g.plane.v2)}}},
      {"iterations", u.state.iteration},
      {"stop_reason", to_string(u.reason)},
      {"stop_message", u.message},
      {"d_history", u.state.d_history},
      {"metrics",
       {{"overlap_fraction", m.overlap_fraction},
        {"broken_fraction", m.broken_fraction},
        {"bending_rms_mm", m.bending_rms_mm},
        {"masked_voxels", m.masked_voxels},
        {"degenerate_hexahedra", m.degenerate_hexahedra},
        {"newton_failures", m.newton_failures}}},
      {"unfolded_grid", grid},
      {"outputs",
       {{"volume", paths.volume},
        {"mask", paths.mask},
        {"image", paths.image},
        {"log", paths.log},
        {"manifest", paths.manifest}}},
  };
}

void write_iteration_log(const UnfoldResult& unfold, std::ostream& out) {
  const auto precision = out.precision(17);
  for (const auto& rec : unfold.log) {
    out << rec.iteration << ' ' << rec.d << ' ' << rec.max_force << '\n';
  }
  out.precision(precision);
}

json write_outputs(const PipelineConfig& cfg, const PipelineResult& result,
                   const json& checksums) {
  std::filesystem::create_directories(cfg.output_dir);
  const OutputPaths paths = output_paths(cfg.output_dir);
  write_volume(result.view.values, paths.volume);
  write_volume(result.view.mask, paths.mask);
  write_pgm(result.image, paths.image);
  {
    std::ofstream log(paths.log);
    if (!log) throw Error("cannot open '" + paths.log + "' for writing");
    write_iteration_log(result.unfold, log);
  }
  json manifest = build_manifest(cfg, result, checksums, paths);
  std::ofstream f(paths.manifest);
  if (!f) throw Error("cannot open '" + paths.manifest + "' for writing");
  f << manifest.dump(2) << '\n';
  return manifest;
}

std::vector<SweepRow> run_sweep(const PipelineConfig& cfg, const ScalarVolume& scalar,
                                const LabelVolume* labels, std::span<const double> kappas) {
  if (kappas.empty()) throw ConfigError("kappa list is empty");
  const ScalarVolume converted = labels ? labels_to_scalar(*labels) : ScalarVolume{};
  const PreparedModel prepared = prepare_model(cfg, labels ? converted : scalar);
  std::vector<SweepRow> rows;
  for (double kappa : kappas) {
    SweepRow row;
    row.kappa = kappa;
    try {
      PipelineConfig c = cfg;
      c.dynamics.kappa = kappa;
      c.validate();
      PipelineResult r;
      r.prepared = prepared;
      simulate_and_view(c, scalar, r);
      row.ok = true;
      row.iterations = r.unfold.state.iteration;
      row.stop_reason = to_string(r.unfold.reason);
      row.final_d = r.unfold.state.d_history.back();
      row.overlap_fraction = r.view.metrics.overlap_fraction;
      row.broken_fraction = r.view.metrics.broken_fraction;
      row.bending_rms_mm = r.view.metrics.bending_rms_mm;
    } catch (const std::exception& e) {
      row.error = e.what();
    }
    rows.push_back(row);
  }
  return rows;
}

void write_sweep_table(std::span<const SweepRow> rows, std::ostream& out) {
  out << "kappa\titerations\tstop\tfinal_D\toverlap\tbroken\tbending_rms_mm\n";
  for (const auto& r : rows) {
    if (!r.ok) {
      out << r.kappa << "\tFAILED\t" << r.error << '\n';
      continue;
    }
    out << r.kappa << '\t' << r.iterations << '\t' << r.stop_reason << '\t' << r.final_d << '\t'
        << r.overlap_fraction << '\t' << r.broken_fraction << '\t' << r.bending_rms_mm << '\n';
  }
}

}  // namespace vufold
