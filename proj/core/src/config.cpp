#include "vufold/config.hpp"

#include <cmath>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace vufold {

using nlohmann::json;

void ViewParams::validate() const {
  if (!(margin_mm >= 0.0) || !std::isfinite(margin_mm)) {
    throw ConfigError("view.margin_mm must be non-negative");
  }
  if (!std::isfinite(window_center)) throw ConfigError("view.window_center must be finite");
  if (!(window_width > 0.0) || !std::isfinite(window_width)) {
    throw ConfigError("view.window_width must be positive");
  }
}

void PipelineConfig::validate() const {
  preprocess.validate();
  model.validate();
  dynamics.validate();
  view.validate();
  for (const auto* p : {&cardia, &pylorus}) {
    if (*p && !(*p)->allFinite()) throw ConfigError("landmarks must be finite");
  }
}

namespace {

json point_json(const Vec3& p) { return json::array({p.x(), p.y(), p.z()}); }

Vec3 point_from(const json& j, const std::string& key) {
  if (!j.is_array() || j.size() != 3) throw ConfigError(key + " must be an array of 3 numbers");
  Vec3 p;
  for (int a = 0; a < 3; ++a) {
    if (!j[a].is_number()) throw ConfigError(key + " must be an array of 3 numbers");
    p[a] = j[a].get<double>();
  }
  return p;
}

template <typename T>
T value_as(const json& j, const std::string& key) {
  if constexpr (std::is_same_v<T, int>) {
    if (!j.is_number_integer()) throw ConfigError(key + " must be an integer");
    return j.get<int>();
  } else if constexpr (std::is_same_v<T, double>) {
    if (!j.is_number()) throw ConfigError(key + " must be a number");
    return j.get<double>();
  } else {
    if (!j.is_string()) throw ConfigError(key + " must be a string");
    return j.get<std::string>();
  }
}

using Setter = std::function<void(const json&, const std::string&)>;

template <typename T>
Setter bind(T& target) {
  return [&target](const json& j, const std::string& key) { target = value_as<T>(j, key); };
}

void apply_section(const json& section, const std::string& name,
                   const std::map<std::string, Setter>& fields) {
  if (!section.is_object()) throw ConfigError(name + " must be an object");
  for (const auto& [key, value] : section.items()) {
    const auto it = fields.find(key);
    const std::string full = name + "." + key;
    if (it == fields.end()) throw ConfigError("unknown config key '" + full + "'");
    it->second(value, full);
  }
}

}  // namespace

json to_json(const PipelineConfig& c) {
  json j;
  j["input"] = {{"volume", c.volume_path}, {"labels", c.label_path}};
  j["output"] = {{"directory", c.output_dir}};
  json lm = json::object();
  if (c.cardia) lm["cardia"] = point_json(*c.cardia);
  if (c.pylorus) lm["pylorus"] = point_json(*c.pylorus);
  j["landmarks"] = lm;
  const auto& p = c.preprocess;
  j["preprocess"] = {{"air_threshold", p.air_threshold},
                     {"wall_threshold", p.wall_threshold},
                     {"wall_shell_mm", p.wall_shell_mm},
                     {"resample_step_mm", p.resample_step_mm},
                     {"landmark_snap_mm", p.landmark_snap_mm},
                     {"section_half_width_mm", p.section_half_width_mm},
                     {"centerline_smoothing_passes", p.centerline_smoothing_passes},
                     {"incision_smoothing_passes", p.incision_smoothing_passes},
                     {"ridge_tolerance_mm", p.ridge_tolerance_mm}};
  const auto& m = c.model;
  j["model"] = {{"d", m.d},
                {"cell_rule", to_string(m.cell_rule)},
                {"min_wall_fraction", m.min_wall_fraction},
                {"density", m.density},
                {"edge_stiffness", m.edge_stiffness},
                {"diagonal_stiffness", m.diagonal_stiffness},
                {"damping", m.damping}};
  j["geometry"] = {{"baseline_orientation", to_string(c.orientation)}};
  const auto& d = c.dynamics;
  j["dynamics"] = {{"dt", d.dt},
                   {"beta", d.beta},
                   {"gamma", d.gamma},
                   {"corrector_passes", d.corrector_passes},
                   {"substeps", d.substeps},
                   {"pull_gain", d.pull_gain},
                   {"pull_force_cap", d.pull_force_cap},
                   {"flatten_gain", d.flatten_gain},
                   {"flatten_ramp_iterations", d.flatten_ramp_iterations},
                   {"max_iterations", d.max_iterations},
                   {"kappa", d.kappa},
                   {"divergence_factor", d.divergence_factor}};
  const auto& v = c.view;
  j["view"] = {{"margin_mm", v.margin_mm},
               {"window_center", v.window_center},
               {"window_width", v.window_width},
               {"render_mode", to_string(v.mode)}};
  return j;
}

PipelineConfig config_from_json(const json& j, PipelineConfig c) {
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  auto& p = c.preprocess;
  auto& m = c.model;
  auto& d = c.dynamics;
  auto& v = c.view;
  const std::map<std::string, std::function<void(const json&)>> sections{
      {"input",
       [&](const json& s) {
         apply_section(s, "input", {{"volume", bind(c.volume_path)}, {"labels", bind(c.label_path)}});
       }},
      {"output",
       [&](const json& s) { apply_section(s, "output", {{"directory", bind(c.output_dir)}}); }},
      {"landmarks",
       [&](const json& s) {
         apply_section(s, "landmarks",
                       {{"cardia", [&](const json& x, const std::string& k) { c.cardia = point_from(x, k); }},
                        {"pylorus", [&](const json& x, const std::string& k) { c.pylorus = point_from(x, k); }}});
       }},
      {"preprocess",
       [&](const json& s) {
         apply_section(s, "preprocess",
                       {{"air_threshold", bind(p.air_threshold)},
                        {"wall_threshold", bind(p.wall_threshold)},
                        {"wall_shell_mm", bind(p.wall_shell_mm)},
                        {"resample_step_mm", bind(p.resample_step_mm)},
                        {"landmark_snap_mm", bind(p.landmark_snap_mm)},
                        {"section_half_width_mm", bind(p.section_half_width_mm)},
                        {"centerline_smoothing_passes", bind(p.centerline_smoothing_passes)},
                        {"incision_smoothing_passes", bind(p.incision_smoothing_passes)},
                        {"ridge_tolerance_mm", bind(p.ridge_tolerance_mm)}});
       }},
      {"model",
       [&](const json& s) {
         apply_section(s, "model",
                       {{"d", bind(m.d)},
                        {"cell_rule",
                         [&](const json& x, const std::string& k) {
                           m.cell_rule = parse_cell_rule(value_as<std::string>(x, k));
                         }},
                        {"min_wall_fraction", bind(m.min_wall_fraction)},
                        {"density", bind(m.density)},
                        {"edge_stiffness", bind(m.edge_stiffness)},
                        {"diagonal_stiffness", bind(m.diagonal_stiffness)},
                        {"damping", bind(m.damping)}});
       }},
      {"geometry",
       [&](const json& s) {
         apply_section(s, "geometry",
                       {{"baseline_orientation", [&](const json& x, const std::string& k) {
                           c.orientation = parse_baseline_orientation(value_as<std::string>(x, k));
                         }}});
       }},
      {"dynamics",
       [&](const json& s) {
         apply_section(s, "dynamics",
                       {{"dt", bind(d.dt)},
                        {"beta", bind(d.beta)},
                        {"gamma", bind(d.gamma)},
                        {"corrector_passes", bind(d.corrector_passes)},
                        {"substeps", bind(d.substeps)},
                        {"pull_gain", bind(d.pull_gain)},
                        {"pull_force_cap", bind(d.pull_force_cap)},
                        {"flatten_gain", bind(d.flatten_gain)},
                        {"flatten_ramp_iterations", bind(d.flatten_ramp_iterations)},
                        {"max_iterations", bind(d.max_iterations)},
                        {"kappa", bind(d.kappa)},
                        {"divergence_factor", bind(d.divergence_factor)}});
       }},
      {"view",
       [&](const json& s) {
         apply_section(s, "view",
                       {{"margin_mm", bind(v.margin_mm)},
                        {"window_center", bind(v.window_center)},
                        {"window_width", bind(v.window_width)},
                        {"render_mode", [&](const json& x, const std::string& k) {
                           v.mode = parse_render_mode(value_as<std::string>(x, k));
                         }}});
       }},
  };
  for (const auto& [key, value] : j.items()) {
    const auto it = sections.find(key);
    if (it == sections.end()) throw ConfigError("unknown config key '" + key + "'");
    it->second(value);
  }
  return c;
}

PipelineConfig load_config(const std::string& path, PipelineConfig base) {
  std::ifstream f(path);
  if (!f) throw ConfigError("cannot open config '" + path + "'");
  json j;
  try {
    j = json::parse(f);
  } catch (const json::parse_error& e) {
    throw ConfigError("config '" + path + "' is not valid JSON: " + e.what());
  }
  return config_from_json(j, std::move(base));
}

Vec3 parse_point(const std::string& text) {
  std::stringstream ss(text);
  Vec3 p;
  std::string part;
  for (int a = 0; a < 3; ++a) {
    if (!std::getline(ss, part, ',')) throw ConfigError("expected x,y,z but got '" + text + "'");
    try {
      std::size_t used = 0;
      p[a] = std::stod(part, &used);
      if (used != part.size()) throw std::invalid_argument(part);
    } catch (const std::exception&) {
      throw ConfigError("expected x,y,z but got '" + text + "'");
    }
  }
  if (std::getline(ss, part)) throw ConfigError("expected x,y,z but got '" + text + "'");
  if (!p.allFinite()) throw ConfigError("point '" + text + "' is not finite");
  return p;
}

}  // namespace vufold
