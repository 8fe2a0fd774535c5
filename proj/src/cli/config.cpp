#include "kramers/cli/config.hpp"

#include <fstream>
#include <set>

#include <fmt/core.h>

#include "kramers/branching.hpp"

namespace kramers::cli {

namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were consumed so leftovers
// can be reported with their pointer.
class ObjectReader {
 public:
  ObjectReader(const json& node, std::string pointer) : node_(node), pointer_(std::move(pointer)) {
    if (!node_.is_object()) {
      throw config_error(fmt::format("{}: expected an object", location()));
    }
  }

  bool has(const std::string& key) const { return node_.contains(key); }

  void number(const std::string& key, double& target) {
    if (const json* v = take(key)) {
      if (!v->is_number()) {
        throw config_error(fmt::format("{}/{}: expected a number", pointer_, key));
      }
      target = v->get<double>();
    }
  }

  void integer(const std::string& key, int& target) {
    if (const json* v = take(key)) {
      if (!v->is_number_integer()) {
        throw config_error(fmt::format("{}/{}: expected an integer", pointer_, key));
      }
      target = v->get<int>();
    }
  }

  void text(const std::string& key, std::string& target) {
    if (const json* v = take(key)) {
      if (!v->is_string()) {
        throw config_error(fmt::format("{}/{}: expected a string", pointer_, key));
      }
      target = v->get<std::string>();
    }
  }

  const json* take(const std::string& key) {
    auto it = node_.find(key);
    if (it == node_.end()) {
      return nullptr;
    }
    used_.insert(key);
    return &*it;
  }

  std::string child(const std::string& key) const { return pointer_ + "/" + key; }

  void finish() const {
    for (const auto& [key, value] : node_.items()) {
      if (!used_.count(key)) {
        throw config_error(fmt::format("{}/{}: unknown key", pointer_, key));
      }
    }
  }

 private:
  std::string location() const { return pointer_.empty() ? "/" : pointer_; }

  const json& node_;
  std::string pointer_;
  std::set<std::string> used_;
};

GTensor read_g(const json& node, const std::string& pointer, GTensor g) {
  ObjectReader r(node, pointer);
  r.number("g_parallel", g.g_parallel);
  r.number("g_perpendicular", g.g_perpendicular);
  r.finish();
  return g;
}

void read_materials(const json& node, MaterialsSection& m) {
  ObjectReader r(node, "/materials");
  if (const json* g = r.take("ground")) {
    m.ground = read_g(*g, r.child("ground"), m.ground);
  }
  if (const json* g = r.take("excited")) {
    m.excited = read_g(*g, r.child("excited"), m.excited);
  }
  r.finish();
}

void read_field(const json& node, FieldSection& f) {
  ObjectReader r(node, "/field");
  r.number("magnitude_tesla", f.magnitude_tesla);
  r.number("theta_deg", f.theta_deg);
  r.number("misalignment_deg", f.misalignment_deg);
  r.finish();
}

void read_optics(const json& node, OpticsSection& o) {
  ObjectReader r(node, "/optics");
  r.number("phi_deg", o.phi_deg);
  r.number("depth_pi", o.depth_pi);
  r.number("depth_sigma", o.depth_sigma);
  r.number("gaussian_fwhm_ghz", o.gaussian_fwhm_ghz);
  r.number("lorentzian_fwhm_ghz", o.lorentzian_fwhm_ghz);
  r.number("background", o.background);
  r.number("grid_min_ghz", o.grid_min_ghz);
  r.number("grid_max_ghz", o.grid_max_ghz);
  r.number("grid_step_ghz", o.grid_step_ghz);
  r.number("noise", o.noise);
  r.finish();
}

std::vector<double> read_number_list(const json& node, const std::string& pointer) {
  if (!node.is_array()) {
    throw config_error(fmt::format("{}: expected an array of numbers", pointer));
  }
  std::vector<double> out;
  for (std::size_t i = 0; i < node.size(); ++i) {
    if (!node[i].is_number()) {
      throw config_error(fmt::format("{}/{}: expected a number", pointer, i));
    }
    out.push_back(node[i].get<double>());
  }
  return out;
}

void read_pump(const json& node, PumpSection& p) {
  ObjectReader r(node, "/pump");
  auto& c = p.config;
  if (const json* v = r.take("branching_ratio")) {
    if (v->is_null()) {
      p.branching_ratio.reset();
    } else if (v->is_number()) {
      p.branching_ratio = v->get<double>();
    } else {
      throw config_error(fmt::format("{}: expected a number or null", r.child("branching_ratio")));
    }
  }
  double lifetime_us = c.excited_lifetime_s * 1e6;
  r.number("excited_lifetime_us", lifetime_us);
  c.excited_lifetime_s = lifetime_us * 1e-6;

  if (const json* v = r.take("spin_relaxation")) {
    const std::string pointer = r.child("spin_relaxation");
    if (!v->is_array()) {
      throw config_error(fmt::format("{}: expected an array", pointer));
    }
    c.spin_relaxation.clear();
    for (std::size_t i = 0; i < v->size(); ++i) {
      ObjectReader item((*v)[i], fmt::format("{}/{}", pointer, i));
      double weight = 1.0;
      double tau_ms = 0.0;
      item.number("weight", weight);
      if (!item.has("tau_ms")) {
        throw config_error(fmt::format("{}/{}/tau_ms: required", pointer, i));
      }
      item.number("tau_ms", tau_ms);
      item.finish();
      c.spin_relaxation.push_back({weight, tau_ms * 1e-3});
    }
  }
  r.number("pump_window_mhz", c.pump_window_mhz);
  r.integer("sweep_count", c.sweep_count);
  double duration_ms = c.pump_duration_s * 1e3;
  r.number("pump_duration_ms", duration_ms);
  c.pump_duration_s = duration_ms * 1e-3;
  r.number("average_pump_rate_per_s", c.average_pump_rate_per_s);
  r.number("homogeneous_linewidth_mhz", c.homogeneous_linewidth_mhz);
  r.number("class_margin_mhz", c.class_margin_mhz);
  r.number("class_spacing_mhz", c.class_spacing_mhz);
  std::string mode = c.mode == PumpMode::sweep_averaged ? "sweep_averaged" : "class_resolved";
  r.text("mode", mode);
  if (mode == "sweep_averaged") {
    c.mode = PumpMode::sweep_averaged;
  } else if (mode == "class_resolved") {
    c.mode = PumpMode::class_resolved;
  } else {
    throw config_error(fmt::format("{}: unknown mode '{}'", r.child("mode"), mode));
  }
  if (const json* v = r.take("delays_ms")) {
    p.delays_ms = read_number_list(*v, r.child("delays_ms"));
  }
  r.finish();
}

}  // namespace

FieldConfig RunConfig::field_config() const {
  return {field.magnitude_tesla, tilted_theta(field.theta_deg, field.misalignment_deg), 0.0};
}

PumpConfig RunConfig::resolved_pump() const {
  PumpConfig out = pump.config;
  if (pump.branching_ratio) {
    out.branching_ratio = *pump.branching_ratio;
  } else {
    const auto ratios = branching_at(ground(), excited(), field_config());
    if (ratios.parallel_infinite) {
      throw config_error("branching ratio at the configured field is infinite; set pump.branching_ratio");
    }
    out.branching_ratio = ratios.r_parallel;
  }
  return out;
}

void RunConfig::validate() const {
  try {
    materials.ground.validate();
    materials.excited.validate();
    field_config().validate();
    if (!(optics.grid_step_ghz > 0.0) || !(optics.grid_max_ghz >= optics.grid_min_ghz)) {
      throw std::invalid_argument("optics grid needs step > 0 and max >= min");
    }
    if (!(optics.noise >= 0.0)) {
      throw std::invalid_argument("optics.noise must be >= 0");
    }
    if (optics.depth_pi < 0.0 || optics.depth_sigma < 0.0 || optics.background < 0.0) {
      throw std::invalid_argument("optics depths and background must be >= 0");
    }
    LineShapeParams{optics.gaussian_fwhm_ghz, optics.lorentzian_fwhm_ghz, 1.0}.validate();
    resolved_pump().validate();
    for (double d : pump.delays_ms) {
      if (!(d >= 0.0)) {
        throw std::invalid_argument(fmt::format("pump.delays_ms entries must be >= 0, got {}", d));
      }
    }
  } catch (const std::logic_error& e) {
    throw config_error(e.what());
  }
}

RunConfig parse_config(const json& doc) {
  RunConfig config;
  ObjectReader root(doc, "");
  if (const json* v = root.take("materials")) {
    read_materials(*v, config.materials);
  }
  if (const json* v = root.take("field")) {
    read_field(*v, config.field);
  }
  if (const json* v = root.take("optics")) {
    read_optics(*v, config.optics);
  }
  if (const json* v = root.take("pump")) {
    read_pump(*v, config.pump);
  }
  if (const json* v = root.take("output")) {
    ObjectReader r(*v, "/output");
    std::string dir = config.output.directory.string();
    r.text("directory", dir);
    r.finish();
    config.output.directory = dir;
  }
  if (const json* v = root.take("seed")) {
    if (!v->is_number_unsigned()) {
      throw config_error("/seed: expected a non-negative integer");
    }
    config.seed = v->get<unsigned long long>();
  }
  root.finish();
  return config;
}

RunConfig load_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) {
    throw config_error(fmt::format("cannot open config file '{}'", path.string()));
  }
  json doc;
  try {
    doc = json::parse(in);
  } catch (const json::parse_error& e) {
    throw config_error(fmt::format("{}: {}", path.string(), e.what()));
  }
  return parse_config(doc);
}

nlohmann::ordered_json to_json(const RunConfig& config) {
  nlohmann::ordered_json out;
  auto g = [](const GTensor& t) {
    return nlohmann::ordered_json{{"g_parallel", t.g_parallel}, {"g_perpendicular", t.g_perpendicular}};
  };
  out["materials"] = {{"ground", g(config.materials.ground)}, {"excited", g(config.materials.excited)}};
  out["field"] = {{"magnitude_tesla", config.field.magnitude_tesla},
                  {"theta_deg", config.field.theta_deg},
                  {"misalignment_deg", config.field.misalignment_deg}};
  const auto& o = config.optics;
  out["optics"] = {{"phi_deg", o.phi_deg},
                   {"depth_pi", o.depth_pi},
                   {"depth_sigma", o.depth_sigma},
                   {"gaussian_fwhm_ghz", o.gaussian_fwhm_ghz},
                   {"lorentzian_fwhm_ghz", o.lorentzian_fwhm_ghz},
                   {"background", o.background},
                   {"grid_min_ghz", o.grid_min_ghz},
                   {"grid_max_ghz", o.grid_max_ghz},
                   {"grid_step_ghz", o.grid_step_ghz},
                   {"noise", o.noise}};

  const PumpConfig p = config.resolved_pump();
  nlohmann::ordered_json relaxation = nlohmann::ordered_json::array();
  for (const auto& c : p.spin_relaxation) {
    relaxation.push_back({{"weight", c.weight}, {"tau_ms", c.tau_s * 1e3}});
  }
  out["pump"] = {{"branching_ratio", p.branching_ratio},
                 {"excited_lifetime_us", p.excited_lifetime_s * 1e6},
                 {"spin_relaxation", relaxation},
                 {"pump_window_mhz", p.pump_window_mhz},
                 {"sweep_count", p.sweep_count},
                 {"pump_duration_ms", p.pump_duration_s * 1e3},
                 {"average_pump_rate_per_s", p.average_pump_rate_per_s},
                 {"homogeneous_linewidth_mhz", p.homogeneous_linewidth_mhz},
                 {"class_margin_mhz", p.class_margin_mhz},
                 {"class_spacing_mhz", p.class_spacing_mhz},
                 {"mode", p.mode == PumpMode::sweep_averaged ? "sweep_averaged" : "class_resolved"},
                 {"delays_ms", config.pump.delays_ms}};
  out["output"] = {{"directory", config.output.directory.generic_string()}};
  if (config.seed) {
    out["seed"] = *config.seed;
  }
  return out;
}

}  // namespace kramers::cli
