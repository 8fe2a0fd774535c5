#include "kramers/cli/commands.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdlib>
#include <map>
#include <optional>
#include <ostream>
#include <random>

#include <CLI11.hpp>
#include <fmt/core.h>
#include <fmt/ostream.h>

#include "kramers/branching.hpp"
#include "kramers/cli/config.hpp"
#include "kramers/fit_models.hpp"
#include "kramers/pump.hpp"
#include "kramers/spectrum_io.hpp"

namespace kramers::cli {

namespace {

namespace fs = std::filesystem;
using nlohmann::ordered_json;

struct GlobalOptions {
  std::string config_path;
  std::string out_dir;
  std::string seed;
};

struct Context {
  RunConfig config;
  fs::path out_dir;
  std::ostream& out;
};

const char* env_or_null(const char* name) {
  const char* v = std::getenv(name);
  return v && *v ? v : nullptr;
}

unsigned long long parse_seed(const std::string& text) {
  unsigned long long value = 0;
  const auto* end = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(text.data(), end, value);
  if (ec != std::errc() || ptr != end) {
    throw config_error(fmt::format("seed must be a non-negative integer, got '{}'", text));
  }
  return value;
}

Context make_context(const GlobalOptions& g, std::ostream& out) {
  std::string config_path = g.config_path;
  if (config_path.empty()) {
    if (const char* v = env_or_null("KRAMERS_CONFIG")) {
      config_path = v;
    }
  }
  RunConfig config = config_path.empty() ? RunConfig{} : load_config(config_path);

  if (!g.out_dir.empty()) {
    config.output.directory = g.out_dir;
  } else if (const char* v = env_or_null("KRAMERS_OUT")) {
    config.output.directory = v;
  }
  if (!g.seed.empty()) {
    config.seed = parse_seed(g.seed);
  } else if (const char* v = env_or_null("KRAMERS_SEED")) {
    config.seed = parse_seed(v);
  }
  fs::path dir = config.output.directory;
  return {std::move(config), std::move(dir), out};
}

void prepare_output(const Context& ctx) {
  ctx.config.validate();
  std::error_code ec;
  fs::create_directories(ctx.out_dir, ec);
  if (ec) {
    throw io_error(fmt::format("cannot create output directory '{}': {}", ctx.out_dir.string(), ec.message()));
  }
  write_json(ctx.out_dir / "resolved_config.json", to_json(ctx.config));
}

TransitionTable table_for(const RunConfig& config, const FieldConfig& field) {
  const auto g = doublet_eigensystem(config.ground(), field);
  const auto e = doublet_eigensystem(config.excited(), field);
  return transition_table(lambda_coefficients(g, e), g.splitting_ghz(), e.splitting_ghz());
}

ordered_json value_error(double value, double error) {
  return {{"value", value}, {"error", error}};
}

ordered_json fit_to_json(const std::string& model, const FitResult& fit) {
  ordered_json params = ordered_json::object();
  for (std::size_t i = 0; i < fit.names.size(); ++i) {
    params[fit.names[i]] = value_error(fit.parameters[i], fit.standard_errors[i]);
  }
  ordered_json matrix = ordered_json::array();
  for (Eigen::Index i = 0; i < fit.covariance.rows(); ++i) {
    ordered_json row = ordered_json::array();
    for (Eigen::Index j = 0; j < fit.covariance.cols(); ++j) {
      row.push_back(fit.covariance(i, j));
    }
    matrix.push_back(row);
  }
  ordered_json derived = ordered_json::object();
  for (const auto& d : fit.derived) {
    derived[d.name] = value_error(d.value, d.error);
  }
  return {{"model", model},
          {"parameters", params},
          {"covariance", {{"names", fit.names}, {"matrix", matrix}}},
          {"derived", derived},
          {"diagnostics",
           {{"converged", fit.converged},
            {"iterations", fit.iterations},
            {"residual_norm", fit.residual_norm},
            {"initial_residual_norm", fit.initial_residual_norm},
            {"degrees_of_freedom", fit.degrees_of_freedom},
            {"rank_deficient", fit.rank_deficient},
            {"flags", fit.flags},
            {"message", fit.message}}}};
}

// ---- branching

struct BranchingOptions {
  double theta_min = 0.0;
  double theta_max = 90.0;
  double step = 1.0;
  bool optimize = false;
};

void cmd_branching(const Context& ctx, const BranchingOptions& o) {
  if (!(o.step > 0.0)) {
    throw config_error(fmt::format("--step must be > 0, got {}", o.step));
  }
  if (!(o.theta_min >= 0.0 && o.theta_max <= 90.0 && o.theta_min <= o.theta_max)) {
    throw config_error(fmt::format("theta range [{}, {}] must lie within [0, 90] with min <= max",
                                   o.theta_min, o.theta_max));
  }
  prepare_output(ctx);
  const auto& c = ctx.config;

  std::vector<double> grid;
  const auto n = static_cast<long long>(std::floor((o.theta_max - o.theta_min) / o.step + 1e-9));
  for (long long i = 0; i <= n; ++i) {
    grid.push_back(o.theta_min + static_cast<double>(i) * o.step);
  }
  const auto points = branching_scan(c.ground(), c.excited(), c.field.magnitude_tesla, grid,
                                     c.field.misalignment_deg);

  CsvTable table{{"theta_deg", "r_parallel", "r_perpendicular", "is_optimum"}, {}};
  for (const auto& p : points) {
    table.rows.push_back({p.theta_deg, p.ratios.r_parallel, p.ratios.r_perpendicular, 0.0});
  }
  if (o.optimize) {
    if (c.field.misalignment_deg != 0.0) {
      throw config_error("--optimize requires field.misalignment_deg = 0");
    }
    const auto best = optimal_angle(c.ground(), c.excited(), c.field.magnitude_tesla, std::min(o.step, 1.0));
    const auto at = branching_at(c.ground(), c.excited(), {c.field.magnitude_tesla, best.theta_deg, 0.0});
    table.rows.push_back({best.theta_deg, best.r_parallel, at.r_perpendicular, 1.0});
    fmt::print(ctx.out, "optimum theta_deg={:.3f} r_parallel={:.5f}\n", best.theta_deg, best.r_parallel);
  }
  write_csv(ctx.out_dir / "branching.csv", table);
  fmt::print(ctx.out, "wrote {} rows to {}\n", table.rows.size(), (ctx.out_dir / "branching.csv").string());
}

// ---- spectrum

struct SpectrumOptions {
  std::optional<double> phi;
  std::optional<double> noise;
  bool phi_scan = false;
  double phi_step = 5.0;
};

void cmd_spectrum(Context& ctx, const SpectrumOptions& o) {
  auto& c = ctx.config;
  if (o.phi) {
    c.optics.phi_deg = *o.phi;
  }
  if (o.noise) {
    c.optics.noise = *o.noise;
  }
  if (c.optics.noise > 0.0 && !c.seed) {
    throw config_error("a noisy spectrum needs an explicit seed (--seed or KRAMERS_SEED)");
  }
  if (o.phi_scan && !(o.phi_step > 0.0)) {
    throw config_error("--phi-step must be > 0");
  }
  prepare_output(ctx);

  const FieldConfig field = c.field_config();
  const auto table = table_for(c, field);
  const LineShapeParams shape{c.optics.gaussian_fwhm_ghz, c.optics.lorentzian_fwhm_ghz, 1.0};
  const auto grid = frequency_grid(c.optics.grid_min_ghz, c.optics.grid_max_ghz, c.optics.grid_step_ghz);
  auto spectrum = synthesize_spectrum(table, shape, c.optics.depth_pi, c.optics.depth_sigma, c.optics.phi_deg,
                                      grid, {field.magnitude_tesla, field.theta_deg, c.optics.phi_deg},
                                      c.optics.background);
  if (c.optics.noise > 0.0) {
    const double sigma = c.optics.noise * *std::max_element(spectrum.depth.begin(), spectrum.depth.end());
    std::mt19937_64 rng(*c.seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& d : spectrum.depth) {
      d += noise(rng);
    }
  }
  write_spectrum(ctx.out_dir / "spectrum.csv", spectrum);
  fmt::print(ctx.out, "wrote {} points to {}\n", spectrum.depth.size(),
             (ctx.out_dir / "spectrum.csv").string());

  if (o.phi_scan) {
    const auto depths = line_depths(table, c.optics.depth_pi, c.optics.depth_sigma);
    const auto& a = depths[0];
    const auto& b = depths[1];
    CsvTable scan{{"phi_deg", "d_ad", "d_bc"}, {}};
    const auto n = static_cast<long long>(std::floor(180.0 / o.phi_step + 1e-9));
    for (long long i = 0; i <= n; ++i) {
      const double phi = static_cast<double>(i) * o.phi_step;
      scan.rows.push_back({phi, polarization_depth(a.d_parallel, a.d_perpendicular, phi),
                           polarization_depth(b.d_parallel, b.d_perpendicular, phi)});
    }
    write_csv(ctx.out_dir / "phi_scan.csv", scan);
    fmt::print(ctx.out, "wrote {} angles to {}\n", scan.rows.size(), (ctx.out_dir / "phi_scan.csv").string());
  }
}

// ---- fit

struct FitOptions {
  std::string model = "voigt4";
  std::string data;
  int components = 2;
  bool relative_noise = false;
};

ordered_json fit_voigt4(const Context& ctx, const fs::path& data) {
  const auto spectrum = read_spectrum(data);
  std::optional<TransitionTable> fallback;
  if (spectrum.metadata.magnitude_tesla > 0.0) {
    fallback = table_for(ctx.config, {spectrum.metadata.magnitude_tesla, spectrum.metadata.theta_deg, 0.0});
  } else {
    fallback = table_for(ctx.config, ctx.config.field_config());
  }
  const auto fit = fit_four_voigt(spectrum, four_voigt_initial_guess(spectrum, fallback));
  const auto& r = fit.derived_quantity("r");
  fmt::print(ctx.out, "R = {:.4f} +- {:.4f}\n", r.value, r.error);
  return fit_to_json("voigt4", fit);
}

DerivedQuantity independent_ratio(const FitResult& num, const FitResult& den, const std::string& param,
                                  std::string name) {
  const double a = num.value(param);
  const double b = den.value(param);
  const double value = a / b;
  const double rel = std::hypot(num.error(param) / a, den.error(param) / b);
  return {std::move(name), value, std::abs(value) * rel};
}

ordered_json fit_polarization(const Context& ctx, const fs::path& data, bool relative_noise) {
  const CsvTable table = read_csv(data);
  if (!table.has_column("phi_deg")) {
    throw io_error(fmt::format("{}: missing column phi_deg", data.string()));
  }
  const auto angles = table.column("phi_deg");
  ordered_json fits = ordered_json::object();
  std::map<std::string, FitResult> results;
  for (const auto& col : table.columns) {
    if (col == "phi_deg") {
      continue;
    }
    const auto depths = table.column(col);
    std::vector<double> weights;
    if (relative_noise) {
      for (double d : depths) {
        if (!(d > 0.0)) {
          throw io_error(fmt::format("{}: --relative-noise needs positive depths in {}", data.string(), col));
        }
        weights.push_back(1.0 / (d * d));
      }
    }
    const auto fit = fit_polarization_model(angles, depths, weights);
    fmt::print(ctx.out, "{}: d_parallel = {:.4f} +- {:.4f}, d_perpendicular = {:.4f} +- {:.4f}\n", col,
               fit.value("d_parallel"), fit.error("d_parallel"), fit.value("d_perpendicular"),
               fit.error("d_perpendicular"));
    fits[col] = fit_to_json("polarization", fit);
    results.emplace(col, fit);
  }
  if (results.empty()) {
    throw io_error(fmt::format("{}: no depth columns", data.string()));
  }
  ordered_json out{{"model", "polarization"}, {"fits", fits}};
  if (results.count("d_ad") && results.count("d_bc")) {
    const auto& ad = results.at("d_ad");
    const auto& bc = results.at("d_bc");
    const auto r_par = independent_ratio(ad, bc, "d_parallel", "r_parallel");
    const auto r_perp = independent_ratio(ad, bc, "d_perpendicular", "r_perpendicular");
    const double inv = 1.0 / r_perp.value;
    const double inv_err = r_perp.error / (r_perp.value * r_perp.value);
    out["derived"] = {{"r_parallel", value_error(r_par.value, r_par.error)},
                      {"r_perpendicular", value_error(r_perp.value, r_perp.error)},
                      {"inverse_r_perpendicular", value_error(inv, inv_err)}};
    fmt::print(ctx.out, "R_parallel = {:.4f} +- {:.4f}, 1/R_perpendicular = {:.4f} +- {:.4f}\n", r_par.value,
               r_par.error, inv, inv_err);
  }
  return out;
}

ordered_json fit_recovery(const Context& ctx, const fs::path& data, int components) {
  const CsvTable table = read_csv(data);
  for (const char* col : {"delay_ms", "residual_fraction"}) {
    if (!table.has_column(col)) {
      throw io_error(fmt::format("{}: missing column {}", data.string(), col));
    }
  }
  const auto fit = fit_exponential_recovery(table.column("delay_ms"), table.column("residual_fraction"), components);
  const auto& zero = fit.derived_quantity("zero_delay");
  fmt::print(ctx.out, "zero-delay fraction = {:.4f} +- {:.4f}\n", zero.value, zero.error);
  for (int k = 1; k <= components; ++k) {
    const auto name = fmt::format("tau_{}_ms", k);
    fmt::print(ctx.out, "{} = {:.3f} +- {:.3f}\n", name, fit.value(name), fit.error(name));
  }
  return fit_to_json("recovery", fit);
}

void cmd_fit(const Context& ctx, const FitOptions& o) {
  if (o.data.empty()) {
    throw config_error("fit needs --data");
  }
  if (!fs::exists(o.data)) {
    throw io_error(fmt::format("data file '{}' not found", o.data));
  }
  if (o.components != 1 && o.components != 2) {
    throw config_error("--components must be 1 or 2");
  }
  prepare_output(ctx);
  ordered_json doc;
  if (o.model == "voigt4") {
    doc = fit_voigt4(ctx, o.data);
  } else if (o.model == "polarization") {
    doc = fit_polarization(ctx, o.data, o.relative_noise);
  } else {
    doc = fit_recovery(ctx, o.data, o.components);
  }
  const auto path = ctx.out_dir / fmt::format("fit_{}.json", o.model);
  write_json(path, doc);
  fmt::print(ctx.out, "wrote {}\n", path.string());
}

// ---- pump

struct PumpOptions {
  std::optional<std::string> delays;
};

std::vector<double> parse_delays(const std::string& text) {
  std::vector<double> out;
  std::size_t start = 0;
  while (start <= text.size()) {
    const auto end = std::min(text.find(',', start), text.size());
    const std::string item = text.substr(start, end - start);
    double v = 0.0;
    const auto [ptr, ec] = std::from_chars(item.data(), item.data() + item.size(), v);
    if (item.empty() || ec != std::errc() || ptr != item.data() + item.size() || !(v >= 0.0)) {
      throw config_error(fmt::format("--delays: '{}' is not a delay in ms", item));
    }
    out.push_back(v);
    start = end + 1;
  }
  return out;
}

ordered_json window_populations(const PumpConfig& config, const PumpState& state) {
  Populations sum{0.0, 0.0, 0.0, 0.0};
  std::size_t count = 0;
  for (std::size_t i = 0; i < state.class_offsets_mhz.size(); ++i) {
    if (config.in_window(state.class_offsets_mhz[i])) {
      const auto& p = state.populations[i];
      sum = {sum.g1 + p.g1, sum.g2 + p.g2, sum.excited + p.excited, sum.trap + p.trap};
      ++count;
    }
  }
  const double n = static_cast<double>(std::max<std::size_t>(count, 1));
  return {{"g1", sum.g1 / n}, {"g2", sum.g2 / n}, {"excited", sum.excited / n}, {"trap", sum.trap / n}};
}

void cmd_pump(Context& ctx, const PumpOptions& o) {
  auto& c = ctx.config;
  if (o.delays) {
    c.pump.delays_ms = parse_delays(*o.delays);
  }
  prepare_output(ctx);
  const PumpConfig config = c.resolved_pump();

  std::vector<double> delays_s;
  for (double d : c.pump.delays_ms) {
    delays_s.push_back(d * 1e-3);
  }
  const auto result = simulate_pump(config, delays_s);

  CsvTable residual{{"delay_ms", "residual_fraction"}, {}};
  for (std::size_t i = 0; i < result.recovery.size(); ++i) {
    residual.rows.push_back({c.pump.delays_ms[i], result.recovery[i].residual});
  }
  write_csv(ctx.out_dir / "pump_residual.csv", residual);

  CsvTable classes{{"offset_mhz", "n_g1", "n_g2", "n_trap"}, {}};
  const auto& state = result.final_state;
  for (std::size_t i = 0; i < state.class_offsets_mhz.size(); ++i) {
    const auto& p = state.populations[i];
    classes.rows.push_back({state.class_offsets_mhz[i], p.g1, p.g2, p.trap});
  }
  write_csv(ctx.out_dir / "pump_classes.csv", classes);

  CsvTable hole{{"offset_mhz", "depth", "pre_pump_depth", "partner_depth"}, {}};
  const auto& h = result.hole;
  for (std::size_t i = 0; i < h.pumped_line.depth.size(); ++i) {
    hole.rows.push_back({h.pumped_line.frequency_ghz[i] * 1e3, h.pumped_line.depth[i], h.pre_pump_depth[i],
                         h.partner_line.depth[i]});
  }
  write_csv(ctx.out_dir / "pump_hole.csv", hole);

  double longest_tau = 0.0;
  for (const auto& r : config.spin_relaxation) {
    longest_tau = std::max(longest_tau, r.tau_s);
  }
  const double relaxed_delay = longest_tau > 0.0 ? 20.0 * longest_tau : 1.0;

  ordered_json summary{{"branching_ratio", config.branching_ratio},
                       {"zero_delay_residual", result.zero_delay_residual},
                       {"spin_polarization_percent", 100.0 * result.spin_polarization},
                       {"transmission_window_mhz", transmission_window_width_mhz(result.hole)},
                       {"max_population_drift", result.max_population_drift}};

  const auto points = residual.rows.size();
  const int components = points >= 5 ? 2 : (points >= 3 ? 1 : 0);
  if (components > 0) {
    try {
      const auto fit = fit_exponential_recovery(residual.column("delay_ms"), residual.column("residual_fraction"),
                                                components);
      const auto& zero = fit.derived_quantity("zero_delay");
      std::vector<double> taus;
      for (int k = 1; k <= components; ++k) {
        taus.push_back(fit.value(fmt::format("tau_{}_ms", k)));
      }
      summary["extrapolation"] = {{"components", components},
                                  {"zero_delay_fraction", value_error(zero.value, zero.error)},
                                  {"tau_ms", taus},
                                  {"flags", fit.flags}};
    } catch (const fit_error& e) {
      summary["extrapolation"] = {{"error", e.what()}};
    }
  }
  summary["relaxed"] = {{"delay_ms", relaxed_delay * 1e3},
                        {"populations", window_populations(config, relax(result, relaxed_delay))}};
  write_json(ctx.out_dir / "pump_summary.json", summary);

  fmt::print(ctx.out, "zero-delay residual {:.4f}, spin polarization {:.2f} %\n", result.zero_delay_residual,
             100.0 * result.spin_polarization);
  fmt::print(ctx.out, "wrote pump outputs to {}\n", ctx.out_dir.string());
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Zeeman-tunable Lambda systems in Kramers doublets"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalOptions global;
  app.add_option("--config", global.config_path, "JSON run configuration");
  app.add_option("--out", global.out_dir, "output directory");
  app.add_option("--seed", global.seed, "seed for stochastic outputs");

  BranchingOptions branching;
  auto* b = app.add_subcommand("branching", "branching ratios versus field angle");
  b->add_option("--theta-min", branching.theta_min, "first angle in degrees");
  b->add_option("--theta-max", branching.theta_max, "last angle in degrees");
  b->add_option("--step", branching.step, "angle step in degrees");
  b->add_flag("--optimize", branching.optimize, "append the angle of maximal r_parallel");

  SpectrumOptions spectrum;
  auto* s = app.add_subcommand("spectrum", "synthesize the four-line absorption spectrum");
  s->add_option("--phi", spectrum.phi, "polarization angle in degrees");
  s->add_option("--noise", spectrum.noise, "noise sigma as a fraction of the maximum depth");
  s->add_flag("--phi-scan", spectrum.phi_scan, "also write line depths versus polarization angle");
  s->add_option("--phi-step", spectrum.phi_step, "angle step of the scan in degrees");

  FitOptions fit;
  auto* f = app.add_subcommand("fit", "fit a model to data");
  f->add_option("--model", fit.model, "voigt4, polarization or recovery")
      ->check(CLI::IsMember({"voigt4", "polarization", "recovery"}));
  f->add_option("--data", fit.data, "input CSV");
  f->add_option("--components", fit.components, "exponentials in the recovery model");
  f->add_flag("--relative-noise", fit.relative_noise, "polarization: weight points by 1/depth^2");

  PumpOptions pump;
  auto* p = app.add_subcommand("pump", "optical pumping simulation");
  p->add_option("--delays", pump.delays, "comma-separated delays in ms");

  std::vector<std::string> reversed(args.rbegin(), args.rend());
  try {
    app.parse(reversed);
  } catch (const CLI::ParseError& e) {
    return app.exit(e, out, err) == 0 ? exit_success : exit_usage_error;
  }

  try {
    Context ctx = make_context(global, out);
    if (b->parsed()) {
      cmd_branching(ctx, branching);
    } else if (s->parsed()) {
      cmd_spectrum(ctx, spectrum);
    } else if (f->parsed()) {
      cmd_fit(ctx, fit);
    } else {
      cmd_pump(ctx, pump);
    }
  } catch (const config_error& e) {
    fmt::print(err, "configuration error: {}\n", e.what());
    return exit_usage_error;
  } catch (const io_error& e) {
    fmt::print(err, "input/output error: {}\n", e.what());
    return exit_usage_error;
  } catch (const rank_deficiency_error& e) {
    fmt::print(err, "data error: {}\n", e.what());
    return exit_usage_error;
  } catch (const std::logic_error& e) {
    fmt::print(err, "invalid input: {}\n", e.what());
    return exit_usage_error;
  } catch (const std::exception& e) {
    fmt::print(err, "numerical failure: {}\n", e.what());
    return exit_numerical_failure;
  }
  return exit_success;
}

}  // namespace kramers::cli
