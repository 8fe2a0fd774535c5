#ifndef KRAMERS_CLI_CONFIG_HPP
#define KRAMERS_CLI_CONFIG_HPP

#include <filesystem>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "kramers/pump.hpp"
#include "kramers/zeeman.hpp"

namespace kramers::cli {

/// Invalid or inconsistent configuration; maps to exit code 2.
struct config_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct MaterialsSection {
  GTensor ground = nd_yvo4_ground_g;
  GTensor excited = nd_yvo4_excited_g;
};

struct FieldSection {
  double magnitude_tesla = 0.31;
  double theta_deg = 0.0;
  double misalignment_deg = 0.0;
};

struct OpticsSection {
  double phi_deg = 0.0;
  // summed over the four lines; each line gets its strength times this
  double depth_pi = 3.33;
  double depth_sigma = 0.117;
  double gaussian_fwhm_ghz = 2.0;
  double lorentzian_fwhm_ghz = 0.0;
  double background = 0.0;
  double grid_min_ghz = -10.0;
  double grid_max_ghz = 10.0;
  double grid_step_ghz = 0.02;
  // standard deviation as a fraction of the maximum depth
  double noise = 0.0;
};

struct PumpSection {
  PumpConfig config;
  // unset: use r_parallel at the configured field
  std::optional<double> branching_ratio = 0.27;
  std::vector<double> delays_ms{1.3, 5, 10, 20, 50, 100, 200, 500, 1000, 2000};
};

struct OutputSection {
  std::filesystem::path directory = "kramers_out";
};

struct RunConfig {
  MaterialsSection materials;
  FieldSection field;
  OpticsSection optics;
  PumpSection pump;
  OutputSection output;
  std::optional<unsigned long long> seed;

  KramersDoublet ground() const { return {materials.ground, BasisMapping::direct}; }
  KramersDoublet excited() const { return {materials.excited, BasisMapping::swapped}; }
  /// Field with the misalignment tilt applied to theta.
  FieldConfig field_config() const;
  /// Pump config with the branching ratio resolved against the field if unset.
  PumpConfig resolved_pump() const;

  void validate() const;
};

/// Parses a config document; every section and key is optional. Unknown keys
/// and wrong types raise config_error naming the JSON pointer of the offender.
RunConfig parse_config(const nlohmann::json& doc);
RunConfig load_config(const std::filesystem::path& path);

nlohmann::ordered_json to_json(const RunConfig& config);

}  // namespace kramers::cli

#endif
