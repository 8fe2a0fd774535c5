#ifndef KRAMERS_PUMP_HPP
#define KRAMERS_PUMP_HPP

#include <stdexcept>
#include <vector>

#include <Eigen/Core>

#include "kramers/spectrum.hpp"

namespace kramers {

struct simulation_error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// One spin-relaxation channel. The first component relaxes the two spin
/// levels toward each other; the second drains a trap reservoir equally into
/// both. weight is the share of spin-flip decays feeding the channel.
struct RelaxationComponent {
  double weight = 1.0;
  double tau_s = 18e-3;
};

enum class PumpMode {
  // constant rate average_pump_rate_per_s on every class inside the window
  sweep_averaged,
  // time-dependent rate from a Lorentzian laser line following sweep_schedule
  class_resolved,
};

struct PumpConfig {
  double branching_ratio = 0.27;
  double excited_lifetime_s = 100e-6;
  // empty disables spin relaxation
  std::vector<RelaxationComponent> spin_relaxation{{0.5, 18e-3}, {0.5, 320e-3}};
  double pump_window_mhz = 20.0;
  int sweep_count = 1000;
  double pump_duration_s = 0.1;
  // calibrated once against the 5 % residual of the 0.27 branching scenario
  double average_pump_rate_per_s = 2.0e3;
  double homogeneous_linewidth_mhz = 0.1;
  double class_margin_mhz = 10.0;
  double class_spacing_mhz = 0.05;
  PumpMode mode = PumpMode::sweep_averaged;

  void validate() const;
  /// Symmetric class offsets covering the window plus margins; includes 0.
  std::vector<double> class_grid_mhz() const;
  bool in_window(double offset_mhz) const;
};

struct Populations {
  double g1 = 0.5;  // pumped spin level
  double g2 = 0.5;  // other spin level
  double excited = 0.0;
  double trap = 0.0;

  double sum() const { return g1 + g2 + excited + trap; }
  Eigen::Vector4d vector() const { return {g1, g2, excited, trap}; }
  static Populations from(const Eigen::Vector4d& v) { return {v[0], v[1], v[2], v[3]}; }
};

struct PumpState {
  std::vector<double> class_offsets_mhz;
  std::vector<Populations> populations;
};

struct RecoveryPoint {
  double delay_s = 0.0;
  double residual = 1.0;
};

/// Pumped-line hole and the partner line (same excited level, other spin
/// level, trap included) with its anti-hole; frequencies are offsets from
/// each line's center.
struct HoleSpectrum {
  AbsorptionSpectrum pumped_line;
  AbsorptionSpectrum partner_line;
  std::vector<double> pre_pump_depth;
};

struct PumpResult {
  PumpConfig config;
  PumpState final_state;
  double max_population_drift = 0.0;
  double zero_delay_residual = 1.0;
  // 1 - (window-averaged n_g1), the population fraction outside the pumped level
  double spin_polarization = 0.5;
  std::vector<RecoveryPoint> recovery;
  HoleSpectrum hole;
};

/// Generator of the linear rate equations for state (g1, g2, excited, trap);
/// column sums vanish.
Eigen::Matrix4d rate_matrix(const PumpConfig& config, double pump_rate_per_s);

/// Laser offset (MHz, relative to the window center) of the triangle sweep:
/// lower window edge at t = 0, upper edge half a sweep later.
double sweep_schedule(const PumpConfig& config, double t_s);

/// Pump rate seen by a class in class_resolved mode, time-averaged over one
/// sweep interval [t0, t1] inside a single half-sweep.
double resolved_pump_rate(const PumpConfig& config, double class_offset_mhz, double t0_s, double t1_s);

/// Runs the pump sequence; fills the recovery curve at the given delays and the
/// zero-delay hole spectrum for a probe with the 2 GHz inhomogeneous width and
/// the configured homogeneous linewidth.
/// Throws simulation_error on step underflow or population drift above 1e-6.
PumpResult simulate_pump(const PumpConfig& config, const std::vector<double>& delays_s = {});

/// State after the pump has been off for delay_s.
PumpState relax(const PumpResult& result, double delay_s);

/// Window-averaged n_g1 after delay_s, relative to the initial 0.5.
double residual_fraction(const PumpResult& result, double delay_s);

/// Probe absorption after the pump: per-class occupancy deficits convolved
/// with the probe's homogeneous Lorentzian, on top of its Gaussian profile
/// of peak depth probe.peak_depth.
HoleSpectrum hole_spectrum(const PumpResult& result, const LineShapeParams& probe,
                           double delay_s = 0.0);

/// Full width at half depth of the transmission window in the pumped line.
double transmission_window_width_mhz(const HoleSpectrum& hole);

}  // namespace kramers

#endif
