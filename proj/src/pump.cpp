#include "kramers/pump.hpp"

#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>

#include <fmt/core.h>
#include <unsupported/Eigen/MatrixFunctions>

namespace kramers {

namespace {

constexpr double window_tolerance_mhz = 1e-9;
constexpr double drift_limit = 1e-6;
constexpr double negativity_limit = -1e-12;
constexpr double min_step_s = 1e-15;

enum StateIndex { g1 = 0, g2 = 1, excited = 2, trap = 3 };

void add_rate(Eigen::Matrix4d& a, int from, int to, double rate) {
  a(to, from) += rate;
  a(from, from) -= rate;
}

// Area-normalized Lorentzian cumulative distribution.
double lorentz_cdf(double x, double fwhm) {
  return 0.5 + std::atan(2.0 * x / fwhm) / std::numbers::pi;
}

double lorentz_density(double x, double fwhm) {
  const double hw = 0.5 * fwhm;
  return hw / (std::numbers::pi * (x * x + hw * hw));
}

Eigen::Matrix4d matrix_power(Eigen::Matrix4d base, long long exponent) {
  Eigen::Matrix4d out = Eigen::Matrix4d::Identity();
  while (exponent > 0) {
    if (exponent & 1) {
      out = base * out;
    }
    base = base * base;
    exponent >>= 1;
  }
  return out;
}

struct DriftTracker {
  double max_drift = 0.0;

  void check(const Eigen::Vector4d& x, double offset_mhz) {
    const double drift = std::abs(x.sum() - 1.0);
    max_drift = std::max(max_drift, drift);
    if (drift > drift_limit) {
      throw simulation_error(
          fmt::format("population sum drifted by {} in class {} MHz", drift, offset_mhz));
    }
    if (x.minCoeff() < negativity_limit) {
      throw simulation_error(
          fmt::format("negative population {} in class {} MHz", x.minCoeff(), offset_mhz));
    }
  }
};

// One full sweep period for a class in class_resolved mode.
Eigen::Matrix4d resolved_period_propagator(const PumpConfig& config, double offset_mhz) {
  const double period = config.pump_duration_s / config.sweep_count;
  const double half = 0.5 * period;
  const double speed = config.pump_window_mhz / half;
  const double gamma = config.homogeneous_linewidth_mhz;
  const double max_step = half / 50.0;

  Eigen::Matrix4d prop = Eigen::Matrix4d::Identity();
  for (int leg = 0; leg < 2; ++leg) {
    const double leg_start = leg * half;
    const double leg_end = leg_start + half;
    double t = leg_start;
    while (t < leg_end) {
      const double distance = std::abs(offset_mhz - sweep_schedule(config, t));
      double dt = std::min(0.1 * (distance + 0.5 * gamma) / speed, max_step);
      if (dt < min_step_s) {
        throw simulation_error(fmt::format("step size underflow ({} s) at t = {} s", dt, t));
      }
      const double t_next = std::min(t + dt, leg_end);
      const double rate = resolved_pump_rate(config, offset_mhz, t, t_next);
      prop = (rate_matrix(config, rate) * (t_next - t)).exp() * prop;
      t = t_next;
    }
  }
  return prop;
}

double window_average_g1(const PumpConfig& config, const PumpState& state) {
  double sum = 0.0;
  std::size_t count = 0;
  for (std::size_t i = 0; i < state.class_offsets_mhz.size(); ++i) {
    if (config.in_window(state.class_offsets_mhz[i])) {
      sum += state.populations[i].g1;
      ++count;
    }
  }
  return count ? sum / static_cast<double>(count) : 0.5;
}

AbsorptionSpectrum convolved_line(const PumpState& state, const std::vector<double>& occupancy,
                                  const LineShapeParams& probe, double spacing_mhz,
                                  std::vector<double>* pre_pump) {
  const double gamma_mhz = probe.lorentzian_fwhm_ghz * 1e3;
  const double sigma_mhz =
      probe.gaussian_fwhm_ghz * 1e3 / (2.0 * std::sqrt(2.0 * std::numbers::ln2));
  AbsorptionSpectrum out;
  const auto& offsets = state.class_offsets_mhz;
  for (std::size_t i = 0; i < offsets.size(); ++i) {
    const double nu = offsets[i];
    const double envelope =
        sigma_mhz > 0.0 ? probe.peak_depth * std::exp(-0.5 * (nu / sigma_mhz) * (nu / sigma_mhz))
                        : probe.peak_depth;
    double factor = 1.0;
    if (gamma_mhz > 0.0) {
      // classes off the grid are unpumped and contribute occupancy 1
      for (std::size_t k = 0; k < offsets.size(); ++k) {
        factor += (occupancy[k] - 1.0) * lorentz_density(nu - offsets[k], gamma_mhz) * spacing_mhz;
      }
    } else {
      factor = occupancy[i];
    }
    out.frequency_ghz.push_back(nu * 1e-3);
    out.depth.push_back(std::max(envelope * factor, 0.0));
    if (pre_pump) {
      pre_pump->push_back(envelope);
    }
  }
  return out;
}

}  // namespace

void PumpConfig::validate() const {
  auto positive = [](double v, const char* name) {
    if (!(v > 0.0) || !std::isfinite(v)) {
      throw std::invalid_argument(fmt::format("{} must be finite and > 0, got {}", name, v));
    }
  };
  if (!(branching_ratio >= 0.0) || !std::isfinite(branching_ratio)) {
    throw std::invalid_argument(fmt::format("branching ratio must be >= 0, got {}", branching_ratio));
  }
  positive(excited_lifetime_s, "excited_lifetime_s");
  positive(pump_window_mhz, "pump_window_mhz");
  positive(homogeneous_linewidth_mhz, "homogeneous_linewidth_mhz");
  positive(class_spacing_mhz, "class_spacing_mhz");
  if (!(average_pump_rate_per_s >= 0.0) || !std::isfinite(average_pump_rate_per_s)) {
    throw std::invalid_argument("average_pump_rate_per_s must be >= 0");
  }
  if (!(pump_duration_s >= 0.0) || !std::isfinite(pump_duration_s)) {
    throw std::invalid_argument("pump_duration_s must be >= 0");
  }
  if (!(class_margin_mhz >= 0.0)) {
    throw std::invalid_argument("class_margin_mhz must be >= 0");
  }
  if (sweep_count < 1) {
    throw std::invalid_argument("sweep_count must be >= 1");
  }
  if (spin_relaxation.size() > 2) {
    throw std::invalid_argument("at most two spin relaxation components are supported");
  }
  double total = 0.0;
  for (const auto& c : spin_relaxation) {
    positive(c.tau_s, "spin relaxation tau");
    if (!(c.weight >= 0.0)) {
      throw std::invalid_argument("spin relaxation weights must be >= 0");
    }
    total += c.weight;
  }
  if (!spin_relaxation.empty() && std::abs(total - 1.0) > 1e-9) {
    throw std::invalid_argument(fmt::format("spin relaxation weights sum to {}, expected 1", total));
  }
}

std::vector<double> PumpConfig::class_grid_mhz() const {
  const double half_span = 0.5 * pump_window_mhz + class_margin_mhz;
  const auto n = static_cast<long long>(std::ceil(half_span / class_spacing_mhz - 1e-9));
  std::vector<double> grid;
  grid.reserve(static_cast<std::size_t>(2 * n + 1));
  for (long long i = -n; i <= n; ++i) {
    grid.push_back(static_cast<double>(i) * class_spacing_mhz);
  }
  return grid;
}

bool PumpConfig::in_window(double offset_mhz) const {
  return std::abs(offset_mhz) <= 0.5 * pump_window_mhz + window_tolerance_mhz;
}

Eigen::Matrix4d rate_matrix(const PumpConfig& config, double pump_rate_per_s) {
  Eigen::Matrix4d a = Eigen::Matrix4d::Zero();
  const double decay = 1.0 / config.excited_lifetime_s;
  const double r = config.branching_ratio;

  add_rate(a, g1, excited, pump_rate_per_s);
  add_rate(a, excited, g1, pump_rate_per_s);
  add_rate(a, excited, g1, decay / (1.0 + r));

  const double flip = decay * r / (1.0 + r);
  const auto& relax = config.spin_relaxation;
  const double to_trap = relax.size() > 1 ? relax[1].weight : 0.0;
  add_rate(a, excited, g2, flip * (1.0 - to_trap));
  add_rate(a, excited, trap, flip * to_trap);

  if (!relax.empty()) {
    const double k = 0.5 / relax[0].tau_s;
    add_rate(a, g1, g2, k);
    add_rate(a, g2, g1, k);
  }
  if (relax.size() > 1) {
    const double k = 0.5 / relax[1].tau_s;
    add_rate(a, trap, g1, k);
    add_rate(a, trap, g2, k);
  }
  return a;
}

double sweep_schedule(const PumpConfig& config, double t_s) {
  const double period = config.pump_duration_s / config.sweep_count;
  double u = std::fmod(t_s, period) / period;
  if (u < 0.0) {
    u += 1.0;
  }
  const double triangle = u < 0.5 ? 2.0 * u : 2.0 - 2.0 * u;
  return config.pump_window_mhz * (triangle - 0.5);
}

double resolved_pump_rate(const PumpConfig& config, double class_offset_mhz, double t0_s, double t1_s) {
  const double peak_scale = config.average_pump_rate_per_s * config.pump_window_mhz;
  const double gamma = config.homogeneous_linewidth_mhz;
  const double nu0 = sweep_schedule(config, t0_s);
  if (t1_s <= t0_s) {
    return peak_scale * lorentz_density(class_offset_mhz - nu0, gamma);
  }
  // t1 may sit exactly on the next turning point, where fmod wraps
  const double period = config.pump_duration_s / config.sweep_count;
  const double u0 = std::fmod(t0_s, period) / period;
  const double slope = (u0 < 0.5 ? 2.0 : -2.0) * config.pump_window_mhz / period;
  const double nu1 = nu0 + slope * (t1_s - t0_s);
  if (nu1 == nu0) {
    return peak_scale * lorentz_density(class_offset_mhz - nu0, gamma);
  }
  const double mass = lorentz_cdf(class_offset_mhz - nu0, gamma) - lorentz_cdf(class_offset_mhz - nu1, gamma);
  return peak_scale * mass / (nu1 - nu0);
}

PumpResult simulate_pump(const PumpConfig& config, const std::vector<double>& delays_s) {
  config.validate();
  PumpResult result;
  result.config = config;
  auto& state = result.final_state;
  state.class_offsets_mhz = config.class_grid_mhz();
  state.populations.resize(state.class_offsets_mhz.size());

  DriftTracker tracker;
  const Eigen::Vector4d initial = Populations{}.vector();

  if (config.mode == PumpMode::sweep_averaged) {
    // only two distinct generators: inside and outside the window
    const Eigen::Matrix4d inside =
        (rate_matrix(config, config.average_pump_rate_per_s) * config.pump_duration_s).exp();
    const Eigen::Matrix4d outside = (rate_matrix(config, 0.0) * config.pump_duration_s).exp();
    for (std::size_t i = 0; i < state.class_offsets_mhz.size(); ++i) {
      const double c = state.class_offsets_mhz[i];
      const Eigen::Vector4d x = (config.in_window(c) ? inside : outside) * initial;
      tracker.check(x, c);
      state.populations[i] = Populations::from(x);
    }
  } else {
    for (std::size_t i = 0; i < state.class_offsets_mhz.size(); ++i) {
      const double c = state.class_offsets_mhz[i];
      Eigen::Matrix4d total = Eigen::Matrix4d::Identity();
      if (config.pump_duration_s > 0.0) {
        total = matrix_power(resolved_period_propagator(config, c), config.sweep_count);
      }
      const Eigen::Vector4d x = total * initial;
      tracker.check(x, c);
      state.populations[i] = Populations::from(x);
    }
  }

  result.max_population_drift = tracker.max_drift;
  const double g1_avg = window_average_g1(config, state);
  result.zero_delay_residual = g1_avg / initial[g1];
  result.spin_polarization = 1.0 - g1_avg;
  for (double delay : delays_s) {
    result.recovery.push_back({delay, residual_fraction(result, delay)});
  }
  result.hole = hole_spectrum(
      result, LineShapeParams{2.0, config.homogeneous_linewidth_mhz * 1e-3, 1.0});
  return result;
}

PumpState relax(const PumpResult& result, double delay_s) {
  if (!(delay_s >= 0.0) || !std::isfinite(delay_s)) {
    throw std::invalid_argument(fmt::format("delay must be finite and >= 0, got {}", delay_s));
  }
  PumpState out = result.final_state;
  if (delay_s == 0.0) {
    return out;
  }
  const Eigen::Matrix4d prop = (rate_matrix(result.config, 0.0) * delay_s).exp();
  DriftTracker tracker;
  for (std::size_t i = 0; i < out.populations.size(); ++i) {
    const Eigen::Vector4d x = prop * out.populations[i].vector();
    tracker.check(x, out.class_offsets_mhz[i]);
    out.populations[i] = Populations::from(x);
  }
  return out;
}

double residual_fraction(const PumpResult& result, double delay_s) {
  const PumpState state = relax(result, delay_s);
  return window_average_g1(result.config, state) / Populations{}.g1;
}

HoleSpectrum hole_spectrum(const PumpResult& result, const LineShapeParams& probe, double delay_s) {
  if (!(probe.gaussian_fwhm_ghz >= 0.0) || !(probe.lorentzian_fwhm_ghz >= 0.0) ||
      !(probe.peak_depth >= 0.0)) {
    throw std::invalid_argument("probe widths and depth must be >= 0");
  }
  const PumpState state = relax(result, delay_s);
  std::vector<double> occ1;
  std::vector<double> occ2;
  for (const auto& p : state.populations) {
    occ1.push_back(p.g1 / 0.5);
    // trapped ions are spin-flipped ions on the slow relaxation path
    occ2.push_back((p.g2 + p.trap) / 0.5);
  }
  HoleSpectrum hole;
  const double spacing = result.config.class_spacing_mhz;
  hole.pumped_line = convolved_line(state, occ1, probe, spacing, &hole.pre_pump_depth);
  hole.partner_line = convolved_line(state, occ2, probe, spacing, nullptr);
  return hole;
}

double transmission_window_width_mhz(const HoleSpectrum& hole) {
  const auto& f = hole.pumped_line.frequency_ghz;
  const auto& d = hole.pumped_line.depth;
  const auto& pre = hole.pre_pump_depth;
  if (f.size() < 3) {
    return 0.0;
  }
  std::vector<double> deficit(f.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    deficit[i] = pre[i] - d[i];
  }
  const auto peak_it = std::max_element(deficit.begin(), deficit.end());
  if (*peak_it <= 0.0) {
    return 0.0;
  }
  const double half = 0.5 * *peak_it;
  const auto peak = static_cast<std::size_t>(peak_it - deficit.begin());

  std::size_t lo = peak;
  while (lo > 0 && deficit[lo - 1] >= half) {
    --lo;
  }
  std::size_t hi = peak;
  while (hi + 1 < f.size() && deficit[hi + 1] >= half) {
    ++hi;
  }
  auto crossing = [&](std::size_t inside, std::size_t outside) {
    const double t = (deficit[inside] - half) / (deficit[inside] - deficit[outside]);
    return f[inside] + t * (f[outside] - f[inside]);
  };
  const double left = lo > 0 ? crossing(lo, lo - 1) : f.front();
  const double right = hi + 1 < f.size() ? crossing(hi, hi + 1) : f.back();
  return (right - left) * 1e3;
}

}  // namespace kramers
