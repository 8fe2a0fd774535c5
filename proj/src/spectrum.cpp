#include "kramers/spectrum.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

#include <fmt/core.h>

#include "kramers/faddeeva.hpp"

namespace kramers {

namespace {

constexpr double deg = std::numbers::pi / 180.0;
const double fwhm_to_sigma = 1.0 / (2.0 * std::sqrt(2.0 * std::numbers::ln2));

}  // namespace

void LineShapeParams::validate() const {
  if (!(gaussian_fwhm_ghz >= 0.0) || !(lorentzian_fwhm_ghz >= 0.0) ||
      !std::isfinite(gaussian_fwhm_ghz) || !std::isfinite(lorentzian_fwhm_ghz)) {
    throw std::invalid_argument("line widths must be finite and >= 0");
  }
  if (gaussian_fwhm_ghz == 0.0 && lorentzian_fwhm_ghz == 0.0) {
    throw std::invalid_argument("gaussian and lorentzian widths cannot both be zero");
  }
  if (!(peak_depth >= 0.0) || !std::isfinite(peak_depth)) {
    throw std::invalid_argument("peak depth must be finite and >= 0");
  }
}

void AbsorptionSpectrum::validate() const {
  if (frequency_ghz.size() != depth.size()) {
    throw std::invalid_argument("frequency grid and depth have different lengths");
  }
  for (std::size_t i = 1; i < frequency_ghz.size(); ++i) {
    if (!(frequency_ghz[i] > frequency_ghz[i - 1])) {
      throw std::invalid_argument(fmt::format("frequency grid not strictly increasing at row {}", i));
    }
  }
  for (std::size_t i = 0; i < depth.size(); ++i) {
    if (!std::isfinite(depth[i]) || !std::isfinite(frequency_ghz[i])) {
      throw std::invalid_argument(fmt::format("non-finite value at row {}", i));
    }
  }
}

std::vector<double> frequency_grid(double min_ghz, double max_ghz, double step_ghz) {
  if (!(step_ghz > 0.0) || !(max_ghz >= min_ghz) || !std::isfinite(min_ghz) ||
      !std::isfinite(max_ghz)) {
    throw std::invalid_argument(
        fmt::format("invalid grid [{}, {}] step {}", min_ghz, max_ghz, step_ghz));
  }
  const auto n = static_cast<std::size_t>(std::floor((max_ghz - min_ghz) / step_ghz + 1e-9)) + 1;
  std::vector<double> grid(n);
  for (std::size_t i = 0; i < n; ++i) {
    grid[i] = min_ghz + static_cast<double>(i) * step_ghz;
  }
  return grid;
}

double voigt_depth(double nu_ghz, double center_ghz, const LineShapeParams& params) {
  const double dx = nu_ghz - center_ghz;
  const double sigma = params.gaussian_fwhm_ghz * fwhm_to_sigma;
  const double gamma = 0.5 * params.lorentzian_fwhm_ghz;

  if (params.lorentzian_fwhm_ghz == 0.0) {
    return params.peak_depth * std::exp(-0.5 * (dx / sigma) * (dx / sigma));
  }
  if (params.gaussian_fwhm_ghz == 0.0) {
    return params.peak_depth / (1.0 + (dx / gamma) * (dx / gamma));
  }
  const double scale = 1.0 / (sigma * std::numbers::sqrt2);
  const double y = gamma * scale;
  const double value = faddeeva({dx * scale, y}).real();
  const double peak = faddeeva({0.0, y}).real();
  return params.peak_depth * value / peak;
}

double polarization_depth(double d_parallel, double d_perpendicular, double phi_deg) {
  const double c = std::cos(phi_deg * deg);
  const double s = std::sin(phi_deg * deg);
  // factor out the smaller depth so neither exponential underflows first
  const double d_min = std::min(d_parallel, d_perpendicular);
  const double mix =
      c * c * std::exp(-(d_parallel - d_min)) + s * s * std::exp(-(d_perpendicular - d_min));
  return d_min - std::log(mix);
}

std::vector<PolarizedLineDepth> line_depths(const TransitionTable& table, double total_depth_pi,
                                            double total_depth_sigma) {
  std::vector<PolarizedLineDepth> out;
  for (const auto& line : table.lines) {
    out.push_back(
        {line.label, line.strength_pi * total_depth_pi, line.strength_sigma * total_depth_sigma});
  }
  return out;
}

AbsorptionSpectrum synthesize_spectrum(const TransitionTable& table, const LineShapeParams& shape,
                                       double total_depth_pi, double total_depth_sigma,
                                       double phi_deg, const std::vector<double>& grid_ghz,
                                       SpectrumMetadata metadata, double background) {
  LineShapeParams unit = shape;
  unit.peak_depth = 1.0;
  unit.validate();
  if (total_depth_pi < 0.0 || total_depth_sigma < 0.0 || background < 0.0) {
    throw std::invalid_argument("depths and background must be >= 0");
  }

  AbsorptionSpectrum out;
  out.frequency_ghz = grid_ghz;
  out.depth.resize(grid_ghz.size());
  metadata.phi_deg = phi_deg;
  out.metadata = metadata;

  const auto depths = line_depths(table, total_depth_pi, total_depth_sigma);
  for (std::size_t i = 0; i < grid_ghz.size(); ++i) {
    double d_par = 0.0;
    double d_perp = 0.0;
    for (std::size_t k = 0; k < table.lines.size(); ++k) {
      const double profile = voigt_depth(grid_ghz[i], table.lines[k].offset_ghz, unit);
      d_par += depths[k].d_parallel * profile;
      d_perp += depths[k].d_perpendicular * profile;
    }
    out.depth[i] = polarization_depth(d_par, d_perp, phi_deg) + background;
  }
  out.validate();
  return out;
}

std::vector<double> transmission(const AbsorptionSpectrum& spectrum, double input_intensity) {
  if (!(input_intensity > 0.0)) {
    throw std::invalid_argument("input intensity must be > 0");
  }
  std::vector<double> out(spectrum.depth.size());
  std::transform(spectrum.depth.begin(), spectrum.depth.end(), out.begin(),
                 [&](double d) { return input_intensity * std::exp(-d); });
  return out;
}

std::vector<std::size_t> find_peaks(const std::vector<double>& y, double min_prominence) {
  const std::size_t n = y.size();
  std::vector<std::size_t> peaks;
  for (std::size_t i = 1; i + 1 < n; ++i) {
    if (!(y[i] > y[i - 1])) {
      continue;
    }
    std::size_t j = i;
    while (j + 1 < n && y[j + 1] == y[i]) {
      ++j;
    }
    if (j + 1 < n && y[j + 1] < y[i]) {
      peaks.push_back((i + j) / 2);
    }
    i = j;
  }

  std::vector<std::pair<double, std::size_t>> kept;
  for (std::size_t p : peaks) {
    double left_min = y[p];
    for (std::size_t k = p; k-- > 0;) {
      if (y[k] > y[p]) {
        break;
      }
      left_min = std::min(left_min, y[k]);
    }
    double right_min = y[p];
    for (std::size_t k = p + 1; k < n; ++k) {
      if (y[k] > y[p]) {
        break;
      }
      right_min = std::min(right_min, y[k]);
    }
    const double prominence = y[p] - std::max(left_min, right_min);
    if (prominence >= min_prominence) {
      kept.emplace_back(y[p], p);
    }
  }
  std::stable_sort(kept.begin(), kept.end(),
                   [](const auto& a, const auto& b) { return a.first > b.first; });
  std::vector<std::size_t> out;
  for (const auto& [value, index] : kept) {
    out.push_back(index);
  }
  return out;
}

}  // namespace kramers
