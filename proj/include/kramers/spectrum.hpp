#ifndef KRAMERS_SPECTRUM_HPP
#define KRAMERS_SPECTRUM_HPP

#include <vector>

#include "kramers/branching.hpp"

namespace kramers {

/// Line shape of one inhomogeneously broadened line, parameterized by its
/// peak absorption depth. For an integrated cross-section A (GHz units) the
/// peak depth is A * V(0), with V the area-normalized Voigt profile.
struct LineShapeParams {
  double gaussian_fwhm_ghz = 2.0;
  double lorentzian_fwhm_ghz = 0.0;
  double peak_depth = 1.0;

  void validate() const;
};

struct SpectrumMetadata {
  double magnitude_tesla = 0.0;
  double theta_deg = 0.0;
  double phi_deg = 0.0;
};

/// Absorption depth d(nu), intensity attenuation exp(-d).
struct AbsorptionSpectrum {
  std::vector<double> frequency_ghz;
  std::vector<double> depth;
  SpectrumMetadata metadata;

  void validate() const;
};

/// Inclusive uniform grid; the last point is max_ghz when the span is a whole
/// number of steps.
std::vector<double> frequency_grid(double min_ghz, double max_ghz, double step_ghz);

/// Voigt profile scaled so that its value at the line center is params.peak_depth.
double voigt_depth(double nu_ghz, double center_ghz, const LineShapeParams& params);

/// d(phi) = -ln(cos^2 phi exp(-d_par) + sin^2 phi exp(-d_perp)); the two
/// orthogonal modes propagate independently and birefringence is ignored.
double polarization_depth(double d_parallel, double d_perpendicular, double phi_deg);

struct PolarizedLineDepth {
  char label = '?';
  double d_parallel = 0.0;
  double d_perpendicular = 0.0;
};

/// Peak depths per line for pi and sigma light.
std::vector<PolarizedLineDepth> line_depths(const TransitionTable& table, double total_depth_pi,
                                            double total_depth_sigma);

/// Synthesizes the four-line spectrum. shape supplies the widths only; each
/// line's peak depth is its table strength times the polarization total.
AbsorptionSpectrum synthesize_spectrum(const TransitionTable& table, const LineShapeParams& shape,
                                       double total_depth_pi, double total_depth_sigma,
                                       double phi_deg, const std::vector<double>& grid_ghz,
                                       SpectrumMetadata metadata = {}, double background = 0.0);

std::vector<double> transmission(const AbsorptionSpectrum& spectrum, double input_intensity);

/// Indices of strict local maxima, largest first. Maxima lower than
/// min_prominence above the lowest point between them and a higher maximum are dropped.
std::vector<std::size_t> find_peaks(const std::vector<double>& y, double min_prominence);

}  // namespace kramers

#endif
