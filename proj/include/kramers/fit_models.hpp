#ifndef KRAMERS_FIT_MODELS_HPP
#define KRAMERS_FIT_MODELS_HPP

#include <array>
#include <optional>
#include <vector>

#include "kramers/branching.hpp"
#include "kramers/least_squares.hpp"
#include "kramers/spectrum.hpp"

namespace kramers {

/// Sum of four Voigt lines a, b, c, d with a shared depth for the outer pair
/// (a, d) and one for the inner pair (b, c), shared widths and a constant baseline.
struct FourVoigtModel {
  double d_ad = 0.0;
  double d_bc = 0.0;
  std::array<double, 4> centers_ghz{};
  double gaussian_fwhm_ghz = 2.0;
  double lorentzian_fwhm_ghz = 0.0;
  double baseline = 0.0;
  bool fit_lorentzian = false;
  bool fit_baseline = true;

  double evaluate(double nu_ghz) const;
  std::vector<double> evaluate(const std::vector<double>& grid_ghz) const;
};

/// Deterministic starting point: the four most prominent maxima of the
/// smoothed spectrum, or the table's line offsets when fewer are found.
FourVoigtModel four_voigt_initial_guess(const AbsorptionSpectrum& spectrum,
                                        const std::optional<TransitionTable>& fallback = std::nullopt);

/// Parameters d_ad, d_bc, center_a..center_d, gaussian_fwhm_ghz,
/// lorentzian_fwhm_ghz, baseline; derived "r" = d_ad / d_bc.
FitResult fit_four_voigt(const AbsorptionSpectrum& spectrum, const FourVoigtModel& init,
                         const SolverOptions& options = {});
FourVoigtModel four_voigt_from_fit(const FitResult& fit);

/// d(phi) model with parameters {d_parallel, d_perpendicular} and its analytic Jacobian.
Model polarization_model();

/// Fits d_parallel and d_perpendicular. Throws rank_deficiency_error when the
/// angles do not contain two distinct values of cos^2(phi). Weights are
/// 1 / variance per point (empty = unit); for noise proportional to the depth
/// pass 1 / depth^2.
FitResult fit_polarization_model(const std::vector<double>& angles_deg,
                                 const std::vector<double>& depths,
                                 const std::vector<double>& weights = {},
                                 const SolverOptions& options = {});

/// y(t) = y_inf - sum_i amplitude_i exp(-t / tau_i), t in ms. Parameters
/// y_inf, amplitude_1, tau_1_ms[, amplitude_2, tau_2_ms] with tau_1 < tau_2;
/// derived "zero_delay" = y(0). Flag "non_identifiable" when tau_2 / tau_1 < 1.5.
FitResult fit_exponential_recovery(const std::vector<double>& delays_ms,
                                   const std::vector<double>& fractions, int components,
                                   const SolverOptions& options = {});
double recovery_curve(const FitResult& fit, double t_ms);

}  // namespace kramers

#endif
