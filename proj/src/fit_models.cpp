#include "kramers/fit_models.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <set>

#include <fmt/core.h>

namespace kramers {

namespace {

constexpr double deg = std::numbers::pi / 180.0;
constexpr double inf = std::numeric_limits<double>::infinity();

enum FourVoigtIndex { i_dad, i_dbc, i_ca, i_cb, i_cc, i_cd, i_gauss, i_lorentz, i_base, n_four_voigt };

FourVoigtModel unpack(std::span<const double> p) {
  FourVoigtModel m;
  m.d_ad = p[i_dad];
  m.d_bc = p[i_dbc];
  m.centers_ghz = {p[i_ca], p[i_cb], p[i_cc], p[i_cd]};
  m.gaussian_fwhm_ghz = p[i_gauss];
  m.lorentzian_fwhm_ghz = p[i_lorentz];
  m.baseline = p[i_base];
  return m;
}

std::vector<double> moving_average(const std::vector<double>& y, std::size_t half_window) {
  std::vector<double> out(y.size());
  for (std::size_t i = 0; i < y.size(); ++i) {
    const std::size_t lo = i >= half_window ? i - half_window : 0;
    const std::size_t hi = std::min(y.size() - 1, i + half_window);
    double s = 0.0;
    for (std::size_t k = lo; k <= hi; ++k) {
      s += y[k];
    }
    out[i] = s / static_cast<double>(hi - lo + 1);
  }
  return out;
}

// Linear least squares for y = c0 + sum_k c_k * basis_k; returns RSS and coefficients.
double linear_fit(const std::vector<double>& y, const std::vector<std::vector<double>>& basis,
                  Eigen::VectorXd& coeffs) {
  const auto m = static_cast<Eigen::Index>(y.size());
  const auto k = static_cast<Eigen::Index>(basis.size()) + 1;
  Eigen::MatrixXd a(m, k);
  Eigen::VectorXd b(m);
  for (Eigen::Index i = 0; i < m; ++i) {
    a(i, 0) = 1.0;
    for (Eigen::Index j = 1; j < k; ++j) {
      a(i, j) = basis[static_cast<std::size_t>(j - 1)][static_cast<std::size_t>(i)];
    }
    b[i] = y[static_cast<std::size_t>(i)];
  }
  coeffs = a.colPivHouseholderQr().solve(b);
  return (a * coeffs - b).squaredNorm();
}

}  // namespace

double FourVoigtModel::evaluate(double nu_ghz) const {
  LineShapeParams shape{gaussian_fwhm_ghz, lorentzian_fwhm_ghz, 1.0};
  const double depths[4] = {d_ad, d_bc, d_bc, d_ad};
  double total = baseline;
  for (std::size_t k = 0; k < 4; ++k) {
    shape.peak_depth = depths[k];
    total += voigt_depth(nu_ghz, centers_ghz[k], shape);
  }
  return total;
}

std::vector<double> FourVoigtModel::evaluate(const std::vector<double>& grid_ghz) const {
  std::vector<double> out(grid_ghz.size());
  std::transform(grid_ghz.begin(), grid_ghz.end(), out.begin(),
                 [this](double nu) { return evaluate(nu); });
  return out;
}

FourVoigtModel four_voigt_initial_guess(const AbsorptionSpectrum& spectrum,
                                        const std::optional<TransitionTable>& fallback) {
  spectrum.validate();
  const auto& x = spectrum.frequency_ghz;
  const auto& y = spectrum.depth;
  if (x.size() < 8) {
    throw std::invalid_argument("spectrum too short for a four-line fit");
  }
  const double step = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
  const auto half_window = static_cast<std::size_t>(std::max(0.0, std::round(0.1 / step)));
  const auto smooth = moving_average(y, half_window);
  const auto [min_it, max_it] = std::minmax_element(smooth.begin(), smooth.end());
  const double floor_value = *min_it;
  const double range = *max_it - floor_value;

  FourVoigtModel m;
  m.baseline = floor_value;

  // half-maximum width of the strongest feature
  const std::size_t top = static_cast<std::size_t>(max_it - smooth.begin());
  const double half = floor_value + 0.5 * range;
  std::size_t lo = top;
  while (lo > 0 && smooth[lo] > half) {
    --lo;
  }
  std::size_t hi = top;
  while (hi + 1 < smooth.size() && smooth[hi] > half) {
    ++hi;
  }
  const double span = x.back() - x.front();
  m.gaussian_fwhm_ghz = std::clamp(x[hi] - x[lo], 2.0 * step, 0.25 * span);

  std::vector<double> centers;
  const auto peaks = find_peaks(smooth, 0.03 * range);
  for (std::size_t i = 0; i < std::min<std::size_t>(4, peaks.size()); ++i) {
    centers.push_back(x[peaks[i]]);
  }
  if (centers.size() < 4) {
    if (fallback) {
      centers.clear();
      for (const auto& line : fallback->lines) {
        centers.push_back(line.offset_ghz);
      }
    } else {
      const double c = x[top];
      const double w = m.gaussian_fwhm_ghz;
      centers = {c - 1.5 * w, c - 0.5 * w, c + 0.5 * w, c + 1.5 * w};
    }
  }
  std::sort(centers.begin(), centers.end());
  for (std::size_t k = 0; k < 4; ++k) {
    m.centers_ghz[k] = std::clamp(centers[k], x.front(), x.back());
  }

  auto height_at = [&](double c) {
    const auto it = std::lower_bound(x.begin(), x.end(), c);
    const auto i = static_cast<std::size_t>(std::min<std::ptrdiff_t>(it - x.begin(), static_cast<std::ptrdiff_t>(x.size()) - 1));
    return std::max(smooth[i] - floor_value, 1e-3);
  };
  m.d_ad = 0.5 * (height_at(m.centers_ghz[0]) + height_at(m.centers_ghz[3]));
  m.d_bc = 0.5 * (height_at(m.centers_ghz[1]) + height_at(m.centers_ghz[2]));
  return m;
}

FitResult fit_four_voigt(const AbsorptionSpectrum& spectrum, const FourVoigtModel& init,
                         const SolverOptions& options) {
  spectrum.validate();
  const double lo = spectrum.frequency_ghz.front();
  const double hi = spectrum.frequency_ghz.back();
  std::vector<Parameter> params{
      {"d_ad", init.d_ad, 0.0, inf, false},
      {"d_bc", init.d_bc, 0.0, inf, false},
      {"center_a", init.centers_ghz[0], lo, hi, false},
      {"center_b", init.centers_ghz[1], lo, hi, false},
      {"center_c", init.centers_ghz[2], lo, hi, false},
      {"center_d", init.centers_ghz[3], lo, hi, false},
      {"gaussian_fwhm_ghz", init.gaussian_fwhm_ghz, 0.0, inf, false},
      {"lorentzian_fwhm_ghz", init.lorentzian_fwhm_ghz, 0.0, inf, !init.fit_lorentzian},
      {"baseline", init.baseline, -inf, inf, !init.fit_baseline},
  };
  if (init.gaussian_fwhm_ghz <= 0.0 && init.lorentzian_fwhm_ghz <= 0.0) {
    throw std::invalid_argument("initial line widths cannot both be zero");
  }

  Model model;
  model.evaluate = [](std::span<const double> p, std::span<const double> x, std::span<double> out) {
    const FourVoigtModel m = unpack(p);
    if (m.gaussian_fwhm_ghz <= 0.0 && m.lorentzian_fwhm_ghz <= 0.0) {
      std::fill(out.begin(), out.end(), std::numeric_limits<double>::quiet_NaN());
      return;
    }
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[i] = m.evaluate(x[i]);
    }
  };

  Dataset data{spectrum.frequency_ghz, spectrum.depth, {}};
  FitResult fit = least_squares(model, data, params, options);
  fit.derived.push_back(ratio_with_error(fit, "d_ad", "d_bc", "r"));
  return fit;
}

FourVoigtModel four_voigt_from_fit(const FitResult& fit) {
  if (fit.parameters.size() != n_four_voigt) {
    throw std::invalid_argument("not a four-Voigt fit result");
  }
  return unpack(fit.parameters);
}

Model polarization_model() {
  Model model;
  model.evaluate = [](std::span<const double> p, std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      out[i] = polarization_depth(p[0], p[1], x[i]);
    }
  };
  model.jacobian = [](std::span<const double> p, std::span<const double> x, Eigen::MatrixXd& jac) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double c = std::cos(x[i] * deg);
      const double s = std::sin(x[i] * deg);
      const double d_min = std::min(p[0], p[1]);
      const double e_par = c * c * std::exp(-(p[0] - d_min));
      const double e_perp = s * s * std::exp(-(p[1] - d_min));
      const double total = e_par + e_perp;
      const auto row = static_cast<Eigen::Index>(i);
      jac(row, 0) = e_par / total;
      jac(row, 1) = e_perp / total;
    }
  };
  return model;
}

FitResult fit_polarization_model(const std::vector<double>& angles_deg,
                                 const std::vector<double>& depths, const std::vector<double>& weights,
                                 const SolverOptions& options) {
  if (angles_deg.size() != depths.size() || angles_deg.empty()) {
    throw std::invalid_argument("angles and depths must be non-empty and of equal length");
  }
  std::set<long long> distinct;
  for (double a : angles_deg) {
    const double c = std::cos(a * deg);
    distinct.insert(std::llround(c * c * 1e9));
  }
  if (distinct.size() < 2) {
    throw rank_deficiency_error(
        "polarization fit needs at least two distinct angles modulo 180 degrees");
  }

  // start from the points closest to phi = 0 and phi = 90
  std::size_t i_par = 0;
  std::size_t i_perp = 0;
  double best_par = -1.0;
  double best_perp = -1.0;
  for (std::size_t i = 0; i < angles_deg.size(); ++i) {
    const double c = std::cos(angles_deg[i] * deg);
    const double c2 = c * c;
    if (c2 > best_par) {
      best_par = c2;
      i_par = i;
    }
    if (1.0 - c2 > best_perp) {
      best_perp = 1.0 - c2;
      i_perp = i;
    }
  }
  std::vector<Parameter> params{
      {"d_parallel", std::max(depths[i_par], 0.0), 0.0, inf, false},
      {"d_perpendicular", std::max(depths[i_perp], 0.0), 0.0, inf, false},
  };
  return least_squares(polarization_model(), Dataset{angles_deg, depths, weights}, params, options);
}

FitResult fit_exponential_recovery(const std::vector<double>& delays_ms,
                                   const std::vector<double>& fractions, int components,
                                   const SolverOptions& options) {
  if (components != 1 && components != 2) {
    throw std::invalid_argument("recovery fit supports 1 or 2 components");
  }
  if (delays_ms.size() != fractions.size()) {
    throw std::invalid_argument("delays and fractions differ in length");
  }
  if (delays_ms.size() < static_cast<std::size_t>(2 * components + 1)) {
    throw std::invalid_argument(
        fmt::format("{}-component recovery fit needs at least {} points", components, 2 * components + 1));
  }
  const auto [t_min, t_max] = std::minmax_element(delays_ms.begin(), delays_ms.end());
  double min_gap = inf;
  {
    std::vector<double> sorted = delays_ms;
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 1; i < sorted.size(); ++i) {
      if (sorted[i] > sorted[i - 1]) {
        min_gap = std::min(min_gap, sorted[i] - sorted[i - 1]);
      }
    }
  }
  if (!std::isfinite(min_gap)) {
    throw rank_deficiency_error("recovery fit needs distinct delays");
  }

  // variable projection on a log-spaced tau grid for the starting point
  const double tau_lo = 0.3 * min_gap;
  const double tau_hi = 3.0 * std::max(*t_max - *t_min, min_gap);
  constexpr int grid_n = 48;
  std::vector<double> taus(grid_n);
  for (int i = 0; i < grid_n; ++i) {
    taus[static_cast<std::size_t>(i)] = tau_lo * std::pow(tau_hi / tau_lo, i / double(grid_n - 1));
  }
  auto basis_for = [&](double tau) {
    std::vector<double> b(delays_ms.size());
    for (std::size_t i = 0; i < b.size(); ++i) {
      b[i] = -std::exp(-delays_ms[i] / tau);
    }
    return b;
  };
  double best_rss = inf;
  std::vector<double> best_taus;
  Eigen::VectorXd best_coeffs;
  Eigen::VectorXd coeffs;
  if (components == 1) {
    for (double tau : taus) {
      const double rss = linear_fit(fractions, {basis_for(tau)}, coeffs);
      if (rss < best_rss) {
        best_rss = rss;
        best_taus = {tau};
        best_coeffs = coeffs;
      }
    }
  } else {
    for (std::size_t i = 0; i < taus.size(); ++i) {
      for (std::size_t j = i + 1; j < taus.size(); ++j) {
        if (taus[j] / taus[i] < 1.5) {
          continue;
        }
        const double rss = linear_fit(fractions, {basis_for(taus[i]), basis_for(taus[j])}, coeffs);
        if (rss < best_rss) {
          best_rss = rss;
          best_taus = {taus[i], taus[j]};
          best_coeffs = coeffs;
        }
      }
    }
  }

  std::vector<Parameter> params{{"y_inf", best_coeffs[0], -inf, inf, false}};
  for (int k = 0; k < components; ++k) {
    params.push_back({fmt::format("amplitude_{}", k + 1), best_coeffs[k + 1], -inf, inf, false});
    params.push_back({fmt::format("tau_{}_ms", k + 1), best_taus[static_cast<std::size_t>(k)], 1e-12, inf, false});
  }

  Model model;
  model.evaluate = [components](std::span<const double> p, std::span<const double> x, std::span<double> out) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      double y = p[0];
      for (int k = 0; k < components; ++k) {
        y -= p[static_cast<std::size_t>(1 + 2 * k)] * std::exp(-x[i] / p[static_cast<std::size_t>(2 + 2 * k)]);
      }
      out[i] = y;
    }
  };
  model.jacobian = [components](std::span<const double> p, std::span<const double> x, Eigen::MatrixXd& jac) {
    for (std::size_t i = 0; i < x.size(); ++i) {
      const auto row = static_cast<Eigen::Index>(i);
      jac(row, 0) = 1.0;
      for (int k = 0; k < components; ++k) {
        const double amp = p[static_cast<std::size_t>(1 + 2 * k)];
        const double tau = p[static_cast<std::size_t>(2 + 2 * k)];
        const double e = std::exp(-x[i] / tau);
        jac(row, 1 + 2 * k) = -e;
        jac(row, 2 + 2 * k) = -amp * e * x[i] / (tau * tau);
      }
    }
  };

  FitResult fit = least_squares(model, Dataset{delays_ms, fractions, {}}, params, options);

  if (components == 2 && fit.parameters[4] < fit.parameters[2]) {
    // keep tau_1 < tau_2
    std::swap(fit.parameters[1], fit.parameters[3]);
    std::swap(fit.parameters[2], fit.parameters[4]);
    std::swap(fit.standard_errors[1], fit.standard_errors[3]);
    std::swap(fit.standard_errors[2], fit.standard_errors[4]);
    Eigen::PermutationMatrix<Eigen::Dynamic> perm(5);
    perm.indices() << 0, 3, 4, 1, 2;
    fit.covariance = perm.transpose() * fit.covariance * perm;
  }

  DerivedQuantity zero{"zero_delay", fit.parameters[0], 0.0};
  Eigen::VectorXd grad = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(fit.parameters.size()));
  grad[0] = 1.0;
  for (int k = 0; k < components; ++k) {
    zero.value -= fit.parameters[static_cast<std::size_t>(1 + 2 * k)];
    grad[1 + 2 * k] = -1.0;
  }
  zero.error = std::sqrt(std::max(0.0, grad.dot(fit.covariance * grad)));
  fit.derived.push_back(zero);
  if (components == 2 && fit.parameters[4] / fit.parameters[2] < 1.5) {
    fit.flags.emplace_back("non_identifiable");
  }
  return fit;
}

double recovery_curve(const FitResult& fit, double t_ms) {
  double y = fit.value("y_inf");
  const int components = static_cast<int>((fit.parameters.size() - 1) / 2);
  for (int k = 0; k < components; ++k) {
    y -= fit.parameters[static_cast<std::size_t>(1 + 2 * k)] *
         std::exp(-t_ms / fit.parameters[static_cast<std::size_t>(2 + 2 * k)]);
  }
  return y;
}

}  // namespace kramers
