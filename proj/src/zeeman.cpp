#include "kramers/zeeman.hpp"

#include <cmath>
#include <numbers>
#include <stdexcept>

#include <Eigen/Eigenvalues>
#include <fmt/core.h>

namespace kramers {

namespace {

constexpr double deg = std::numbers::pi / 180.0;

// Components below this magnitude carry no usable phase information.
constexpr double phase_threshold = 1e-14;

// First component above threshold becomes real and >= 0.
SpinorCoefficients fix_phase(SpinorCoefficients c) {
  const std::size_t ref = std::abs(c[0]) > phase_threshold ? 0 : 1;
  const double magnitude = std::abs(c[ref]);
  const std::complex<double> phase = std::conj(c[ref]) / magnitude;
  c[0] *= phase;
  c[1] *= phase;
  c[ref] = magnitude;
  return c;
}

SpinorCoefficients to_crystal_basis(const SpinorCoefficients& spin, BasisMapping mapping) {
  if (mapping == BasisMapping::direct) {
    return spin;
  }
  return {spin[1], spin[0]};
}

}  // namespace

void GTensor::validate() const {
  if (!std::isfinite(g_parallel) || !std::isfinite(g_perpendicular) || g_parallel == 0.0 ||
      g_perpendicular == 0.0) {
    throw std::invalid_argument(
        fmt::format("g-tensor components must be finite and nonzero (g_par={}, g_perp={})",
                    g_parallel, g_perpendicular));
  }
}

void FieldConfig::validate() const {
  if (!std::isfinite(magnitude_tesla) || magnitude_tesla < 0.0) {
    throw std::invalid_argument(
        fmt::format("field magnitude must be finite and >= 0, got {}", magnitude_tesla));
  }
  if (!(theta_deg >= 0.0 && theta_deg <= 90.0)) {
    throw std::domain_error(fmt::format("theta must lie in [0, 90] degrees, got {}", theta_deg));
  }
  if (!std::isfinite(azimuth_deg)) {
    throw std::invalid_argument("field azimuth must be finite");
  }
}

double effective_g(const GTensor& g, double theta_deg) {
  if (!(theta_deg >= 0.0 && theta_deg <= 90.0)) {
    throw std::domain_error(fmt::format("theta must lie in [0, 90] degrees, got {}", theta_deg));
  }
  const double t = theta_deg * deg;
  return std::hypot(g.g_parallel * std::cos(t), g.g_perpendicular * std::sin(t));
}

DoubletEigensystem doublet_eigensystem(const KramersDoublet& doublet, const FieldConfig& field) {
  doublet.g.validate();
  field.validate();

  DoubletEigensystem out;
  out.field = field;

  if (field.magnitude_tesla == 0.0) {
    out.coeff_low = {1.0, 0.0};
    out.coeff_high = {0.0, 1.0};
    return out;
  }

  const double theta = field.theta_deg * deg;
  const double azimuth = field.azimuth_deg * deg;
  const double gz = doublet.g.g_parallel * std::cos(theta);
  const double gx = doublet.g.g_perpendicular * std::sin(theta) * std::cos(azimuth);
  const double gy = doublet.g.g_perpendicular * std::sin(theta) * std::sin(azimuth);

  // H / (mu_B B / 2) in the spin basis (M_S = +1/2, M_S = -1/2)
  Eigen::Matrix2cd h;
  h << gz, std::complex<double>(gx, -gy),
       std::complex<double>(gx, gy), -gz;

  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> solver(h);
  if (solver.info() != Eigen::Success) {
    throw std::runtime_error("doublet diagonalization failed");
  }
  const Eigen::Matrix2cd& v = solver.eigenvectors();

  const double half_split =
      0.5 * bohr_magneton_ghz_per_tesla * field.magnitude_tesla * effective_g(doublet.g, field.theta_deg);
  out.energy_low_ghz = -half_split;
  out.energy_high_ghz = half_split;

  const SpinorCoefficients low_spin{v(0, 0), v(1, 0)};
  const SpinorCoefficients high_spin{v(0, 1), v(1, 1)};
  out.coeff_low = fix_phase(to_crystal_basis(low_spin, doublet.mapping));
  out.coeff_high = fix_phase(to_crystal_basis(high_spin, doublet.mapping));
  return out;
}

DoubletEigensystem doublet_eigensystem(const GTensor& g, const FieldConfig& field) {
  return doublet_eigensystem(KramersDoublet{g, BasisMapping::direct}, field);
}

double zeeman_splitting(const GTensor& g, const FieldConfig& field) {
  return doublet_eigensystem(g, field).splitting_ghz();
}

}  // namespace kramers
