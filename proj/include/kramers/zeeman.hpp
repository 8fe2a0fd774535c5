#ifndef KRAMERS_ZEEMAN_HPP
#define KRAMERS_ZEEMAN_HPP

#include <array>
#include <complex>

namespace kramers {

// Bohr magneton over Planck constant, GHz per tesla.
inline constexpr double bohr_magneton_ghz_per_tesla = 13.99624;

/// Axial g-tensor of one Kramers doublet. Both principal values are signed;
/// the sign convention used throughout is negative for both components.
struct GTensor {
  double g_parallel = 0.0;
  double g_perpendicular = 0.0;

  void validate() const;
};

/// How the effective spin states map onto the field-free doublet basis
/// {|Psi+mu>, |Psi-mu>}.
enum class BasisMapping {
  // M_S = +1/2 <-> |Psi+mu>
  direct,
  // M_S = +1/2 <-> |Psi-mu>
  swapped,
};

/// A Kramers doublet: g-tensor plus its spin-to-crystal-field basis mapping.
struct KramersDoublet {
  GTensor g;
  BasisMapping mapping = BasisMapping::direct;
};

// Measured tensors of the 4I9/2(Z1) ground and 4F3/2(Y1) excited doublets of
// Nd:YVO4, both with negative sign. The excited doublet's M_S = -1/2 level is
// |Psi+3/2>, hence the swapped mapping.
inline constexpr GTensor nd_yvo4_ground_g{-0.915, -2.361};
inline constexpr GTensor nd_yvo4_excited_g{-1.13, -0.28};
inline constexpr KramersDoublet nd_yvo4_ground{nd_yvo4_ground_g, BasisMapping::direct};
inline constexpr KramersDoublet nd_yvo4_excited{nd_yvo4_excited_g, BasisMapping::swapped};

/// Static field in the plane containing the crystal c-axis (z).
/// theta is measured from the c-axis. The azimuth is reserved; the branching
/// formulas assume the coplanar case azimuth = 0.
struct FieldConfig {
  double magnitude_tesla = 0.0;
  double theta_deg = 0.0;
  double azimuth_deg = 0.0;

  void validate() const;
  bool operator==(const FieldConfig&) const = default;
};

using SpinorCoefficients = std::array<std::complex<double>, 2>;

/// Zeeman levels of one doublet. Coefficients are expressed in the field-free
/// basis {|Psi+mu>, |Psi-mu>}, first nonzero component real and >= 0.
struct DoubletEigensystem {
  double energy_low_ghz = 0.0;
  double energy_high_ghz = 0.0;
  SpinorCoefficients coeff_low{};
  SpinorCoefficients coeff_high{};
  FieldConfig field{};

  double splitting_ghz() const { return energy_high_ghz - energy_low_ghz; }
};

/// sqrt((g_par cos theta)^2 + (g_perp sin theta)^2). Throws std::domain_error
/// for theta outside [0, 90].
double effective_g(const GTensor& g, double theta_deg);

/// Diagonalizes H = mu_B B.g.S for one doublet. At B = 0 the doublet is
/// degenerate; zero energies and the field-free basis are returned.
DoubletEigensystem doublet_eigensystem(const KramersDoublet& doublet, const FieldConfig& field);
DoubletEigensystem doublet_eigensystem(const GTensor& g, const FieldConfig& field);

double zeeman_splitting(const GTensor& g, const FieldConfig& field);

}  // namespace kramers

#endif
