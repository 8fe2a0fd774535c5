#ifndef KRAMERS_BRANCHING_HPP
#define KRAMERS_BRANCHING_HPP

#include <array>
#include <complex>
#include <string_view>
#include <vector>

#include "kramers/zeeman.hpp"

namespace kramers {

/// Mixing coefficients of the lower ground level |phi1> = alpha|Psi+1/2> + beta|Psi-1/2>
/// and the lower excited level |phi3> = gamma|Psi+3/2> + delta|Psi-3/2>.
struct LambdaCoefficients {
  std::complex<double> alpha;
  std::complex<double> beta_coefficient;
  std::complex<double> gamma;
  std::complex<double> delta;
};

struct BranchingResult {
  double r_parallel = 0.0;
  double r_perpendicular = 0.0;
  bool parallel_infinite = false;
  bool perpendicular_infinite = false;
};

/// One of the four optical lines between the Zeeman levels.
/// Offsets are relative to the zero-field line center.
struct Transition {
  char label = '?';
  double offset_ghz = 0.0;
  double strength_pi = 0.0;
  double strength_sigma = 0.0;
  bool spin_flip = false;
  int ground_level = 1;   // 1 = |phi1>, 2 = |phi2>
  int excited_level = 3;  // 3 = |phi3>, 4 = |phi4>
};

/// Lines a, b, c, d ordered by increasing offset.
/// Strengths are squared dipole matrix elements; per polarization the four sum to 2.
struct TransitionTable {
  std::array<Transition, 4> lines;

  const Transition& operator[](char label) const;
};

struct BranchingPoint {
  double theta_deg = 0.0;
  BranchingResult ratios;
};

struct OptimalAngle {
  double theta_deg = 0.0;
  double r_parallel = 0.0;
};

/// Throws std::invalid_argument when the two eigensystems were computed for
/// different fields.
LambdaCoefficients lambda_coefficients(const DoubletEigensystem& ground,
                                       const DoubletEigensystem& excited);

/// R_par = |a g - b d|^2 / |a* d + b* g|^2, R_perp = |b g + a d|^2 / |a* g - b* d|^2.
/// A denominator below 1e-15 yields +infinity with the matching flag set.
BranchingResult branching_ratios(const LambdaCoefficients& c);

TransitionTable transition_table(const LambdaCoefficients& c, double ground_split_ghz,
                                 double excited_split_ghz);

/// Field angle after an in-plane misalignment tilt; uses the axial symmetry
/// R(-theta) = R(theta).
double tilted_theta(double theta_deg, double misalignment_deg);

BranchingResult branching_at(const KramersDoublet& ground, const KramersDoublet& excited,
                             const FieldConfig& field);

std::vector<BranchingPoint> branching_scan(const KramersDoublet& ground,
                                           const KramersDoublet& excited, double b_tesla,
                                           const std::vector<double>& theta_grid_deg,
                                           double misalignment_deg = 0.0);

/// Grid search at the given resolution over [0, 90] followed by golden-section
/// refinement of R_par(theta).
OptimalAngle optimal_angle(const KramersDoublet& ground, const KramersDoublet& excited,
                           double b_tesla, double resolution_deg);

}  // namespace kramers

#endif
