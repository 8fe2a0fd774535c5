#include "kramers/branching.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>

#include <fmt/core.h>

namespace kramers {

namespace {

constexpr double denominator_floor = 1e-15;

double ratio_or_infinity(double numerator, double denominator, bool& infinite) {
  infinite = denominator < denominator_floor;
  return infinite ? std::numeric_limits<double>::infinity() : numerator / denominator;
}

}  // namespace

const Transition& TransitionTable::operator[](char label) const {
  for (const auto& line : lines) {
    if (line.label == label) {
      return line;
    }
  }
  throw std::out_of_range(fmt::format("no transition labeled '{}'", label));
}

LambdaCoefficients lambda_coefficients(const DoubletEigensystem& ground,
                                       const DoubletEigensystem& excited) {
  if (!(ground.field == excited.field)) {
    throw std::invalid_argument(fmt::format(
        "ground and excited eigensystems use different fields (B={} T, theta={} vs B={} T, theta={})",
        ground.field.magnitude_tesla, ground.field.theta_deg, excited.field.magnitude_tesla,
        excited.field.theta_deg));
  }
  return {ground.coeff_low[0], ground.coeff_low[1], excited.coeff_low[0], excited.coeff_low[1]};
}

BranchingResult branching_ratios(const LambdaCoefficients& c) {
  const auto& a = c.alpha;
  const auto& b = c.beta_coefficient;
  const auto& g = c.gamma;
  const auto& d = c.delta;

  const double pi_flip = std::norm(a * g - b * d);
  const double pi_keep = std::norm(std::conj(a) * d + std::conj(b) * g);
  const double sigma_flip = std::norm(b * g + a * d);
  const double sigma_keep = std::norm(std::conj(a) * g - std::conj(b) * d);

  BranchingResult r;
  r.r_parallel = ratio_or_infinity(pi_flip, pi_keep, r.parallel_infinite);
  r.r_perpendicular = ratio_or_infinity(sigma_flip, sigma_keep, r.perpendicular_infinite);
  return r;
}

TransitionTable transition_table(const LambdaCoefficients& c, double ground_split_ghz,
                                 double excited_split_ghz) {
  if (ground_split_ghz < 0.0 || excited_split_ghz < 0.0) {
    throw std::invalid_argument("splittings must be >= 0");
  }
  const auto& a = c.alpha;
  const auto& b = c.beta_coefficient;
  const auto& g = c.gamma;
  const auto& d = c.delta;

  const double pi_keep = std::norm(std::conj(a) * d + std::conj(b) * g);
  const double pi_flip = std::norm(a * g - b * d);
  const double sigma_keep = std::norm(std::conj(a) * g - std::conj(b) * d);
  const double sigma_flip = std::norm(b * g + a * d);

  const double inner = 0.5 * (ground_split_ghz - excited_split_ghz);
  const double outer = 0.5 * (ground_split_ghz + excited_split_ghz);

  // phi2 -> phi4 and phi1 -> phi4 mirror phi1 -> phi3 and phi2 -> phi3
  std::array<Transition, 4> lines{{
      {'?', inner, pi_keep, sigma_keep, false, 1, 3},
      {'?', -inner, pi_keep, sigma_keep, false, 2, 4},
      {'?', -outer, pi_flip, sigma_flip, true, 2, 3},
      {'?', outer, pi_flip, sigma_flip, true, 1, 4},
  }};
  std::stable_sort(lines.begin(), lines.end(),
                   [](const Transition& x, const Transition& y) { return x.offset_ghz < y.offset_ghz; });
  const char labels[] = {'a', 'b', 'c', 'd'};
  for (std::size_t i = 0; i < lines.size(); ++i) {
    lines[i].label = labels[i];
  }
  return TransitionTable{lines};
}

double tilted_theta(double theta_deg, double misalignment_deg) {
  const double t = std::abs(theta_deg + misalignment_deg);
  if (!(t <= 90.0)) {
    throw std::domain_error(
        fmt::format("tilted angle {} + {} leaves [0, 90] degrees", theta_deg, misalignment_deg));
  }
  return t;
}

BranchingResult branching_at(const KramersDoublet& ground, const KramersDoublet& excited,
                             const FieldConfig& field) {
  return branching_ratios(
      lambda_coefficients(doublet_eigensystem(ground, field), doublet_eigensystem(excited, field)));
}

std::vector<BranchingPoint> branching_scan(const KramersDoublet& ground,
                                           const KramersDoublet& excited, double b_tesla,
                                           const std::vector<double>& theta_grid_deg,
                                           double misalignment_deg) {
  std::vector<BranchingPoint> out;
  out.reserve(theta_grid_deg.size());
  for (double theta : theta_grid_deg) {
    if (!(theta >= 0.0 && theta <= 90.0)) {
      throw std::domain_error(fmt::format("scan angle {} outside [0, 90] degrees", theta));
    }
    const FieldConfig field{b_tesla, tilted_theta(theta, misalignment_deg), 0.0};
    out.push_back({theta, branching_at(ground, excited, field)});
  }
  return out;
}

OptimalAngle optimal_angle(const KramersDoublet& ground, const KramersDoublet& excited,
                           double b_tesla, double resolution_deg) {
  if (!(resolution_deg > 0.0)) {
    throw std::invalid_argument("angle resolution must be > 0");
  }
  auto r_at = [&](double theta) {
    return branching_at(ground, excited, FieldConfig{b_tesla, theta, 0.0}).r_parallel;
  };

  const auto steps = static_cast<std::size_t>(std::ceil(90.0 / resolution_deg));
  const double h = 90.0 / static_cast<double>(steps);
  std::size_t best = 0;
  double best_r = r_at(0.0);
  for (std::size_t i = 1; i <= steps; ++i) {
    const double r = r_at(static_cast<double>(i) * h);
    if (r > best_r) {
      best_r = r;
      best = i;
    }
  }

  double lo = best == 0 ? 0.0 : static_cast<double>(best - 1) * h;
  double hi = std::min(90.0, static_cast<double>(best + 1) * h);
  const double inv_phi = (std::sqrt(5.0) - 1.0) / 2.0;
  double x1 = hi - inv_phi * (hi - lo);
  double x2 = lo + inv_phi * (hi - lo);
  double f1 = r_at(x1);
  double f2 = r_at(x2);
  while (hi - lo > 1e-9) {
    if (f1 < f2) {
      lo = x1;
      x1 = x2;
      f1 = f2;
      x2 = lo + inv_phi * (hi - lo);
      f2 = r_at(x2);
    } else {
      hi = x2;
      x2 = x1;
      f2 = f1;
      x1 = hi - inv_phi * (hi - lo);
      f1 = r_at(x1);
    }
  }
  const double theta = 0.5 * (lo + hi);
  const double r = r_at(theta);
  if (r >= best_r) {
    return {theta, r};
  }
  return {static_cast<double>(best) * h, best_r};
}

}  // namespace kramers
