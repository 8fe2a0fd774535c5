#include <doctest.h>

#include <cmath>
#include <complex>
#include <numbers>

#include "kramers/branching.hpp"

using namespace kramers;

namespace {

constexpr double deg = std::numbers::pi / 180.0;

double chi(const GTensor& g, double theta_deg) {
  return std::atan2(std::abs(g.g_perpendicular) * std::sin(theta_deg * deg),
                    std::abs(g.g_parallel) * std::cos(theta_deg * deg));
}

double closed_form_r(const GTensor& ground, const GTensor& excited, double theta_deg) {
  const double t = std::tan(0.5 * (chi(ground, theta_deg) - chi(excited, theta_deg)));
  return t * t;
}

LambdaCoefficients coefficients_at(double theta_deg, double b = 0.31) {
  const FieldConfig field{b, theta_deg};
  return lambda_coefficients(doublet_eigensystem(nd_yvo4_ground, field),
                             doublet_eigensystem(nd_yvo4_excited, field));
}

TransitionTable table_at(double theta_deg, double b = 0.31) {
  const FieldConfig field{b, theta_deg};
  const auto g = doublet_eigensystem(nd_yvo4_ground, field);
  const auto e = doublet_eigensystem(nd_yvo4_excited, field);
  return transition_table(lambda_coefficients(g, e), g.splitting_ghz(), e.splitting_ghz());
}

}  // namespace

TEST_CASE("lambda coefficients at the special angles") {
  const auto c0 = coefficients_at(0.0);
  CHECK(std::abs(std::abs(c0.alpha) - 1.0) < 1e-12);
  CHECK(std::abs(c0.beta_coefficient) < 1e-12);
  CHECK(std::abs(c0.gamma) < 1e-12);
  CHECK(std::abs(std::abs(c0.delta) - 1.0) < 1e-12);

  const auto c90 = coefficients_at(90.0);
  for (auto v : {c90.alpha, c90.beta_coefficient, c90.gamma, c90.delta}) {
    CHECK(std::abs(std::abs(v) - std::sqrt(0.5)) < 1e-12);
  }

  const auto c45 = coefficients_at(45.0);
  const double chi_g = std::atan(2.361 / 0.915);
  CHECK(std::abs(std::abs(c45.alpha) - std::cos(chi_g / 2)) < 1e-9);
  CHECK(std::abs(std::abs(c45.beta_coefficient) - std::sin(chi_g / 2)) < 1e-9);
}

TEST_CASE("lambda coefficients require a common field") {
  const auto g = doublet_eigensystem(nd_yvo4_ground, {0.31, 45.0});
  const auto e = doublet_eigensystem(nd_yvo4_excited, {0.31, 44.0});
  CHECK_THROWS_AS(lambda_coefficients(g, e), std::invalid_argument);
}

TEST_CASE("branching ratios at the reference angles") {
  CHECK(branching_ratios(coefficients_at(0.0)).r_parallel == 0.0);
  CHECK(branching_ratios(coefficients_at(0.0)).perpendicular_infinite);
  CHECK(std::abs(branching_ratios(coefficients_at(45.0)).r_parallel - 0.270) < 0.001);
  CHECK(std::abs(branching_ratios(coefficients_at(51.0)).r_parallel - 0.278) < 0.001);
  CHECK(branching_ratios(coefficients_at(90.0)).r_parallel < 1e-9);
}

TEST_CASE("diagonalization agrees with the closed form") {
  for (double t = 0.0; t <= 90.0; t += 1.0) {
    const auto r = branching_ratios(coefficients_at(t));
    CHECK(std::abs(r.r_parallel - closed_form_r(nd_yvo4_ground_g, nd_yvo4_excited_g, t)) < 1e-9);
    if (t > 0.0 && t < 90.0) {
      CHECK(std::abs(r.r_parallel * r.r_perpendicular - 1.0) < 1e-9);
    }
  }
}

TEST_CASE("ratios are invariant under global phases") {
  const auto c = coefficients_at(37.0);
  const auto base = branching_ratios(c);
  const std::complex<double> p1 = std::polar(1.0, 0.7);
  const std::complex<double> p2 = std::polar(1.0, -2.1);
  const auto r = branching_ratios({c.alpha * p1, c.beta_coefficient * p1, c.gamma * p2, c.delta * p2});
  CHECK(std::abs(r.r_parallel - base.r_parallel) < 1e-12);
  CHECK(std::abs(r.r_perpendicular - base.r_perpendicular) < 1e-12);
}

TEST_CASE("transition table at 45 degrees") {
  const auto t = table_at(45.0);
  CHECK(std::abs(t['a'].offset_ghz + 5.67) < 0.02);
  CHECK(std::abs(t['b'].offset_ghz + 2.10) < 0.02);
  CHECK(std::abs(t['c'].offset_ghz - 2.10) < 0.02);
  CHECK(std::abs(t['d'].offset_ghz - 5.67) < 0.02);
  CHECK(std::abs(t['a'].offset_ghz + t['d'].offset_ghz) < 1e-9);
  CHECK(std::abs(t['b'].offset_ghz + t['c'].offset_ghz) < 1e-9);
  CHECK(t['a'].spin_flip);
  CHECK(t['d'].spin_flip);
  CHECK_FALSE(t['b'].spin_flip);
  CHECK_FALSE(t['c'].spin_flip);
  // outer over inner pi strength is the branching ratio
  CHECK(std::abs(t['a'].strength_pi / t['b'].strength_pi - branching_ratios(coefficients_at(45.0)).r_parallel) <
        1e-12);
  CHECK_THROWS_AS(t['e'], std::out_of_range);
}

TEST_CASE("transition table along the axis") {
  const auto t = table_at(0.0);
  CHECK(t['a'].strength_pi == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(t['d'].strength_pi == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(std::abs(t['c'].offset_ghz - (4.904 - 3.971) / 2) < 0.001);
  CHECK(std::abs(t['c'].offset_ghz - 0.466) < 0.001);
}

TEST_CASE("strength sums per polarization do not depend on the angle") {
  for (double theta = 0.0; theta <= 90.0; theta += 2.5) {
    const auto t = table_at(theta);
    double pi = 0.0;
    double sigma = 0.0;
    for (const auto& line : t.lines) {
      CHECK(line.strength_pi >= 0.0);
      CHECK(line.strength_sigma >= 0.0);
      pi += line.strength_pi;
      sigma += line.strength_sigma;
    }
    CHECK(std::abs(pi - 2.0) < 1e-9);
    CHECK(std::abs(sigma - 2.0) < 1e-9);
    for (std::size_t i = 1; i < t.lines.size(); ++i) {
      CHECK(t.lines[i - 1].offset_ghz <= t.lines[i].offset_ghz);
    }
  }
  CHECK_THROWS_AS(transition_table(coefficients_at(10.0), -1.0, 1.0), std::invalid_argument);
}

TEST_CASE("branching scan") {
  CHECK(branching_scan(nd_yvo4_ground, nd_yvo4_excited, 0.31, {}).empty());

  const auto at0 = branching_scan(nd_yvo4_ground, nd_yvo4_excited, 0.31, {0.0});
  REQUIRE(at0.size() == 1);
  CHECK(at0[0].ratios.r_parallel == 0.0);
  CHECK(std::isinf(at0[0].ratios.r_perpendicular));

  const auto at45 = branching_scan(nd_yvo4_ground, nd_yvo4_excited, 0.31, {45.0});
  CHECK(std::abs(at45[0].ratios.r_parallel - 0.270) < 0.001);
  CHECK(std::abs(at45[0].ratios.r_perpendicular - 3.70) < 0.02);

  CHECK(branching_scan(nd_yvo4_ground, nd_yvo4_excited, 0.31, {90.0})[0].ratios.r_parallel < 1e-9);
  CHECK_THROWS_AS(branching_scan(nd_yvo4_ground, nd_yvo4_excited, 0.31, {95.0}), std::domain_error);
}

TEST_CASE("misalignment tilts the field angle") {
  CHECK(tilted_theta(0.0, 2.0) == 2.0);
  CHECK(tilted_theta(1.0, -3.0) == 2.0);
  CHECK_THROWS_AS(tilted_theta(89.0, 2.0), std::domain_error);
  const auto tilted = branching_scan(nd_yvo4_ground, nd_yvo4_excited, 0.31, {0.0}, 3.0);
  CHECK(std::abs(tilted[0].ratios.r_parallel - closed_form_r(nd_yvo4_ground_g, nd_yvo4_excited_g, 3.0)) < 1e-12);
  CHECK(tilted[0].ratios.r_parallel > 0.0);
}

TEST_CASE("optimal angle") {
  const auto best = optimal_angle(nd_yvo4_ground, nd_yvo4_excited, 0.31, 1.0);
  CHECK(std::abs(best.theta_deg - 51.0) < 0.5);
  CHECK(std::abs(best.r_parallel - 0.278) < 0.001);

  // same anisotropy in both doublets: the mixing angles coincide everywhere
  const KramersDoublet scaled{{2.0 * nd_yvo4_ground_g.g_parallel, 2.0 * nd_yvo4_ground_g.g_perpendicular},
                              BasisMapping::swapped};
  const auto flat = optimal_angle(nd_yvo4_ground, scaled, 0.31, 1.0);
  CHECK(flat.r_parallel < 1e-12);

  const KramersDoublet other{{-2.0, -0.5}, BasisMapping::swapped};
  double brute_theta = 0.0;
  double brute_r = -1.0;
  for (int i = 0; i <= 9000; ++i) {
    const double t = 0.01 * i;
    const double r = closed_form_r(nd_yvo4_ground_g, other.g, t);
    if (r > brute_r) {
      brute_r = r;
      brute_theta = t;
    }
  }
  const auto refined = optimal_angle(nd_yvo4_ground, other, 0.31, 0.5);
  CHECK(std::abs(refined.theta_deg - brute_theta) < 0.02);
  CHECK(refined.r_parallel >= brute_r - 1e-12);

  CHECK_THROWS_AS(optimal_angle(nd_yvo4_ground, nd_yvo4_excited, 0.31, 0.0), std::invalid_argument);
}
