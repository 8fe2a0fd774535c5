#include <doctest.h>

#include <cmath>
#include <numbers>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "kramers/faddeeva.hpp"
#include "kramers/spectrum.hpp"

using namespace kramers;

namespace {

constexpr double fwhm_to_sigma = 1.0 / (2.0 * std::sqrt(2.0 * std::numbers::ln2));

// Convolution of a Gaussian with a Lorentzian by adaptive quadrature, split at
// the Lorentzian center; the Gaussian is negligible beyond 14 sigma.
double voigt_quadrature(double x, double gaussian_fwhm, double lorentzian_fwhm) {
  using boost::math::quadrature::gauss_kronrod;
  const double sigma = gaussian_fwhm * fwhm_to_sigma;
  const double gamma = 0.5 * lorentzian_fwhm;
  auto integrand = [&](double t) {
    const double g = std::exp(-0.5 * (t / sigma) * (t / sigma));
    const double d = x - t;
    return g * gamma / (d * d + gamma * gamma);
  };
  const double lo = -14.0 * sigma;
  const double hi = 14.0 * sigma;
  double sum = 0.0;
  std::vector<double> cuts{lo};
  if (x > lo && x < hi) {
    cuts.push_back(std::max(lo, x - 20.0 * gamma));
    cuts.push_back(x);
    cuts.push_back(std::min(hi, x + 20.0 * gamma));
  }
  cuts.push_back(hi);
  std::sort(cuts.begin(), cuts.end());
  for (std::size_t i = 1; i < cuts.size(); ++i) {
    if (cuts[i] > cuts[i - 1]) {
      sum += gauss_kronrod<double, 61>::integrate(integrand, cuts[i - 1], cuts[i], 20, 1e-14);
    }
  }
  return sum;
}

AbsorptionSpectrum synth_at(double theta, double phi, double depth_pi = 3.33, double depth_sigma = 0.117) {
  const FieldConfig field{0.31, theta};
  const auto g = doublet_eigensystem(nd_yvo4_ground, field);
  const auto e = doublet_eigensystem(nd_yvo4_excited, field);
  const auto table = transition_table(lambda_coefficients(g, e), g.splitting_ghz(), e.splitting_ghz());
  return synthesize_spectrum(table, {2.0, 0.0, 1.0}, depth_pi, depth_sigma, phi,
                             frequency_grid(-10.0, 10.0, 0.01), {0.31, theta, phi});
}

}  // namespace

TEST_CASE("faddeeva function on the axes") {
  CHECK(std::abs(faddeeva({0.0, 0.0}) - 1.0) < 1e-14);
  for (double y : {0.1, 0.7, 2.0, 6.5, 40.0}) {
    const double u = 1.0 / (y * y);
    const double erfcx = y < 20.0 ? std::exp(y * y) * std::erfc(y)
                                  : (1.0 - u / 2 + 3 * u * u / 4 - 15 * u * u * u / 8) / (y * std::sqrt(std::numbers::pi));
    CHECK(std::abs(faddeeva({0.0, y}).real() - erfcx) < 1e-12);
    CHECK(std::abs(faddeeva({0.0, y}).imag()) < 1e-15);
  }
  for (double x : {0.3, 1.5, 4.0}) {
    CHECK(std::abs(faddeeva({x, 0.0}).real() - std::exp(-x * x)) < 1e-13);
  }
  // w(-conj z) = conj w(z)
  const std::complex<double> z{1.3, 0.4};
  CHECK(std::abs(faddeeva(-std::conj(z)) - std::conj(faddeeva(z))) < 1e-14);
}

TEST_CASE("voigt limits") {
  const LineShapeParams gauss{2.0, 0.0, 0.8};
  CHECK(voigt_depth(1.5, 1.5, gauss) == 0.8);
  CHECK(std::abs(voigt_depth(2.5, 1.5, gauss) - 0.4) < 1e-9);
  const LineShapeParams lorentz{0.0, 0.3, 1.2};
  CHECK(std::abs(voigt_depth(-0.15, 0.0, lorentz) - 0.6) < 1e-9);
  const LineShapeParams mixed{2.0, 0.7, 2.62};
  CHECK(std::abs(voigt_depth(0.0, 0.0, mixed) - 2.62) < 1e-12);
  for (double dx : {0.1, 1.0, 3.7}) {
    CHECK(voigt_depth(dx, 0.0, mixed) == doctest::Approx(voigt_depth(-dx, 0.0, mixed)).epsilon(1e-14));
  }
}

TEST_CASE("voigt matches a quadrature convolution out to 50 widths") {
  const std::pair<double, double> widths[] = {{2.0, 0.1}, {2.0, 1.0}, {1.0, 3.0}, {0.5, 0.5}, {2.0, 1e-4}};
  for (const auto& [wg, wl] : widths) {
    const double peak = voigt_quadrature(0.0, wg, wl);
    const double span = 50.0 * std::max(wg, wl);
    for (int i = 0; i <= 200; ++i) {
      const double x = span * i / 200.0;
      const double expected = voigt_quadrature(x, wg, wl) / peak;
      const double got = voigt_depth(x, 0.0, {wg, wl, 1.0});
      CHECK(std::abs(got - expected) <= 1e-6 * expected);
    }
  }
}

TEST_CASE("polarization law") {
  CHECK(polarization_depth(0.75, 0.07, 0.0) == 0.75);
  CHECK(std::abs(polarization_depth(0.75, 0.070, 90.0) - 0.070) < 1e-12);
  const double direct = -std::log(0.5 * std::exp(-2.62) + 0.5 * std::exp(-0.025));
  CHECK(std::abs(polarization_depth(2.62, 0.025, 45.0) - direct) < 1e-12);
  CHECK(std::abs(polarization_depth(2.62, 0.025, 45.0) - 0.6461560) < 1e-6);

  for (double phi = 0.0; phi <= 180.0; phi += 7.0) {
    const double d = polarization_depth(2.62, 0.025, phi);
    CHECK(d >= 0.025 - 1e-12);
    CHECK(d <= 2.62 + 1e-12);
    CHECK(std::abs(d - polarization_depth(2.62, 0.025, phi + 180.0)) < 1e-12);
    CHECK(std::abs(polarization_depth(2.62, 0.025, 90.0 + phi) - polarization_depth(2.62, 0.025, 90.0 - phi)) <
          1e-12);
    const double small_par = 0.01;
    const double small_perp = 0.004;
    const double c2 = std::pow(std::cos(phi * std::numbers::pi / 180.0), 2);
    const double linear = small_par * c2 + small_perp * (1.0 - c2);
    CHECK(std::abs(polarization_depth(small_par, small_perp, phi) - linear) < small_par * small_par);
  }
  // exponential factors never underflow to an infinite depth
  CHECK(std::isfinite(polarization_depth(900.0, 800.0, 30.0)));
}

TEST_CASE("transmission") {
  AbsorptionSpectrum s{{0.0, 1.0, 2.0}, {0.0, 2.62, 3.0}, {}};
  const auto t = transmission(s, 2.0);
  CHECK(t[0] == 2.0);
  CHECK(std::abs(t[1] / 2.0 - std::exp(-2.62)) < 1e-15);
  CHECK(std::abs(t[1] / 2.0 - 0.0728) < 1e-4);
  CHECK(t[2] < t[1]);
  CHECK_THROWS_AS(transmission(s, 0.0), std::invalid_argument);
}

TEST_CASE("frequency grid") {
  const auto g = frequency_grid(-1.0, 1.0, 0.5);
  REQUIRE(g.size() == 5);
  CHECK(g.back() == 1.0);
  CHECK(frequency_grid(0.0, 0.0, 1.0).size() == 1);
  CHECK_THROWS_AS(frequency_grid(0.0, 1.0, 0.0), std::invalid_argument);
  CHECK_THROWS_AS(frequency_grid(1.0, 0.0, 0.1), std::invalid_argument);
}

TEST_CASE("peak finding") {
  const std::vector<double> y{0, 1, 0, 3, 3, 0, 0.5, 0.45, 0.6, 0};
  const auto all = find_peaks(y, 0.0);
  REQUIRE(all.size() == 4);
  CHECK(y[all[0]] == 3.0);
  const auto prominent = find_peaks(y, 0.2);
  CHECK(prominent.size() == 3);
}

TEST_CASE("four resolved lines at 45 degrees") {
  const auto s = synth_at(45.0, 0.0);
  const auto peaks = find_peaks(s.depth, 0.01);
  REQUIRE(peaks.size() == 4);
  std::vector<double> where;
  for (auto i : peaks) {
    where.push_back(s.frequency_ghz[i]);
  }
  std::sort(where.begin(), where.end());
  // overlap pulls the maxima slightly toward each other
  CHECK(std::abs(where[0] + 5.67) < 0.15);
  CHECK(std::abs(where[1] + 2.10) < 0.15);
  CHECK(std::abs(where[2] - 2.10) < 0.15);
  CHECK(std::abs(where[3] - 5.67) < 0.15);
}

TEST_CASE("inner pair merges along the axis") {
  const auto s = synth_at(0.0, 0.0);
  CHECK(find_peaks(s.depth, 0.01).size() == 1);
  const auto sigma = synth_at(0.0, 90.0);
  // sigma light along the axis sees only the outer pair
  CHECK(find_peaks(sigma.depth, 1e-4).size() == 2);
}

TEST_CASE("polarization endpoints select pi or sigma strengths") {
  const FieldConfig field{0.31, 45.0};
  const auto g = doublet_eigensystem(nd_yvo4_ground, field);
  const auto e = doublet_eigensystem(nd_yvo4_excited, field);
  const auto table = transition_table(lambda_coefficients(g, e), g.splitting_ghz(), e.splitting_ghz());
  const std::vector<double> grid = frequency_grid(-8.0, 8.0, 0.25);
  const LineShapeParams shape{2.0, 0.3, 1.0};
  const auto pi = synthesize_spectrum(table, shape, 3.0, 0.2, 0.0, grid);
  const auto sigma = synthesize_spectrum(table, shape, 3.0, 0.2, 90.0, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double expect_pi = 0.0;
    double expect_sigma = 0.0;
    for (const auto& line : table.lines) {
      const double v = voigt_depth(grid[i], line.offset_ghz, shape);
      expect_pi += 3.0 * line.strength_pi * v;
      expect_sigma += 0.2 * line.strength_sigma * v;
    }
    CHECK(std::abs(pi.depth[i] - expect_pi) < 1e-12);
    CHECK(std::abs(sigma.depth[i] - expect_sigma) < 1e-12);
  }

  const auto zero = synthesize_spectrum(table, shape, 0.0, 0.0, 30.0, grid);
  for (double d : zero.depth) {
    CHECK(d == 0.0);
  }
  const auto with_background = synthesize_spectrum(table, shape, 0.0, 0.0, 30.0, grid, {}, 0.1);
  CHECK(with_background.depth[3] == doctest::Approx(0.1));
  CHECK_THROWS_AS(synthesize_spectrum(table, shape, -1.0, 0.0, 0.0, grid), std::invalid_argument);
  CHECK_THROWS_AS(synthesize_spectrum(table, {0.0, 0.0, 1.0}, 1.0, 0.0, 0.0, grid), std::invalid_argument);
  CHECK_THROWS_AS(synthesize_spectrum(table, {-1.0, 0.5, 1.0}, 1.0, 0.0, 0.0, grid), std::invalid_argument);
}
