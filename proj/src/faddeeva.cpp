#include "kramers/faddeeva.hpp"

#include <cmath>
#include <stdexcept>

namespace kramers {

std::complex<double> faddeeva(std::complex<double> z) {
  constexpr double factor = 1.12837916709551257388;  // 2/sqrt(pi)
  constexpr double rmaxreal = 0.5e154;
  constexpr double rmaxexp = 708.503061461606;
  constexpr double rmaxgoni = 3.53711887601422e15;

  const double xi = z.real();
  const double yi = z.imag();
  const double xabs = std::abs(xi);
  const double yabs = std::abs(yi);
  if (xabs > rmaxreal || yabs > rmaxreal) {
    throw std::overflow_error("faddeeva: argument too large");
  }

  const double x = xabs / 6.3;
  const double y = yabs / 4.4;
  double qrho = x * x + y * y;
  const double xquad = xabs * xabs - yabs * yabs;
  const double yquad = 2.0 * xabs * yabs;

  double u = 0.0;
  double v = 0.0;
  double u2 = 0.0;
  double v2 = 0.0;
  const bool near_origin = qrho < 0.085264;

  if (near_origin) {
    // power series of the complementary error function
    qrho = (1.0 - 0.85 * y) * std::sqrt(qrho);
    const int n = static_cast<int>(std::lround(6.0 + 72.0 * qrho));
    int j = 2 * n + 1;
    double xsum = 1.0 / j;
    double ysum = 0.0;
    for (int i = n; i >= 1; --i) {
      j -= 2;
      const double xaux = (xsum * xquad - ysum * yquad) / i;
      ysum = (xsum * yquad + ysum * xquad) / i;
      xsum = xaux + 1.0 / j;
    }
    const double u1 = -factor * (xsum * yabs + ysum * xabs) + 1.0;
    const double v1 = factor * (xsum * xabs - ysum * yabs);
    const double daux = std::exp(-xquad);
    u2 = daux * std::cos(yquad);
    v2 = -daux * std::sin(yquad);
    u = u1 * u2 - v1 * v2;
    v = u1 * v2 + v1 * u2;
  } else {
    // Laplace continued fraction, with truncated Taylor expansion in the
    // intermediate region
    double h = 0.0;
    double h2 = 0.0;
    int kapn = 0;
    int nu = 0;
    if (qrho > 1.0) {
      qrho = std::sqrt(qrho);
      nu = static_cast<int>(3.0 + 1442.0 / (26.0 * qrho + 77.0));
    } else {
      qrho = (1.0 - y) * std::sqrt(1.0 - qrho);
      h = 1.88 * qrho;
      h2 = 2.0 * h;
      kapn = static_cast<int>(std::lround(7.0 + 34.0 * qrho));
      nu = static_cast<int>(std::lround(16.0 + 26.0 * qrho));
    }
    const bool taylor = h > 0.0;
    double qlambda = taylor ? std::pow(h2, kapn) : 0.0;

    double rx = 0.0;
    double ry = 0.0;
    double sx = 0.0;
    double sy = 0.0;
    for (int n = nu; n >= 0; --n) {
      const double np1 = n + 1.0;
      double tx = yabs + h + np1 * rx;
      const double ty = xabs - np1 * ry;
      const double c = 0.5 / (tx * tx + ty * ty);
      rx = c * tx;
      ry = c * ty;
      if (taylor && n <= kapn) {
        tx = qlambda + sx;
        sx = rx * tx - ry * sy;
        sy = ry * tx + rx * sy;
        qlambda /= h2;
      }
    }
    if (h == 0.0) {
      u = factor * rx;
      v = factor * ry;
    } else {
      u = factor * sx;
      v = factor * sy;
    }
    if (yabs == 0.0) {
      u = std::exp(-xabs * xabs);
    }
  }

  if (yi < 0.0) {
    if (near_origin) {
      u2 *= 2.0;
      v2 *= 2.0;
    } else {
      const double mxquad = -xquad;
      if (yquad > rmaxgoni || mxquad > rmaxexp) {
        throw std::overflow_error("faddeeva: result not representable");
      }
      const double w1 = 2.0 * std::exp(mxquad);
      u2 = w1 * std::cos(yquad);
      v2 = -w1 * std::sin(yquad);
    }
    u = u2 - u;
    v = v2 - v;
    if (xi > 0.0) {
      v = -v;
    }
  } else if (xi < 0.0) {
    v = -v;
  }
  return {u, v};
}

}  // namespace kramers
