#ifndef KRAMERS_FADDEEVA_HPP
#define KRAMERS_FADDEEVA_HPP

#include <complex>

namespace kramers {

/// Scaled complementary error function w(z) = exp(-z^2) erfc(-iz),
/// Poppe & Wijers algorithm (about 14 significant digits).
/// Throws std::overflow_error where w(z) is not representable (deep lower half plane).
std::complex<double> faddeeva(std::complex<double> z);

}  // namespace kramers

#endif
