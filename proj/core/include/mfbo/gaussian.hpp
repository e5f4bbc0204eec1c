#pragma once

#include <cmath>

namespace mfbo {

inline constexpr double two_pi = 6.283185307179586476925286766559;

/// Standard normal density.
inline double norm_pdf(double z) {
  return std::exp(-0.5 * z * z) / std::sqrt(two_pi);
}

/// Standard normal CDF via erfc; accurate down to the denormal range for
/// negative arguments.
inline double norm_cdf(double z) {
  return 0.5 * std::erfc(-z / std::sqrt(2.0));
}

/// log Phi(z). Direct evaluation where Phi does not underflow, Mills-ratio
/// asymptotic expansion in the deep lower tail.
inline double log_norm_cdf(double z) {
  if (z > -8.0) {
    return std::log(norm_cdf(z));
  }
  const double z2 = z * z;
  // Phi(z) = phi(z)/(-z) * (1 - 1/z^2 + 3/z^4 - 15/z^6 + ...)
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - 0.5 * std::log(two_pi) - std::log(-z) + std::log(series);
}

/// Gaussian log density log N(y | mean, var).
inline double gaussian_log_density(double y, double mean, double var) {
  const double r = y - mean;
  return -0.5 * std::log(two_pi * var) - 0.5 * r * r / var;
}

}  // namespace mfbo
