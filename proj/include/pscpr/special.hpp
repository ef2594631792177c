// Log-domain modified Bessel function of the first kind, order zero.

#pragma once

#include <cmath>
#include <limits>
#include <numbers>

namespace pscpr {

namespace detail {

inline constexpr double kLogI0Switch = 20.0;

// I0(x) = sum_k (x^2/4)^k / (k!)^2; all terms positive so no cancellation.
inline double i0_series(double x) {
  const double q = 0.25 * x * x;
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 500; ++k) {
    term *= q / (static_cast<double>(k) * k);
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return sum;
}

// log of the asymptotic series sum_k c_k / x^k, c_k = ((2k-1)!!)^2 / (k! 8^k).
// The series diverges eventually, so stop at the smallest term.
inline double log_i0_asymptotic_tail(double x) {
  double term = 1.0, sum = 1.0;
  for (int k = 1; k < 60; ++k) {
    const double next = term * (2.0 * k - 1.0) * (2.0 * k - 1.0) / (8.0 * k * x);
    if (next > term) break;
    term = next;
    sum += term;
    if (term < sum * 1e-17) break;
  }
  return std::log(sum);
}

}  // namespace detail

/// log(I0(x)) - |x|, finite for every finite x.
inline double log_i0_scaled(double x) {
  x = std::fabs(x);
  if (x < detail::kLogI0Switch) return std::log(detail::i0_series(x)) - x;
  return -0.5 * std::log(2.0 * std::numbers::pi * x) + detail::log_i0_asymptotic_tail(x);
}

/// log(I0(x)).
inline double log_i0(double x) { return log_i0_scaled(x) + std::fabs(x); }

}  // namespace pscpr
