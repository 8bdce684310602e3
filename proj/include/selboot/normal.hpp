#pragma once

#include <cmath>
#include <limits>
#include <numbers>

#include <boost/math/distributions/students_t.hpp>
#include <boost/math/special_functions/erf.hpp>

#include "error.hpp"

// Standard normal tail functions. Upper-tail (survival) forms are used
// throughout because selective p-values are ratios of upper tails.
namespace selboot::normal {

inline double density(double z) noexcept {
  return std::exp(-0.5 * z * z) / std::sqrt(2.0 * std::numbers::pi);
}

// Upper tail 1 - Phi(z).
inline double upper_tail(double z) noexcept {
  if (z == std::numeric_limits<double>::infinity()) return 0.0;
  if (z == -std::numeric_limits<double>::infinity()) return 1.0;
  return 0.5 * std::erfc(z / std::numbers::sqrt2);
}

inline double cdf(double z) noexcept { return upper_tail(-z); }

// log(1 - Phi(z)), finite for every finite z. Beyond z = 30 erfc is close to
// underflow, so the Mills ratio continued fraction takes over.
inline double log_upper_tail(double z) noexcept {
  if (z == std::numeric_limits<double>::infinity()) return -std::numeric_limits<double>::infinity();
  if (z == -std::numeric_limits<double>::infinity()) return 0.0;
  if (z < 0.0) return std::log1p(-0.5 * std::erfc(-z / std::numbers::sqrt2));
  if (z < 30.0) return std::log(0.5 * std::erfc(z / std::numbers::sqrt2));
  // R(z) = 1/(z + 1/(z + 2/(z + 3/(z + ...)))), evaluated bottom-up.
  double tail = z;
  for (int k = 80; k >= 1; --k) tail = z + k / tail;
  return -0.5 * z * z - 0.5 * std::log(2.0 * std::numbers::pi) - std::log(tail);
}

// Inverse of upper_tail: returns z with 1 - Phi(z) = p.
inline double upper_tail_inv(double p) {
  require(p >= 0.0 && p <= 1.0, "upper_tail_inv: probability outside [0, 1]");
  if (p == 0.0) return std::numeric_limits<double>::infinity();
  if (p == 1.0) return -std::numeric_limits<double>::infinity();
  return std::numbers::sqrt2 * boost::math::erfc_inv(2.0 * p);
}

// Upper tail of Student's t with `dof` degrees of freedom.
inline double student_upper_tail(double t, double dof) {
  const boost::math::students_t dist(dof);
  return boost::math::cdf(boost::math::complement(dist, t));
}

inline double student_upper_tail_inv(double p, double dof) {
  const boost::math::students_t dist(dof);
  return boost::math::quantile(boost::math::complement(dist, p));
}

}  // namespace selboot::normal
