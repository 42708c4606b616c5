#pragma once

#include <cmath>
#include <numbers>

#include <boost/math/distributions/normal.hpp>

namespace dte {

inline double norm_pdf(double x) {
  return std::exp(-0.5 * x * x) / std::sqrt(2.0 * std::numbers::pi);
}

inline double norm_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

// Upper tail 1 - Φ(x), accurate for large x.
inline double norm_sf(double x) {
  return 0.5 * std::erfc(x / std::numbers::sqrt2);
}

inline double norm_quantile(double p) {
  static const boost::math::normal standard;
  return boost::math::quantile(standard, p);
}

// z_p with P(Z > z_p) = p, i.e. Φ⁻¹(1 - p).
inline double upper_quantile(double p) {
  static const boost::math::normal standard;
  return boost::math::quantile(boost::math::complement(standard, p));
}

}  // namespace dte
