#pragma once

#include <cmath>
#include <numbers>
#include <utility>
#include <vector>

namespace cortexfit {

inline double deg_to_rad(double deg) { return deg * std::numbers::pi / 180.0; }

inline double normal_pdf(double x, double mean, double sd) {
  const double u = (x - mean) / sd;
  return std::exp(-0.5 * u * u) / (sd * std::sqrt(2.0 * std::numbers::pi));
}

/// CDF of the standard normal distribution.
inline double normal_cdf(double x) {
  return 0.5 * std::erfc(-x / std::numbers::sqrt2);
}

struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
};

/// Gauss-Legendre rule with `order` nodes on [a, b].
QuadratureRule gauss_legendre(int order, double a, double b);

}  // namespace cortexfit
