#include "cortexfit/numerics.hpp"

#include "cortexfit/types.hpp"

namespace cortexfit {

// Nodes are the roots of the Legendre polynomial P_n, found by Newton
// iteration from the Chebyshev-based initial guess; weights follow from the
// derivative value at the root.
QuadratureRule gauss_legendre(int order, double a, double b) {
  if (order < 1) throw Error("gauss_legendre: order must be >= 1");
  const int n = order;
  QuadratureRule rule;
  rule.nodes.resize(n);
  rule.weights.resize(n);

  const int half = (n + 1) / 2;
  for (int i = 0; i < half; ++i) {
    double x = std::cos(std::numbers::pi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      // Legendre recurrence: (k+1) P_{k+1} = (2k+1) x P_k - k P_{k-1}
      double p0 = 1.0, p1 = x;
      for (int k = 1; k < n; ++k) {
        const double p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
      }
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-15) break;
    }
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    rule.nodes[i] = -x;
    rule.weights[i] = w;
    rule.nodes[n - 1 - i] = x;
    rule.weights[n - 1 - i] = w;
  }

  const double mid = 0.5 * (a + b);
  const double halfwidth = 0.5 * (b - a);
  for (int i = 0; i < n; ++i) {
    rule.nodes[i] = mid + halfwidth * rule.nodes[i];
    rule.weights[i] *= halfwidth;
  }
  return rule;
}

}  // namespace cortexfit
