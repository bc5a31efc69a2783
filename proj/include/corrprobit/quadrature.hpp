#pragma once

#include <cstddef>
#include <functional>
#include <vector>

namespace corrprobit {

struct QuadratureOptions {
  double abs_tol = 1e-12;
  std::size_t max_segments = 400;
};

struct QuadratureResult {
  double value = 0.0;
  double error = 0.0;
  std::size_t segments = 0;
  bool converged = false;
};

// Globally adaptive 15-point Gauss-Kronrod integration over the listed breakpoints.
QuadratureResult integrate_adaptive(const std::function<double(double)>& f, const std::vector<double>& breakpoints,
                                    const QuadratureOptions& options);

struct GaussLegendreRule {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};

const GaussLegendreRule& gauss_legendre(std::size_t order);

}  // namespace corrprobit
