#pragma once

#include <functional>
#include <span>
#include <vector>

namespace mpmrf::detail {

struct MinimizeResult {
  std::vector<double> x;
  double f = 0.0;
  int iterations = 0;
  bool converged = false;
};

using Objective = std::function<double(std::span<const double>)>;

/// Nelder-Mead simplex. Non-finite objective values are treated as a large
/// penalty.
MinimizeResult nelder_mead(const Objective& f, std::vector<double> x0,
                           std::vector<double> step, double size_tol = 1e-9,
                           int max_iter = 20000);

/// BFGS with central-difference gradients; converged when the gradient norm
/// falls below grad_tol.
MinimizeResult quasi_newton(const Objective& f, std::vector<double> x0, double grad_tol = 1e-6,
                            int max_iter = 500);

}  // namespace mpmrf::detail
