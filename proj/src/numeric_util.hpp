#pragma once

#include <algorithm>
#include <cmath>
#include <limits>
#include <span>

namespace mpmrf {

inline double log_factorial(double n) { return std::lgamma(n + 1.0); }

inline double log_choose(double n, double k) {
  return log_factorial(n) - log_factorial(k) - log_factorial(n - k);
}

inline double log_poisson_pmf(long long k, double mean) {
  if (k < 0) return -std::numeric_limits<double>::infinity();
  if (mean == 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  return static_cast<double>(k) * std::log(mean) - mean - log_factorial(static_cast<double>(k));
}

inline double log_binomial_pmf(long long k, long long n, double p) {
  if (k < 0 || k > n) return -std::numeric_limits<double>::infinity();
  if (p == 0.0) return k == 0 ? 0.0 : -std::numeric_limits<double>::infinity();
  if (p == 1.0) return k == n ? 0.0 : -std::numeric_limits<double>::infinity();
  return log_choose(static_cast<double>(n), static_cast<double>(k)) +
         static_cast<double>(k) * std::log(p) + static_cast<double>(n - k) * std::log1p(-p);
}

inline double log_sum_exp(std::span<const double> terms) {
  if (terms.empty()) return -std::numeric_limits<double>::infinity();
  const double m = *std::max_element(terms.begin(), terms.end());
  if (!std::isfinite(m)) return m;
  double s = 0.0;
  for (double t : terms) s += std::exp(t - m);
  return m + std::log(s);
}

}  // namespace mpmrf
