#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <vector>

#include "mpmrf/aggregation.hpp"

namespace mpmrf {

/// Events start at the root (mean lambda_r) and spread along a regular tree
/// of degree chi with the same alpha on every edge.
struct SplashParams {
  double lambda_r = 1.0;
  double alpha = 0.5;
  int chi = 3;
};

struct SplashOptions {
  /// Evaluate or simulate even when (chi - 1) alpha^2 > 1.
  bool allow_supercritical = false;
  /// Accept alpha == 0.
  bool allow_independence = false;
};

/// (chi - 1) alpha^2 <= 1.
bool splash_is_finite(const SplashParams& params);

/// p_M(0..x_max) from the Poisson mixture of branching-process progeny laws.
std::vector<double> splash_total_pmf(const SplashParams& params, int x_max,
                                     SplashOptions opts = {});
/// Single-sum closed form, p_M(0..x_max).
std::vector<double> splash_total_pmf_closed_form(const SplashParams& params, int x_max,
                                                 SplashOptions opts = {});
/// lambda_r * sum_i (individuals at distance i) * alpha^(2i), truncated when
/// the next term falls below tol.
double splash_mean_series(const SplashParams& params, double tol = 1e-14);

struct SplashSimulation {
  std::vector<std::int64_t> totals;  // replications that stayed under the cap
  std::int64_t replications = 0;
  std::int64_t cap_exceeded = 0;
  double cap_exceed_rate() const {
    return replications ? static_cast<double>(cap_exceeded) / static_cast<double>(replications)
                        : 0.0;
  }
};

SplashSimulation splash_simulate(const SplashParams& params, std::int64_t n, std::uint64_t seed,
                                 std::int64_t cap = 10'000'000, SplashOptions opts = {});

double generalized_poisson_pmf(double lambda_r, double theta, int x);
std::vector<double> generalized_poisson_pmf(double lambda_r, double theta, int x_min, int x_max);

/// Total variation between a pmf and a reference pmf, summed up to the point
/// where the reference reaches cumulative 1 - 1e-6 and closed with the
/// remaining mass of both.
double total_variation(std::span<const double> pmf, std::span<const double> reference);

struct GpLimitReport {
  int chi = 0;
  double alpha = 0.0;
  double tv_closed_form = 0.0;
  double tv_simulated = 0.0;
  std::int64_t replications = 0;
  std::int64_t cap_exceeded = 0;
};

/// alpha = sqrt(theta / chi).
GpLimitReport gp_limit_check(double lambda_r, double theta, int chi, std::int64_t n,
                             std::uint64_t seed);

MpmrfParams homogeneous_params(const Tree& tree, double lambda, double alpha);

struct AverageLossCurve {
  int d = 0;
  double step = 0.0;  // h / d
  std::vector<double> cdf;
  double mean = 0.0;
  double variance = 0.0;
};

using ParamsRule = std::function<MpmrfParams(const Tree&)>;

/// Cdf of S/d for each tree, every vertex carrying the same severity.
std::vector<AverageLossCurve> average_loss_distribution(std::span<const Tree> trees,
                                                        const ParamsRule& rule,
                                                        const LatticePmf& severity,
                                                        const AggregateOptions& opts = {});

/// Var(S / d) from the closed-form covariances.
double variance_of_average(const MpmrfParams& params, const Tree& tree,
                           std::span<const LatticePmf> severities);

/// Per-vertex infinite-lattice bound on d * Var(S/d) for trees whose degrees
/// do not exceed chi, means at most lambda_sup and alphas at most alpha_sup,
/// all with severity moments (mean_b, second_b). Requires (chi-1) alpha_sup < 1.
double bethe_variance_bound(int chi, double lambda_sup, double alpha_sup, double mean_b,
                            double second_b);

}  // namespace mpmrf
