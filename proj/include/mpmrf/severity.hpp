#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mpmrf {

/// Masses at 0, h, 2h, ...
struct LatticePmf {
  double h = 1.0;
  std::vector<double> p;

  std::size_t size() const { return p.size(); }
  double total() const;
  double mean() const;
  double second_moment() const;
  double variance() const;
};

/// Generalized Pareto law of the values above threshold u.
struct Gpd {
  double xi = 0.0;
  double sigma = 1.0;
  double u = 0.0;

  double survival(double x) const;
};

struct Moments {
  double mean = 0.0;
  double variance = 0.0;
};

/// Throws InfiniteMoment for xi >= 1 (mean) or xi >= 1/2 (variance).
Moments gpd_moments(const Gpd& gpd);

/// Mass at k*h is S(k*h) - S((k+1)*h) for k*h >= u; the last cell also takes
/// the mass beyond the grid. Fails when more than `tail_tolerance` survives
/// beyond n_cells*h.
LatticePmf dgpd_pmf(const Gpd& gpd, double h, std::size_t n_cells, double tail_tolerance = 1e-9);
/// Picks the smallest n_cells meeting the tail tolerance.
LatticePmf dgpd_pmf(const Gpd& gpd, double h, double tail_tolerance = 1e-9);
std::size_t dgpd_cells_needed(const Gpd& gpd, double h, double tail_tolerance = 1e-9);

struct GpdFit {
  Gpd gpd;
  double loglik = 0.0;
  std::size_t n_exceedances = 0;
  bool converged = false;
  bool at_boundary = false;
  double se_xi = 0.0;
  double se_sigma = 0.0;
};

/// Maximum likelihood for the excesses of `values` above `threshold`
/// (values at or below the threshold are ignored).
GpdFit gpd_fit_mle(std::span<const double> values, double threshold);

/// p*(x) = x p(x) / E[B]. Throws ZeroMean.
LatticePmf size_biased(const LatticePmf& pmf);

/// Weights[k-1] is the probability of k exponential phases of rate beta.
struct MixedErlang {
  double beta = 1.0;
  std::vector<double> weights;

  double mean() const;
  double second_moment() const;
  double variance() const { return second_moment() - mean() * mean(); }
  double laplace(double s) const;
};

struct CommonRateResult {
  double beta_max = 0.0;
  /// Pmf of the number of Exp(beta_max) phases, lattice step 1; mass at 0 is 0.
  std::vector<LatticePmf> phase_counts;
};

CommonRateResult mixed_erlang_common_rate(std::span<const MixedErlang> models,
                                          double tail_tolerance = 1e-14);

/// Severity with masses at the given values, each a non-negative multiple of h.
LatticePmf discrete_pmf(std::span<const double> values, std::span<const double> masses,
                        double h);
/// Number of failures before the r-th success, success probability p, first n cells.
LatticePmf negbinom_pmf(double r, double p, std::size_t n);

}  // namespace mpmrf
