#pragma once

#include <cstddef>
#include <span>
#include <vector>

#include "mpmrf/frequency.hpp"
#include "mpmrf/severity.hpp"

namespace mpmrf {

struct AggregateOptions {
  /// 0 starts from the smallest power of two covering mean + sd_multiplier * sd
  /// and doubles it until the tail check passes.
  std::size_t n_fft = 0;
  double sd_multiplier = 12.0;
  double tail_tolerance = 1e-9;
  Vertex root = 1;
};

struct AggregateDistribution {
  LatticePmf pmf;
  std::vector<double> cdf;
  std::size_t n_fft = 0;
  /// Mass in the top eighth of the grid plus the wrapped mass implied by
  /// the mean defect.
  double tail_mass = 0.0;
  double max_imag_residue = 0.0;
  double mean() const { return pmf.mean(); }
};

/// Sum of lambda_v E[B_v].
double aggregate_mean(const MpmrfParams& params, std::span<const LatticePmf> severities);
/// Cov(X_v, S) for every vertex (index v-1).
std::vector<double> covariance_with_total(const MpmrfParams& params, const Tree& tree,
                                          std::span<const LatticePmf> severities);
double aggregate_variance(const MpmrfParams& params, const Tree& tree,
                          std::span<const LatticePmf> severities);

std::size_t default_n_fft(const MpmrfParams& params, const Tree& tree,
                          std::span<const LatticePmf> severities, double sd_multiplier = 12.0);

/// Throws LatticeMismatch when the steps differ.
double common_step(std::span<const LatticePmf> severities);

AggregateDistribution aggregate_pmf_fft(const MpmrfParams& params, const Tree& tree,
                                        std::span<const LatticePmf> severities,
                                        const AggregateOptions& opts = {});

struct MixedErlangAggregate {
  double beta_max = 0.0;
  /// Pmf of the total number of Exp(beta_max) phases.
  AggregateDistribution phases;
  std::vector<double> cdf;  // F_S on x_grid
};

MixedErlangAggregate aggregate_cdf_mixed_erlang(const MpmrfParams& params, const Tree& tree,
                                                std::span<const MixedErlang> severities,
                                                std::span<const double> x_grid,
                                                const AggregateOptions& opts = {});

struct RiskMeasure {
  double kappa = 0.0;
  double var = 0.0;
  double tvar = 0.0;
  std::size_t var_index = 0;
};

/// VaR is the smallest lattice point whose cdf reaches kappa and is positive.
RiskMeasure var_tvar(const AggregateDistribution& aggregate, double kappa);

}  // namespace mpmrf
