#pragma once

#include <memory>
#include <span>
#include <vector>

#include "mpmrf/aggregation.hpp"

namespace mpmrf {

namespace detail {
class AggregationEngine;
}

/// a[k] = E[X_v 1{S = k h}].
struct ExpectedAllocation {
  Vertex vertex = 0;
  double h = 1.0;
  std::vector<double> a;

  double total() const;
};

/// Shares the severity and aggregate transforms across vertices.
class AllocationEngine {
 public:
  AllocationEngine(const MpmrfParams& params, const Tree& tree,
                   std::span<const LatticePmf> severities, const AggregateOptions& opts = {});
  ~AllocationEngine();
  AllocationEngine(AllocationEngine&&) noexcept;
  AllocationEngine& operator=(AllocationEngine&&) noexcept;

  const AggregateDistribution& aggregate() const;
  ExpectedAllocation expected_allocations(Vertex v) const;
  std::vector<ExpectedAllocation> all_expected_allocations() const;

  const MpmrfParams& params() const { return params_; }
  const Tree& tree() const { return tree_; }
  std::span<const LatticePmf> severities() const { return severities_; }

 private:
  MpmrfParams params_;
  Tree tree_;
  std::vector<LatticePmf> severities_;
  std::unique_ptr<detail::AggregationEngine> engine_;
};

ExpectedAllocation expected_allocations(const MpmrfParams& params, const Tree& tree,
                                        std::span<const LatticePmf> severities, Vertex v,
                                        const AggregateOptions& opts = {});

/// Euler TVaR contribution with the lattice correction at VaR.
double tvar_contribution_euler(const ExpectedAllocation& allocation,
                               const AggregateDistribution& aggregate, double kappa);
std::vector<double> tvar_contribution_euler(std::span<const ExpectedAllocation> allocations,
                                            const AggregateDistribution& aggregate, double kappa);

/// E[X_v] + Cov(X_v, S) / Var(S) * (TVaR - E[S]) with exact covariances.
std::vector<double> covariance_contribution(const MpmrfParams& params, const Tree& tree,
                                            std::span<const LatticePmf> severities,
                                            const AggregateDistribution& aggregate, double kappa);
/// Same rule with the cross covariances dropped (Cov(X_v, S) replaced by
/// Var(X_v)).
std::vector<double> covariance_contribution_marginal(const MpmrfParams& params,
                                                     std::span<const LatticePmf> severities,
                                                     const AggregateDistribution& aggregate,
                                                     double kappa);

/// E[X_v | S = k h] for every allocation. Throws ZeroMassOutcome.
std::vector<double> conditional_mean_sharing(std::span<const ExpectedAllocation> allocations,
                                             const AggregateDistribution& aggregate,
                                             std::size_t k);

enum class LinearRule { Proportional, Regression };

std::vector<double> linear_sharing(const MpmrfParams& params, const Tree& tree,
                                   std::span<const LatticePmf> severities, LinearRule rule);

struct AllocationRow {
  Vertex vertex = 0;
  double euler = 0.0;
  double covariance = 0.0;
  double euler_share_pct = 0.0;
  double covariance_share_pct = 0.0;
};

struct AllocationReport {
  double kappa = 0.0;
  double var = 0.0;
  double tvar = 0.0;
  std::vector<AllocationRow> rows;
};

AllocationReport allocation_report(const AllocationEngine& engine,
                                   std::span<const ExpectedAllocation> allocations, double kappa);

}  // namespace mpmrf
