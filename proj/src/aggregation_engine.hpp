#pragma once

#include <memory>
#include <mutex>
#include <span>
#include <vector>

#include "fft.hpp"
#include "mpmrf/aggregation.hpp"

namespace mpmrf::detail {

/// Holds the severity transforms and the transform of S so that expected
/// allocations reuse them.
class AggregationEngine {
 public:
  AggregationEngine(const MpmrfParams& params, const Tree& tree,
                    std::span<const LatticePmf> severities, const AggregateOptions& opts);

  const AggregateDistribution& aggregate() const { return aggregate_; }
  std::size_t n_fft() const { return n_; }
  double step() const { return h_; }

  /// E[X_v 1{S = k h}] for k = 0..n_fft-1.
  std::vector<double> expected_allocation(Vertex v) const;

 private:
  void build();
  std::vector<double> real_part(const cvec& z, const char* what, double* max_imag) const;

  MpmrfParams params_;
  Tree tree_;
  std::vector<LatticePmf> severities_;
  AggregateOptions opts_;
  double h_ = 1.0;
  std::size_t n_ = 0;
  std::unique_ptr<Fft> fft_;
  mutable std::mutex fft_mutex_;
  std::vector<cvec> phi_;
  cvec s_hat_;
  AggregateDistribution aggregate_;
};

}  // namespace mpmrf::detail
