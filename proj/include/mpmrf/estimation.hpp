#pragma once

#include <chrono>
#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "mpmrf/frequency.hpp"

namespace mpmrf {

struct DailyValue {
  std::chrono::year_month_day date;
  std::optional<double> value;  // empty when missing
};

struct ClusterEvent {
  std::chrono::year_month_day start;
  int length = 0;  // days
  double severity = 0.0;
};

struct DeclusterResult {
  std::vector<ClusterEvent> events;
  /// cluster length in days -> number of clusters
  std::map<int, int> cluster_sizes;
};

/// Runs of consecutive values strictly above the threshold become one event
/// with the run maximum as severity. Missing values break runs.
DeclusterResult decluster(std::span<const std::optional<double>> values, double threshold);
/// Same on dated values (sorted by date); a calendar gap also breaks a run.
DeclusterResult decluster(std::span<const DailyValue> series, double threshold);

struct DailyRecord {
  std::string station;
  std::chrono::year_month_day date;
  std::optional<double> value;
};

struct DeclusterOptions {
  /// Years where some station misses more than this fraction of the
  /// season's days are dropped for every station.
  double max_missing_fraction = 0.10;
  unsigned season_first_month = 5;
  unsigned season_last_month = 9;
  /// Count only events that start inside the season.
  bool season_only = false;
};

struct StationEvents {
  std::string station;
  double threshold = 0.0;
  std::vector<ClusterEvent> events;
  std::map<int, int> cluster_sizes;
};

struct EventSeries {
  std::vector<std::string> stations;
  std::vector<int> years;             // retained years, ascending
  std::vector<int> dropped_years;
  CountMatrix counts;                 // years x stations
  std::vector<StationEvents> per_station;
};

/// Events belong to the year in which their cluster starts.
EventSeries decluster_stations(std::span<const DailyRecord> records,
                               const std::map<std::string, double>& thresholds,
                               const DeclusterOptions& opts = {});

struct GofResult {
  double statistic = 0.0;
  int bins = 0;
  int dof = 0;
  double p_value = 0.0;
};

/// Chi-squared test against Poisson(sample mean); adjacent bins are pooled
/// until each expects at least 5 observations. Throws TooFewPeriods (n < 20).
GofResult poisson_gof(std::span<const int> counts);

/// Sample Pearson correlations between columns. Throws ZeroVariance.
WeightedGraph pearson_correlation_matrix(const CountMatrix& counts,
                                         std::vector<std::string> labels = {});

struct InformationCriteria {
  double aic = 0.0;
  double aicc = 0.0;
  double bic = 0.0;
};

/// k free parameters, n observations. Throws SampleTooSmall when n <= k + 1.
InformationCriteria information_criteria(double loglik, int k, std::int64_t n);

struct FitOptions {
  std::optional<MpmrfParams> init;
  double size_tol = 1e-8;
  int max_restarts = 6;
};

struct FitResult {
  MpmrfParams params;
  double loglik = 0.0;
  double loglik_init = 0.0;
  InformationCriteria criteria;
  int n_params = 0;
  std::int64_t n_obs = 0;
  bool converged = false;
  int evaluations = 0;
  int restarts = 0;
};

/// Joint maximum likelihood over (log lambda, alpha = bound * logistic(beta)).
/// Throws InvalidData for empty or all-zero columns and NonConvergence (the
/// message carries the best point reached).
FitResult fit_mpmrf(const Tree& tree, const CountMatrix& counts, const FitOptions& opts = {});

/// Column means and alpha = min(0.9 * bound, max(correlation, 0.01 * bound)).
MpmrfParams moment_start(const Tree& tree, const CountMatrix& counts);

enum class BootstrapKind { Parametric, ResampleYears };

struct BootstrapOptions {
  BootstrapKind kind = BootstrapKind::Parametric;
  /// Required for ResampleYears.
  const CountMatrix* data = nullptr;
  double max_failure_fraction = 0.05;
};

struct BootstrapResult {
  BootstrapKind kind = BootstrapKind::Parametric;
  std::vector<double> se_lambda;           // index v-1
  std::map<Edge, double> se_alpha;
  int replicates = 0;
  int failures = 0;
};

BootstrapResult bootstrap_se(const Tree& tree, const MpmrfParams& fitted, std::int64_t n_periods,
                             int n_boot, std::uint64_t seed, const BootstrapOptions& opts = {});

}  // namespace mpmrf
