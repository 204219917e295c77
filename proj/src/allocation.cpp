#include "mpmrf/allocation.hpp"

#include <cmath>
#include <numeric>
#include <string>

#include "aggregation_engine.hpp"
#include "mpmrf/error.hpp"

namespace mpmrf {

namespace detail {

std::vector<double> AggregationEngine::expected_allocation(Vertex v) const {
  const RootedModel model = make_rooted_model(params_, tree_, v, {.allow_independence = true});
  const LatticePmf& sev = severities_[v - 1];
  const LatticePmf biased = size_biased(sev);

  std::lock_guard<std::mutex> lock(fft_mutex_);
  const cvec phi_star = fft_->forward_real(biased.p);
  const auto order = model.tree.topo_order();
  std::vector<std::complex<double>> H(tree_.num_vertices());
  cvec product(n_);
  for (std::size_t j = 0; j < n_; ++j) {
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Vertex w = *it;
      std::complex<double> value = w == v ? phi_star[j] : phi_[w - 1][j];
      for (Vertex c : model.tree.children(w)) {
        const double th = model.theta[c - 1];
        value *= (1.0 - th) + th * H[c - 1];
      }
      H[w - 1] = value;
    }
    product[j] = H[v - 1] * s_hat_[j];
  }
  auto a = real_part(fft_->inverse(product), "expected allocation", nullptr);
  const double scale = params_.lambda[v - 1] * sev.mean();
  for (auto& x : a) x *= scale;
  return a;
}

}  // namespace detail

double ExpectedAllocation::total() const { return std::accumulate(a.begin(), a.end(), 0.0); }

AllocationEngine::AllocationEngine(const MpmrfParams& params, const Tree& tree,
                                   std::span<const LatticePmf> severities,
                                   const AggregateOptions& opts)
    : params_(params),
      tree_(tree),
      severities_(severities.begin(), severities.end()),
      engine_(std::make_unique<detail::AggregationEngine>(params, tree, severities, opts)) {}

AllocationEngine::~AllocationEngine() = default;
AllocationEngine::AllocationEngine(AllocationEngine&&) noexcept = default;
AllocationEngine& AllocationEngine::operator=(AllocationEngine&&) noexcept = default;

const AggregateDistribution& AllocationEngine::aggregate() const { return engine_->aggregate(); }

ExpectedAllocation AllocationEngine::expected_allocations(Vertex v) const {
  if (!tree_.contains(v)) throw Error(Errc::VertexOutOfRange, "vertex " + std::to_string(v));
  return {v, engine_->step(), engine_->expected_allocation(v)};
}

std::vector<ExpectedAllocation> AllocationEngine::all_expected_allocations() const {
  std::vector<ExpectedAllocation> out;
  for (Vertex v = 1; v <= tree_.num_vertices(); ++v) out.push_back(expected_allocations(v));
  return out;
}

ExpectedAllocation expected_allocations(const MpmrfParams& params, const Tree& tree,
                                        std::span<const LatticePmf> severities, Vertex v,
                                        const AggregateOptions& opts) {
  return AllocationEngine(params, tree, severities, opts).expected_allocations(v);
}

double tvar_contribution_euler(const ExpectedAllocation& alloc, const AggregateDistribution& agg,
                               double kappa) {
  const RiskMeasure rm = var_tvar(agg, kappa);
  const std::size_t m = rm.var_index;
  double above = 0.0;
  for (std::size_t k = m + 1; k < alloc.a.size(); ++k) above += alloc.a[k];
  const double pm = agg.pmf.p[m];
  const double correction = pm > 0.0 ? (agg.cdf[m] - kappa) / pm * alloc.a[m] : 0.0;
  return (above + correction) / (1.0 - kappa);
}

std::vector<double> tvar_contribution_euler(std::span<const ExpectedAllocation> allocations,
                                            const AggregateDistribution& agg, double kappa) {
  std::vector<double> out;
  out.reserve(allocations.size());
  for (const auto& a : allocations) out.push_back(tvar_contribution_euler(a, agg, kappa));
  return out;
}

namespace {

std::vector<double> covariance_rule(std::span<const double> means, std::span<const double> cov,
                                    double var_s, double mean_s, double tvar) {
  if (!(var_s > 0.0)) throw Error(Errc::ZeroVariance, "aggregate variance is zero");
  std::vector<double> out(means.size());
  for (std::size_t i = 0; i < means.size(); ++i) {
    out[i] = means[i] + cov[i] / var_s * (tvar - mean_s);
  }
  return out;
}

}  // namespace

std::vector<double> covariance_contribution(const MpmrfParams& params, const Tree& tree,
                                            std::span<const LatticePmf> severities,
                                            const AggregateDistribution& agg, double kappa) {
  const auto cov = covariance_with_total(params, tree, severities);
  const double var_s = std::accumulate(cov.begin(), cov.end(), 0.0);
  std::vector<double> means(severities.size());
  for (std::size_t i = 0; i < means.size(); ++i) means[i] = params.lambda[i] * severities[i].mean();
  const double mean_s = std::accumulate(means.begin(), means.end(), 0.0);
  return covariance_rule(means, cov, var_s, mean_s, var_tvar(agg, kappa).tvar);
}

std::vector<double> covariance_contribution_marginal(const MpmrfParams& params,
                                                     std::span<const LatticePmf> severities,
                                                     const AggregateDistribution& agg,
                                                     double kappa) {
  std::vector<double> means(severities.size());
  std::vector<double> var(severities.size());
  for (std::size_t i = 0; i < means.size(); ++i) {
    means[i] = params.lambda[i] * severities[i].mean();
    var[i] = params.lambda[i] * severities[i].second_moment();
  }
  const double var_s = std::accumulate(var.begin(), var.end(), 0.0);
  const double mean_s = std::accumulate(means.begin(), means.end(), 0.0);
  return covariance_rule(means, var, var_s, mean_s, var_tvar(agg, kappa).tvar);
}

std::vector<double> conditional_mean_sharing(std::span<const ExpectedAllocation> allocations,
                                             const AggregateDistribution& agg, std::size_t k) {
  if (k >= agg.pmf.p.size() || !(agg.pmf.p[k] > 0.0)) {
    throw Error(Errc::ZeroMassOutcome, "outcome " + std::to_string(k) + " has no mass");
  }
  std::vector<double> out;
  out.reserve(allocations.size());
  for (const auto& a : allocations) out.push_back(a.a.at(k) / agg.pmf.p[k]);
  return out;
}

std::vector<double> linear_sharing(const MpmrfParams& params, const Tree& tree,
                                   std::span<const LatticePmf> severities, LinearRule rule) {
  const std::size_t d = severities.size();
  std::vector<double> out(d);
  if (rule == LinearRule::Proportional) {
    const double mean_s = aggregate_mean(params, severities);
    if (!(mean_s > 0.0)) throw Error(Errc::ZeroMean, "aggregate mean is zero");
    for (std::size_t i = 0; i < d; ++i) out[i] = params.lambda[i] * severities[i].mean() / mean_s;
    return out;
  }
  const auto cov = covariance_with_total(params, tree, severities);
  const double var_s = std::accumulate(cov.begin(), cov.end(), 0.0);
  if (!(var_s > 0.0)) throw Error(Errc::ZeroVariance, "aggregate variance is zero");
  for (std::size_t i = 0; i < d; ++i) out[i] = cov[i] / var_s;
  return out;
}

AllocationReport allocation_report(const AllocationEngine& engine,
                                   std::span<const ExpectedAllocation> allocations, double kappa) {
  const auto& agg = engine.aggregate();
  const RiskMeasure rm = var_tvar(agg, kappa);
  const auto euler = tvar_contribution_euler(allocations, agg, kappa);
  const auto cov =
      covariance_contribution(engine.params(), engine.tree(), engine.severities(), agg, kappa);
  const double euler_total = std::accumulate(euler.begin(), euler.end(), 0.0);
  const double cov_total = std::accumulate(cov.begin(), cov.end(), 0.0);
  AllocationReport report{kappa, rm.var, rm.tvar, {}};
  for (std::size_t i = 0; i < allocations.size(); ++i) {
    const Vertex v = allocations[i].vertex;
    report.rows.push_back({v, euler[i], cov[v - 1], 100.0 * euler[i] / euler_total,
                           100.0 * cov[v - 1] / cov_total});
  }
  return report;
}

}  // namespace mpmrf
