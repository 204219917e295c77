#include "mpmrf/aggregation.hpp"

#include <boost/math/special_functions/gamma.hpp>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <complex>
#include <string>

#include "aggregation_engine.hpp"
#include "mpmrf/error.hpp"

namespace mpmrf {

double common_step(std::span<const LatticePmf> severities) {
  if (severities.empty()) throw Error(Errc::InvalidParams, "no severities given");
  const double h = severities.front().h;
  for (const auto& s : severities) {
    if (std::abs(s.h - h) > 1e-12 * h) {
      throw Error(Errc::LatticeMismatch, "severities use different lattice steps");
    }
  }
  return h;
}

double aggregate_mean(const MpmrfParams& params, std::span<const LatticePmf> severities) {
  if (severities.size() != params.lambda.size()) {
    throw Error(Errc::InvalidParams, "need one severity per vertex");
  }
  double m = 0.0;
  for (std::size_t i = 0; i < severities.size(); ++i) m += params.lambda[i] * severities[i].mean();
  return m;
}

std::vector<double> covariance_with_total(const MpmrfParams& params, const Tree& tree,
                                          std::span<const LatticePmf> severities) {
  const int d = tree.num_vertices();
  if (static_cast<int>(severities.size()) != d) {
    throw Error(Errc::InvalidParams, "need one severity per vertex");
  }
  const auto rho = correlation_matrix(params, tree);
  std::vector<double> mean(d);
  std::vector<double> sqrt_lambda(d);
  for (int i = 0; i < d; ++i) {
    mean[i] = severities[i].mean();
    sqrt_lambda[i] = std::sqrt(params.lambda[i]);
  }
  std::vector<double> out(d, 0.0);
  for (int u = 0; u < d; ++u) {
    double s = params.lambda[u] * severities[u].second_moment();
    for (int w = 0; w < d; ++w) {
      if (w == u) continue;
      s += mean[u] * mean[w] * sqrt_lambda[u] * sqrt_lambda[w] * rho[u][w];
    }
    out[u] = s;
  }
  return out;
}

double aggregate_variance(const MpmrfParams& params, const Tree& tree,
                          std::span<const LatticePmf> severities) {
  double v = 0.0;
  for (double c : covariance_with_total(params, tree, severities)) v += c;
  return v;
}

std::size_t default_n_fft(const MpmrfParams& params, const Tree& tree,
                          std::span<const LatticePmf> severities, double sd_multiplier) {
  const double h = common_step(severities);
  const double reach =
      aggregate_mean(params, severities) +
      sd_multiplier * std::sqrt(std::max(0.0, aggregate_variance(params, tree, severities)));
  std::size_t longest = 1;
  for (const auto& s : severities) longest = std::max(longest, s.size());
  const double cells = std::max(reach / h + 1.0, static_cast<double>(longest));
  std::size_t n = 2;
  while (static_cast<double>(n) < cells) n <<= 1;
  return n;
}

namespace detail {

namespace {
constexpr std::size_t kAutoFftCap = std::size_t{1} << 26;
}

AggregationEngine::AggregationEngine(const MpmrfParams& params, const Tree& tree,
                                     std::span<const LatticePmf> severities,
                                     const AggregateOptions& opts)
    : params_(params), tree_(tree), severities_(severities.begin(), severities.end()), opts_(opts) {
  require_valid(params, tree, {.allow_independence = true});
  if (static_cast<int>(severities_.size()) != tree.num_vertices()) {
    throw Error(Errc::InvalidParams, "need one severity per vertex");
  }
  h_ = common_step(severities_);
  n_ = opts.n_fft ? opts.n_fft : default_n_fft(params, tree, severities_, opts.sd_multiplier);
  if (n_ < 2 || (n_ & (n_ - 1)) != 0) {
    throw Error(Errc::ArgumentOutOfRange, "n_fft must be a power of two");
  }
  while (true) {
    try {
      build();
      return;
    } catch (const Error& e) {
      if (opts.n_fft || e.code() != Errc::TailMassTooLarge || n_ >= kAutoFftCap) throw;
      n_ *= 2;
    }
  }
}

void AggregationEngine::build() {
  const AggregateOptions& opts = opts_;
  const MpmrfParams& params = params_;
  const Tree& tree = tree_;
  fft_ = std::make_unique<Fft>(n_);
  phi_.clear();
  phi_.reserve(severities_.size());
  for (const auto& s : severities_) phi_.push_back(fft_->forward_real(s.p));

  const RootedModel model = make_rooted_model(params, tree, opts.root, {.allow_independence = true});
  cvec s_hat(n_);
  std::vector<std::complex<double>> H(tree.num_vertices());
  const auto order = model.tree.topo_order();
  for (std::size_t j = 0; j < n_; ++j) {
    std::complex<double> exponent = 0.0;
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      const Vertex v = *it;
      std::complex<double> value = phi_[v - 1][j];
      for (Vertex c : model.tree.children(v)) {
        const double th = model.theta[c - 1];
        value *= (1.0 - th) + th * H[c - 1];
      }
      H[v - 1] = value;
      exponent += model.zeta[v - 1] * (value - 1.0);
    }
    s_hat[j] = std::exp(exponent);
  }
  s_hat_ = std::move(s_hat);

  const cvec p = fft_->inverse(s_hat_);
  aggregate_.n_fft = n_;
  aggregate_.pmf.h = h_;
  aggregate_.pmf.p = real_part(p, "aggregate pmf", &aggregate_.max_imag_residue);

  const double expected_mean = aggregate_mean(params, severities_);
  const double fft_mean = aggregate_.pmf.mean();
  const double wrapped = std::max(0.0, (expected_mean - fft_mean) / (static_cast<double>(n_) * h_));
  double top = 0.0;
  for (std::size_t k = n_ - n_ / 8; k < n_; ++k) top += aggregate_.pmf.p[k];
  aggregate_.tail_mass = top + wrapped;
  if (aggregate_.tail_mass > opts.tail_tolerance) {
    char buf[160];
    std::snprintf(buf, sizeof buf,
                  "n_fft = %zu leaves tail mass %.3g (top %.3g, wrapped %.3g); try n_fft = %zu "
                  "or larger",
                  n_, aggregate_.tail_mass, top, wrapped, 2 * n_);
    throw Error(Errc::TailMassTooLarge, buf);
  }
  aggregate_.cdf.resize(n_);
  double c = 0.0;
  for (std::size_t k = 0; k < n_; ++k) {
    c += aggregate_.pmf.p[k];
    aggregate_.cdf[k] = c;
  }
}

std::vector<double> AggregationEngine::real_part(const cvec& z, const char* what,
                                                 double* max_imag) const {
  std::vector<double> out(z.size());
  double imag = 0.0;
  for (std::size_t k = 0; k < z.size(); ++k) {
    double r = z[k].real();
    imag = std::max(imag, std::abs(z[k].imag()));
    if (r < 0.0) {
      if (r < -1e-12) {
        throw Error(Errc::NumericalFailure, std::string(what) + " has value " +
                                                std::to_string(r) + " at index " +
                                                std::to_string(k));
      }
      r = 0.0;
    }
    out[k] = r;
  }
  if (max_imag) *max_imag = imag;
  return out;
}

}  // namespace detail

AggregateDistribution aggregate_pmf_fft(const MpmrfParams& params, const Tree& tree,
                                        std::span<const LatticePmf> severities,
                                        const AggregateOptions& opts) {
  return detail::AggregationEngine(params, tree, severities, opts).aggregate();
}

MixedErlangAggregate aggregate_cdf_mixed_erlang(const MpmrfParams& params, const Tree& tree,
                                                std::span<const MixedErlang> severities,
                                                std::span<const double> x_grid,
                                                const AggregateOptions& opts) {
  const auto common = mixed_erlang_common_rate(severities);
  MixedErlangAggregate out;
  out.beta_max = common.beta_max;
  out.phases = aggregate_pmf_fft(params, tree, common.phase_counts, opts);
  const auto& pw = out.phases.pmf.p;
  out.cdf.reserve(x_grid.size());
  for (double x : x_grid) {
    if (x < 0.0) {
      out.cdf.push_back(0.0);
      continue;
    }
    double f = pw[0];
    const double bx = common.beta_max * x;
    for (std::size_t k = 1; k < pw.size(); ++k) {
      if (pw[k] == 0.0) continue;
      const double g = bx > 0.0 ? boost::math::gamma_p(static_cast<double>(k), bx) : 0.0;
      f += pw[k] * g;
    }
    out.cdf.push_back(std::min(1.0, f));
  }
  return out;
}

RiskMeasure var_tvar(const AggregateDistribution& agg, double kappa) {
  if (!(kappa >= 0.0 && kappa < 1.0)) {
    throw Error(Errc::InvalidKappa, "kappa must lie in [0, 1)");
  }
  const auto& cdf = agg.cdf;
  const auto it =
      std::find_if(cdf.begin(), cdf.end(), [kappa](double c) { return c >= kappa && c > 0.0; });
  if (it == cdf.end()) throw Error(Errc::InvalidKappa, "kappa beyond the computed cdf");
  const std::size_t m = static_cast<std::size_t>(it - cdf.begin());
  const double h = agg.pmf.h;
  double upper = 0.0;
  for (std::size_t k = m + 1; k < agg.pmf.p.size(); ++k) {
    upper += static_cast<double>(k) * h * agg.pmf.p[k];
  }
  RiskMeasure r;
  r.kappa = kappa;
  r.var_index = m;
  r.var = static_cast<double>(m) * h;
  r.tvar = (upper + r.var * (cdf[m] - kappa)) / (1.0 - kappa);
  return r;
}

}  // namespace mpmrf
