#include "mpmrf/severity.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "mpmrf/error.hpp"
#include "numeric_util.hpp"
#include "optimize.hpp"

namespace mpmrf {

namespace {

constexpr double kXiZero = 1e-12;
constexpr double kXiLow = -0.5;
constexpr double kXiSpan = 1.45;  // xi in (-0.5, 0.95)

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

double gpd_excess_survival(double xi, double sigma, double y) {
  if (y <= 0.0) return 1.0;
  if (std::abs(xi) < kXiZero) return std::exp(-y / sigma);
  const double base = 1.0 + xi * y / sigma;
  if (base <= 0.0) return 0.0;
  return std::exp(-std::log(base) / xi);
}

double gpd_neg_loglik(std::span<const double> excess, double xi, double sigma) {
  if (!(sigma > 0.0)) return INFINITY;
  const double n = static_cast<double>(excess.size());
  double s = n * std::log(sigma);
  if (std::abs(xi) < kXiZero) {
    for (double y : excess) s += y / sigma;
    return s;
  }
  for (double y : excess) {
    const double base = 1.0 + xi * y / sigma;
    if (base <= 0.0) return INFINITY;
    s += (1.0 + 1.0 / xi) * std::log(base);
  }
  return s;
}

}  // namespace

double LatticePmf::total() const { return std::accumulate(p.begin(), p.end(), 0.0); }

double LatticePmf::mean() const {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) s += static_cast<double>(k) * p[k];
  return s * h;
}

double LatticePmf::second_moment() const {
  double s = 0.0;
  for (std::size_t k = 0; k < p.size(); ++k) {
    const double x = static_cast<double>(k);
    s += x * x * p[k];
  }
  return s * h * h;
}

double LatticePmf::variance() const {
  const double m = mean();
  return second_moment() - m * m;
}

double Gpd::survival(double x) const { return gpd_excess_survival(xi, sigma, x - u); }

Moments gpd_moments(const Gpd& g) {
  if (g.xi >= 1.0) throw Error(Errc::InfiniteMoment, "GPD mean is infinite for xi >= 1");
  if (g.xi >= 0.5) throw Error(Errc::InfiniteMoment, "GPD variance is infinite for xi >= 1/2");
  const double a = 1.0 - g.xi;
  return {g.u + g.sigma / a, g.sigma * g.sigma / (a * a * (1.0 - 2.0 * g.xi))};
}

namespace {

long long threshold_index(const Gpd& g, double h) {
  if (!(h > 0.0)) throw Error(Errc::ArgumentOutOfRange, "lattice step must be positive");
  if (!(g.sigma > 0.0) || g.u < 0.0) throw Error(Errc::InvalidParams, "GPD needs sigma > 0, u >= 0");
  const double r = g.u / h;
  const double k = std::round(r);
  if (std::abs(r - k) > 1e-9 * std::max(1.0, std::abs(r))) {
    throw Error(Errc::ThresholdNotOnLattice,
                "threshold " + std::to_string(g.u) + " is not a multiple of h = " + std::to_string(h));
  }
  return static_cast<long long>(k);
}

}  // namespace

std::size_t dgpd_cells_needed(const Gpd& g, double h, double tail_tolerance) {
  const long long ku = threshold_index(g, h);
  double reach;
  if (g.xi < -kXiZero) {
    reach = -g.sigma / g.xi;
  } else if (g.xi <= kXiZero) {
    reach = -g.sigma * std::log(tail_tolerance);
  } else {
    reach = g.sigma * (std::pow(tail_tolerance, -g.xi) - 1.0) / g.xi;
  }
  std::size_t n = static_cast<std::size_t>(ku) + static_cast<std::size_t>(std::ceil(reach / h)) + 2;
  while (gpd_excess_survival(g.xi, g.sigma, static_cast<double>(n - ku) * h) > tail_tolerance) {
    n += n / 8 + 1;
  }
  return n;
}

LatticePmf dgpd_pmf(const Gpd& g, double h, std::size_t n_cells, double tail_tolerance) {
  const long long ku = threshold_index(g, h);
  const double tail =
      gpd_excess_survival(g.xi, g.sigma, (static_cast<double>(n_cells) - ku) * h);
  if (static_cast<long long>(n_cells) <= ku || tail > tail_tolerance) {
    throw Error(Errc::TailMassTooLarge,
                "GPD mass beyond " + std::to_string(n_cells) + " cells is " + std::to_string(tail) +
                    "; need at least " + std::to_string(dgpd_cells_needed(g, h, tail_tolerance)) +
                    " cells");
  }
  LatticePmf out{h, std::vector<double>(n_cells, 0.0)};
  double prev = 1.0;
  for (std::size_t k = static_cast<std::size_t>(ku); k < n_cells; ++k) {
    const double next =
        gpd_excess_survival(g.xi, g.sigma, (static_cast<double>(k + 1) - ku) * h);
    out.p[k] = prev - next;
    prev = next;
  }
  out.p.back() += prev;
  return out;
}

LatticePmf dgpd_pmf(const Gpd& g, double h, double tail_tolerance) {
  return dgpd_pmf(g, h, dgpd_cells_needed(g, h, tail_tolerance), tail_tolerance);
}

GpdFit gpd_fit_mle(std::span<const double> values, double threshold) {
  std::vector<double> excess;
  for (double x : values) {
    if (x > threshold) excess.push_back(x - threshold);
  }
  if (excess.size() < 30) {
    throw Error(Errc::TooFewExceedances,
                std::to_string(excess.size()) + " exceedances; at least 30 required");
  }
  const double n = static_cast<double>(excess.size());
  const double mean = std::accumulate(excess.begin(), excess.end(), 0.0) / n;
  double ss = 0.0;
  for (double y : excess) ss += (y - mean) * (y - mean);
  if (ss <= 1e-24 * mean * mean * n) {
    throw Error(Errc::NonConvergence, "all excesses are equal; GPD likelihood has no maximum");
  }

  const detail::Objective objective = [&excess](std::span<const double> z) {
    const double sigma = std::exp(z[0]);
    const double xi = kXiLow + kXiSpan * logistic(z[1]);
    return gpd_neg_loglik(excess, xi, sigma);
  };

  detail::MinimizeResult best;
  best.f = INFINITY;
  for (double xi0 : {-0.2, 0.0, 0.2, 0.5}) {
    const double sigma0 = mean * (1.0 - xi0);
    std::vector<double> z0{std::log(sigma0), logit((xi0 - kXiLow) / kXiSpan)};
    auto r = detail::nelder_mead(objective, z0, {0.3, 0.5}, 1e-10);
    r = detail::nelder_mead(objective, r.x, {0.05, 0.1}, 1e-10);
    if (r.f < best.f) best = r;
  }
  if (!std::isfinite(best.f) || best.f >= 1e99) {
    throw Error(Errc::NonConvergence, "GPD likelihood search found no feasible point");
  }

  GpdFit fit;
  fit.gpd = {kXiLow + kXiSpan * logistic(best.x[1]), std::exp(best.x[0]), threshold};
  fit.loglik = -best.f;
  fit.n_exceedances = excess.size();
  fit.converged = best.converged;
  fit.at_boundary = fit.gpd.xi < kXiLow + 1e-3 || fit.gpd.xi > kXiLow + kXiSpan - 1e-3;
  const double xi = fit.gpd.xi;
  if (xi > -0.5) {
    fit.se_xi = (1.0 + xi) / std::sqrt(n);
    fit.se_sigma = fit.gpd.sigma * std::sqrt(2.0 * (1.0 + xi) / n);
  }
  return fit;
}

LatticePmf size_biased(const LatticePmf& pmf) {
  const double m = pmf.mean();
  if (!(m > 0.0)) throw Error(Errc::ZeroMean, "size-biased transform needs a positive mean");
  LatticePmf out{pmf.h, std::vector<double>(pmf.size(), 0.0)};
  for (std::size_t k = 0; k < pmf.size(); ++k) {
    out.p[k] = static_cast<double>(k) * pmf.h * pmf.p[k] / m;
  }
  return out;
}

double MixedErlang::mean() const {
  double s = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) s += weights[k] * static_cast<double>(k + 1);
  return s / beta;
}

double MixedErlang::second_moment() const {
  double s = 0.0;
  for (std::size_t k = 0; k < weights.size(); ++k) {
    const double j = static_cast<double>(k + 1);
    s += weights[k] * j * (j + 1.0);
  }
  return s / (beta * beta);
}

double MixedErlang::laplace(double s) const {
  const double r = beta / (beta + s);
  double out = 0.0;
  double power = 1.0;
  for (double w : weights) {
    power *= r;
    out += w * power;
  }
  return out;
}

CommonRateResult mixed_erlang_common_rate(std::span<const MixedErlang> models,
                                          double tail_tolerance) {
  CommonRateResult out;
  for (const auto& m : models) {
    if (!(m.beta > 0.0) || !std::isfinite(m.beta)) {
      throw Error(Errc::InvalidRate, "mixed Erlang rate must be positive");
    }
    const double total = std::accumulate(m.weights.begin(), m.weights.end(), 0.0);
    if (m.weights.empty() || std::abs(total - 1.0) > 1e-9 ||
        std::any_of(m.weights.begin(), m.weights.end(), [](double w) { return w < 0.0; })) {
      throw Error(Errc::NormalizationError, "mixed Erlang weights must form a probability vector");
    }
    out.beta_max = std::max(out.beta_max, m.beta);
  }
  constexpr std::size_t kMaxCells = 50'000'000;
  for (const auto& m : models) {
    const double q = m.beta / out.beta_max;
    const std::size_t kmax = m.weights.size();
    LatticePmf pmf{1.0, std::vector<double>(kmax + 1, 0.0)};
    if (q >= 1.0) {
      for (std::size_t k = 1; k <= kmax; ++k) pmf.p[k] = m.weights[k - 1];
      out.phase_counts.push_back(std::move(pmf));
      continue;
    }
    // Each component k is a negative binomial count of trials: x >= k,
    // p(x) = C(x-1, k-1) q^k (1-q)^(x-k).
    const double log1mq = std::log1p(-q);
    double cumulative = 0.0;
    std::size_t x = 1;
    while (true) {
      if (x >= pmf.p.size()) pmf.p.resize(pmf.p.size() * 2, 0.0);
      double mass = 0.0;
      for (std::size_t k = 1; k <= std::min(kmax, x); ++k) {
        const double w = m.weights[k - 1];
        if (w == 0.0) continue;
        const double lp = log_choose(static_cast<double>(x - 1), static_cast<double>(k - 1)) +
                          static_cast<double>(k) * std::log(q) +
                          static_cast<double>(x - k) * log1mq;
        mass += w * std::exp(lp);
      }
      pmf.p[x] = mass;
      cumulative += mass;
      if (x >= kmax && 1.0 - cumulative < tail_tolerance) break;
      if (static_cast<double>(x) > 2.0 * static_cast<double>(kmax) / q &&
          mass < 1e-3 * tail_tolerance) {
        break;
      }
      if (++x > kMaxCells) {
        throw Error(Errc::TailMassTooLarge, "phase-count pmf did not reach the tail tolerance");
      }
    }
    pmf.p.resize(x + 1);
    out.phase_counts.push_back(std::move(pmf));
  }
  return out;
}

LatticePmf discrete_pmf(std::span<const double> values, std::span<const double> masses,
                        double h) {
  if (!(h > 0.0)) throw Error(Errc::ArgumentOutOfRange, "lattice step must be positive");
  if (values.size() != masses.size() || values.empty()) {
    throw Error(Errc::InvalidParams, "values and masses must be non-empty and of equal length");
  }
  double total = 0.0;
  std::size_t top = 0;
  std::vector<std::size_t> idx(values.size());
  for (std::size_t i = 0; i < values.size(); ++i) {
    if (masses[i] < 0.0 || values[i] < 0.0) {
      throw Error(Errc::InvalidParams, "values and masses must be non-negative");
    }
    const double r = values[i] / h;
    const double k = std::round(r);
    if (std::abs(r - k) > 1e-9 * std::max(1.0, r)) {
      throw Error(Errc::LatticeMismatch,
                  "value " + std::to_string(values[i]) + " is not on the lattice");
    }
    idx[i] = static_cast<std::size_t>(k);
    top = std::max(top, idx[i]);
    total += masses[i];
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(Errc::NormalizationError, "masses sum to " + std::to_string(total));
  }
  LatticePmf out{h, std::vector<double>(top + 1, 0.0)};
  for (std::size_t i = 0; i < values.size(); ++i) out.p[idx[i]] += masses[i];
  return out;
}

LatticePmf negbinom_pmf(double r, double p, std::size_t n) {
  if (!(r > 0.0) || !(p > 0.0) || !(p <= 1.0) || n == 0) {
    throw Error(Errc::InvalidParams, "negative binomial needs r > 0, 0 < p <= 1, n >= 1");
  }
  LatticePmf out{1.0, std::vector<double>(n, 0.0)};
  for (std::size_t k = 0; k < n; ++k) {
    const double x = static_cast<double>(k);
    if (p == 1.0) {
      out.p[k] = k == 0 ? 1.0 : 0.0;
      continue;
    }
    out.p[k] = std::exp(std::lgamma(x + r) - std::lgamma(r) - log_factorial(x) +
                        r * std::log(p) + x * std::log1p(-p));
  }
  return out;
}

}  // namespace mpmrf
