#include "mpmrf/asymptotics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <random>
#include <sstream>

#include "mpmrf/error.hpp"
#include "mpmrf/random.hpp"
#include "numeric_util.hpp"

namespace mpmrf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void check_splash(const SplashParams& p, const SplashOptions& opts) {
  if (!(p.lambda_r > 0.0)) throw Error(Errc::InvalidParams, "lambda_r must be positive");
  if (p.chi < 2) throw Error(Errc::InvalidDegree, "chi must be >= 2");
  const bool alpha_ok = opts.allow_independence ? (p.alpha >= 0.0 && p.alpha <= 1.0)
                                                : (p.alpha > 0.0 && p.alpha <= 1.0);
  if (!alpha_ok) throw Error(Errc::InvalidParams, "alpha outside its admissible range");
}

std::string criticality(const SplashParams& p) {
  std::ostringstream os;
  os << "(chi - 1) alpha^2 = " << (p.chi - 1) * p.alpha * p.alpha
     << " > 1; finite totals need chi <= 1 + 1/alpha^2 = " << 1.0 + 1.0 / (p.alpha * p.alpha);
  return os.str();
}

/// x * log(y) with 0 * log(0) = 0.
double xlogy(double x, double y) {
  if (x == 0.0) return 0.0;
  if (y == 0.0) return kNegInf;
  return x * std::log(y);
}

/// log P(M_{-r} = m | N_r = l).
double log_progeny_given_root(const SplashParams& p, long long m, long long l) {
  const double a2 = p.alpha * p.alpha;
  const double chi = p.chi;
  const double cl = chi * static_cast<double>(l);
  if (m == 0) return xlogy(cl, 1.0 - a2);
  if (l == 0) return kNegInf;
  const double md = static_cast<double>(m);
  return std::log(cl) - std::log(md) + log_choose((chi - 1.0) * md + cl - 1.0, md - 1.0) +
         xlogy(md, a2) + xlogy(cl + (chi - 2.0) * md, 1.0 - a2);
}

}  // namespace

bool splash_is_finite(const SplashParams& p) {
  return (p.chi - 1) * p.alpha * p.alpha <= 1.0 + 1e-15;
}

std::vector<double> splash_total_pmf(const SplashParams& p, int x_max, SplashOptions opts) {
  check_splash(p, opts);
  if (!opts.allow_supercritical && !splash_is_finite(p)) {
    throw Error(Errc::FiniteSupportViolated, criticality(p));
  }
  if (x_max < 0) throw Error(Errc::ArgumentOutOfRange, "x_max must be >= 0");
  std::vector<double> out(x_max + 1);
  std::vector<double> terms;
  for (int x = 0; x <= x_max; ++x) {
    terms.clear();
    for (int j = 0; j <= x; ++j) {
      const long long l = x - j;
      const double t = log_poisson_pmf(l, p.lambda_r) + log_progeny_given_root(p, j, l);
      if (t > kNegInf) terms.push_back(t);
    }
    out[x] = std::exp(log_sum_exp(terms));
  }
  return out;
}

std::vector<double> splash_total_pmf_closed_form(const SplashParams& p, int x_max,
                                                 SplashOptions opts) {
  check_splash(p, opts);
  if (!opts.allow_supercritical && !splash_is_finite(p)) {
    throw Error(Errc::FiniteSupportViolated, criticality(p));
  }
  if (x_max < 0) throw Error(Errc::ArgumentOutOfRange, "x_max must be >= 0");
  const double a2 = p.alpha * p.alpha;
  const double chi = p.chi;
  const double log_lambda = std::log(p.lambda_r);
  std::vector<double> out(x_max + 1);
  std::vector<double> terms;
  for (int x = 0; x <= x_max; ++x) {
    const double xd = x;
    terms.clear();
    terms.push_back(-p.lambda_r + xd * log_lambda - log_factorial(xd) + xlogy(chi * xd, 1.0 - a2));
    // The j = x summand vanishes: no root events means no offspring.
    for (int j = 1; j < x; ++j) {
      const double jd = j;
      terms.push_back(std::log(chi) - p.lambda_r - std::log(jd) + (xd - jd) * log_lambda -
                      log_factorial(xd - jd - 1.0) + log_choose(chi * xd - jd - 1.0, jd - 1.0) +
                      xlogy(jd, a2) + xlogy(chi * xd - 2.0 * jd, 1.0 - a2));
    }
    out[x] = std::exp(log_sum_exp(terms));
  }
  return out;
}

double splash_mean_series(const SplashParams& p, double tol) {
  const double a2 = p.alpha * p.alpha;
  if ((p.chi - 1) * a2 >= 1.0) return std::numeric_limits<double>::infinity();
  double total = 1.0;
  double term = p.chi * a2;
  for (int i = 1; term > tol * total && i < 100000; ++i) {
    total += term;
    term *= (p.chi - 1) * a2;
  }
  return p.lambda_r * total;
}

SplashSimulation splash_simulate(const SplashParams& p, std::int64_t n, std::uint64_t seed,
                                 std::int64_t cap, SplashOptions opts) {
  check_splash(p, opts);
  if (!opts.allow_supercritical && !splash_is_finite(p)) {
    throw Error(Errc::SupercriticalRegime, criticality(p));
  }
  if (n < 1) throw Error(Errc::ArgumentOutOfRange, "n must be >= 1");
  const double a2 = p.alpha * p.alpha;
  SplashSimulation sim;
  sim.replications = n;
  sim.totals.reserve(static_cast<std::size_t>(n));
  constexpr std::int64_t kBlock = 4096;
  for (std::int64_t b = 0; b * kBlock < n; ++b) {
    auto rng = make_stream(seed, static_cast<std::uint64_t>(b));
    const std::int64_t end = std::min(n, (b + 1) * kBlock);
    for (std::int64_t i = b * kBlock; i < end; ++i) {
      const std::int64_t root = std::poisson_distribution<std::int64_t>(p.lambda_r)(rng);
      std::int64_t total = root;
      std::int64_t current =
          root > 0 ? std::binomial_distribution<std::int64_t>(p.chi * root, a2)(rng) : 0;
      // With alpha = 1 every individual has chi - 1 >= 1 offspring for sure.
      bool capped = a2 >= 1.0 && current > 0;
      while (current > 0 && !capped) {
        total += current;
        if (total > cap) {
          capped = true;
          break;
        }
        current = std::binomial_distribution<std::int64_t>((p.chi - 1) * current, a2)(rng);
      }
      if (capped) {
        ++sim.cap_exceeded;
      } else {
        sim.totals.push_back(total);
      }
    }
  }
  return sim;
}

double generalized_poisson_pmf(double lambda_r, double theta, int x) {
  if (!(theta >= 0.0 && theta < 1.0)) throw Error(Errc::InvalidTheta, "theta must lie in [0, 1)");
  if (!(lambda_r > 0.0)) throw Error(Errc::InvalidParams, "lambda_r must be positive");
  if (x < 0) return 0.0;
  const double xd = x;
  return std::exp(std::log(lambda_r) + (xd - 1.0) * std::log(lambda_r + xd * theta) - lambda_r -
                  xd * theta - log_factorial(xd));
}

std::vector<double> generalized_poisson_pmf(double lambda_r, double theta, int x_min, int x_max) {
  std::vector<double> out;
  for (int x = x_min; x <= x_max; ++x) out.push_back(generalized_poisson_pmf(lambda_r, theta, x));
  return out;
}

double total_variation(std::span<const double> pmf, std::span<const double> reference) {
  double cum = 0.0;
  double pmf_cum = 0.0;
  double diff = 0.0;
  const std::size_t n = std::min(pmf.size(), reference.size());
  std::size_t x = 0;
  for (; x < n; ++x) {
    diff += std::abs(pmf[x] - reference[x]);
    cum += reference[x];
    pmf_cum += pmf[x];
    if (cum >= 1.0 - 1e-6) break;
  }
  return 0.5 * (diff + std::max(0.0, 1.0 - cum) + std::max(0.0, 1.0 - pmf_cum));
}

GpLimitReport gp_limit_check(double lambda_r, double theta, int chi, std::int64_t n,
                             std::uint64_t seed) {
  if (!(theta > 0.0 && theta < 1.0)) throw Error(Errc::InvalidTheta, "theta must lie in (0, 1)");
  GpLimitReport r;
  r.chi = chi;
  r.alpha = std::sqrt(theta / chi);
  const SplashParams sp{lambda_r, r.alpha, chi};

  int x_max = 0;
  double cum = 0.0;
  while (cum < 1.0 - 1e-7 && x_max < 100000) cum += generalized_poisson_pmf(lambda_r, theta, x_max++);
  const auto gp = generalized_poisson_pmf(lambda_r, theta, 0, x_max);
  r.tv_closed_form = total_variation(splash_total_pmf(sp, x_max), gp);

  const auto sim = splash_simulate(sp, n, seed);
  r.replications = sim.replications;
  r.cap_exceeded = sim.cap_exceeded;
  std::vector<double> empirical(x_max + 1, 0.0);
  for (auto t : sim.totals) {
    if (t <= x_max) empirical[static_cast<std::size_t>(t)] += 1.0;
  }
  for (auto& e : empirical) e /= static_cast<double>(n);
  r.tv_simulated = total_variation(empirical, gp);
  return r;
}

MpmrfParams homogeneous_params(const Tree& tree, double lambda, double alpha) {
  MpmrfParams p;
  p.lambda.assign(tree.num_vertices(), lambda);
  for (const auto& e : tree.edges()) p.alpha[e] = alpha;
  return p;
}

std::vector<AverageLossCurve> average_loss_distribution(std::span<const Tree> trees,
                                                        const ParamsRule& rule,
                                                        const LatticePmf& severity,
                                                        const AggregateOptions& opts) {
  std::vector<AverageLossCurve> out;
  for (const auto& tree : trees) {
    const int d = tree.num_vertices();
    const MpmrfParams params = rule(tree);
    const std::vector<LatticePmf> sev(d, severity);
    const auto agg = aggregate_pmf_fft(params, tree, sev, opts);
    AverageLossCurve c;
    c.d = d;
    c.step = severity.h / d;
    c.cdf = agg.cdf;
    c.mean = agg.pmf.mean() / d;
    c.variance = agg.pmf.variance() / (static_cast<double>(d) * d);
    out.push_back(std::move(c));
  }
  return out;
}

double variance_of_average(const MpmrfParams& params, const Tree& tree,
                           std::span<const LatticePmf> severities) {
  const int d = tree.num_vertices();
  if (static_cast<int>(severities.size()) != d) {
    throw Error(Errc::InvalidParams, "need one severity per vertex");
  }
  std::vector<double> weight(d);
  double total = 0.0;
  for (int i = 0; i < d; ++i) {
    const double m2 = severities[i].second_moment();
    if (!std::isfinite(m2)) throw Error(Errc::InfiniteMoment, "severity second moment is infinite");
    weight[i] = severities[i].mean() * std::sqrt(params.lambda[i]);
    total += params.lambda[i] * m2;
  }
  std::vector<double> prod(d);
  std::vector<char> seen(d);
  std::vector<Vertex> stack;
  for (Vertex s = 1; s <= d; ++s) {
    std::fill(seen.begin(), seen.end(), 0);
    prod[s - 1] = 1.0;
    seen[s - 1] = 1;
    stack.assign(1, s);
    double row = 0.0;
    while (!stack.empty()) {
      const Vertex v = stack.back();
      stack.pop_back();
      for (Vertex w : tree.neighbors(v)) {
        if (seen[w - 1]) continue;
        seen[w - 1] = 1;
        prod[w - 1] = prod[v - 1] * params.alpha_on(v, w);
        row += prod[w - 1] * weight[w - 1];
        stack.push_back(w);
      }
    }
    total += weight[s - 1] * row;
  }
  return total / (static_cast<double>(d) * d);
}

double bethe_variance_bound(int chi, double lambda_sup, double alpha_sup, double mean_b,
                            double second_b) {
  if (chi < 2) throw Error(Errc::InvalidDegree, "chi must be >= 2");
  if (!((chi - 1) * alpha_sup < 1.0)) {
    throw Error(Errc::ArgumentOutOfRange, "lattice covariance sum diverges for (chi-1) alpha >= 1");
  }
  const double paths = chi * alpha_sup / (1.0 - (chi - 1) * alpha_sup);
  return lambda_sup * (second_b + mean_b * mean_b * paths);
}

}  // namespace mpmrf
