#include "mpmrf/estimation.hpp"

#include <boost/math/distributions/chi_squared.hpp>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "mpmrf/error.hpp"
#include "mpmrf/random.hpp"
#include "numeric_util.hpp"
#include "optimize.hpp"

namespace mpmrf {

namespace chr = std::chrono;

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

void finish_cluster(DeclusterResult& out, const ClusterEvent& ev) {
  out.events.push_back(ev);
  ++out.cluster_sizes[ev.length];
}

}  // namespace

DeclusterResult decluster(std::span<const std::optional<double>> values, double threshold) {
  std::vector<DailyValue> dated;
  dated.reserve(values.size());
  chr::sys_days day{chr::year{2000} / chr::January / 1};
  for (const auto& v : values) {
    dated.push_back({chr::year_month_day{day}, v});
    day += chr::days{1};
  }
  return decluster(std::span<const DailyValue>(dated), threshold);
}

DeclusterResult decluster(std::span<const DailyValue> series, double threshold) {
  DeclusterResult out;
  std::optional<ClusterEvent> current;
  chr::sys_days last{};
  for (const auto& obs : series) {
    const chr::sys_days day{obs.date};
    const bool above = obs.value && *obs.value > threshold;
    if (current && (!above || day != last + chr::days{1})) {
      finish_cluster(out, *current);
      current.reset();
    }
    if (above) {
      if (current) {
        current->length += 1;
        current->severity = std::max(current->severity, *obs.value);
      } else {
        current = ClusterEvent{obs.date, 1, *obs.value};
      }
    }
    last = day;
  }
  if (current) finish_cluster(out, *current);
  return out;
}

EventSeries decluster_stations(std::span<const DailyRecord> records,
                               const std::map<std::string, double>& thresholds,
                               const DeclusterOptions& opts) {
  std::map<std::string, std::vector<DailyValue>> by_station;
  for (const auto& r : records) by_station[r.station].push_back({r.date, r.value});
  if (by_station.empty()) throw Error(Errc::InvalidData, "no daily records");

  EventSeries out;
  std::set<int> years;
  const auto in_season = [&opts](const chr::year_month_day& d) {
    const unsigned m = static_cast<unsigned>(d.month());
    return m >= opts.season_first_month && m <= opts.season_last_month;
  };
  // Per station and year: days with a value inside the season.
  std::map<std::string, std::map<int, int>> present;
  for (auto& [station, series] : by_station) {
    std::sort(series.begin(), series.end(),
              [](const DailyValue& a, const DailyValue& b) { return a.date < b.date; });
    for (std::size_t i = 1; i < series.size(); ++i) {
      if (series[i].date == series[i - 1].date) {
        throw Error(Errc::InvalidData, "duplicate date for station " + station);
      }
    }
    for (const auto& obs : series) {
      const int y = static_cast<int>(obs.date.year());
      years.insert(y);
      if (obs.value && in_season(obs.date)) ++present[station][y];
    }
  }

  for (int y : years) {
    const chr::sys_days first{chr::year{y} / chr::month{opts.season_first_month} / 1};
    const chr::sys_days last{chr::year{y} / chr::month{opts.season_last_month} / chr::last};
    const double season_days = static_cast<double>((last - first).count() + 1);
    bool keep = true;
    for (const auto& [station, series] : by_station) {
      const auto it = present[station].find(y);
      const double have = it == present[station].end() ? 0.0 : it->second;
      if ((season_days - have) / season_days > opts.max_missing_fraction) keep = false;
    }
    (keep ? out.years : out.dropped_years).push_back(y);
  }

  std::map<int, std::size_t> year_row;
  for (std::size_t i = 0; i < out.years.size(); ++i) year_row[out.years[i]] = i;
  out.counts.assign(out.years.size(), std::vector<int>(by_station.size(), 0));

  std::size_t col = 0;
  for (const auto& [station, series] : by_station) {
    const auto th = thresholds.find(station);
    if (th == thresholds.end()) {
      throw Error(Errc::InvalidData, "no threshold for station " + station);
    }
    const DeclusterResult dr = decluster(std::span<const DailyValue>(series), th->second);
    StationEvents se{station, th->second, {}, {}};
    for (const auto& ev : dr.events) {
      const auto row = year_row.find(static_cast<int>(ev.start.year()));
      if (row == year_row.end()) continue;
      if (opts.season_only && !in_season(ev.start)) continue;
      ++out.counts[row->second][col];
      se.events.push_back(ev);
      ++se.cluster_sizes[ev.length];
    }
    out.stations.push_back(station);
    out.per_station.push_back(std::move(se));
    ++col;
  }
  return out;
}

GofResult poisson_gof(std::span<const int> counts) {
  const std::size_t n = counts.size();
  if (n < 20) {
    throw Error(Errc::TooFewPeriods, std::to_string(n) + " periods; at least 20 required");
  }
  double mean = 0.0;
  int kmax = 0;
  for (int c : counts) {
    if (c < 0) throw Error(Errc::NegativeCount, "negative count");
    mean += c;
    kmax = std::max(kmax, c);
  }
  mean /= static_cast<double>(n);
  const double nd = static_cast<double>(n);

  std::vector<double> observed(kmax + 1, 0.0);
  for (int c : counts) observed[c] += 1.0;
  std::vector<double> expected(kmax + 1);
  double cum = 0.0;
  for (int k = 0; k <= kmax; ++k) {
    const double p = mean > 0.0 ? std::exp(log_poisson_pmf(k, mean)) : (k == 0 ? 1.0 : 0.0);
    expected[k] = nd * p;
    cum += p;
  }
  expected[kmax] += nd * std::max(0.0, 1.0 - cum);  // last bin is "kmax or more"

  struct Bin {
    double obs = 0.0;
    double exp = 0.0;
  };
  std::vector<Bin> bins;
  Bin acc;
  for (int k = 0; k <= kmax; ++k) {
    acc.obs += observed[k];
    acc.exp += expected[k];
    if (acc.exp >= 5.0) {
      bins.push_back(acc);
      acc = {};
    }
  }
  if (acc.exp > 0.0 || acc.obs > 0.0) {
    if (bins.empty()) {
      bins.push_back(acc);
    } else {
      bins.back().obs += acc.obs;
      bins.back().exp += acc.exp;
    }
  }

  GofResult r;
  r.bins = static_cast<int>(bins.size());
  r.dof = r.bins - 2;
  for (const auto& b : bins) {
    if (b.exp > 0.0) {
      r.statistic += (b.obs - b.exp) * (b.obs - b.exp) / b.exp;
    } else if (b.obs > 0.0) {
      r.statistic = std::numeric_limits<double>::infinity();
    }
  }
  if (r.dof < 1) {
    // Everything pooled into at most two bins: the fit cannot be judged
    // unless the counts themselves are degenerate.
    r.dof = 1;
  }
  if (!std::isfinite(r.statistic)) {
    r.p_value = 0.0;
  } else {
    boost::math::chi_squared dist(r.dof);
    r.p_value = boost::math::cdf(boost::math::complement(dist, r.statistic));
  }
  return r;
}

WeightedGraph pearson_correlation_matrix(const CountMatrix& counts,
                                         std::vector<std::string> labels) {
  if (counts.size() < 2) throw Error(Errc::InvalidData, "need at least two periods");
  const std::size_t d = counts.front().size();
  for (const auto& row : counts) {
    if (row.size() != d) throw Error(Errc::InvalidData, "ragged count matrix");
  }
  const double n = static_cast<double>(counts.size());
  std::vector<double> mean(d, 0.0);
  for (const auto& row : counts) {
    for (std::size_t j = 0; j < d; ++j) mean[j] += row[j];
  }
  for (auto& m : mean) m /= n;
  std::vector<std::vector<double>> cov(d, std::vector<double>(d, 0.0));
  for (const auto& row : counts) {
    for (std::size_t a = 0; a < d; ++a) {
      for (std::size_t b = a; b < d; ++b) cov[a][b] += (row[a] - mean[a]) * (row[b] - mean[b]);
    }
  }
  for (std::size_t a = 0; a < d; ++a) {
    if (!(cov[a][a] > 0.0)) {
      throw Error(Errc::ZeroVariance, "column " + std::to_string(a + 1) + " is constant");
    }
  }
  WeightedGraph g(static_cast<int>(d), std::move(labels));
  for (std::size_t a = 0; a < d; ++a) {
    for (std::size_t b = a; b < d; ++b) {
      g.set_weight(static_cast<Vertex>(a + 1), static_cast<Vertex>(b + 1),
                   cov[a][b] / std::sqrt(cov[a][a] * cov[b][b]));
    }
  }
  return g;
}

InformationCriteria information_criteria(double loglik, int k, std::int64_t n) {
  if (n <= k + 1) {
    throw Error(Errc::SampleTooSmall,
                std::to_string(n) + " observations for " + std::to_string(k) + " parameters");
  }
  const double kd = k;
  const double nd = static_cast<double>(n);
  InformationCriteria ic;
  ic.aic = 2.0 * kd - 2.0 * loglik;
  ic.aicc = ic.aic + 2.0 * kd * (kd + 1.0) / (nd - kd - 1.0);
  ic.bic = kd * std::log(nd) - 2.0 * loglik;
  return ic;
}

namespace {

double logistic(double z) { return 1.0 / (1.0 + std::exp(-z)); }
double logit(double p) { return std::log(p / (1.0 - p)); }

/// Log-likelihood on a fixed data set with cached log-factorials.
class Likelihood {
 public:
  Likelihood(const Tree& tree, const CountMatrix& data) : rt_(root_tree(tree, 1)), data_(data) {
    int top = 0;
    for (const auto& row : data) {
      for (int x : row) {
        if (x < 0) throw Error(Errc::NegativeCount, "negative count in data");
        top = std::max(top, x);
      }
    }
    logfact_.resize(top + 1);
    logfact_[0] = 0.0;
    for (int i = 1; i <= top; ++i) logfact_[i] = logfact_[i - 1] + std::log(static_cast<double>(i));
    order_.assign(rt_.topo_order().begin(), rt_.topo_order().end());
  }

  double operator()(const MpmrfParams& p) const {
    const int d = rt_.num_vertices();
    std::vector<double> lt(d), l1t(d), lz(d), zeta(d);
    for (Vertex v : order_) {
      const Vertex pa = rt_.parent(v);
      const double lv = p.lambda[v - 1];
      if (pa == 0) {
        zeta[v - 1] = lv;
      } else {
        const double lp = p.lambda[pa - 1];
        const double a = p.alpha_on(pa, v);
        const double th = std::min(1.0, a * std::sqrt(lv / lp));
        lt[v - 1] = std::log(th);
        l1t[v - 1] = std::log1p(-th);
        zeta[v - 1] = std::max(0.0, lv - a * std::sqrt(lp * lv));
      }
      lz[v - 1] = std::log(zeta[v - 1]);
    }
    double total = 0.0;
    std::vector<double> terms;
    for (const auto& row : data_) {
      for (Vertex v : order_) {
        const Vertex pa = rt_.parent(v);
        const int xv = row[v - 1];
        const double z = zeta[v - 1];
        if (pa == 0) {
          total += xv * lz[v - 1] - z - logfact_[xv];
          continue;
        }
        const int xp = row[pa - 1];
        const int kmax = std::min(xp, xv);
        terms.clear();
        for (int k = 0; k <= kmax; ++k) {
          const int m = xv - k;
          const int f = xp - k;
          double t = logfact_[xp] - logfact_[k] - logfact_[f] - logfact_[m] - z;
          if (k) t += k * lt[v - 1];
          if (f) t += f * l1t[v - 1];
          if (m) t += m * lz[v - 1];
          if (!std::isnan(t) && t > kNegInf) terms.push_back(t);
        }
        if (terms.empty()) return kNegInf;
        total += log_sum_exp(terms);
      }
    }
    return total;
  }

 private:
  RootedTree rt_;
  const CountMatrix& data_;
  std::vector<double> logfact_;
  std::vector<Vertex> order_;
};

MpmrfParams decode(const Tree& tree, std::span<const double> x) {
  const int d = tree.num_vertices();
  MpmrfParams p;
  p.lambda.resize(d);
  for (int i = 0; i < d; ++i) p.lambda[i] = std::exp(x[i]);
  std::size_t j = d;
  for (const auto& e : tree.edges()) {
    p.alpha[e] = alpha_bound(p.lambda[e.u - 1], p.lambda[e.v - 1]) * logistic(x[j++]);
  }
  return p;
}

std::vector<double> encode(const Tree& tree, const MpmrfParams& p) {
  std::vector<double> x;
  for (double l : p.lambda) x.push_back(std::log(l));
  for (const auto& e : tree.edges()) {
    const double bound = alpha_bound(p.lambda[e.u - 1], p.lambda[e.v - 1]);
    const double r = std::clamp(p.alpha.at(e) / bound, 1e-6, 1.0 - 1e-6);
    x.push_back(logit(r));
  }
  return x;
}

void check_counts(const Tree& tree, const CountMatrix& counts) {
  const int d = tree.num_vertices();
  if (counts.empty()) throw Error(Errc::InvalidData, "no observations");
  std::vector<long long> sums(d, 0);
  for (const auto& row : counts) {
    if (static_cast<int>(row.size()) != d) {
      throw Error(Errc::InvalidData, "row length differs from the number of vertices");
    }
    for (int j = 0; j < d; ++j) {
      if (row[j] < 0) throw Error(Errc::NegativeCount, "negative count in data");
      sums[j] += row[j];
    }
  }
  for (int j = 0; j < d; ++j) {
    if (sums[j] == 0) {
      throw Error(Errc::InvalidData, "column " + std::to_string(j + 1) + " has only zero counts");
    }
  }
}

std::string describe(const MpmrfParams& p) {
  std::ostringstream os;
  os.precision(6);
  os << "lambda=(";
  for (std::size_t i = 0; i < p.lambda.size(); ++i) os << (i ? "," : "") << p.lambda[i];
  os << ") alpha=(";
  bool first = true;
  for (const auto& [e, a] : p.alpha) {
    os << (first ? "" : ",") << e.u << "-" << e.v << ":" << a;
    first = false;
  }
  os << ")";
  return os.str();
}

}  // namespace

MpmrfParams moment_start(const Tree& tree, const CountMatrix& counts) {
  check_counts(tree, counts);
  const int d = tree.num_vertices();
  MpmrfParams p;
  p.lambda.assign(d, 0.0);
  for (const auto& row : counts) {
    for (int j = 0; j < d; ++j) p.lambda[j] += row[j];
  }
  for (auto& l : p.lambda) l /= static_cast<double>(counts.size());
  std::optional<WeightedGraph> corr;
  if (counts.size() >= 2) {
    try {
      corr = pearson_correlation_matrix(counts);
    } catch (const Error&) {
    }
  }
  for (const auto& e : tree.edges()) {
    const double bound = alpha_bound(p.lambda[e.u - 1], p.lambda[e.v - 1]);
    const double r = corr ? corr->weight(e.u, e.v) : 0.0;
    p.alpha[e] = std::min(0.9 * bound, std::max(r, 0.01 * bound));
  }
  return p;
}

FitResult fit_mpmrf(const Tree& tree, const CountMatrix& counts, const FitOptions& opts) {
  check_counts(tree, counts);
  const MpmrfParams start = opts.init ? *opts.init : moment_start(tree, counts);
  require_valid(start, tree);
  const Likelihood loglik(tree, counts);

  int evaluations = 0;
  const detail::Objective objective = [&](std::span<const double> x) {
    ++evaluations;
    return -loglik(decode(tree, x));
  };

  std::vector<double> x = encode(tree, start);
  double fx = objective(x);
  FitResult result;
  result.loglik_init = -fx;

  for (double delta : {0.5, 0.1, 0.02}) {
    for (int pass = 0; pass < 20; ++pass) {
      bool improved = false;
      for (std::size_t i = 0; i < x.size(); ++i) {
        for (double dir : {1.0, -1.0}) {
          auto trial = x;
          trial[i] += dir * delta;
          const double ft = objective(trial);
          if (ft < fx) {
            x = std::move(trial);
            fx = ft;
            improved = true;
            break;
          }
        }
      }
      if (!improved) break;
    }
  }

  const double grad_tol = 1e-5 * std::max<double>(1.0, static_cast<double>(counts.size()));
  bool converged = false;
  int restarts = 0;
  double step = 0.1;
  for (; restarts <= opts.max_restarts; ++restarts) {
    const auto qn = detail::quasi_newton(objective, x, grad_tol);
    if (qn.f <= fx) {
      x = qn.x;
      fx = qn.f;
      if (qn.converged) {
        converged = true;
        break;
      }
    }
    const auto nm =
        detail::nelder_mead(objective, x, std::vector<double>(x.size(), step), opts.size_tol);
    if (nm.f <= fx) {
      x = nm.x;
      fx = nm.f;
    }
    step = std::max(step * 0.5, 0.01);
  }

  result.params = decode(tree, x);
  result.loglik = -fx;
  result.n_params = 2 * tree.num_vertices() - 1;
  result.n_obs = static_cast<std::int64_t>(counts.size());
  result.converged = converged;
  result.evaluations = evaluations;
  result.restarts = restarts;
  if (result.n_obs > result.n_params + 1) {
    result.criteria = information_criteria(result.loglik, result.n_params, result.n_obs);
  }
  if (!converged) {
    throw Error(Errc::NonConvergence,
                "likelihood search did not settle; best point " + describe(result.params) +
                    " loglik=" + std::to_string(result.loglik));
  }
  return result;
}

BootstrapResult bootstrap_se(const Tree& tree, const MpmrfParams& fitted, std::int64_t n_periods,
                             int n_boot, std::uint64_t seed, const BootstrapOptions& opts) {
  if (n_boot < 2) throw Error(Errc::ArgumentOutOfRange, "standard errors need n_boot >= 2");
  if (n_periods < 2) throw Error(Errc::ArgumentOutOfRange, "n_periods must be >= 2");
  require_valid(fitted, tree);
  if (opts.kind == BootstrapKind::ResampleYears && (!opts.data || opts.data->empty())) {
    throw Error(Errc::InvalidData, "year resampling needs the observed counts");
  }
  const int d = tree.num_vertices();
  std::vector<std::vector<double>> lam(d);
  std::map<Edge, std::vector<double>> alp;
  BootstrapResult out;
  out.kind = opts.kind;
  out.replicates = n_boot;
  for (int b = 0; b < n_boot; ++b) {
    const std::uint64_t s = derive_seed(seed, static_cast<std::uint64_t>(b));
    CountMatrix data;
    if (opts.kind == BootstrapKind::Parametric) {
      data = sample(fitted, tree, 1, n_periods, s);
    } else {
      std::mt19937_64 rng(s);
      std::uniform_int_distribution<std::size_t> pick(0, opts.data->size() - 1);
      for (std::int64_t i = 0; i < n_periods; ++i) data.push_back((*opts.data)[pick(rng)]);
    }
    try {
      FitOptions fo;
      fo.init = fitted;
      const FitResult fr = fit_mpmrf(tree, data, fo);
      for (int j = 0; j < d; ++j) lam[j].push_back(fr.params.lambda[j]);
      for (const auto& [e, a] : fr.params.alpha) alp[e].push_back(a);
    } catch (const Error& err) {
      if (err.code() != Errc::NonConvergence && err.code() != Errc::InvalidData) throw;
      ++out.failures;
    }
  }
  if (out.failures > opts.max_failure_fraction * n_boot) {
    throw Error(Errc::TooManyFailures, std::to_string(out.failures) + " of " +
                                           std::to_string(n_boot) + " bootstrap fits failed");
  }
  const auto sd = [](const std::vector<double>& v) {
    if (v.size() < 2) return std::numeric_limits<double>::quiet_NaN();
    const double m = std::accumulate(v.begin(), v.end(), 0.0) / static_cast<double>(v.size());
    double s = 0.0;
    for (double x : v) s += (x - m) * (x - m);
    return std::sqrt(s / static_cast<double>(v.size() - 1));
  };
  for (int j = 0; j < d; ++j) out.se_lambda.push_back(sd(lam[j]));
  for (const auto& e : tree.edges()) out.se_alpha[e] = sd(alp[e]);
  return out;
}

}  // namespace mpmrf
