#include <boost/math/special_functions/gamma.hpp>
#include <chrono>
#include <cmath>
#include <fstream>

#include "mpmrf/aggregation.hpp"
#include "mpmrf/io.hpp"
#include "test_util.hpp"

using namespace mpmrf;

namespace {

using Pairs = std::vector<std::pair<Vertex, Vertex>>;

struct PathThree {
  Tree tree = path_tree(3);
  MpmrfParams params;
  std::vector<LatticePmf> sev;
  PathThree() {
    params.lambda = {1.0, 1.0, 1.0};
    params.alpha[{1, 2}] = 0.5;
    params.alpha[{2, 3}] = 0.5;
    sev.assign(3, LatticePmf{1.0, {0.0, 0.4, 0.6}});
    sev[1] = LatticePmf{1.0, {0.0, 0.7, 0.3}};
  }
};

std::vector<double> convolve(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> out(a.size() + b.size() - 1, 0.0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    for (std::size_t j = 0; j < b.size(); ++j) out[i + j] += a[i] * b[j];
  }
  return out;
}

/// Exact pmf of S by enumerating counts with each N_v <= max_count.
std::vector<double> brute_force(const PathThree& m, int max_count) {
  const int d = 3;
  std::vector<std::vector<std::vector<double>>> powers(d);
  for (int v = 0; v < d; ++v) {
    powers[v].push_back({1.0});
    for (int k = 1; k <= max_count; ++k) powers[v].push_back(convolve(powers[v].back(), m.sev[v].p));
  }
  std::vector<double> s(2 * d * max_count + 1, 0.0);
  const RootedModel rm = make_rooted_model(m.params, m.tree, 1);
  std::vector<int> x(3);
  for (x[0] = 0; x[0] <= max_count; ++x[0]) {
    for (x[1] = 0; x[0] + x[1] <= max_count; ++x[1]) {
      for (x[2] = 0; x[0] + x[1] + x[2] <= max_count; ++x[2]) {
        const double px = std::exp(log_joint_pmf(rm, x));
        const auto c = convolve(convolve(powers[0][x[0]], powers[1][x[1]]), powers[2][x[2]]);
        for (std::size_t k = 0; k < c.size(); ++k) s[k] += px * c[k];
      }
    }
  }
  return s;
}

AggregateDistribution from_pmf(std::vector<double> p, double h = 1.0) {
  AggregateDistribution a;
  a.pmf = LatticePmf{h, std::move(p)};
  double c = 0.0;
  for (double q : a.pmf.p) a.cdf.push_back(c += q);
  a.n_fft = a.pmf.size();
  return a;
}

}  // namespace

TEST(AggregateFft, SingleVertexDegenerateSeverityIsPoisson) {
  MpmrfParams p;
  p.lambda = {5.0};
  const Tree t = path_tree(1);
  const std::vector<LatticePmf> sev{LatticePmf{1.0, {0.0, 1.0}}};
  const auto agg = aggregate_pmf_fft(p, t, sev);
  double sup = 0.0;
  for (int k = 0; k < 60; ++k) {
    const double pois = std::exp(k * std::log(5.0) - 5.0 - std::lgamma(k + 1.0));
    sup = std::max(sup, std::abs(agg.pmf.p[k] - pois));
  }
  EXPECT_LT(sup, 1e-12);
}

TEST(AggregateFft, MatchesExhaustiveConvolution) {
  const PathThree m;
  const auto oracle = brute_force(m, 40);
  const auto agg = aggregate_pmf_fft(m.params, m.tree, m.sev);
  double sup = 0.0;
  for (std::size_t k = 0; k < agg.pmf.size(); ++k) {
    sup = std::max(sup, std::abs(agg.pmf.p[k] - (k < oracle.size() ? oracle[k] : 0.0)));
  }
  EXPECT_LT(sup, 1e-10);
  EXPECT_NEAR(agg.pmf.total(), 1.0, 1e-9);
  EXPECT_NEAR(agg.mean(), aggregate_mean(m.params, m.sev), 1e-6 * agg.mean());
  const double var = aggregate_variance(m.params, m.tree, m.sev);
  EXPECT_NEAR(agg.pmf.variance(), var, 1e-5 * var);
}

TEST(AggregateFft, RootChoiceDoesNotMatter) {
  const PathThree m;
  const auto a = aggregate_pmf_fft(m.params, m.tree, m.sev, {.n_fft = 128});
  for (Vertex r = 2; r <= 3; ++r) {
    const auto b = aggregate_pmf_fft(m.params, m.tree, m.sev, {.n_fft = 128, .root = r});
    for (std::size_t k = 0; k < 128; ++k) EXPECT_NEAR(a.pmf.p[k], b.pmf.p[k], 1e-14);
  }
}

TEST(AggregateFft, DoublingGridDoesNotChangeResult) {
  const PathThree m;
  const auto a = aggregate_pmf_fft(m.params, m.tree, m.sev, {.n_fft = 64});
  const auto b = aggregate_pmf_fft(m.params, m.tree, m.sev, {.n_fft = 128});
  ASSERT_EQ(a.n_fft, 64u);
  for (std::size_t k = 0; k < 64; ++k) EXPECT_NEAR(a.pmf.p[k], b.pmf.p[k], 1e-10);
}

TEST(AggregateFft, UndersizedGridIsRejected) {
  const PathThree m;
  EXPECT_ERRC(aggregate_pmf_fft(m.params, m.tree, m.sev, {.n_fft = 8}), Errc::TailMassTooLarge);
  EXPECT_ERRC(aggregate_pmf_fft(m.params, m.tree, m.sev, {.n_fft = 100}), Errc::ArgumentOutOfRange);
  try {
    aggregate_pmf_fft(m.params, m.tree, m.sev, {.n_fft = 8});
  } catch (const Error& e) {
    EXPECT_NE(std::string(e.what()).find("try n_fft"), std::string::npos);
  }
  auto mixed = m.sev;
  mixed[2].h = 0.5;
  EXPECT_ERRC(aggregate_pmf_fft(m.params, m.tree, mixed), Errc::LatticeMismatch);
}

TEST(AggregateFft, AutomaticGridGrowsUntilTailIsSmall) {
  const PathThree m;
  const auto agg = aggregate_pmf_fft(m.params, m.tree, m.sev, {.sd_multiplier = 0.5});
  EXPECT_LE(agg.tail_mass, 1e-9);
  EXPECT_GE(agg.n_fft, default_n_fft(m.params, m.tree, m.sev, 0.5));
}

TEST(AggregateFft, CdfInvariants) {
  const PathThree m;
  const auto agg = aggregate_pmf_fft(m.params, m.tree, m.sev);
  for (std::size_t k = 1; k < agg.cdf.size(); ++k) EXPECT_GE(agg.cdf[k], agg.cdf[k - 1]);
  EXPECT_GE(agg.cdf.back(), 1.0 - 1e-9);
  for (double q : agg.pmf.p) EXPECT_GE(q, 0.0);
  EXPECT_LT(agg.max_imag_residue, 1e-10);
}

TEST(AggregateMoments, CovarianceWithTotalSumsToVariance) {
  const PathThree m;
  const auto cov = covariance_with_total(m.params, m.tree, m.sev);
  double s = 0.0;
  for (double c : cov) s += c;
  EXPECT_NEAR(s, aggregate_variance(m.params, m.tree, m.sev), 1e-12);
}

TEST(Rainfall, MomentsAndTailMeasures) {
  const MpmrfParams p = read_params_json(data_path("rainfall_params.json"));
  const Tree t = read_tree_csv(data_path("rainfall_tree.csv"), 10);
  std::vector<LatticePmf> sev;
  const auto spec = nlohmann::json::parse(std::ifstream(data_path("rainfall_severities.json")));
  for (const auto& s : spec) sev.push_back(severity_from_json(s, 0.1));
  const auto start = std::chrono::steady_clock::now();
  const auto agg = aggregate_pmf_fft(p, t, sev, {.n_fft = 1u << 17});
  EXPECT_LT(std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count(), 60.0);
  EXPECT_NEAR(agg.mean(), 3459.0, 0.01 * 3459.0);
  EXPECT_NEAR(agg.pmf.variance(), 578316.0, 0.02 * 578316.0);
  const double closed = aggregate_variance(p, t, sev);
  EXPECT_NEAR(agg.pmf.variance(), closed, 1e-5 * closed);
  const std::vector<std::pair<double, double>> table{{0.80, 4570}, {0.90, 4883}, {0.95, 5162}, {0.99, 5731}};
  double prev = 0.0;
  for (auto [kappa, expected] : table) {
    const RiskMeasure r = var_tvar(agg, kappa);
    EXPECT_NEAR(r.tvar, expected, 0.01 * expected);
    EXPECT_GE(r.tvar, r.var);
    EXPECT_GE(r.tvar, prev);
    prev = r.tvar;
  }
}

TEST(MixedErlangCdf, SingleVertexExponentialSeries) {
  const double lambda = 2.0, beta = 0.7;
  MpmrfParams p;
  p.lambda = {lambda};
  const std::vector<MixedErlang> me{{beta, {1.0}}};
  std::vector<double> grid;
  for (int i = 0; i < 50; ++i) grid.push_back(0.4 * i);
  const auto res = aggregate_cdf_mixed_erlang(p, path_tree(1), me, grid);
  for (std::size_t i = 0; i < grid.size(); ++i) {
    double f = std::exp(-lambda);
    for (int k = 1; k < 200; ++k) {
      f += std::exp(k * std::log(lambda) - lambda - std::lgamma(k + 1.0)) *
           boost::math::gamma_p(double(k), beta * grid[i]);
    }
    EXPECT_NEAR(res.cdf[i], f, 1e-8);
  }
}

TEST(MixedErlangCdf, MassAtZeroAndFarTail) {
  const PathThree m;
  const std::vector<MixedErlang> me{{1.0, {0.5, 0.5}}, {2.0, {0.2, 0.3, 0.5}}, {0.5, {1.0}}};
  double mean = 0.0, second = 0.0;
  for (int v = 0; v < 3; ++v) {
    mean += m.params.lambda[v] * me[v].mean();
    second += m.params.lambda[v] * me[v].second_moment();
  }
  const std::vector<double> grid{0.0, mean + 12.0 * std::sqrt(2.0 * second) + 50.0};
  const auto res = aggregate_cdf_mixed_erlang(m.params, m.tree, me, grid);
  EXPECT_NEAR(res.cdf[0], joint_pmf(m.params, m.tree, 1, std::vector<int>{0, 0, 0}), 1e-12);
  EXPECT_GE(res.cdf[1], 1.0 - 1e-6);
  EXPECT_DOUBLE_EQ(res.beta_max, 2.0);
}

TEST(VarTvar, Examples) {
  const auto point = from_pmf({0.0, 0.0, 0.0, 1.0}, 0.5);
  for (double kappa : {0.0, 0.3, 0.99}) {
    const RiskMeasure r = var_tvar(point, kappa);
    EXPECT_DOUBLE_EQ(r.var, 1.5);
    EXPECT_NEAR(r.tvar, 1.5, 1e-14);
  }
  const auto spread = from_pmf({0.1, 0.2, 0.3, 0.4});
  EXPECT_NEAR(var_tvar(spread, 0.0).tvar, spread.mean(), 1e-14);
  const RiskMeasure r = var_tvar(spread, 0.5);
  EXPECT_DOUBLE_EQ(r.var, 2.0);
  // Upper half of the mass: 0.4 at 3 and 0.1 of the atom at 2.
  EXPECT_NEAR(r.tvar, (0.4 * 3 + 0.1 * 2) / 0.5, 1e-14);
  EXPECT_ERRC(var_tvar(spread, 1.0), Errc::InvalidKappa);
  EXPECT_ERRC(var_tvar(spread, -0.1), Errc::InvalidKappa);
}

TEST(VarTvar, MonotoneInKappa) {
  const PathThree m;
  const auto agg = aggregate_pmf_fft(m.params, m.tree, m.sev);
  double prev_var = -1.0, prev_tvar = -1.0;
  for (int i = 0; i < 100; ++i) {
    const RiskMeasure r = var_tvar(agg, i / 100.0);
    EXPECT_GE(r.var, prev_var);
    EXPECT_GE(r.tvar, prev_tvar - 1e-12);
    EXPECT_GE(r.tvar, r.var - 1e-12);
    prev_var = r.var;
    prev_tvar = r.tvar;
  }
}
