#include "mpmrf/frequency.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>
#include <sstream>

#include "mpmrf/error.hpp"
#include "mpmrf/random.hpp"
#include "numeric_util.hpp"

namespace mpmrf {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr std::int64_t kSampleBlock = 4096;

void check_dimensions(const MpmrfParams& params, const Tree& tree) {
  const int d = tree.num_vertices();
  if (params.dimension() != d) {
    throw Error(Errc::InvalidParams, "lambda has " + std::to_string(params.dimension()) +
                                         " entries for a tree on " + std::to_string(d) +
                                         " vertices");
  }
  if (params.alpha.size() != tree.edges().size()) {
    throw Error(Errc::InvalidParams, "alpha has " + std::to_string(params.alpha.size()) +
                                         " entries for " + std::to_string(tree.edges().size()) +
                                         " edges");
  }
  for (const auto& e : tree.edges()) {
    if (!params.alpha.count(e)) {
      throw Error(Errc::InvalidParams, "no alpha for edge (" + std::to_string(e.u) + "," +
                                           std::to_string(e.v) + ")");
    }
  }
}

}  // namespace

double MpmrfParams::alpha_on(Vertex a, Vertex b) const {
  auto it = alpha.find(Edge::of(a, b));
  if (it == alpha.end()) {
    throw Error(Errc::InvalidParams,
                "no alpha for edge (" + std::to_string(a) + "," + std::to_string(b) + ")");
  }
  return it->second;
}

std::string ValidationReport::summary() const {
  if (ok()) return "ok";
  std::ostringstream os;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) os << "; ";
    os << violations[i].message;
  }
  return os.str();
}

double alpha_bound(double la, double lb) {
  return std::sqrt(std::min(la, lb) / std::max(la, lb));
}

ValidationReport validate_params(const MpmrfParams& params, const Tree& tree,
                                 ValidationOptions opts) {
  check_dimensions(params, tree);
  ValidationReport report;
  const auto& lam = params.lambda;
  for (int v = 1; v <= tree.num_vertices(); ++v) {
    const double l = lam[v - 1];
    if (!(l > 0.0) || !std::isfinite(l)) {
      std::ostringstream os;
      os << "lambda_" << v << " = " << l << " must be positive";
      report.violations.push_back({"lambda", v, v, l, 0.0,
                                   std::numeric_limits<double>::infinity(), os.str()});
    }
  }
  for (const auto& [e, a] : params.alpha) {
    const double la = lam[e.u - 1];
    const double lb = lam[e.v - 1];
    if (!(la > 0.0) || !(lb > 0.0)) continue;
    const double bound = alpha_bound(la, lb);
    const bool low_ok = opts.allow_independence ? a >= 0.0 : a > 0.0;
    if (!low_ok || !(a <= bound * (1.0 + 1e-12)) || !std::isfinite(a)) {
      std::ostringstream os;
      os << "alpha(" << e.u << "," << e.v << ") = " << a << " outside "
         << (opts.allow_independence ? "[0, " : "(0, ") << bound << "]";
      report.violations.push_back({"alpha", e.u, e.v, a, 0.0, bound, os.str()});
    }
  }
  return report;
}

void require_valid(const MpmrfParams& params, const Tree& tree, ValidationOptions opts) {
  auto report = validate_params(params, tree, opts);
  if (!report.ok()) throw Error(Errc::InvalidParams, report.summary());
}

RootedModel make_rooted_model(const MpmrfParams& params, const Tree& tree, Vertex root,
                              ValidationOptions opts) {
  require_valid(params, tree, opts);
  RootedModel m{root_tree(tree, root), {}, {}};
  const int d = tree.num_vertices();
  m.theta.assign(d, 0.0);
  m.zeta.assign(d, 0.0);
  for (Vertex v : m.tree.topo_order()) {
    const Vertex p = m.tree.parent(v);
    const double lv = params.lambda[v - 1];
    if (p == 0) {
      m.zeta[v - 1] = lv;
      continue;
    }
    const double lp = params.lambda[p - 1];
    const double a = params.alpha_on(p, v);
    m.theta[v - 1] = std::min(1.0, a * std::sqrt(lv / lp));
    const double z = lv - a * std::sqrt(lp * lv);
    m.zeta[v - 1] = z < 1e-12 * lv ? 0.0 : z;
  }
  return m;
}

CountMatrix sample(const MpmrfParams& params, const Tree& tree, Vertex root, std::int64_t n,
                   std::uint64_t seed, ValidationOptions opts) {
  if (n < 1) throw Error(Errc::ArgumentOutOfRange, "sample size must be >= 1");
  const RootedModel m = make_rooted_model(params, tree, root, opts);
  const int d = tree.num_vertices();
  CountMatrix out(static_cast<std::size_t>(n), std::vector<int>(d, 0));
  const auto order = m.tree.topo_order();
  const std::int64_t blocks = (n + kSampleBlock - 1) / kSampleBlock;
  for (std::int64_t b = 0; b < blocks; ++b) {
    auto rng = make_stream(seed, static_cast<std::uint64_t>(b));
    const std::int64_t end = std::min(n, (b + 1) * kSampleBlock);
    for (std::int64_t i = b * kSampleBlock; i < end; ++i) {
      auto& row = out[static_cast<std::size_t>(i)];
      for (Vertex v : order) {
        const Vertex p = m.tree.parent(v);
        int value = 0;
        const double z = m.zeta[v - 1];
        if (z > 0.0) value += std::poisson_distribution<int>(z)(rng);
        if (p != 0) {
          const int parent_count = row[p - 1];
          const double th = m.theta[v - 1];
          if (parent_count > 0 && th > 0.0) {
            value += th >= 1.0 ? parent_count
                               : std::binomial_distribution<int>(parent_count, th)(rng);
          }
        }
        row[v - 1] = value;
      }
    }
  }
  return out;
}

double log_joint_pmf(const RootedModel& m, std::span<const int> x) {
  const int d = m.tree.num_vertices();
  if (static_cast<int>(x.size()) != d) {
    throw Error(Errc::InvalidParams, "count vector has wrong length");
  }
  for (int xi : x) {
    if (xi < 0) throw Error(Errc::NegativeCount, "negative count " + std::to_string(xi));
  }
  double total = 0.0;
  std::vector<double> terms;
  for (Vertex v : m.tree.topo_order()) {
    const Vertex p = m.tree.parent(v);
    const int xv = x[v - 1];
    if (p == 0) {
      total += log_poisson_pmf(xv, m.zeta[v - 1]);
      continue;
    }
    const int xp = x[p - 1];
    const int kmax = std::min(xp, xv);
    terms.clear();
    for (int k = 0; k <= kmax; ++k) {
      const double t = log_binomial_pmf(k, xp, m.theta[v - 1]) +
                       log_poisson_pmf(xv - k, m.zeta[v - 1]);
      if (t > kNegInf) terms.push_back(t);
    }
    total += log_sum_exp(terms);
    if (total == kNegInf) return kNegInf;
  }
  return total;
}

double log_joint_pmf(const MpmrfParams& params, const Tree& tree, Vertex root,
                     std::span<const int> x) {
  return log_joint_pmf(make_rooted_model(params, tree, root, {.allow_independence = true}), x);
}

double joint_pmf(const MpmrfParams& params, const Tree& tree, Vertex root,
                 std::span<const int> x) {
  return std::exp(log_joint_pmf(params, tree, root, x));
}

double eta_pgf(const RootedTree& rt, Vertex v, std::span<const double> t,
               std::span<const double> theta) {
  const int d = rt.num_vertices();
  if (static_cast<int>(t.size()) != d || static_cast<int>(theta.size()) != d) {
    throw Error(Errc::ArgumentOutOfRange, "argument vectors must have one entry per vertex");
  }
  for (int i = 0; i < d; ++i) {
    if (!(t[i] >= -1.0 && t[i] <= 1.0)) {
      throw Error(Errc::ArgumentOutOfRange, "t entries must lie in [-1, 1]");
    }
    if (!(theta[i] >= 0.0 && theta[i] <= 1.0)) {
      throw Error(Errc::ArgumentOutOfRange, "theta entries must lie in [0, 1]");
    }
  }
  if (v < 1 || v > d) throw Error(Errc::VertexOutOfRange, "vertex out of range");
  return eta_all<double>(rt, t, theta)[v - 1];
}

double joint_pgf(const MpmrfParams& params, const Tree& tree, Vertex root,
                 std::span<const double> t) {
  const RootedModel m = make_rooted_model(params, tree, root, {.allow_independence = true});
  const int d = tree.num_vertices();
  if (static_cast<int>(t.size()) != d) {
    throw Error(Errc::ArgumentOutOfRange, "t must have one entry per vertex");
  }
  for (double ti : t) {
    if (!(ti >= -1.0 && ti <= 1.0)) {
      throw Error(Errc::ArgumentOutOfRange, "t entries must lie in [-1, 1]");
    }
  }
  const auto eta = eta_all<double>(m.tree, t, m.theta);
  double s = 0.0;
  for (int i = 0; i < d; ++i) s += m.zeta[i] * (eta[i] - 1.0);
  return std::exp(s);
}

std::complex<double> joint_pgf(const RootedModel& m, std::span<const std::complex<double>> t) {
  const auto eta = eta_all<std::complex<double>>(m.tree, t, m.theta);
  std::complex<double> s = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) s += m.zeta[i] * (eta[i] - 1.0);
  return std::exp(s);
}

double correlation(const MpmrfParams& params, const Tree& tree, Vertex u, Vertex v) {
  double r = 1.0;
  for (const auto& [a, b] : path_between(tree, u, v)) r *= params.alpha_on(a, b);
  return r;
}

double covariance(const MpmrfParams& params, const Tree& tree, Vertex u, Vertex v) {
  const double r = correlation(params, tree, u, v);
  return std::sqrt(params.lambda.at(u - 1) * params.lambda.at(v - 1)) * r;
}

std::vector<std::vector<double>> correlation_matrix(const MpmrfParams& params, const Tree& tree) {
  const int d = tree.num_vertices();
  std::vector<std::vector<double>> r(d, std::vector<double>(d, 0.0));
  std::vector<Vertex> stack;
  for (Vertex s = 1; s <= d; ++s) {
    auto& row = r[s - 1];
    std::vector<char> seen(d, 0);
    row[s - 1] = 1.0;
    seen[s - 1] = 1;
    stack.assign(1, s);
    while (!stack.empty()) {
      const Vertex v = stack.back();
      stack.pop_back();
      for (Vertex w : tree.neighbors(v)) {
        if (seen[w - 1]) continue;
        seen[w - 1] = 1;
        row[w - 1] = row[v - 1] * params.alpha_on(v, w);
        stack.push_back(w);
      }
    }
  }
  return r;
}

std::size_t ShockDecomposition::nonzero_count(double tol) const {
  return static_cast<std::size_t>(std::count_if(
      shocks.begin(), shocks.end(), [tol](const Shock& s) { return s.gamma > tol; }));
}

ShockDecomposition common_shock_expansion(const MpmrfParams& params, const Tree& tree,
                                          int max_dimension) {
  const int d = tree.num_vertices();
  if (d > max_dimension) {
    throw Error(Errc::DimensionTooLarge, "common-shock expansion limited to " +
                                             std::to_string(max_dimension) + " vertices");
  }
  require_valid(params, tree);
  const RootedTree rt = root_tree(tree, 1);

  // Connected sets whose topmost vertex is v: v joined with, for each child,
  // either nothing or a set topped by that child.
  std::vector<std::vector<std::vector<Vertex>>> topped(d);
  auto order = rt.topo_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Vertex v = *it;
    std::vector<std::vector<Vertex>> sets{{v}};
    for (Vertex c : rt.children(v)) {
      const auto& child_sets = topped[c - 1];
      std::vector<std::vector<Vertex>> extended;
      extended.reserve(sets.size() * (child_sets.size() + 1));
      for (const auto& s : sets) {
        extended.push_back(s);
        for (const auto& cs : child_sets) {
          auto merged = s;
          merged.insert(merged.end(), cs.begin(), cs.end());
          extended.push_back(std::move(merged));
        }
      }
      sets = std::move(extended);
    }
    topped[v - 1] = std::move(sets);
  }

  ShockDecomposition out;
  out.dimension = d;
  std::vector<char> in_set(d, 0);
  for (Vertex v = 1; v <= d; ++v) {
    for (auto& s : topped[v - 1]) {
      std::sort(s.begin(), s.end());
      for (Vertex w : s) in_set[w - 1] = 1;
      double g = 1.0;
      for (Vertex w : s) g *= params.lambda[w - 1];
      for (const auto& e : tree.edges()) {
        const bool iu = in_set[e.u - 1];
        const bool iv = in_set[e.v - 1];
        const double a = params.alpha.at(e);
        const double lu = params.lambda[e.u - 1];
        const double lv = params.lambda[e.v - 1];
        if (iu && iv) {
          g *= a / std::sqrt(lu * lv);
        } else if (iu) {
          g *= 1.0 - a * std::sqrt(lv / lu);
        } else if (iv) {
          g *= 1.0 - a * std::sqrt(lu / lv);
        }
      }
      for (Vertex w : s) in_set[w - 1] = 0;
      out.shocks.push_back({std::move(s), std::max(g, 0.0)});
    }
  }
  std::sort(out.shocks.begin(), out.shocks.end(), [](const Shock& a, const Shock& b) {
    if (a.vertices.size() != b.vertices.size()) return a.vertices.size() < b.vertices.size();
    return a.vertices < b.vertices;
  });
  return out;
}

std::vector<double> shock_pmf_box(const ShockDecomposition& dec, std::span<const int> upper) {
  const int d = dec.dimension;
  if (static_cast<int>(upper.size()) != d) {
    throw Error(Errc::InvalidParams, "box bounds must have one entry per vertex");
  }
  if (d > 12) throw Error(Errc::DimensionTooLarge, "shock enumeration limited to 12 vertices");
  std::vector<std::size_t> stride(d, 1);
  std::size_t size = 1;
  for (int i = d - 1; i >= 0; --i) {
    if (upper[i] < 0) throw Error(Errc::NegativeCount, "negative box bound");
    stride[i] = size;
    size *= static_cast<std::size_t>(upper[i] + 1);
  }
  if (size > 50'000'000) throw Error(Errc::DimensionTooLarge, "shock enumeration box too large");

  std::vector<double> p(size, 0.0);
  p[0] = 1.0;
  std::vector<double> next(size);
  std::vector<int> idx(d);
  for (const auto& shock : dec.shocks) {
    if (shock.gamma <= 0.0) continue;
    int ymax = std::numeric_limits<int>::max();
    std::size_t step = 0;
    for (Vertex w : shock.vertices) {
      ymax = std::min(ymax, upper[w - 1]);
      step += stride[w - 1];
    }
    std::vector<double> pois(ymax + 1);
    for (int y = 0; y <= ymax; ++y) pois[y] = std::exp(log_poisson_pmf(y, shock.gamma));
    std::fill(next.begin(), next.end(), 0.0);
    std::fill(idx.begin(), idx.end(), 0);
    for (std::size_t flat = 0; flat < size; ++flat) {
      if (flat > 0) {
        for (int i = d - 1; i >= 0; --i) {
          if (++idx[i] <= upper[i]) break;
          idx[i] = 0;
        }
      }
      const double base = p[flat];
      if (base == 0.0) continue;
      int room = ymax;
      for (Vertex w : shock.vertices) room = std::min(room, upper[w - 1] - idx[w - 1]);
      for (int y = 0; y <= room; ++y) next[flat + y * step] += base * pois[y];
    }
    std::swap(p, next);
  }
  return p;
}

double pmf_via_shocks(const ShockDecomposition& dec, std::span<const int> x) {
  for (int xi : x) {
    if (xi < 0) throw Error(Errc::NegativeCount, "negative count " + std::to_string(xi));
  }
  return shock_pmf_box(dec, x).back();
}

double log_likelihood(const MpmrfParams& params, const Tree& tree, const CountMatrix& data) {
  const RootedModel m = make_rooted_model(params, tree, 1);
  double total = 0.0;
  for (const auto& row : data) total += log_joint_pmf(m, row);
  return total;
}

}  // namespace mpmrf
