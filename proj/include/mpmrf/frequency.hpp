#pragma once

#include <complex>
#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "mpmrf/tree.hpp"

namespace mpmrf {

/// Mean counts per vertex (index v-1) and one dependence parameter per edge.
struct MpmrfParams {
  std::vector<double> lambda;
  std::map<Edge, double> alpha;

  double alpha_on(Vertex a, Vertex b) const;
  int dimension() const { return static_cast<int>(lambda.size()); }
};

struct ParamViolation {
  std::string what;    // "lambda" or "alpha"
  Vertex u = 0;        // vertex for lambda, edge endpoints for alpha
  Vertex v = 0;
  double value = 0.0;
  double lower = 0.0;  // admissible interval
  double upper = 0.0;
  std::string message;
};

struct ValidationReport {
  std::vector<ParamViolation> violations;
  bool ok() const { return violations.empty(); }
  std::string summary() const;
};

struct ValidationOptions {
  /// Accept alpha == 0 as exact independence along that edge.
  bool allow_independence = false;
};

/// Largest admissible alpha on an edge joining means la and lb.
double alpha_bound(double la, double lb);

/// Throws InvalidParams when dimensions disagree with the tree; bound
/// violations are reported, not thrown.
ValidationReport validate_params(const MpmrfParams& params, const Tree& tree,
                                 ValidationOptions opts = {});
/// Throws InvalidParams listing every violation.
void require_valid(const MpmrfParams& params, const Tree& tree, ValidationOptions opts = {});

/// Thinning probabilities and innovation means for one rooting (index v-1).
/// The root carries theta = 0 and zeta = lambda_root.
struct RootedModel {
  RootedTree tree;
  std::vector<double> theta;
  std::vector<double> zeta;
};

RootedModel make_rooted_model(const MpmrfParams& params, const Tree& tree, Vertex root,
                              ValidationOptions opts = {});

using CountMatrix = std::vector<std::vector<int>>;

/// n joint draws; row i is drawn from generator block i / 4096, so output
/// does not depend on how blocks are scheduled.
CountMatrix sample(const MpmrfParams& params, const Tree& tree, Vertex root, std::int64_t n,
                   std::uint64_t seed, ValidationOptions opts = {});

double log_joint_pmf(const RootedModel& model, std::span<const int> x);
double log_joint_pmf(const MpmrfParams& params, const Tree& tree, Vertex root,
                     std::span<const int> x);
double joint_pmf(const MpmrfParams& params, const Tree& tree, Vertex root,
                 std::span<const int> x);

/// Leaf-to-root values eta_v for every vertex (index v-1).
template <class T>
std::vector<T> eta_all(const RootedTree& rt, std::span<const T> t,
                       std::span<const double> theta) {
  const int n = rt.num_vertices();
  std::vector<T> eta(n);
  auto order = rt.topo_order();
  for (auto it = order.rbegin(); it != order.rend(); ++it) {
    const Vertex v = *it;
    T value = t[v - 1];
    for (Vertex c : rt.children(v)) {
      const double th = theta[c - 1];
      value *= T(1.0 - th) + th * eta[c - 1];
    }
    eta[v - 1] = value;
  }
  return eta;
}

/// eta_v for a single vertex. t in [-1,1], theta in [0,1].
double eta_pgf(const RootedTree& rt, Vertex v, std::span<const double> t,
               std::span<const double> theta);

double joint_pgf(const MpmrfParams& params, const Tree& tree, Vertex root,
                 std::span<const double> t);
std::complex<double> joint_pgf(const RootedModel& model, std::span<const std::complex<double>> t);

double covariance(const MpmrfParams& params, const Tree& tree, Vertex u, Vertex v);
double correlation(const MpmrfParams& params, const Tree& tree, Vertex u, Vertex v);
/// All pairwise path products of alpha; entry [u-1][v-1].
std::vector<std::vector<double>> correlation_matrix(const MpmrfParams& params, const Tree& tree);

struct Shock {
  std::vector<Vertex> vertices;  // ascending
  double gamma = 0.0;
};

struct ShockDecomposition {
  int dimension = 0;
  std::vector<Shock> shocks;
  std::size_t nonzero_count(double tol = 0.0) const;
};

ShockDecomposition common_shock_expansion(const MpmrfParams& params, const Tree& tree,
                                          int max_dimension = 20);

/// Joint pmf of the shock sums on the box prod_v [0, upper_v], exact on that
/// box. Row-major with vertex 1 slowest.
std::vector<double> shock_pmf_box(const ShockDecomposition& decomposition,
                                  std::span<const int> upper);
double pmf_via_shocks(const ShockDecomposition& decomposition, std::span<const int> x);

double log_likelihood(const MpmrfParams& params, const Tree& tree, const CountMatrix& data);

}  // namespace mpmrf
