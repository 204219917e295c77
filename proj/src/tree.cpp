#include "mpmrf/tree.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <string>

#include "mpmrf/error.hpp"

namespace mpmrf {

namespace {

void check_vertex(int n, Vertex v) {
  if (v < 1 || v > n) {
    throw Error(Errc::VertexOutOfRange,
                "vertex " + std::to_string(v) + " outside 1.." + std::to_string(n));
  }
}

}  // namespace

std::span<const Vertex> Tree::neighbors(Vertex v) const {
  check_vertex(num_vertices(), v);
  return adjacency_[v - 1];
}

bool Tree::has_edge(Vertex a, Vertex b) const {
  return std::binary_search(edges_.begin(), edges_.end(), Edge::of(a, b));
}

Tree build_tree(int num_vertices, std::span<const std::pair<Vertex, Vertex>> edge_list) {
  if (num_vertices < 1) throw Error(Errc::InvalidSize, "a tree needs at least one vertex");
  std::set<Edge> seen;
  for (const auto& [a, b] : edge_list) {
    check_vertex(num_vertices, a);
    check_vertex(num_vertices, b);
    if (a == b) {
      throw Error(Errc::CycleOrDisconnected, "self-loop at vertex " + std::to_string(a));
    }
    if (!seen.insert(Edge::of(a, b)).second) {
      throw Error(Errc::DuplicateEdge,
                  "edge (" + std::to_string(a) + "," + std::to_string(b) + ") repeated");
    }
  }
  if (static_cast<int>(seen.size()) != num_vertices - 1) {
    throw Error(Errc::CycleOrDisconnected,
                std::to_string(seen.size()) + " edges for " + std::to_string(num_vertices) +
                    " vertices");
  }

  Tree tree;
  tree.edges_.assign(seen.begin(), seen.end());
  tree.adjacency_.assign(num_vertices, {});
  for (const auto& e : tree.edges_) {
    tree.adjacency_[e.u - 1].push_back(e.v);
    tree.adjacency_[e.v - 1].push_back(e.u);
  }
  for (auto& nb : tree.adjacency_) std::sort(nb.begin(), nb.end());

  std::vector<char> reached(num_vertices, 0);
  std::vector<Vertex> stack{1};
  reached[0] = 1;
  int count = 1;
  while (!stack.empty()) {
    Vertex v = stack.back();
    stack.pop_back();
    for (Vertex w : tree.adjacency_[v - 1]) {
      if (!reached[w - 1]) {
        reached[w - 1] = 1;
        ++count;
        stack.push_back(w);
      }
    }
  }
  if (count != num_vertices) {
    throw Error(Errc::CycleOrDisconnected, "graph is not connected");
  }
  return tree;
}

Tree build_tree(int num_vertices, const std::vector<std::pair<Vertex, Vertex>>& edge_list) {
  return build_tree(num_vertices, std::span<const std::pair<Vertex, Vertex>>(edge_list));
}

Vertex RootedTree::parent(Vertex v) const {
  check_vertex(num_vertices(), v);
  return parent_[v - 1];
}

std::span<const Vertex> RootedTree::children(Vertex v) const {
  check_vertex(num_vertices(), v);
  return children_[v - 1];
}

std::span<const Vertex> RootedTree::descendants(Vertex v) const {
  check_vertex(num_vertices(), v);
  const int pos = position_[v - 1];
  return std::span<const Vertex>(order_).subspan(pos + 1, subtree_size_[v - 1] - 1);
}

int RootedTree::depth(Vertex v) const {
  check_vertex(num_vertices(), v);
  return depth_[v - 1];
}

RootedTree root_tree(const Tree& tree, Vertex root) {
  const int n = tree.num_vertices();
  check_vertex(n, root);

  RootedTree rt;
  rt.base_ = tree;
  rt.root_ = root;
  rt.parent_.assign(n, 0);
  rt.children_.assign(n, {});
  rt.depth_.assign(n, 0);
  rt.position_.assign(n, 0);
  rt.subtree_size_.assign(n, 1);
  rt.order_.reserve(n);

  // Iterative preorder; children visited in ascending label order.
  std::vector<Vertex> stack{root};
  std::vector<char> visited(n, 0);
  visited[root - 1] = 1;
  while (!stack.empty()) {
    Vertex v = stack.back();
    stack.pop_back();
    rt.position_[v - 1] = static_cast<int>(rt.order_.size());
    rt.order_.push_back(v);
    auto nb = tree.neighbors(v);
    for (Vertex w : nb) {
      if (!visited[w - 1]) {
        visited[w - 1] = 1;
        rt.parent_[w - 1] = v;
        rt.depth_[w - 1] = rt.depth_[v - 1] + 1;
        rt.children_[v - 1].push_back(w);
      }
    }
    const auto& ch = rt.children_[v - 1];
    for (auto it = ch.rbegin(); it != ch.rend(); ++it) stack.push_back(*it);
  }
  for (auto it = rt.order_.rbegin(); it != rt.order_.rend(); ++it) {
    Vertex p = rt.parent_[*it - 1];
    if (p != 0) rt.subtree_size_[p - 1] += rt.subtree_size_[*it - 1];
  }
  return rt;
}

std::vector<std::pair<Vertex, Vertex>> path_between(const Tree& tree, Vertex u, Vertex v) {
  check_vertex(tree.num_vertices(), u);
  check_vertex(tree.num_vertices(), v);
  std::vector<std::pair<Vertex, Vertex>> path;
  if (u == v) return path;
  const RootedTree rt = root_tree(tree, u);
  for (Vertex w = v; w != u; w = rt.parent(w)) path.emplace_back(rt.parent(w), w);
  std::reverse(path.begin(), path.end());
  return path;
}

std::vector<int> distances_from(const Tree& tree, Vertex source) {
  const int n = tree.num_vertices();
  check_vertex(n, source);
  std::vector<int> dist(n, -1);
  std::vector<Vertex> queue{source};
  dist[source - 1] = 0;
  for (std::size_t i = 0; i < queue.size(); ++i) {
    Vertex v = queue[i];
    for (Vertex w : tree.neighbors(v)) {
      if (dist[w - 1] < 0) {
        dist[w - 1] = dist[v - 1] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

WeightedGraph::WeightedGraph(int num_vertices, std::vector<std::string> labels)
    : n_(num_vertices),
      w_(static_cast<std::size_t>(num_vertices) * num_vertices,
         std::numeric_limits<double>::quiet_NaN()),
      labels_(std::move(labels)) {
  if (num_vertices < 1) throw Error(Errc::InvalidSize, "graph needs at least one vertex");
  if (!labels_.empty() && static_cast<int>(labels_.size()) != n_) {
    throw Error(Errc::InvalidSize, "label count does not match vertex count");
  }
}

double WeightedGraph::weight(Vertex a, Vertex b) const {
  check_vertex(n_, a);
  check_vertex(n_, b);
  return w_[static_cast<std::size_t>(a - 1) * n_ + (b - 1)];
}

void WeightedGraph::set_weight(Vertex a, Vertex b, double w) {
  check_vertex(n_, a);
  check_vertex(n_, b);
  w_[static_cast<std::size_t>(a - 1) * n_ + (b - 1)] = w;
  w_[static_cast<std::size_t>(b - 1) * n_ + (a - 1)] = w;
}

Tree kruskal_mst(const WeightedGraph& graph) {
  const int n = graph.num_vertices();
  struct Candidate {
    double w;
    Edge e;
  };
  std::vector<Candidate> candidates;
  for (Vertex a = 1; a <= n; ++a) {
    for (Vertex b = a + 1; b <= n; ++b) {
      const double w = graph.weight(a, b);
      if (!std::isnan(w)) candidates.push_back({w, Edge{a, b}});
    }
  }
  std::stable_sort(candidates.begin(), candidates.end(),
                   [](const Candidate& x, const Candidate& y) {
                     if (x.w != y.w) return x.w > y.w;
                     return x.e < y.e;
                   });

  std::vector<int> parent(n);
  std::iota(parent.begin(), parent.end(), 0);
  auto find = [&parent](int x) {
    while (parent[x] != x) {
      parent[x] = parent[parent[x]];
      x = parent[x];
    }
    return x;
  };

  std::vector<std::pair<Vertex, Vertex>> chosen;
  for (const auto& c : candidates) {
    int ra = find(c.e.u - 1);
    int rb = find(c.e.v - 1);
    if (ra == rb) continue;
    parent[ra] = rb;
    chosen.emplace_back(c.e.u, c.e.v);
    if (static_cast<int>(chosen.size()) == n - 1) break;
  }
  if (static_cast<int>(chosen.size()) != n - 1) {
    throw Error(Errc::Disconnected, "weighted graph has no spanning tree");
  }
  return build_tree(n, chosen);
}

long long cayley_vertex_count(int chi, int depth) {
  if (chi < 2) throw Error(Errc::InvalidDegree, "Cayley tree degree must be >= 2");
  if (depth < 0) throw Error(Errc::InvalidSize, "depth must be >= 0");
  if (chi == 2) return 1 + 2LL * depth;
  long long power = 1;
  for (int i = 0; i < depth; ++i) power *= (chi - 1);
  return 1 + chi * (power - 1) / (chi - 2);
}

RootedTree cayley_tree(int chi, int depth) {
  const long long total = cayley_vertex_count(chi, depth);
  if (total > 50'000'000) throw Error(Errc::InvalidSize, "Cayley tree too large");
  std::vector<std::pair<Vertex, Vertex>> edges;
  std::vector<Vertex> level{1};
  Vertex next = 2;
  for (int i = 1; i <= depth; ++i) {
    std::vector<Vertex> next_level;
    for (Vertex p : level) {
      const int fanout = (i == 1) ? chi : chi - 1;
      for (int k = 0; k < fanout; ++k) {
        edges.emplace_back(p, next);
        next_level.push_back(next++);
      }
    }
    level = std::move(next_level);
  }
  return root_tree(build_tree(static_cast<int>(total), edges), 1);
}

RootedTree star_tree(int d) {
  if (d < 1) throw Error(Errc::InvalidSize, "star tree needs at least one vertex");
  std::vector<std::pair<Vertex, Vertex>> edges;
  for (Vertex v = 2; v <= d; ++v) edges.emplace_back(1, v);
  return root_tree(build_tree(d, edges), 1);
}

RootedTree binary_tree(int depth) {
  if (depth < 0 || depth > 24) throw Error(Errc::InvalidSize, "binary tree depth out of range");
  const int n = (1 << (depth + 1)) - 1;
  std::vector<std::pair<Vertex, Vertex>> edges;
  for (Vertex v = 2; v <= n; ++v) edges.emplace_back(v / 2, v);
  return root_tree(build_tree(n, edges), 1);
}

Tree path_tree(int d) {
  if (d < 1) throw Error(Errc::InvalidSize, "path needs at least one vertex");
  std::vector<std::pair<Vertex, Vertex>> edges;
  for (Vertex v = 1; v < d; ++v) edges.emplace_back(v, v + 1);
  return build_tree(d, edges);
}

}  // namespace mpmrf
