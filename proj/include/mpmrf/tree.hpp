#pragma once

#include <compare>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace mpmrf {

/// Vertex label, 1-based everywhere in the public interface. Per-vertex
/// vectors (means, severities, ...) are stored densely at index `v - 1`.
using Vertex = int;

/// Undirected edge with endpoints normalized so that `u < v`.
struct Edge {
  Vertex u = 0;
  Vertex v = 0;

  static Edge of(Vertex a, Vertex b) { return a < b ? Edge{a, b} : Edge{b, a}; }
  friend auto operator<=>(const Edge&, const Edge&) = default;
};

class Tree {
 public:
  Tree() = default;

  int num_vertices() const { return static_cast<int>(adjacency_.size()); }
  const std::vector<Edge>& edges() const { return edges_; }
  std::span<const Vertex> neighbors(Vertex v) const;
  int degree(Vertex v) const { return static_cast<int>(neighbors(v).size()); }
  bool has_edge(Vertex a, Vertex b) const;
  bool contains(Vertex v) const { return v >= 1 && v <= num_vertices(); }

 private:
  friend Tree build_tree(int, std::span<const std::pair<Vertex, Vertex>>);
  std::vector<Edge> edges_;                  // sorted
  std::vector<std::vector<Vertex>> adjacency_;  // index v-1, ascending labels
};

/// Validates an edge list and builds the tree. Throws CycleOrDisconnected,
/// DuplicateEdge or VertexOutOfRange.
Tree build_tree(int num_vertices, std::span<const std::pair<Vertex, Vertex>> edge_list);
Tree build_tree(int num_vertices, const std::vector<std::pair<Vertex, Vertex>>& edge_list);

/// Rooted view of a tree. `topo_order` is a depth-first preorder, so every
/// parent precedes its children and the descendants of `v` form a contiguous
/// block right after `v`.
class RootedTree {
 public:
  RootedTree() = default;

  const Tree& base() const { return base_; }
  int num_vertices() const { return base_.num_vertices(); }
  Vertex root() const { return root_; }
  /// 0 for the root.
  Vertex parent(Vertex v) const;
  std::span<const Vertex> children(Vertex v) const;
  std::span<const Vertex> descendants(Vertex v) const;
  std::span<const Vertex> topo_order() const { return order_; }
  int depth(Vertex v) const;
  bool is_leaf(Vertex v) const { return children(v).empty(); }

 private:
  friend RootedTree root_tree(const Tree&, Vertex);
  Tree base_;
  Vertex root_ = 0;
  std::vector<Vertex> parent_;
  std::vector<std::vector<Vertex>> children_;
  std::vector<Vertex> order_;
  std::vector<int> position_;  // index of v in order_
  std::vector<int> subtree_size_;
  std::vector<int> depth_;
};

RootedTree root_tree(const Tree& tree, Vertex root);

/// Edges of the unique path from u to v, each oriented in walking direction.
std::vector<std::pair<Vertex, Vertex>> path_between(const Tree& tree, Vertex u, Vertex v);

/// Path lengths from `source` to every vertex (index v-1).
std::vector<int> distances_from(const Tree& tree, Vertex source);

/// Dense symmetric weight matrix. NaN marks an absent edge.
class WeightedGraph {
 public:
  explicit WeightedGraph(int num_vertices, std::vector<std::string> labels = {});

  int num_vertices() const { return n_; }
  double weight(Vertex a, Vertex b) const;
  void set_weight(Vertex a, Vertex b, double w);
  const std::vector<std::string>& labels() const { return labels_; }

 private:
  int n_;
  std::vector<double> w_;
  std::vector<std::string> labels_;
};

/// Maximum-weight spanning tree. Among equal weights the lexicographically
/// smaller edge (u, v), u < v, is taken first. Throws Disconnected.
Tree kruskal_mst(const WeightedGraph& graph);

/// Regular tree: the root has `chi` children and every other internal vertex
/// `chi - 1`; `depth` levels below the root. Vertices labeled breadth-first.
RootedTree cayley_tree(int chi, int depth);
/// 1 + chi * ((chi-1)^depth - 1) / (chi - 2), or 1 + 2*depth when chi == 2.
long long cayley_vertex_count(int chi, int depth);

/// Vertex 1 joined to vertices 2..d, rooted at 1.
RootedTree star_tree(int d);
/// Complete binary tree with `depth` levels below the root (2^(depth+1) - 1
/// vertices); vertex i has children 2i and 2i+1.
RootedTree binary_tree(int depth);

/// Path 1 - 2 - ... - d.
Tree path_tree(int d);

}  // namespace mpmrf
