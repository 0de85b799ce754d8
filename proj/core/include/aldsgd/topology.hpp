#pragma once

#include <Eigen/Dense>
#include <optional>
#include <utility>
#include <vector>

namespace aldsgd {

using Edge = std::pair<int, int>;  // stored normalized: first < second

// Undirected worker communication topology.  Immutable after construction;
// construction validates endpoints, rejects self-loops and duplicates, and
// (for base training topologies) requires connectivity.
class Graph {
 public:
  Graph(int m, std::vector<Edge> edges, bool require_connected = true);

  int node_count() const { return m_; }
  const std::vector<Edge>& edges() const { return edges_; }
  // Total degree D = number of links.
  int total_degree() const { return static_cast<int>(edges_.size()); }
  int degree(int v) const { return static_cast<int>(adjacency_[v].size()); }
  const std::vector<int>& neighbors(int v) const { return adjacency_[v]; }
  bool has_edge(int u, int v) const;
  bool connected() const;

 private:
  int m_;
  std::vector<Edge> edges_;
  std::vector<std::vector<int>> adjacency_;
};

// A set of vertex-disjoint edges, as produced by matching_decomposition.
struct Matching {
  std::vector<Edge> edges;
};

// Rotating family of same-size, same-total-degree graphs with precomputed
// matching decompositions; one graph is active per round.
struct DynamicGraphSet {
  std::vector<Graph> graphs;
  std::vector<std::vector<Matching>> decompositions;

  int node_count() const { return graphs.front().node_count(); }
  int graph_count() const { return static_cast<int>(graphs.size()); }
};

// Generator families.
Graph make_ring(int m);
Graph make_complete(int m);
Graph make_star(int m);  // center 0
// Ring on nodes 0..m-2 plus a degree-1 pendant (node m-1) attached to node 0.
Graph make_pendant_ring(int m);

// Combinatorial graph Laplacian: diag(degree) minus adjacency.  Entries are
// small integers stored exactly in doubles, so L*ones == 0 holds exactly.
Eigen::MatrixXd laplacian(const Graph& g);
Eigen::MatrixXd laplacian_of_edges(int m, const std::vector<Edge>& edges);

// Proper edge coloring into at most max_degree + 1 matchings (fan rotation
// over lexicographically sorted edges).  Deterministic; matchings are
// edge-disjoint and cover every edge.
std::vector<Matching> matching_decomposition(const Graph& g);

// Relabel every edge (u,v) to ((u+shift) mod m, (v+shift) mod m).
Graph rotate_graph(const Graph& g, int shift);

// Build n rotations of g (graphs[i] = rotate_graph(g, shifts[i])) with their
// matching decompositions.  Shifts must be distinct.
DynamicGraphSet make_dynamic_set(const Graph& g, int n,
                                 const std::vector<int>& shifts);
// Default rotation offsets {0, floor(m/3), floor(2m/3)} truncated to n.
std::vector<int> default_shifts(int m, int n);

// Thin g down to exactly target_d edges by repeatedly removing the non-bridge
// edge with the largest endpoint-degree sum (lexicographic tie-break).  The
// result stays connected; target_d below m-1 is rejected.
Graph reduce_degree(const Graph& g, int target_d);

// Config-facing topology descriptor.
struct TopologyDesc {
  enum class Kind { ring, complete, star, pendant_ring, explicit_edges };
  Kind kind = Kind::ring;
  int m = 8;
  std::vector<Edge> edges;  // explicit_edges only
  int dynamic_n = 1;
  std::vector<int> shifts;  // empty -> default_shifts(m, dynamic_n)
  std::optional<int> target_degree;
};

// Base graph for a descriptor, with any degree reduction applied.
Graph build_graph(const TopologyDesc& desc);
DynamicGraphSet build_dynamic_set(const TopologyDesc& desc);

}  // namespace aldsgd
