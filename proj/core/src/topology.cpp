#include "aldsgd/topology.hpp"

#include <algorithm>
#include <map>
#include <queue>
#include <set>
#include <stdexcept>
#include <string>

namespace aldsgd {

namespace {

std::vector<Edge> normalize_edges(std::vector<Edge> edges) {
  for (auto& [u, v] : edges) {
    if (u > v) std::swap(u, v);
  }
  std::sort(edges.begin(), edges.end());
  return edges;
}

bool connected_under(int m, const std::vector<std::vector<int>>& adjacency) {
  if (m == 0) return false;
  std::vector<char> seen(m, 0);
  std::queue<int> frontier;
  frontier.push(0);
  seen[0] = 1;
  int visited = 1;
  while (!frontier.empty()) {
    int v = frontier.front();
    frontier.pop();
    for (int w : adjacency[v]) {
      if (!seen[w]) {
        seen[w] = 1;
        ++visited;
        frontier.push(w);
      }
    }
  }
  return visited == m;
}

std::vector<std::vector<int>> build_adjacency(int m,
                                              const std::vector<Edge>& edges) {
  std::vector<std::vector<int>> adjacency(m);
  for (const auto& [u, v] : edges) {
    adjacency[u].push_back(v);
    adjacency[v].push_back(u);
  }
  for (auto& nbrs : adjacency) std::sort(nbrs.begin(), nbrs.end());
  return adjacency;
}

}  // namespace

Graph::Graph(int m, std::vector<Edge> edges, bool require_connected)
    : m_(m), edges_(normalize_edges(std::move(edges))) {
  if (m_ < 2) throw std::invalid_argument("graph needs at least 2 nodes");
  for (const auto& [u, v] : edges_) {
    if (u < 0 || v < 0 || u >= m_ || v >= m_)
      throw std::invalid_argument("edge endpoint out of range");
    if (u == v) throw std::invalid_argument("self-loops are not allowed");
  }
  if (std::adjacent_find(edges_.begin(), edges_.end()) != edges_.end())
    throw std::invalid_argument("duplicate edge");
  adjacency_ = build_adjacency(m_, edges_);
  if (require_connected && !connected_under(m_, adjacency_))
    throw std::invalid_argument("graph is not connected");
}

bool Graph::has_edge(int u, int v) const {
  if (u > v) std::swap(u, v);
  return std::binary_search(edges_.begin(), edges_.end(), Edge{u, v});
}

bool Graph::connected() const { return connected_under(m_, adjacency_); }

Graph make_ring(int m) {
  std::vector<Edge> edges;
  if (m == 2) {
    edges.push_back({0, 1});
  } else {
    for (int i = 0; i < m; ++i) edges.push_back({i, (i + 1) % m});
  }
  return Graph(m, std::move(edges));
}

Graph make_complete(int m) {
  std::vector<Edge> edges;
  for (int u = 0; u < m; ++u)
    for (int v = u + 1; v < m; ++v) edges.push_back({u, v});
  return Graph(m, std::move(edges));
}

Graph make_star(int m) {
  std::vector<Edge> edges;
  for (int v = 1; v < m; ++v) edges.push_back({0, v});
  return Graph(m, std::move(edges));
}

Graph make_pendant_ring(int m) {
  if (m < 4) throw std::invalid_argument("pendant_ring needs at least 4 nodes");
  const int ring = m - 1;
  std::vector<Edge> edges;
  for (int i = 0; i < ring; ++i) edges.push_back({i, (i + 1) % ring});
  edges.push_back({0, m - 1});
  return Graph(m, std::move(edges));
}

Eigen::MatrixXd laplacian_of_edges(int m, const std::vector<Edge>& edges) {
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(m, m);
  for (const auto& [u, v] : edges) {
    lap(u, u) += 1.0;
    lap(v, v) += 1.0;
    lap(u, v) -= 1.0;
    lap(v, u) -= 1.0;
  }
  return lap;
}

Eigen::MatrixXd laplacian(const Graph& g) {
  return laplacian_of_edges(g.node_count(), g.edges());
}

namespace {

// Proper edge coloring with at most max_degree + 1 colors via fan rotation
// and alternating-path inversion.  Deterministic: edges are processed in
// lexicographic order and every choice takes the smallest candidate.
class EdgeColorer {
 public:
  explicit EdgeColorer(const Graph& g)
      : graph_(g), color_count_(1), color_of_(g.edges().size(), -1) {
    for (int v = 0; v < g.node_count(); ++v)
      color_count_ = std::max(color_count_, g.degree(v) + 1);
    at_.assign(g.node_count(), std::vector<int>(color_count_, -1));
    edge_id_.resize(g.node_count());
    for (std::size_t e = 0; e < g.edges().size(); ++e) {
      const auto& [u, v] = g.edges()[e];
      edge_id_[u][v] = static_cast<int>(e);
      edge_id_[v][u] = static_cast<int>(e);
    }
  }

  std::vector<int> run() {
    for (std::size_t e = 0; e < graph_.edges().size(); ++e) color_edge(e);
    validate();
    return color_of_;
  }

  int colors_used() const {
    int used = 0;
    for (int c : color_of_) used = std::max(used, c + 1);
    return used;
  }

 private:
  bool is_free(int v, int c) const { return at_[v][c] < 0; }

  int free_color(int v) const {
    for (int c = 0; c < color_count_; ++c)
      if (is_free(v, c)) return c;
    throw std::logic_error("no free color");
  }

  void assign(std::size_t e, int c) {
    const auto& [u, v] = graph_.edges()[e];
    color_of_[e] = c;
    at_[u][c] = static_cast<int>(e);
    at_[v][c] = static_cast<int>(e);
  }

  void clear(std::size_t e) {
    const auto& [u, v] = graph_.edges()[e];
    at_[u][color_of_[e]] = -1;
    at_[v][color_of_[e]] = -1;
    color_of_[e] = -1;
  }

  int other_end(std::size_t e, int x) const {
    const auto& [u, v] = graph_.edges()[e];
    return x == u ? v : u;
  }

  // Swap colors c and d along the maximal alternating path leaving u on a
  // d-colored edge.
  void invert_path(int u, int d, int c) {
    std::vector<std::size_t> path;
    int x = u, want = d;
    while (at_[x][want] >= 0) {
      const auto e = static_cast<std::size_t>(at_[x][want]);
      path.push_back(e);
      x = other_end(e, x);
      want = want == d ? c : d;
    }
    std::vector<int> swapped(path.size());
    for (std::size_t i = 0; i < path.size(); ++i) {
      swapped[i] = color_of_[path[i]] == d ? c : d;
      clear(path[i]);
    }
    for (std::size_t i = 0; i < path.size(); ++i) assign(path[i], swapped[i]);
  }

  void color_edge(std::size_t e) {
    const int u = graph_.edges()[e].first;
    const int v = graph_.edges()[e].second;

    // Maximal fan of u starting at v: each next edge's color is free at the
    // previous fan vertex.
    std::vector<int> fan = {v};
    std::vector<char> in_fan(graph_.node_count(), 0);
    in_fan[v] = 1;
    for (bool grew = true; grew;) {
      grew = false;
      for (int w : graph_.neighbors(u)) {
        if (in_fan[w]) continue;
        const int eid = edge_id_[u].at(w);
        if (color_of_[eid] >= 0 && is_free(fan.back(), color_of_[eid])) {
          fan.push_back(w);
          in_fan[w] = 1;
          grew = true;
          break;
        }
      }
    }

    const int c = free_color(u);
    const int d = free_color(fan.back());
    if (c != d && !is_free(u, d)) invert_path(u, d, c);

    // Smallest fan prefix that is still a fan (the inversion may have
    // recolored a fan edge) and ends where d is free.
    std::size_t end = fan.size();
    for (std::size_t i = 0; i < fan.size(); ++i) {
      if (i > 0) {
        const int eid = edge_id_[u].at(fan[i]);
        if (color_of_[eid] < 0 || !is_free(fan[i - 1], color_of_[eid])) break;
      }
      if (is_free(fan[i], d)) {
        end = i;
        break;
      }
    }
    if (end == fan.size())
      throw std::logic_error("edge coloring: no rotatable fan prefix");

    // Rotate colors down the prefix, then close it with d.
    for (std::size_t i = 0; i < end; ++i) {
      const auto eid =
          static_cast<std::size_t>(edge_id_[u].at(fan[i]));
      const auto next =
          static_cast<std::size_t>(edge_id_[u].at(fan[i + 1]));
      const int next_color = color_of_[next];
      if (color_of_[eid] >= 0) clear(eid);
      clear(next);
      assign(eid, next_color);
    }
    const auto last = static_cast<std::size_t>(edge_id_[u].at(fan[end]));
    if (color_of_[last] >= 0) clear(last);
    assign(last, d);
  }

  void validate() const {
    std::vector<std::set<int>> used(graph_.node_count());
    for (std::size_t e = 0; e < graph_.edges().size(); ++e) {
      const auto& [u, v] = graph_.edges()[e];
      if (color_of_[e] < 0 || !used[u].insert(color_of_[e]).second ||
          !used[v].insert(color_of_[e]).second)
        throw std::logic_error("edge coloring is not proper");
    }
  }

  const Graph& graph_;
  int color_count_;
  std::vector<int> color_of_;
  std::vector<std::vector<int>> at_;
  std::vector<std::map<int, int>> edge_id_;
};

}  // namespace

std::vector<Matching> matching_decomposition(const Graph& g) {
  if (g.edges().empty()) return {};
  int max_degree = 0;
  for (int v = 0; v < g.node_count(); ++v)
    max_degree = std::max(max_degree, g.degree(v));

  // First-fit over the sorted edge list; optimal on the generator families
  // but can exceed max_degree + 1 on dense graphs.
  std::vector<int> color_of(g.edges().size(), -1);
  std::vector<std::set<int>> used_at(g.node_count());
  int color_count = 0;
  for (std::size_t e = 0; e < g.edges().size(); ++e) {
    const auto& [u, v] = g.edges()[e];
    int color = 0;
    while (used_at[u].count(color) || used_at[v].count(color)) ++color;
    color_of[e] = color;
    used_at[u].insert(color);
    used_at[v].insert(color);
    color_count = std::max(color_count, color + 1);
  }

  if (color_count > max_degree + 1) {  // redo with the guaranteed bound
    EdgeColorer colorer(g);
    color_of = colorer.run();
    color_count = colorer.colors_used();
  }

  std::vector<Matching> matchings(color_count);
  for (std::size_t e = 0; e < g.edges().size(); ++e)
    matchings[color_of[e]].edges.push_back(g.edges()[e]);
  return matchings;
}

Graph rotate_graph(const Graph& g, int shift) {
  const int m = g.node_count();
  if (shift < 0 || shift >= m)
    throw std::invalid_argument("shift must be in [0, m)");
  std::vector<Edge> edges;
  edges.reserve(g.edges().size());
  for (const auto& [u, v] : g.edges())
    edges.push_back({(u + shift) % m, (v + shift) % m});
  return Graph(m, std::move(edges));
}

std::vector<int> default_shifts(int m, int n) {
  std::vector<int> shifts;
  for (int i = 0; i < n; ++i) shifts.push_back(i * m / n % m);
  return shifts;
}

DynamicGraphSet make_dynamic_set(const Graph& g, int n,
                                 const std::vector<int>& shifts) {
  if (n < 1) throw std::invalid_argument("need at least one graph");
  if (static_cast<int>(shifts.size()) != n)
    throw std::invalid_argument("shift list length must equal graph count");
  std::set<int> distinct(shifts.begin(), shifts.end());
  if (static_cast<int>(distinct.size()) != n)
    throw std::invalid_argument("duplicate rotation shifts");
  DynamicGraphSet dset;
  for (int shift : shifts) {
    Graph rotated = rotate_graph(g, shift);
    dset.decompositions.push_back(matching_decomposition(rotated));
    dset.graphs.push_back(std::move(rotated));
  }
  return dset;
}

Graph reduce_degree(const Graph& g, int target_d) {
  const int m = g.node_count();
  if (target_d < m - 1)
    throw std::invalid_argument(
        "target degree below spanning-tree size " + std::to_string(m - 1));
  if (target_d > g.total_degree())
    throw std::invalid_argument("target degree exceeds edge count");

  std::vector<Edge> edges = g.edges();
  std::vector<int> degree(m, 0);
  for (const auto& [u, v] : edges) {
    ++degree[u];
    ++degree[v];
  }

  while (static_cast<int>(edges.size()) > target_d) {
    // Candidate order: maximal endpoint-degree sum, then lexicographic.
    std::vector<std::size_t> order(edges.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) {
                       const int sa = degree[edges[a].first] + degree[edges[a].second];
                       const int sb = degree[edges[b].first] + degree[edges[b].second];
                       if (sa != sb) return sa > sb;
                       return edges[a] < edges[b];
                     });
    bool removed = false;
    for (std::size_t idx : order) {
      std::vector<Edge> trial = edges;
      trial.erase(trial.begin() + static_cast<std::ptrdiff_t>(idx));
      if (connected_under(m, build_adjacency(m, trial))) {
        --degree[edges[idx].first];
        --degree[edges[idx].second];
        edges = std::move(trial);
        removed = true;
        break;
      }
    }
    if (!removed)
      throw std::runtime_error("no removable edge keeps the graph connected");
  }
  return Graph(m, std::move(edges));
}

Graph build_graph(const TopologyDesc& desc) {
  Graph g = [&] {
    switch (desc.kind) {
      case TopologyDesc::Kind::ring:
        return make_ring(desc.m);
      case TopologyDesc::Kind::complete:
        return make_complete(desc.m);
      case TopologyDesc::Kind::star:
        return make_star(desc.m);
      case TopologyDesc::Kind::pendant_ring:
        return make_pendant_ring(desc.m);
      case TopologyDesc::Kind::explicit_edges:
        return Graph(desc.m, desc.edges);
    }
    throw std::invalid_argument("unknown topology kind");
  }();
  if (desc.target_degree) g = reduce_degree(g, *desc.target_degree);
  return g;
}

DynamicGraphSet build_dynamic_set(const TopologyDesc& desc) {
  const Graph base = build_graph(desc);
  const std::vector<int> shifts =
      desc.shifts.empty() ? default_shifts(base.node_count(), desc.dynamic_n)
                          : desc.shifts;
  return make_dynamic_set(base, desc.dynamic_n, shifts);
}

}  // namespace aldsgd
