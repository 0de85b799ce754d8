#include <doctest.h>

#include <algorithm>
#include <set>

#include "aldsgd/rng.hpp"
#include "aldsgd/topology.hpp"
#include "oracles.hpp"

using namespace aldsgd;

namespace {

// Shared 6-node, 13-edge imbalanced base used by the degree-reduction tests.
Graph thirteen_edge_base() {
  std::vector<Edge> edges;
  for (int u = 0; u < 6; ++u)
    for (int v = u + 1; v < 6; ++v) edges.push_back({u, v});
  edges.erase(std::find(edges.begin(), edges.end(), Edge{0, 3}));
  edges.erase(std::find(edges.begin(), edges.end(), Edge{1, 4}));
  return Graph(6, edges);
}

std::vector<Graph> sample_families() {
  std::vector<Graph> graphs;
  for (int m = 2; m <= 10; ++m) {
    graphs.push_back(make_ring(m));
    graphs.push_back(make_complete(m));
    graphs.push_back(make_star(m));
    if (m >= 4) graphs.push_back(make_pendant_ring(m));
  }
  graphs.push_back(thirteen_edge_base());
  return graphs;
}

}  // namespace

TEST_CASE("graph construction validates invariants") {
  CHECK_THROWS(Graph(1, {}));
  CHECK_THROWS(Graph(3, {{0, 0}}));                  // self-loop
  CHECK_THROWS(Graph(3, {{0, 1}, {1, 0}}));          // duplicate
  CHECK_THROWS(Graph(3, {{0, 3}}));                  // out of range
  CHECK_THROWS(Graph(4, {{0, 1}, {2, 3}}));          // disconnected
  CHECK_NOTHROW(Graph(4, {{0, 1}, {2, 3}}, false));  // allowed for subgraphs
}

TEST_CASE("ring(3) is the triangle") {
  const Graph g = make_ring(3);
  CHECK(g.edges() == std::vector<Edge>{{0, 1}, {0, 2}, {1, 2}});
  for (int v = 0; v < 3; ++v) CHECK(g.degree(v) == 2);
}

TEST_CASE("pendant_ring(8) hangs one degree-1 node off node 0") {
  const Graph g = make_pendant_ring(8);
  CHECK(g.total_degree() == 8);
  CHECK(g.degree(7) == 1);
  CHECK(g.degree(0) == 3);
  for (int v = 1; v <= 6; ++v) CHECK(g.degree(v) == 2);
  CHECK(g.has_edge(0, 7));
}

TEST_CASE("explicit 8-node 13-edge list keeps its total degree") {
  const std::vector<Edge> edges = {{0, 1}, {0, 7}, {1, 2}, {2, 3}, {3, 5},
                                   {5, 6}, {6, 7}, {1, 6}, {2, 5}, {0, 3},
                                   {1, 5}, {3, 7}, {0, 4}};
  const Graph g(8, edges);
  CHECK(g.total_degree() == 13);
  CHECK(g.degree(4) == 1);
}

TEST_CASE("laplacian matches definition on small graphs") {
  Eigen::MatrixXd expected(3, 3);
  expected << 2, -1, -1, -1, 2, -1, -1, -1, 2;
  CHECK(laplacian(make_complete(3)) == expected);

  Eigen::MatrixXd pair(2, 2);
  pair << 1, -1, -1, 1;
  CHECK(laplacian(make_ring(2)) == pair);
}

TEST_CASE("ring(4) laplacian eigenvalues are {0,2,2,4}") {
  const Eigen::VectorXd evals = oracle::sym_eigenvalues(laplacian(make_ring(4)));
  CHECK(evals(0) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(evals(1) == doctest::Approx(2.0));
  CHECK(evals(2) == doctest::Approx(2.0));
  CHECK(evals(3) == doctest::Approx(4.0));
}

TEST_CASE("laplacian annihilates the all-ones vector exactly") {
  for (const Graph& g : sample_families()) {
    const Eigen::VectorXd ones = Eigen::VectorXd::Ones(g.node_count());
    CHECK((laplacian(g) * ones).cwiseAbs().maxCoeff() == 0.0);
  }
}

TEST_CASE("matching decomposition basics") {
  CHECK(matching_decomposition(make_ring(2)).size() == 1);

  const auto triangle = matching_decomposition(make_complete(3));
  CHECK(triangle.size() == 3);
  for (const auto& matching : triangle) CHECK(matching.edges.size() == 1);

  const auto square = matching_decomposition(make_ring(4));
  CHECK(square.size() == 2);
  for (const auto& matching : square) CHECK(matching.edges.size() == 2);
}

TEST_CASE("matching decomposition is a deterministic proper cover") {
  for (const Graph& g : sample_families()) {
    const auto matchings = matching_decomposition(g);
    int max_degree = 0;
    for (int v = 0; v < g.node_count(); ++v)
      max_degree = std::max(max_degree, g.degree(v));
    CHECK(static_cast<int>(matchings.size()) <= max_degree + 1);

    std::vector<Edge> covered;
    for (const auto& matching : matchings) {
      CHECK(oracle::is_matching(matching.edges));
      covered.insert(covered.end(), matching.edges.begin(),
                     matching.edges.end());
    }
    std::sort(covered.begin(), covered.end());
    CHECK(covered == g.edges());

    const auto again = matching_decomposition(g);
    REQUIRE(again.size() == matchings.size());
    for (std::size_t j = 0; j < again.size(); ++j)
      CHECK(again[j].edges == matchings[j].edges);
  }
}

TEST_CASE("matching decomposition bound holds on random graphs") {
  aldsgd::Rng rng(0xC01055);
  for (int trial = 0; trial < 200; ++trial) {
    const int m = 4 + static_cast<int>(rng.uniform_int(9));
    std::vector<Edge> edges;
    for (int u = 0; u < m; ++u)
      for (int v = u + 1; v < m; ++v)
        if (rng.bernoulli(0.55)) edges.push_back({u, v});
    if (edges.empty()) continue;
    const Graph g(m, edges, false);

    const auto matchings = matching_decomposition(g);
    int max_degree = 0;
    for (int v = 0; v < m; ++v) max_degree = std::max(max_degree, g.degree(v));
    REQUIRE(static_cast<int>(matchings.size()) <= max_degree + 1);
    std::vector<Edge> covered;
    for (const auto& matching : matchings) {
      REQUIRE(oracle::is_matching(matching.edges));
      covered.insert(covered.end(), matching.edges.begin(),
                     matching.edges.end());
    }
    std::sort(covered.begin(), covered.end());
    REQUIRE(covered == g.edges());
  }
}

TEST_CASE("rotate_graph relabels cyclically") {
  const Graph g = make_pendant_ring(8);
  CHECK(rotate_graph(g, 0).edges() == g.edges());

  const Graph star = make_star(4);
  const Graph shifted = rotate_graph(star, 1);
  CHECK(shifted.degree(1) == 3);
  CHECK(shifted.degree(0) == 1);

  const Graph rotated = rotate_graph(g, 3);
  CHECK(rotated.total_degree() == g.total_degree());
  CHECK(rotated.degree((7 + 3) % 8) == 1);
  std::multiset<int> before, after;
  for (int v = 0; v < 8; ++v) {
    before.insert(g.degree(v));
    after.insert(rotated.degree(v));
  }
  CHECK(before == after);
}

TEST_CASE("make_dynamic_set validates and precomputes") {
  const Graph g = make_pendant_ring(8);
  const DynamicGraphSet single = make_dynamic_set(g, 1, {0});
  CHECK(single.graph_count() == 1);
  CHECK(single.graphs[0].edges() == g.edges());

  CHECK_THROWS(make_dynamic_set(g, 2, {1, 1}));

  const DynamicGraphSet dset = make_dynamic_set(g, 3, default_shifts(8, 3));
  REQUIRE(dset.graph_count() == 3);
  for (int i = 0; i < 3; ++i) {
    CHECK(dset.graphs[i].total_degree() == g.total_degree());
    CHECK(dset.decompositions[i].size() ==
          matching_decomposition(dset.graphs[i]).size());
  }

  // Rotation makes every node see more aggregate degree than it holds in
  // the static graph.
  for (int v = 0; v < 8; ++v) {
    int summed = 0;
    for (const Graph& rotated : dset.graphs) summed += rotated.degree(v);
    CHECK(summed > g.degree(v));
  }
}

TEST_CASE("reduce_degree keeps connectivity at every target") {
  const Graph base = thirteen_edge_base();
  REQUIRE(base.total_degree() == 13);

  CHECK(reduce_degree(base, 13).edges() == base.edges());
  for (int target : {11, 9, 7, 5}) {
    const Graph reduced = reduce_degree(base, target);
    CHECK(reduced.total_degree() == target);
    CHECK(oracle::bfs_connected(reduced.node_count(), reduced.edges()));
  }
  CHECK_THROWS(reduce_degree(base, 4));  // below spanning tree
  CHECK_THROWS(reduce_degree(make_pendant_ring(8), 6));
}

TEST_CASE("build_graph honors descriptors") {
  TopologyDesc desc;
  desc.kind = TopologyDesc::Kind::pendant_ring;
  desc.m = 8;
  desc.dynamic_n = 3;
  const DynamicGraphSet dset = build_dynamic_set(desc);
  CHECK(dset.graph_count() == 3);

  desc.kind = TopologyDesc::Kind::explicit_edges;
  desc.m = 4;
  desc.edges = {{0, 1}, {1, 2}, {2, 3}};
  desc.dynamic_n = 1;
  desc.target_degree = 3;
  CHECK(build_graph(desc).total_degree() == 3);
}
