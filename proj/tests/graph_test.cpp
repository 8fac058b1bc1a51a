#include <filesystem>
#include <fstream>
#include <set>

#include "doctest.h"

#include "lpsim/graph.hpp"
#include "lpsim/split.hpp"

using namespace lpsim;

namespace {

std::filesystem::path temp_dir(const std::string &name) {
  const auto dir = std::filesystem::temp_directory_path() / ("lpsim_graph_" + name);
  std::filesystem::remove_all(dir);
  std::filesystem::create_directories(dir);
  return dir;
}

Graph from_list(NodeId n, std::vector<Edge> edges) { return Graph::from_edges(n, edges, {}, 0); }

void check_csr(const Graph &g) {
  const auto off = g.offsets();
  REQUIRE(off.front() == 0);
  REQUIRE(off.back() == static_cast<EdgeIndex>(g.targets().size()));
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    CHECK(off[u] <= off[u + 1]);
    CHECK(g.degree(u) == off[u + 1] - off[u]);
    const auto nbrs = g.neighbors(u);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      CHECK(nbrs[i] != u);
      if (i > 0) {
        CHECK(nbrs[i - 1] < nbrs[i]);
      }
      CHECK(g.has_edge(nbrs[i], u));
      CHECK(g.edge_weight(nbrs[i], u) == g.edge_weight(u, nbrs[i]));
    }
  }
}

} // namespace

TEST_CASE("load_graph: single edge with identity features") {
  const auto dir = temp_dir("single");
  std::ofstream(dir / "e.txt") << "0 1\n";
  std::ofstream(dir / "f.csv") << "1,0\n0,1\n";
  const Graph g = load_graph(dir / "e.txt", dir / "f.csv");
  CHECK(g.num_nodes() == 2);
  CHECK(g.degree(0) == 1);
  CHECK(g.degree(1) == 1);
  CHECK(g.feature_dim() == 2);
  CHECK(g.features(1)[1] == 1.0f);
}

TEST_CASE("load_graph: self-loop dropped, reverse duplicate merged") {
  const auto dir = temp_dir("cleanup");
  std::ofstream(dir / "e.txt") << "0 1\n1 0\n0 0\n";
  std::ofstream(dir / "f.csv") << "1,0\n0,1\n";
  const Graph g = load_graph(dir / "e.txt", dir / "f.csv");
  CHECK(g.degree(0) == 1);
  CHECK(g.degree(1) == 1);
  CHECK(g.num_directed_entries() == 2);
}

TEST_CASE("load_graph: out-of-range endpoint is rejected") {
  const auto dir = temp_dir("range");
  std::ofstream(dir / "e.txt") << "0 5\n";
  std::ofstream(dir / "f.csv") << "1\n2\n";
  CHECK_THROWS(load_graph(dir / "e.txt", dir / "f.csv"));
}

TEST_CASE("save_graph then load_graph round-trips") {
  SyntheticSpec spec{SyntheticKind::barabasi_albert, 40, 0, 2, {}, 0, 0, 0};
  const Graph g = generate_synthetic(spec, 3, 11);
  const auto dir = temp_dir("roundtrip");
  save_graph(g, dir / "e.txt", dir / "f.csv");
  const Graph h = load_graph(dir / "e.txt", dir / "f.csv");
  CHECK(h.edge_list() == g.edge_list());
  CHECK(h.feature_matrix() == g.feature_matrix());
}

TEST_CASE("from_csr rejects an asymmetric adjacency") {
  CHECK_THROWS(Graph::from_csr(2, {0, 1, 1}, {1}, {}, {}, 0));
  CHECK_NOTHROW(Graph::from_csr(2, {0, 1, 2}, {1, 0}, {}, {}, 0));
}

TEST_CASE("generate_synthetic: ER with p = 1 is complete") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::erdos_renyi;
  spec.num_nodes = 4;
  spec.edge_probability = 1.0;
  const Graph g = generate_synthetic(spec, 2, 1);
  for (NodeId u = 0; u < 4; ++u) {
    CHECK(g.degree(u) == 3);
  }
  check_csr(g);
}

TEST_CASE("generate_synthetic: BA is deterministic in its seed") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::barabasi_albert;
  spec.num_nodes = 50;
  spec.attach_edges = 2;
  const Graph a = generate_synthetic(spec, 4, 7);
  const Graph b = generate_synthetic(spec, 4, 7);
  CHECK(a.edge_list() == b.edge_list());
  CHECK(a.feature_matrix() == b.feature_matrix());
  check_csr(a);
}

TEST_CASE("generate_synthetic: SBM has more intra-block than cross-block edges") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::sbm;
  spec.block_sizes = {20, 20};
  spec.p_in = 0.5;
  spec.p_out = 0.01;
  const Graph g = generate_synthetic(spec, 0, 1);
  // The component keeps original order, so with both blocks present node ids
  // below 20 are block 0.
  REQUIRE(g.num_nodes() == 40);
  std::size_t intra = 0, cross = 0;
  for (const Edge &e : g.edge_list()) {
    ((e.u < 20) == (e.v < 20) ? intra : cross) += 1;
  }
  CHECK(intra > cross);
}

TEST_CASE("laplacian_quadratic_form") {
  const Graph k3 = from_list(3, {{0, 1}, {1, 2}, {0, 2}});
  const std::vector<double> ones{1, 1, 1};
  CHECK(laplacian_quadratic_form(k3, ones) == doctest::Approx(0.0));
  const Graph p2 = from_list(2, {{0, 1}});
  const std::vector<double> x{1, 0};
  CHECK(laplacian_quadratic_form(p2, x) == doctest::Approx(1.0));
  const std::vector<double> y{1, 0, 0};
  CHECK(laplacian_quadratic_form(k3, y) == doctest::Approx(2.0));
}

TEST_CASE("normalized_laplacian_gamma") {
  CHECK(normalized_laplacian_gamma(from_list(2, {{0, 1}})) == doctest::Approx(2.0).epsilon(1e-12));
  CHECK(normalized_laplacian_gamma(from_list(3, {{0, 1}, {1, 2}, {0, 2}})) == doctest::Approx(1.5).epsilon(1e-12));
  CHECK(normalized_laplacian_gamma(from_list(3, {{0, 1}, {1, 2}})) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK_THROWS_AS(normalized_laplacian_gamma(from_list(4, {{0, 1}, {2, 3}})), std::domain_error);
}

TEST_CASE("split_edges: 100 edges give 80/10/10 and 3x negatives") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::erdos_renyi;
  spec.num_nodes = 60;
  spec.edge_probability = 0.1;
  Graph g = generate_synthetic(spec, 0, 3);
  std::vector<Edge> edges = g.edge_list();
  REQUIRE(edges.size() >= 100);
  edges.resize(100);
  g = Graph::from_edges(g.num_nodes(), edges, {}, 0);
  REQUIRE(g.num_edges() == 100);

  const EdgeSplit s = split_edges(g, {}, 3, 5);
  CHECK(s.train_pos.size() == 80);
  CHECK(s.val_pos.size() == 10);
  CHECK(s.test_pos.size() == 10);
  CHECK(s.val_neg.size() == 30);
  CHECK(s.test_neg.size() == 30);

  std::set<std::pair<NodeId, NodeId>> all;
  for (const auto *part : {&s.train_pos, &s.val_pos, &s.test_pos}) {
    for (const Edge &e : *part) {
      const Edge c = canonical(e.u, e.v);
      CHECK(all.insert({c.u, c.v}).second);
    }
  }
  CHECK(all.size() == 100);
  for (const auto *part : {&s.val_neg, &s.test_neg}) {
    for (const Edge &e : *part) {
      CHECK(e.u != e.v);
      CHECK_FALSE(g.has_edge(e.u, e.v));
    }
  }
}

TEST_CASE("split_edges is deterministic and rejects bad ratios") {
  SyntheticSpec spec{SyntheticKind::barabasi_albert, 80, 0, 2, {}, 0, 0, 0};
  const Graph g = generate_synthetic(spec, 0, 2);
  const EdgeSplit a = split_edges(g, {}, 3, 9);
  const EdgeSplit b = split_edges(g, {}, 3, 9);
  CHECK(a.train_pos == b.train_pos);
  CHECK(a.test_neg == b.test_neg);
  CHECK_THROWS(split_edges(g, {0.5, 0.2, 0.2}, 3, 9));
}

TEST_CASE("training_graph keeps only training edges") {
  SyntheticSpec spec{SyntheticKind::barabasi_albert, 60, 0, 2, {}, 0, 0, 0};
  const Graph g = generate_synthetic(spec, 2, 2);
  const EdgeSplit s = split_edges(g, {}, 3, 1);
  const Graph t = training_graph(g, s);
  CHECK(t.num_nodes() == g.num_nodes());
  CHECK(t.num_edges() == s.train_pos.size());
  for (const Edge &e : s.test_pos) {
    CHECK_FALSE(t.has_edge(e.u, e.v));
  }
  CHECK(t.feature_matrix() == g.feature_matrix());
}
