#include <algorithm>
#include <cmath>
#include <set>

#include "doctest.h"

#include "lpsim/oracles.hpp"
#include "lpsim/partition.hpp"
#include "lpsim/sparsify.hpp"

using namespace lpsim;

namespace {

Graph from_list(NodeId n, std::vector<Edge> edges) { return Graph::from_edges(n, edges, {}, 0); }

Graph complete(NodeId n) {
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      edges.push_back({u, v});
    }
  }
  return from_list(n, edges);
}

WorkerSubgraph whole(const Graph &g) {
  PartitionPlan plan;
  plan.assignment.assign(static_cast<std::size_t>(g.num_nodes()), 0);
  return build_worker_subgraphs(g, plan)[0];
}

} // namespace

TEST_CASE("approx_resistance") {
  CHECK(approx_resistance(2, 2) == doctest::Approx(1.0));
  CHECK(approx_resistance(1, 2) == doctest::Approx(1.5));
  CHECK(approx_resistance(3, 1) == doctest::Approx(4.0 / 3.0));
  CHECK_THROWS(approx_resistance(0, 1));
}

TEST_CASE("exact_effective_resistance") {
  CHECK(exact_effective_resistance(from_list(2, {{0, 1}}), 0, 1) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(exact_effective_resistance(complete(3), 0, 1) == doctest::Approx(2.0 / 3.0).epsilon(1e-12));
  const Graph p5 = from_list(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}});
  const ResistanceOracle oracle(p5);
  for (NodeId u = 0; u < 4; ++u) {
    CHECK(std::abs(oracle.resistance(u, u + 1) - 1.0) < 1e-12);
  }
  // Series resistors add up along the path.
  CHECK(oracle.resistance(0, 4) == doctest::Approx(4.0).epsilon(1e-12));
  CHECK_THROWS_AS(ResistanceOracle(from_list(4, {{0, 1}, {2, 3}})), std::domain_error);
}

TEST_CASE("resistance bounds: K3 tight above, P2 all equal, ER holds") {
  const ResistanceBoundsReport k3 = check_resistance_bounds(complete(3));
  CHECK(k3.holds);
  CHECK(k3.tight_upper == 3);
  CHECK(k3.tight_lower == 0);

  const ResistanceBoundsReport p2 = check_resistance_bounds(from_list(2, {{0, 1}}));
  CHECK(p2.holds);
  CHECK(p2.tight_upper == 1);
  CHECK(p2.tight_lower == 1);

  SyntheticSpec spec;
  spec.kind = SyntheticKind::erdos_renyi;
  spec.num_nodes = 50;
  spec.edge_probability = 0.15;
  const Graph er = generate_synthetic(spec, 0, 4);
  CHECK(is_connected(er));
  CHECK(resistance_bounds_hold(er));
}

TEST_CASE("sample_count") {
  CHECK(sample_count(0.15, 10000) == 1500);
  CHECK(sample_count(0.5, 45) == 23);
  CHECK(sample_count(0.01, 10) == 1);
  CHECK_THROWS(sample_count(0.0, 10));
}

TEST_CASE("alias table reproduces its distribution") {
  const std::vector<double> w{1, 2, 3, 4};
  const AliasTable table(w);
  Rng rng(5);
  std::vector<int> counts(4, 0);
  const int n = 100000;
  for (int i = 0; i < n; ++i) {
    ++counts[table.sample(rng)];
  }
  for (int i = 0; i < 4; ++i) {
    CHECK(counts[static_cast<std::size_t>(i)] / static_cast<double>(n) == doctest::Approx(w[static_cast<std::size_t>(i)] / 10.0).epsilon(0.03));
  }
  CHECK_THROWS(AliasTable(std::vector<double>{0.0, 0.0}));
  CHECK_THROWS(AliasTable(std::vector<double>{1.0, -1.0}));
}

TEST_CASE("importance weights are draws / (L p)") {
  const std::vector<double> p(10, 0.1);
  Rng rng(3);
  const ImportanceDraws d = importance_sample(p, 10, rng);
  bool once = false, twice = false;
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(d.weights[i] == doctest::Approx(d.counts[i] / (10 * 0.1)));
    once |= d.counts[i] == 1;
    twice |= d.counts[i] == 2;
    if (d.counts[i] == 1) {
      CHECK(d.weights[i] == doctest::Approx(1.0));
    }
    if (d.counts[i] == 2) {
      CHECK(d.weights[i] == doctest::Approx(2.0));
    }
  }
  CHECK(once);
  CHECK(twice);
  // Without accumulation a repeat draw does not add weight.
  Rng again(3);
  const ImportanceDraws flat = importance_sample(p, 10, again, false);
  for (std::size_t i = 0; i < p.size(); ++i) {
    CHECK(flat.weights[i] == doctest::Approx(d.counts[i] > 0 ? 1.0 : 0.0));
  }
}

TEST_CASE("sparsify_subgraph: structural invariants") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::barabasi_albert;
  spec.num_nodes = 400;
  spec.attach_edges = 3;
  const Graph g = generate_synthetic(spec, 2, 8);
  const PartitionPlan plan = partition_greedy(g, 3, 1);
  for (const auto &sub : build_worker_subgraphs(g, plan)) {
    const std::vector<Edge> source = sub.edges();
    const std::set<std::pair<NodeId, NodeId>> source_set = [&] {
      std::set<std::pair<NodeId, NodeId>> s;
      for (const Edge &e : source) {
        s.insert({e.u, e.v});
      }
      return s;
    }();
    SparsifyOptions options;
    options.alpha = 0.3;
    options.seed = 17;
    const SparsifiedSubgraph s = sparsify_subgraph(sub, options);
    CHECK(s.source_edge_count == source.size());
    CHECK(s.edges.size() <= std::min(s.samples_drawn, source.size()));
    CHECK(std::is_sorted(s.edges.begin(), s.edges.end(), [](const Edge &a, const Edge &b) {
      return std::pair(a.u, a.v) < std::pair(b.u, b.v);
    }));
    std::vector<NodeId> nodes = sub.owned_nodes;
    nodes.insert(nodes.end(), sub.halo_nodes.begin(), sub.halo_nodes.end());
    CHECK(s.nodes == nodes);
    std::uint64_t total_draws = 0;
    for (std::size_t i = 0; i < s.edges.size(); ++i) {
      CHECK(source_set.count({s.edges[i].u, s.edges[i].v}) == 1);
      CHECK(s.weights[i] > 0.0);
      const double identity = s.weights[i] * static_cast<double>(s.samples_drawn) * s.probabilities[i];
      CHECK(std::abs(identity - s.draw_counts[i]) <= 1e-12 * s.draw_counts[i]);
      total_draws += s.draw_counts[i];
    }
    CHECK(total_draws == s.samples_drawn);
    // Same seed, same result.
    const SparsifiedSubgraph again = sparsify_subgraph(sub, options);
    CHECK(again.edges == s.edges);
    CHECK(again.weights == s.weights);
  }
}

TEST_CASE("sparsify_subgraph: alpha 0.15 on a 10k-edge subgraph removes about 85%") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::barabasi_albert;
  spec.num_nodes = 5002;
  spec.attach_edges = 2;
  const Graph g = generate_synthetic(spec, 0, 21);
  REQUIRE(g.num_edges() >= 9990);
  const WorkerSubgraph sub = whole(g);
  SparsifyOptions options;
  options.alpha = 0.15;
  options.seed = 5;
  const SparsifiedSubgraph s = sparsify_subgraph(sub, options);
  const double limit = 0.15 * static_cast<double>(g.num_edges());
  CHECK(static_cast<double>(s.edges.size()) <= limit);
  CHECK(static_cast<double>(s.edges.size()) >= 0.9 * limit);
}

TEST_CASE("global degree scope uses full-graph degrees") {
  const Graph g = from_list(5, {{0, 1}, {1, 2}, {2, 3}, {2, 4}});
  PartitionPlan plan;
  plan.num_parts = 2;
  plan.assignment = {0, 0, 0, 1, 1};
  const auto subs = build_worker_subgraphs(g, plan, false);
  const auto edges = subs[0].edges();
  REQUIRE(edges == std::vector<Edge>{{0, 1}, {1, 2}});
  const auto local = edge_probabilities(subs[0], edges, DegreeScope::subgraph);
  const auto global = edge_probabilities(subs[0], edges, DegreeScope::global, &g);
  CHECK(local[0] == doctest::Approx(0.5));
  CHECK(global[0] == doctest::Approx(1.5 / (1.5 + 0.5 + 1.0 / 3.0)));
  CHECK_THROWS(edge_probabilities(subs[0], edges, DegreeScope::global));
}

TEST_CASE("edge probabilities sum to one") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::barabasi_albert;
  spec.num_nodes = 300;
  spec.attach_edges = 2;
  const Graph g = generate_synthetic(spec, 0, 3);
  const PartitionPlan plan = partition_greedy(g, 3, 2);
  for (const auto &sub : build_worker_subgraphs(g, plan)) {
    const auto edges = sub.edges();
    double total = 0.0;
    for (const double p : edge_probabilities(sub, edges, DegreeScope::subgraph)) {
      total += p;
    }
    CHECK(total == doctest::Approx(1.0).epsilon(1e-12));
  }
}

TEST_CASE("expected Laplacian error") {
  const WorkerSubgraph single = whole(from_list(2, {{0, 1}}));
  CHECK(expected_laplacian_error(single, 0.3, 1, 1) == doctest::Approx(0.0));
  CHECK(expected_laplacian_error(single, 1.0, 5, 2) == doctest::Approx(0.0));

  const WorkerSubgraph k10 = whole(complete(10));
  CHECK(expected_laplacian_error(k10, 0.5, 2000, 3) < 0.05);
  // Dropping the accumulation branch biases the average low.
  CHECK(expected_laplacian_error(k10, 0.5, 2000, 3, false) > 0.05);
}

TEST_CASE("spectral closeness on a dense graph") {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::erdos_renyi;
  spec.num_nodes = 50;
  spec.edge_probability = 0.2;
  const Graph g = generate_synthetic(spec, 0, 1);
  const auto draws = static_cast<std::size_t>(16 * 50 * std::log(50.0));
  const SpectralClosenessReport r = spectral_closeness(g, draws, 100, 0.3, 4);
  CHECK(r.vectors == 100);
  CHECK(r.fraction_within() >= 0.95);
}

TEST_CASE("laplacian_from_edges matches dense_laplacian") {
  const Graph k3 = complete(3);
  const std::vector<Edge> edges = k3.edge_list();
  CHECK((laplacian_from_edges(3, edges, {}) - dense_laplacian(k3)).norm() == doctest::Approx(0.0));
}
