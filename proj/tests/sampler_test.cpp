#include <algorithm>
#include <map>
#include <set>
#include <sstream>

#include "doctest.h"

#include "lpsim/sampler.hpp"
#include "lpsim/split.hpp"

using namespace lpsim;

namespace {

Graph from_list(NodeId n, std::vector<Edge> edges) { return Graph::from_edges(n, edges, {}, 0); }

Graph er(NodeId n, double p, std::uint64_t seed) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::erdos_renyi;
  spec.num_nodes = n;
  spec.edge_probability = p;
  return generate_synthetic(spec, 0, seed);
}

std::multiset<std::pair<NodeId, NodeId>> as_set(std::span<const LabeledPair> pairs) {
  std::multiset<std::pair<NodeId, NodeId>> s;
  for (const auto &p : pairs) {
    const Edge c = canonical(p.src, p.dst);
    s.insert({c.u, c.v});
  }
  return s;
}

/// Star centered at 0 with `leaves` leaves; the center and the upper half of
/// the leaves belong to part 1.
struct StarFixture {
  Graph g;
  PartitionPlan plan;
  std::vector<WorkerSubgraph> subs;

  explicit StarFixture(NodeId leaves) {
    std::vector<Edge> edges;
    for (NodeId v = 1; v <= leaves; ++v) {
      edges.push_back({0, v});
    }
    g = from_list(leaves + 1, edges);
    plan.num_parts = 2;
    plan.assignment.assign(static_cast<std::size_t>(leaves + 1), 0);
    plan.assignment[0] = 1;
    for (NodeId v = leaves / 2 + 1; v <= leaves; ++v) {
      plan.assignment[static_cast<std::size_t>(v)] = 1;
    }
    subs = build_worker_subgraphs(g, plan);
  }
};

} // namespace

TEST_CASE("positive schedule covers every owned edge once per epoch") {
  const std::vector<Edge> owned{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}};
  const PositiveSchedule schedule(owned, 9, 0, 0);
  REQUIRE(schedule.num_batches(5) == 1);
  const auto batch = schedule.batch(0, 5);
  CHECK(batch.size() == 5);
  CHECK(as_set(batch) == as_set(std::vector<LabeledPair>{{0, 1, 1}, {1, 2, 1}, {2, 3, 1}, {3, 4, 1}, {0, 4, 1}}));
  CHECK(schedule.batch(1, 5).empty());
  for (const auto &p : batch) {
    CHECK(p.label == 1);
  }
}

TEST_CASE("positive_batch: batch_size 10 over five owned edges") {
  const std::vector<Edge> owned{{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}};
  const auto batch = positive_batch(owned, 10, 3, 0, 0, 0);
  CHECK(batch.size() == 5);
  CHECK(as_set(batch).size() == 5);
  CHECK_THROWS(positive_batch({}, 10, 3, 0, 0, 0));
}

TEST_CASE("consecutive epochs reorder the same multiset") {
  std::vector<Edge> owned;
  for (NodeId u = 0; u < 40; ++u) {
    owned.push_back({u, u + 1});
  }
  const PositiveSchedule a(owned, 1, 0, 0);
  const PositiveSchedule b(owned, 1, 1, 0);
  const auto ea = a.batch(0, 40);
  const auto eb = b.batch(0, 40);
  CHECK(as_set(ea) == as_set(eb));
  CHECK_FALSE(ea == eb);
}

TEST_CASE("owned_train_edges: p = 1 owns everything, p > 1 partitions the edges") {
  const Graph g = er(60, 0.1, 4);
  const std::vector<Edge> edges = g.edge_list();
  PartitionPlan one;
  one.assignment.assign(60, 0);
  CHECK(owned_train_edges(edges, one, 0, false).size() == edges.size());

  PartitionPlan three;
  three.num_parts = 3;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    three.assignment.push_back(u % 3);
  }
  std::size_t total = 0, internal = 0;
  for (int w = 0; w < 3; ++w) {
    total += owned_train_edges(edges, three, w, false).size();
    for (const Edge &e : owned_train_edges(edges, three, w, true)) {
      CHECK(three.part_of(e.u) == w);
      CHECK(three.part_of(e.v) == w);
      ++internal;
    }
  }
  CHECK(total == edges.size());
  CHECK(internal == edges.size() - three.edge_cut(g));
}

TEST_CASE("negative_per_source: forced destination") {
  // Node 0 is adjacent to everything except 4.
  const Graph g = from_list(5, {{0, 1}, {0, 2}, {0, 3}, {1, 2}});
  Rng rng(1);
  const std::vector<NodeId> sources(50, 0);
  for (const auto &p : negative_per_source(sources, g, rng)) {
    CHECK(p.dst == 4);
    CHECK(p.label == 0);
  }
  const Graph k3 = from_list(3, {{0, 1}, {1, 2}, {0, 2}});
  const std::vector<NodeId> one{0};
  CHECK_THROWS(negative_per_source(one, k3, rng));
}

TEST_CASE("negative_per_source: uniform over the two non-neighbors on C5") {
  const Graph c5 = from_list(5, {{0, 1}, {1, 2}, {2, 3}, {3, 4}, {0, 4}});
  Rng rng(2024);
  const std::vector<NodeId> sources(10000, 0);
  std::map<NodeId, int> counts;
  for (const auto &p : negative_per_source(sources, c5, rng)) {
    ++counts[p.dst];
  }
  REQUIRE(counts.size() == 2);
  CHECK(counts[2] / 10000.0 == doctest::Approx(0.5).epsilon(0.06));
  CHECK(counts[3] / 10000.0 == doctest::Approx(0.5).epsilon(0.06));
}

TEST_CASE("negative_per_source: pool restricts destinations and never hits an edge") {
  const Graph g = er(80, 0.1, 6);
  std::vector<NodeId> members;
  for (NodeId u = 0; u < 40; ++u) {
    members.push_back(u);
  }
  const NegativePool pool(members, g.num_nodes());
  Rng rng(3);
  std::vector<NodeId> sources;
  for (NodeId u = 0; u < 40; ++u) {
    if (available_destinations(g, u, pool) > 0) {
      sources.push_back(u);
    }
  }
  for (const auto &p : negative_per_source(sources, g, rng, pool)) {
    CHECK(p.dst < 40);
    CHECK(p.dst != p.src);
    CHECK_FALSE(g.has_edge(p.src, p.dst));
  }
}

TEST_CASE("negative_global_uniform") {
  const Graph k4 = from_list(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  Rng rng(1);
  CHECK_THROWS(negative_global_uniform(k4, 1, rng));

  const Graph p3 = from_list(3, {{0, 1}, {1, 2}});
  CHECK(negative_global_uniform(p3, 1, rng) == std::vector<Edge>{{0, 2}});

  const Graph g = er(100, 0.1, 8);
  const auto negs = negative_global_uniform(g, 1000, rng);
  CHECK(negs.size() == 1000);
  std::set<std::pair<NodeId, NodeId>> seen;
  for (const Edge &e : negs) {
    CHECK(e.u < e.v);
    CHECK_FALSE(g.has_edge(e.u, e.v));
    CHECK(seen.insert({e.u, e.v}).second);
  }
}

TEST_CASE("computation graph: fanout above degree takes all neighbors") {
  const Graph g = from_list(4, {{0, 1}, {0, 2}, {0, 3}});
  const GraphView view = GraphView::whole(g);
  Rng rng(1);
  const std::vector<NodeId> seeds{0};
  const std::vector<int> fanouts{25};
  const ComputationGraph cg = build_computation_graph(seeds, view, fanouts, rng);
  CHECK(cg.layers[1].size() == 4);
  CHECK(cg.hops[0].size() == 3);
  CHECK(cg.remote_nodes.empty());
}

TEST_CASE("computation graph: fanout caps and layer structure") {
  const Graph g = er(400, 0.25, 2);
  NodeId seed = 0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (g.degree(u) >= 100) {
      seed = u;
      break;
    }
  }
  REQUIRE(g.degree(seed) >= 100);
  const GraphView view = GraphView::whole(g);
  Rng rng(5);
  const std::vector<NodeId> seeds{seed};
  const std::vector<int> fanouts{25, 10, 5};
  const ComputationGraph cg = build_computation_graph(seeds, view, fanouts, rng);
  REQUIRE(cg.layers.size() == 4);
  CHECK(cg.layers[1].size() == 26);
  for (int k = 0; k < 3; ++k) {
    const auto &cur = cg.layers[static_cast<std::size_t>(k)];
    const auto &next = cg.layers[static_cast<std::size_t>(k + 1)];
    CHECK(next.size() <= cur.size() * (1 + static_cast<std::size_t>(fanouts[static_cast<std::size_t>(k)])));
    CHECK(std::equal(cur.begin(), cur.end(), next.begin()));
    std::vector<int> per_dst(cur.size(), 0);
    std::set<std::int32_t> reached;
    for (const SampledEdge &e : cg.hops[static_cast<std::size_t>(k)]) {
      ++per_dst[static_cast<std::size_t>(e.dst)];
      reached.insert(e.src);
      const NodeId u = cur[static_cast<std::size_t>(e.dst)];
      const NodeId v = next[static_cast<std::size_t>(e.src)];
      CHECK(g.has_edge(u, v));
    }
    for (const int c : per_dst) {
      CHECK(c <= fanouts[static_cast<std::size_t>(k)]);
    }
    // Every node new at this layer was reached by a sampled edge.
    for (std::size_t i = cur.size(); i < next.size(); ++i) {
      CHECK(reached.count(static_cast<std::int32_t>(i)) == 1);
    }
  }
}

TEST_CASE("computation graph: a sparsified remote list shrinks the frontier") {
  const StarFixture star(40);
  const WorkerSubgraph &w0 = star.subs[0];
  SparsifiedSubgraph part0;
  part0.part_id = 0;
  part0.nodes = w0.local_to_global;
  SparsifiedSubgraph part1;
  part1.part_id = 1;
  part1.nodes = star.subs[1].local_to_global;
  part1.edges = {{0, 21}, {0, 22}};
  part1.weights = {3.0, 5.0};
  const SparsifiedStore store({part0, part1}, star.g.num_nodes());

  const std::vector<NodeId> seeds{0};
  const std::vector<int> fanouts{25};
  const GraphView sparse(star.g, star.plan, w0, SharingMode::sparsified, &store);
  Rng r1(1);
  const ComputationGraph a = build_computation_graph(seeds, sparse, fanouts, r1);
  CHECK(a.layers[1].size() == 1 + 2);
  CHECK(a.remote_edges == std::vector<Edge>{{0, 21}, {0, 22}});
  for (const SampledEdge &e : a.hops[0]) {
    CHECK((e.weight == 3.0 || e.weight == 5.0));
  }

  const GraphView full(star.g, star.plan, w0, SharingMode::complete, nullptr);
  Rng r2(1);
  const ComputationGraph b = build_computation_graph(seeds, full, fanouts, r2);
  CHECK(b.layers[1].size() == 1 + 25);
  CHECK(b.remote_edges.size() == 25);
}

TEST_CASE("graph view resolution per sharing mode") {
  const StarFixture star(10);
  const WorkerSubgraph &w0 = star.subs[0];
  // Owned leaf: its complete (degree-1) list, local.
  const GraphView none(star.g, star.plan, w0, SharingMode::none, nullptr);
  const NeighborList leaf = none.neighbors(1);
  CHECK(leaf.locality == Locality::local);
  CHECK(std::vector<NodeId>(leaf.nodes.begin(), leaf.nodes.end()) == std::vector<NodeId>{0});
  // The remote center under no sharing: only the halo row back into the part.
  const NeighborList center = none.neighbors(0);
  CHECK(center.nodes.size() == 5);
  CHECK(center.locality == Locality::local);
  // A node with no local presence resolves to nothing.
  CHECK(none.neighbors(9).nodes.empty());
  // Complete sharing: the full list, remote.
  const GraphView complete(star.g, star.plan, w0, SharingMode::complete, nullptr);
  CHECK(complete.neighbors(0).nodes.size() == 10);
  CHECK(complete.neighbors(0).locality == Locality::remote);
  CHECK(complete.neighbors(9).nodes.size() == 1);
  CHECK(none.has_local_features(0));
  CHECK_FALSE(none.has_local_features(9));
}

TEST_CASE("remote nodes are those lacking local features") {
  const StarFixture star(10);
  const WorkerSubgraph &w0 = star.subs[0];
  const GraphView complete(star.g, star.plan, w0, SharingMode::complete, nullptr);
  Rng rng(4);
  const std::vector<NodeId> seeds{1};
  const std::vector<int> fanouts{5, 10};
  const ComputationGraph cg = build_computation_graph(seeds, complete, fanouts, rng);
  for (const NodeId u : cg.all_nodes()) {
    const bool remote = std::binary_search(cg.remote_nodes.begin(), cg.remote_nodes.end(), u);
    CHECK(remote == !w0.stores(u));
  }
  CHECK_FALSE(cg.remote_nodes.empty());
}

TEST_CASE("batch CSV") {
  Batch b;
  b.pairs = {{1, 2, 1}, {3, 4, 0}};
  b.worker_id = 2;
  b.batch_index = 7;
  std::ostringstream out;
  write_batch_csv(out, b, true);
  CHECK(out.str() == "u,v,label,worker,batch\n1,2,1,2,7\n3,4,0,2,7\n");
}
