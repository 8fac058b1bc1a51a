#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "doctest.h"

#include "lpsim/graph.hpp"
#include "lpsim/partition.hpp"

using namespace lpsim;

namespace {

Graph from_list(NodeId n, std::vector<Edge> edges) { return Graph::from_edges(n, edges, {}, 0); }

Graph two_triangles() { return from_list(6, {{0, 1}, {1, 2}, {0, 2}, {3, 4}, {4, 5}, {3, 5}}); }

Graph ba(NodeId n, std::uint64_t seed, std::size_t fdim = 0) {
  SyntheticSpec spec;
  spec.kind = SyntheticKind::barabasi_albert;
  spec.num_nodes = n;
  spec.attach_edges = 2;
  return generate_synthetic(spec, fdim, seed);
}

bool same_up_to_relabel(const PartitionPlan &a, const PartitionPlan &b) {
  std::set<std::pair<int, int>> pairs;
  std::set<int> left, right;
  for (std::size_t i = 0; i < a.assignment.size(); ++i) {
    pairs.insert({a.assignment[i], b.assignment[i]});
    left.insert(a.assignment[i]);
    right.insert(b.assignment[i]);
  }
  return pairs.size() == left.size() && pairs.size() == right.size();
}

void check_valid(const PartitionPlan &plan, const Graph &g) {
  REQUIRE(plan.assignment.size() == static_cast<std::size_t>(g.num_nodes()));
  for (const int p : plan.assignment) {
    CHECK(p >= 0);
    CHECK(p < plan.num_parts);
  }
}

} // namespace

TEST_CASE("part_capacity") {
  CHECK(part_capacity(4, 2) == 2);
  CHECK(part_capacity(1000, 4) == 262);
  CHECK(part_capacity(1000, 4) <= static_cast<NodeId>(std::ceil(1.05 * 250)));
  CHECK(part_capacity(5, 2) == 3);
}

TEST_CASE("greedy: two disjoint triangles split with zero cut") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Graph g = two_triangles();
    const PartitionPlan plan = partition_greedy(g, 2, seed);
    check_valid(plan, g);
    CHECK(plan.edge_cut(g) == 0);
  }
}

TEST_CASE("greedy: K4 into two parts of two") {
  const Graph k4 = from_list(4, {{0, 1}, {0, 2}, {0, 3}, {1, 2}, {1, 3}, {2, 3}});
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const auto sizes = partition_greedy(k4, 2, seed).part_sizes();
    CHECK(sizes == std::vector<NodeId>{2, 2});
  }
}

TEST_CASE("greedy: P10 in two parts cuts at least one edge") {
  std::vector<Edge> edges;
  for (NodeId u = 0; u < 9; ++u) {
    edges.push_back({u, u + 1});
  }
  const Graph p10 = from_list(10, edges);
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    CHECK(partition_greedy(p10, 2, seed).edge_cut(p10) >= 1);
  }
}

TEST_CASE("greedy: balance bound and a cut below random assignment") {
  const Graph g = ba(1000, 3);
  const PartitionPlan greedy = partition_greedy(g, 4, 1);
  const PartitionPlan random = partition_random_tma(g, 4, 1);
  check_valid(greedy, g);
  for (const NodeId s : greedy.part_sizes()) {
    CHECK(s <= static_cast<NodeId>(std::ceil(1.05 * 1000 / 4)));
  }
  CHECK(greedy.edge_cut(g) < random.edge_cut(g));
}

TEST_CASE("random_tma: p = 1, balance, determinism") {
  const Graph g = ba(1000, 5);
  const PartitionPlan one = partition_random_tma(g, 1, 3);
  CHECK(std::all_of(one.assignment.begin(), one.assignment.end(), [](int p) { return p == 0; }));
  const PartitionPlan four = partition_random_tma(g, 4, 3);
  for (const NodeId s : four.part_sizes()) {
    CHECK(s >= 237);
    CHECK(s <= 263);
  }
  CHECK(partition_random_tma(g, 4, 3).assignment == four.assignment);
}

TEST_CASE("super_tma: one cluster per part matches greedy up to relabeling") {
  const Graph g = ba(200, 9);
  const PartitionPlan sup = partition_super_tma(g, 4, 4, 6);
  const PartitionPlan greedy = partition_greedy(g, 4, 6);
  CHECK(same_up_to_relabel(sup, greedy));
}

TEST_CASE("super_tma: singleton clusters give every part an even share") {
  const Graph g = ba(400, 2);
  const PartitionPlan plan = partition_super_tma(g, 4, g.num_nodes(), 8);
  check_valid(plan, g);
  for (const NodeId s : plan.part_sizes()) {
    CHECK(s >= 95);
    CHECK(s <= 105);
  }
}

TEST_CASE("super_tma: two triangles stay intact") {
  const Graph g = two_triangles();
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const PartitionPlan plan = partition_super_tma(g, 2, 2, seed);
    CHECK(plan.edge_cut(g) == 0);
  }
}

TEST_CASE("partition CSV round-trips") {
  const Graph g = ba(50, 1);
  const PartitionPlan plan = partition_greedy(g, 3, 2);
  std::stringstream buf;
  write_partition_csv(buf, plan);
  const PartitionPlan back = read_partition_csv(buf, g.num_nodes(), plan.strategy);
  CHECK(back.assignment == plan.assignment);
  CHECK(back.num_parts == 3);
}

TEST_CASE("worker subgraphs: cross edge lives in both parts") {
  const Graph g = from_list(2, {{0, 1}});
  PartitionPlan plan;
  plan.num_parts = 2;
  plan.assignment = {0, 1};
  const auto subs = build_worker_subgraphs(g, plan);
  REQUIRE(subs.size() == 2);
  CHECK(subs[0].halo_nodes == std::vector<NodeId>{1});
  CHECK(subs[1].halo_nodes == std::vector<NodeId>{0});
  CHECK(subs[0].edges() == std::vector<Edge>{{0, 1}});
  CHECK(subs[1].edges() == std::vector<Edge>{{0, 1}});
}

TEST_CASE("worker subgraphs: p = 1 is the whole graph") {
  const Graph g = ba(60, 4, 3);
  PartitionPlan plan;
  plan.assignment.assign(60, 0);
  const auto subs = build_worker_subgraphs(g, plan);
  REQUIRE(subs.size() == 1);
  CHECK(subs[0].halo_nodes.empty());
  CHECK(subs[0].edges() == g.edge_list());
  CHECK(subs[0].local_features == g.feature_matrix());
}

TEST_CASE("worker subgraphs: star with center apart from its leaves") {
  const Graph star = from_list(5, {{0, 1}, {0, 2}, {0, 3}, {0, 4}});
  PartitionPlan plan;
  plan.num_parts = 2;
  plan.assignment = {0, 1, 1, 1, 1};
  const auto subs = build_worker_subgraphs(star, plan);
  CHECK(subs[0].halo_nodes == std::vector<NodeId>{1, 2, 3, 4});
  CHECK(subs[1].halo_nodes == std::vector<NodeId>{0});
  for (const NodeId leaf : {1, 2, 3, 4}) {
    CHECK(subs[1].local_degree(*subs[1].local_id(leaf)) == 1);
  }
}

TEST_CASE("worker subgraphs: owned degrees, disjoint halo, feature coverage") {
  const Graph g = ba(300, 12, 4);
  const PartitionPlan plan = partition_greedy(g, 4, 3);
  const auto subs = build_worker_subgraphs(g, plan);
  std::size_t owned_total = 0;
  for (const auto &sub : subs) {
    owned_total += sub.owned_nodes.size();
    std::vector<NodeId> both;
    std::set_intersection(sub.owned_nodes.begin(), sub.owned_nodes.end(), sub.halo_nodes.begin(),
                          sub.halo_nodes.end(), std::back_inserter(both));
    CHECK(both.empty());
    for (const NodeId u : sub.owned_nodes) {
      CHECK(sub.local_degree(*sub.local_id(u)) == g.degree(u));
    }
    CHECK(sub.local_features.size() == (sub.owned_nodes.size() + sub.halo_nodes.size()) * 4);
    for (NodeId l = 0; l < sub.num_local(); ++l) {
      const auto row = g.features(sub.local_to_global[static_cast<std::size_t>(l)]);
      CHECK(std::equal(row.begin(), row.end(), sub.local_features.begin() + l * 4));
    }
  }
  CHECK(owned_total == 300);
}

TEST_CASE("worker subgraphs without halo are node-induced") {
  const Graph g = ba(200, 2);
  const PartitionPlan plan = partition_greedy(g, 4, 1);
  const auto subs = build_worker_subgraphs(g, plan, false);
  std::size_t internal = 0;
  for (const auto &sub : subs) {
    CHECK(sub.halo_nodes.empty());
    internal += sub.edges().size();
  }
  CHECK(internal + plan.edge_cut(g) == g.num_edges());
}
