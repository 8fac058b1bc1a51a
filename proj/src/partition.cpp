#include "lpsim/partition.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>

#include "lpsim/random.hpp"

namespace lpsim {

std::string_view to_string(PartitionStrategy s) {
  switch (s) {
  case PartitionStrategy::greedy_cut:
    return "greedy_cut";
  case PartitionStrategy::random_tma:
    return "random_tma";
  case PartitionStrategy::super_tma:
    return "super_tma";
  }
  return "?";
}

PartitionStrategy parse_partition_strategy(std::string_view name) {
  if (name == "greedy_cut" || name == "greedy") {
    return PartitionStrategy::greedy_cut;
  }
  if (name == "random_tma") {
    return PartitionStrategy::random_tma;
  }
  if (name == "super_tma") {
    return PartitionStrategy::super_tma;
  }
  throw std::invalid_argument("unknown partition strategy '" + std::string(name) + "'");
}

std::vector<NodeId> PartitionPlan::part_sizes() const {
  std::vector<NodeId> sizes(static_cast<std::size_t>(num_parts), 0);
  for (const int p : assignment) {
    ++sizes[static_cast<std::size_t>(p)];
  }
  return sizes;
}

std::vector<NodeId> PartitionPlan::members(int part) const {
  std::vector<NodeId> out;
  for (std::size_t u = 0; u < assignment.size(); ++u) {
    if (assignment[u] == part) {
      out.push_back(static_cast<NodeId>(u));
    }
  }
  return out;
}

std::size_t PartitionPlan::edge_cut(const Graph &g) const {
  std::size_t cut = 0;
  for (const Edge &e : g.edge_list()) {
    cut += part_of(e.u) != part_of(e.v) ? 1 : 0;
  }
  return cut;
}

NodeId part_capacity(NodeId num_nodes, int num_parts, double slack) {
  const double share = static_cast<double>(num_nodes) / num_parts;
  const auto even = static_cast<NodeId>(std::ceil(share - 1e-12));
  const auto slack_floor = static_cast<NodeId>(std::floor((1.0 + slack) * share + 1e-12));
  return std::max(even, slack_floor);
}

namespace {

void check_parts(const Graph &g, int num_parts) {
  if (num_parts < 1) {
    throw std::invalid_argument("number of parts must be at least 1");
  }
  if (num_parts > g.num_nodes()) {
    throw std::invalid_argument("cannot split " + std::to_string(g.num_nodes()) + " nodes into " +
                                std::to_string(num_parts) + " parts");
  }
}

std::vector<int> greedy_assignment(const Graph &g, int num_parts, std::uint64_t seed, double slack) {
  const NodeId n = g.num_nodes();
  const NodeId capacity = part_capacity(n, num_parts, slack);
  std::vector<NodeId> order(static_cast<std::size_t>(n));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0x1d9}));
  rng.shuffle(std::span<NodeId>(order));

  std::vector<int> assignment(static_cast<std::size_t>(n), -1);
  std::vector<NodeId> sizes(static_cast<std::size_t>(num_parts), 0);
  std::vector<int> neighbor_count(static_cast<std::size_t>(num_parts), 0);
  for (const NodeId v : order) {
    std::fill(neighbor_count.begin(), neighbor_count.end(), 0);
    for (const NodeId u : g.neighbors(v)) {
      if (assignment[u] >= 0) {
        ++neighbor_count[assignment[u]];
      }
    }
    int best = -1;
    double best_score = 0.0;
    for (int p = 0; p < num_parts; ++p) {
      if (sizes[p] >= capacity) {
        continue;
      }
      const double score = neighbor_count[p] * (1.0 - static_cast<double>(sizes[p]) / capacity);
      if (score > best_score) {
        best_score = score;
        best = p;
      }
    }
    if (best < 0) {
      // No open part holds a neighbor: least loaded, smallest id on ties.
      for (int p = 0; p < num_parts; ++p) {
        if (sizes[p] < capacity && (best < 0 || sizes[p] < sizes[best])) {
          best = p;
        }
      }
    }
    assignment[v] = best;
    ++sizes[best];
  }
  return assignment;
}

} // namespace

PartitionPlan partition_greedy(const Graph &g, int num_parts, std::uint64_t seed, double slack) {
  check_parts(g, num_parts);
  return {num_parts, greedy_assignment(g, num_parts, seed, slack), PartitionStrategy::greedy_cut};
}

PartitionPlan partition_random_tma(const Graph &g, int num_parts, std::uint64_t seed, double slack) {
  check_parts(g, num_parts);
  const NodeId n = g.num_nodes();
  Rng rng(derive_seed(seed, {0x7a4}));
  PartitionPlan plan{num_parts, std::vector<int>(static_cast<std::size_t>(n)), PartitionStrategy::random_tma};
  for (int &p : plan.assignment) {
    p = static_cast<int>(rng.below(static_cast<std::uint64_t>(num_parts)));
  }
  // Move surplus nodes (highest ids first) of over-full parts into the
  // currently smallest part.
  const NodeId capacity = part_capacity(n, num_parts, slack);
  auto sizes = plan.part_sizes();
  for (NodeId u = n - 1; u >= 0; --u) {
    const int p = plan.assignment[u];
    if (sizes[p] > capacity) {
      const int target = static_cast<int>(std::min_element(sizes.begin(), sizes.end()) - sizes.begin());
      plan.assignment[u] = target;
      --sizes[p];
      ++sizes[target];
    }
  }
  // Symmetric floor: refill parts below (1 - slack) * n / p from the largest.
  const auto floor_size =
      static_cast<NodeId>(std::floor((1.0 - slack) * static_cast<double>(n) / num_parts + 1e-12));
  NodeId scan = n - 1;
  while (true) {
    const auto small = std::min_element(sizes.begin(), sizes.end());
    if (*small >= floor_size) {
      break;
    }
    const int big = static_cast<int>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
    while (plan.assignment[scan] != big) {
      --scan;
    }
    plan.assignment[scan] = static_cast<int>(small - sizes.begin());
    --sizes[big];
    ++*small;
  }
  return plan;
}

PartitionPlan partition_super_tma(const Graph &g, int num_parts, NodeId num_miniclusters,
                                  std::uint64_t seed) {
  check_parts(g, num_parts);
  if (num_miniclusters < num_parts) {
    throw std::invalid_argument("need at least as many mini-clusters as parts");
  }
  if (num_miniclusters > g.num_nodes()) {
    throw std::invalid_argument("more mini-clusters than nodes");
  }
  const auto clusters = greedy_assignment(g, num_miniclusters, seed, kBalanceSlack);
  std::vector<int> order(static_cast<std::size_t>(num_miniclusters));
  std::iota(order.begin(), order.end(), 0);
  Rng rng(derive_seed(seed, {0x5c7}));
  rng.shuffle(std::span<int>(order));
  std::vector<int> part_of_cluster(order.size());
  for (std::size_t i = 0; i < order.size(); ++i) {
    part_of_cluster[static_cast<std::size_t>(order[i])] = static_cast<int>(i % static_cast<std::size_t>(num_parts));
  }
  PartitionPlan plan{num_parts, std::vector<int>(clusters.size()), PartitionStrategy::super_tma};
  for (std::size_t u = 0; u < clusters.size(); ++u) {
    plan.assignment[u] = part_of_cluster[static_cast<std::size_t>(clusters[u])];
  }
  return plan;
}

PartitionPlan make_partition(const Graph &g, PartitionStrategy strategy, int num_parts,
                             NodeId num_miniclusters, std::uint64_t seed) {
  switch (strategy) {
  case PartitionStrategy::greedy_cut:
    return partition_greedy(g, num_parts, seed);
  case PartitionStrategy::random_tma:
    return partition_random_tma(g, num_parts, seed);
  case PartitionStrategy::super_tma:
    return partition_super_tma(g, num_parts, std::max<NodeId>(num_miniclusters, num_parts), seed);
  }
  throw std::invalid_argument("unknown partition strategy");
}

void write_partition_csv(std::ostream &out, const PartitionPlan &plan) {
  out << "node_id,part_id\n";
  for (std::size_t u = 0; u < plan.assignment.size(); ++u) {
    out << u << ',' << plan.assignment[u] << '\n';
  }
}

PartitionPlan read_partition_csv(std::istream &in, NodeId num_nodes, PartitionStrategy strategy) {
  PartitionPlan plan{0, std::vector<int>(static_cast<std::size_t>(num_nodes), -1), strategy};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty() || line.front() == '#' || line.rfind("node_id", 0) == 0) {
      continue;
    }
    std::istringstream row(line);
    long long u = -1;
    long long p = -1;
    char comma = 0;
    if (!(row >> u >> comma >> p) || comma != ',' || u < 0 || u >= num_nodes || p < 0) {
      throw std::runtime_error("partition csv line " + std::to_string(line_no) + " is malformed");
    }
    plan.assignment[static_cast<std::size_t>(u)] = static_cast<int>(p);
    plan.num_parts = std::max(plan.num_parts, static_cast<int>(p) + 1);
  }
  for (std::size_t u = 0; u < plan.assignment.size(); ++u) {
    if (plan.assignment[u] < 0) {
      throw std::runtime_error("partition csv misses node " + std::to_string(u));
    }
  }
  return plan;
}

std::vector<Edge> WorkerSubgraph::edges() const {
  std::vector<Edge> out;
  for (NodeId l = 0; l < num_local(); ++l) {
    const NodeId gu = local_to_global[l];
    for (const NodeId m : local_neighbors(l)) {
      const NodeId gv = local_to_global[m];
      if (gu < gv) {
        out.push_back({gu, gv});
      }
    }
  }
  std::sort(out.begin(), out.end());
  return out;
}

std::vector<WorkerSubgraph> build_worker_subgraphs(const Graph &g, const PartitionPlan &plan,
                                                   bool full_neighbors) {
  if (plan.assignment.size() != static_cast<std::size_t>(g.num_nodes())) {
    throw std::invalid_argument("partition plan does not cover every node");
  }
  std::vector<WorkerSubgraph> workers(static_cast<std::size_t>(plan.num_parts));
  for (int p = 0; p < plan.num_parts; ++p) {
    WorkerSubgraph &w = workers[static_cast<std::size_t>(p)];
    w.part_id = p;
    w.owned_nodes = plan.members(p);
    w.feature_dim = g.feature_dim();
    w.global_to_local.assign(static_cast<std::size_t>(g.num_nodes()), -1);
    if (full_neighbors) {
      for (const NodeId u : w.owned_nodes) {
        for (const NodeId v : g.neighbors(u)) {
          if (plan.part_of(v) != p) {
            w.halo_nodes.push_back(v);
          }
        }
      }
      std::sort(w.halo_nodes.begin(), w.halo_nodes.end());
      w.halo_nodes.erase(std::unique(w.halo_nodes.begin(), w.halo_nodes.end()), w.halo_nodes.end());
    }
    w.local_to_global = w.owned_nodes;
    w.local_to_global.insert(w.local_to_global.end(), w.halo_nodes.begin(), w.halo_nodes.end());
    for (std::size_t l = 0; l < w.local_to_global.size(); ++l) {
      w.global_to_local[static_cast<std::size_t>(w.local_to_global[l])] = static_cast<NodeId>(l);
    }

    // Owned rows: full list (or in-part list); halo rows: edges back to owned nodes.
    w.local_offsets.assign(w.local_to_global.size() + 1, 0);
    for (std::size_t l = 0; l < w.local_to_global.size(); ++l) {
      const NodeId u = w.local_to_global[l];
      const bool owned = l < w.owned_nodes.size();
      for (const NodeId v : g.neighbors(u)) {
        const bool keep = owned ? (full_neighbors || plan.part_of(v) == p) : plan.part_of(v) == p;
        if (keep) {
          w.local_targets.push_back(w.global_to_local[static_cast<std::size_t>(v)]);
        }
      }
      w.local_offsets[l + 1] = static_cast<EdgeIndex>(w.local_targets.size());
    }

    w.local_features.reserve(w.local_to_global.size() * g.feature_dim());
    for (const NodeId u : w.local_to_global) {
      const auto f = g.features(u);
      w.local_features.insert(w.local_features.end(), f.begin(), f.end());
    }
  }
  return workers;
}

} // namespace lpsim
