#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <span>
#include <string_view>
#include <vector>

#include "lpsim/graph.hpp"

namespace lpsim {

enum class PartitionStrategy { greedy_cut, random_tma, super_tma };

std::string_view to_string(PartitionStrategy s);
PartitionStrategy parse_partition_strategy(std::string_view name);

inline constexpr double kBalanceSlack = 0.05;

struct PartitionPlan {
  int num_parts = 1;
  std::vector<int> assignment; // node -> part
  PartitionStrategy strategy = PartitionStrategy::greedy_cut;

  int part_of(NodeId u) const { return assignment[static_cast<std::size_t>(u)]; }
  std::vector<NodeId> part_sizes() const;
  std::vector<NodeId> members(int part) const;
  std::size_t edge_cut(const Graph &g) const;
};

/// Largest part size the balance constraint admits:
/// max(ceil(n / p), floor((1 + slack) * n / p)), never above ceil((1 + slack) * n / p).
NodeId part_capacity(NodeId num_nodes, int num_parts, double slack = kBalanceSlack);

/// Streaming linear-deterministic-greedy: nodes arrive in a seeded random
/// order and join the non-full part maximizing
///   |N(v) ∩ P| * (1 - |P| / capacity),
/// ties to the smallest part id. A node with no assigned neighbor yet joins
/// the least-loaded part.
PartitionPlan partition_greedy(const Graph &g, int num_parts, std::uint64_t seed,
                               double slack = kBalanceSlack);

/// I.i.d. uniform assignment, then the fewest moves that bring every part
/// into [floor((1 - slack) n / p), capacity].
PartitionPlan partition_random_tma(const Graph &g, int num_parts, std::uint64_t seed,
                                   double slack = kBalanceSlack);

/// Greedy mini-clustering, then each mini-cluster is dealt to a part: clusters
/// are shuffled and assigned round-robin, so every cluster lands on a
/// uniformly random part and no part is starved.
PartitionPlan partition_super_tma(const Graph &g, int num_parts, NodeId num_miniclusters,
                                  std::uint64_t seed);

PartitionPlan make_partition(const Graph &g, PartitionStrategy strategy, int num_parts,
                             NodeId num_miniclusters, std::uint64_t seed);

void write_partition_csv(std::ostream &out, const PartitionPlan &plan);
PartitionPlan read_partition_csv(std::istream &in, NodeId num_nodes, PartitionStrategy strategy);

/// One worker's share of the graph. Local ids number owned nodes first (in
/// increasing global id), then halo nodes.
struct WorkerSubgraph {
  int part_id = 0;
  std::vector<NodeId> owned_nodes; // sorted global ids
  std::vector<NodeId> halo_nodes;  // sorted global ids
  std::vector<NodeId> local_to_global;
  std::vector<NodeId> global_to_local; // -1 when absent; size = global num_nodes
  std::vector<EdgeIndex> local_offsets;
  std::vector<NodeId> local_targets; // local ids, sorted by global id per row
  std::vector<float> local_features; // row-major over local ids
  std::size_t feature_dim = 0;

  NodeId num_local() const { return static_cast<NodeId>(local_to_global.size()); }
  std::optional<NodeId> local_id(NodeId global) const {
    const NodeId l = global_to_local[static_cast<std::size_t>(global)];
    return l < 0 ? std::nullopt : std::optional<NodeId>(l);
  }
  bool owns(NodeId global) const {
    const NodeId l = global_to_local[static_cast<std::size_t>(global)];
    return l >= 0 && l < static_cast<NodeId>(owned_nodes.size());
  }
  bool stores(NodeId global) const { return global_to_local[static_cast<std::size_t>(global)] >= 0; }

  std::span<const NodeId> local_neighbors(NodeId local) const {
    return {local_targets.data() + local_offsets[local],
            static_cast<std::size_t>(local_offsets[local + 1] - local_offsets[local])};
  }
  int local_degree(NodeId local) const {
    return static_cast<int>(local_offsets[local + 1] - local_offsets[local]);
  }
  /// Undirected edges of the subgraph in global ids, u < v.
  std::vector<Edge> edges() const;
};

/// Materializes every worker's subgraph. With full_neighbors each owned node
/// keeps its complete neighbor list, out-of-part neighbors become halo nodes
/// with cached features, and a cross-partition edge lives in both incident
/// workers. Without it the subgraph is node-induced on the part (no halo).
std::vector<WorkerSubgraph> build_worker_subgraphs(const Graph &g, const PartitionPlan &plan,
                                                   bool full_neighbors = true);

} // namespace lpsim
