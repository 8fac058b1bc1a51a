#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string_view>
#include <vector>

#include "lpsim/graph.hpp"
#include "lpsim/partition.hpp"
#include "lpsim/random.hpp"
#include "lpsim/sparsify.hpp"

namespace lpsim {

/// How a worker reaches graph data it does not hold.
///  none       - it doesn't; training stays inside the local subgraph.
///  complete   - full neighbor lists fetched from the master store.
///  sparsified - neighbor lists fetched from the owner's sparsified subgraph.
enum class SharingMode { none, complete, sparsified };

std::string_view to_string(SharingMode m);
SharingMode parse_sharing_mode(std::string_view name);

enum class Locality : std::uint8_t { local, remote };

struct NeighborList {
  std::span<const NodeId> nodes;   // global ids
  std::span<const double> weights; // empty means every weight is 1
  Locality locality = Locality::local;
};

/// Read-only store of every partition's sparsified subgraph with per-part
/// adjacency for neighbor lookup. This is the shared memory all workers read.
class SparsifiedStore {
public:
  SparsifiedStore() = default;
  SparsifiedStore(std::vector<SparsifiedSubgraph> parts, NodeId num_nodes);

  int num_parts() const { return static_cast<int>(parts_.size()); }
  const SparsifiedSubgraph &part(int p) const { return parts_[static_cast<std::size_t>(p)]; }
  /// Sparsified neighbors of u within part p's subgraph; empty if u is absent.
  NeighborList neighbors(int part, NodeId u) const;
  std::size_t total_edges() const;

private:
  struct Adjacency {
    std::vector<NodeId> row_of; // global id -> row, -1 if absent
    std::vector<EdgeIndex> offsets;
    std::vector<NodeId> targets;
    std::vector<double> weights;
  };
  std::vector<SparsifiedSubgraph> parts_;
  std::vector<Adjacency> adjacency_;
};

/// Neighborhood resolver for one worker. Owned nodes resolve through the
/// worker's own subgraph; nodes owned elsewhere resolve according to the
/// sharing mode. The whole-graph view treats everything as local.
class GraphView {
public:
  static GraphView whole(const Graph &g);

  GraphView(const Graph &g, const PartitionPlan &plan, const WorkerSubgraph &local, SharingMode mode,
            const SparsifiedStore *store);

  NeighborList neighbors(NodeId u) const;
  bool has_local_features(NodeId u) const { return local_ == nullptr || local_->stores(u); }
  bool owns(NodeId u) const { return local_ == nullptr || local_->owns(u); }
  NodeId num_nodes() const { return graph_->num_nodes(); }
  int worker() const { return local_ == nullptr ? 0 : local_->part_id; }
  SharingMode sharing() const { return mode_; }

private:
  GraphView() = default;

  const Graph *graph_ = nullptr;
  const PartitionPlan *plan_ = nullptr;
  const WorkerSubgraph *local_ = nullptr;
  SharingMode mode_ = SharingMode::none;
  const SparsifiedStore *store_ = nullptr;
  std::vector<NodeId> local_rows_global_; // local CSR targets mapped to global ids
};

struct LabeledPair {
  NodeId src = 0;
  NodeId dst = 0;
  std::uint8_t label = 0;

  friend bool operator==(const LabeledPair &, const LabeledPair &) = default;
};

struct Batch {
  std::vector<LabeledPair> pairs;
  int worker_id = 0;
  std::size_t batch_index = 0;
};

/// Rows "u,v,label,worker,batch"; the header is written when requested.
void write_batch_csv(std::ostream &out, const Batch &batch, bool header);

/// Training edges a worker is responsible for as positives: those whose
/// lower-id endpoint it owns. internal_only additionally requires the other
/// endpoint in the same part (node-induced subgraphs).
std::vector<Edge> owned_train_edges(std::span<const Edge> train_edges, const PartitionPlan &plan, int worker,
                                    bool internal_only);

/// One epoch's order over a worker's positives, with a random orientation per
/// edge. Deterministic in (seed, epoch, worker).
class PositiveSchedule {
public:
  PositiveSchedule(std::span<const Edge> owned, std::uint64_t seed, std::size_t epoch, int worker);

  std::size_t size() const { return order_.size(); }
  std::size_t num_batches(std::size_t per_batch) const {
    return (order_.size() + per_batch - 1) / per_batch;
  }
  /// Positive pairs of batch `index`; empty past the end of the epoch.
  std::vector<LabeledPair> batch(std::size_t index, std::size_t per_batch) const;

private:
  std::vector<LabeledPair> order_;
};

/// batch_size / 2 positives for (seed, epoch, batch_index, worker). Throws
/// std::invalid_argument when the worker owns no training edge.
std::vector<LabeledPair> positive_batch(std::span<const Edge> owned, std::size_t batch_size, std::uint64_t seed,
                                        std::size_t epoch, std::size_t batch_index, int worker);

/// Candidate destinations for per-source negatives. An empty pool means all
/// nodes.
class NegativePool {
public:
  NegativePool() = default;
  NegativePool(std::vector<NodeId> candidates, NodeId num_nodes);

  bool everything() const { return candidates_.empty(); }
  std::span<const NodeId> candidates() const { return candidates_; }
  bool contains(NodeId u) const { return everything() || member_[static_cast<std::size_t>(u)] != 0; }

private:
  std::vector<NodeId> candidates_;
  std::vector<std::uint8_t> member_;
};

/// Number of admissible destinations for `source`: pool members that are
/// neither the source nor adjacent to it in g.
std::size_t available_destinations(const Graph &g, NodeId source, const NegativePool &pool);

/// For each source one destination drawn uniformly from the pool minus the
/// source and its neighbors in g (rejection sampling on g's adjacency).
/// Throws std::invalid_argument for a source with no admissible destination.
std::vector<LabeledPair> negative_per_source(std::span<const NodeId> sources, const Graph &g, Rng &rng,
                                             const NegativePool &pool = {});

/// count distinct uniform non-edges {u, v}, u != v, returned as u < v.
std::vector<Edge> negative_global_uniform(const Graph &g, std::size_t count, Rng &rng);

struct SampledEdge {
  std::int32_t dst = 0; // index into layers[k]
  std::int32_t src = 0; // index into layers[k + 1]
  double weight = 1.0;
};

/// Layered fanout expansion. layers[0] holds the unique seeds; layers[k + 1]
/// starts with layers[k] and appends newly reached nodes; hops[k] lists the
/// sampled edges from each layers[k] node into layers[k + 1], grouped by dst.
struct ComputationGraph {
  std::vector<std::vector<NodeId>> layers;
  std::vector<std::vector<SampledEdge>> hops;
  /// Nodes whose features the worker does not hold (sorted, distinct).
  std::vector<NodeId> remote_nodes;
  /// Distinct edges sampled out of remotely resolved neighbor lists (sorted, u < v).
  std::vector<Edge> remote_edges;

  int num_hops() const { return static_cast<int>(hops.size()); }
  const std::vector<NodeId> &all_nodes() const { return layers.back(); }
};

/// Seeds in first-occurrence order of the pair endpoints.
std::vector<NodeId> pair_endpoints(std::span<const LabeledPair> pairs);

/// Samples min(fanout_k, degree) neighbors without replacement (partial
/// Fisher-Yates) for every node of layer k, k = 0..K-1. Sparsifier weights are
/// carried on remote edges; local edges weigh 1.
ComputationGraph build_computation_graph(std::span<const NodeId> seeds, const GraphView &view,
                                         std::span<const int> fanouts, Rng &rng);

} // namespace lpsim
