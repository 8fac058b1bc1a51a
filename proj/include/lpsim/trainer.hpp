#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lpsim/eval.hpp"
#include "lpsim/graph.hpp"
#include "lpsim/model.hpp"
#include "lpsim/partition.hpp"
#include "lpsim/sampler.hpp"
#include "lpsim/sparsify.hpp"
#include "lpsim/split.hpp"

namespace lpsim {

enum class SyncMode { model_avg, gradient_avg };

std::string_view to_string(SyncMode m);
SyncMode parse_sync_mode(std::string_view name);

enum class Variant {
  custom,
  psgd_pa,
  random_tma,
  super_tma,
  splpg_minus_minus,
  splpg_minus,
  splpg,
  splpg_plus,
  centralized,
};

std::string_view to_string(Variant v);
Variant parse_variant(std::string_view name);

struct TrainConfig {
  int num_parts = 4;
  double alpha = 0.15;
  std::vector<int> fanouts{25, 10, 5};
  std::size_t batch_size = 256;
  double lr = 1e-3;
  std::size_t epochs = 10;
  SyncMode sync_mode = SyncMode::model_avg;
  std::size_t sync_period = 1; // batches between synchronizations
  SharingMode sharing = SharingMode::sparsified;
  PartitionStrategy partitioner = PartitionStrategy::greedy_cut;
  NodeId num_miniclusters = 0; // 0 selects 16 per part
  DegreeScope degree_scope = DegreeScope::subgraph;
  ModelSpec model;             // input_dim is taken from the graph
  bool full_neighbor_halo = true;
  bool local_only_negatives = false;
  std::uint64_t partition_seed = 1;
  std::uint64_t sparsify_seed = 2;
  std::uint64_t sample_seed = 3;
  std::uint64_t init_seed = 4;
  std::uint64_t eval_seed = 5;
  std::size_t eval_k = 0;             // 0 selects default_hits_k
  std::size_t threads = 1;            // worker tasks run concurrently between barriers
  std::size_t checkpoint_period = 0;  // epochs; 0 disables
  std::filesystem::path checkpoint_dir;
  std::string label = "custom";

  /// Throws std::invalid_argument naming the offending field.
  void validate() const;
};

/// Flag bundle of a named variant on top of `base` (seeds, dims and schedule
/// are kept).
TrainConfig apply_variant(TrainConfig base, Variant variant);

/// Per-epoch, per-worker remote transfer counters plus one-off setup costs.
class CommLedger {
public:
  CommLedger() = default;
  CommLedger(std::size_t epochs, int workers, std::size_t feature_dim);

  struct Cell {
    std::uint64_t feature_bytes = 0;
    std::uint64_t structure_bytes = 0;
    std::uint64_t remote_nodes = 0;
    std::uint64_t remote_edges = 0;
  };

  void bill(std::size_t epoch, int worker, std::uint64_t nodes, std::uint64_t edges);
  void bill_setup(std::uint64_t feature_bytes, std::uint64_t structure_bytes);

  const Cell &cell(std::size_t epoch, int worker) const;
  Cell epoch_total(std::size_t epoch) const;
  std::uint64_t setup_feature_bytes() const { return setup_feature_bytes_; }
  std::uint64_t setup_structure_bytes() const { return setup_structure_bytes_; }
  std::size_t epochs() const { return epochs_; }
  int workers() const { return workers_; }
  std::size_t feature_dim() const { return feature_dim_; }

  /// Rows "phase,epoch,worker,feature_bytes,structure_bytes,remote_nodes,remote_edges",
  /// each followed by ",tag_values" when a tag is given.
  void write_csv(std::ostream &out, bool header = true, std::string_view tag_header = {},
                 std::string_view tag_values = {}) const;

private:
  std::size_t epochs_ = 0;
  int workers_ = 0;
  std::size_t feature_dim_ = 0;
  std::vector<Cell> cells_;
  std::uint64_t setup_feature_bytes_ = 0;
  std::uint64_t setup_structure_bytes_ = 0;
};

/// Bills one worker's batch: 4 * feature_dim bytes per distinct remote node
/// and 8 bytes per distinct remotely resolved edge. Nothing under no sharing.
void account_transfer(const ComputationGraph &cg, int worker, std::size_t epoch, CommLedger &ledger,
                      SharingMode sharing);

/// Elementwise mean over workers, computed once.
std::vector<Matrix> sync_gradients(std::span<const std::vector<Matrix>> worker_grads);
/// Elementwise mean of replica tensors, computed once.
std::vector<Matrix> sync_models(std::span<const std::vector<Matrix>> worker_params);

struct EpochMetrics {
  std::size_t epoch = 0;
  double train_loss = 0.0;
  double val_hits = 0.0;
  std::uint64_t feature_bytes = 0;   // cumulative
  std::uint64_t structure_bytes = 0; // cumulative
};

/// Header "epoch,variant,train_loss,val_hits,feature_bytes,structure_bytes",
/// each row followed by ",tag_values" when a tag is given.
void write_metrics_csv(std::ostream &out, std::span<const EpochMetrics> history, std::string_view variant,
                       bool header = true, std::string_view tag_header = {}, std::string_view tag_values = {});

struct TrainResult {
  ModelParams final_params;
  ModelParams best_params;
  CommLedger ledger;
  std::vector<EpochMetrics> history;
  std::size_t k = 0;
  std::size_t best_epoch = 0;
  double best_val_hits = 0.0;
  double test_hits = 0.0;
  EvalReport test_report;
  std::size_t edge_cut = 0;
  std::size_t sparsified_edges = 0;
  std::size_t subgraph_edges = 0;
  /// Largest elementwise difference between replicas seen right after any
  /// synchronization; 0 when replicas stayed identical.
  double max_replica_divergence = 0.0;
};

/// Simulated distributed training over p workers. message passing, views and
/// evaluation use the training-edge graph; negatives are rejected against g.
TrainResult run_training(const Graph &g, const EdgeSplit &split, const TrainConfig &config);

/// Single-model training over the whole training graph with the stream tags
/// of worker 0.
TrainResult run_centralized(const Graph &g, const EdgeSplit &split, const TrainConfig &config);

/// run_training with the variant's flag bundle; centralized runs
/// run_centralized.
TrainResult run_baseline(const Graph &g, const EdgeSplit &split, Variant variant, const TrainConfig &config);

} // namespace lpsim
