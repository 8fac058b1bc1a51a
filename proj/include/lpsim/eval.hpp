#pragma once

#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "lpsim/graph.hpp"
#include "lpsim/model.hpp"
#include "lpsim/split.hpp"

namespace lpsim {

/// Fraction of positives scored strictly above the k-th highest negative.
/// Throws std::invalid_argument when there are fewer than k negatives.
double hits_at_k(std::span<const double> positive, std::span<const double> negative, std::size_t k);

/// min(100, negatives / 3), at least 1.
std::size_t default_hits_k(std::size_t num_negatives);

enum class EvalSet { validation, test };

struct EvalReport {
  std::vector<std::size_t> ks;
  std::vector<double> hits; // parallel to ks
  double positive_mean = 0.0;
  double negative_mean = 0.0;
  std::size_t epoch = 0;
  std::string variant;

  /// Hits for a K in ks; throws std::out_of_range otherwise.
  double hits_at(std::size_t k) const;
};

/// Scores node pairs with computation graphs sampled on `message_graph`
/// (everything local, no ledger). Pairs are processed in fixed chunks, each
/// with its own stream derived from seed, so scores depend only on inputs.
std::vector<double> score_edges(const ModelParams &params, const Graph &message_graph, std::span<const Edge> pairs,
                                std::span<const int> fanouts, std::uint64_t seed, std::size_t chunk = 1024);

EvalReport evaluate_model(const ModelParams &params, const EdgeSplit &split, const Graph &message_graph,
                          std::span<const int> fanouts, std::span<const std::size_t> ks, std::uint64_t seed,
                          EvalSet which);

/// One line of a comparison table.
struct SummaryRow {
  std::string variant;
  std::optional<double> alpha; // only meaningful under sparsified sharing
  int num_parts = 1;
  std::size_t seeds = 1;
  std::size_t k = 0;
  double epoch_bytes = 0.0;            // mean per-epoch feature + structure bytes
  std::optional<double> saving_percent; // against the complete-sharing reference
  double val_hits = 0.0;
  double test_hits = 0.0;
};

/// Fixed-width text table with a header line.
std::string format_summary(std::span<const SummaryRow> rows);

} // namespace lpsim
