#pragma once

#include <cstdint>
#include <vector>

#include "lpsim/graph.hpp"

namespace lpsim {

/// Positive edges partitioned into train/val/test plus fixed evaluation
/// negatives. All lists hold canonical (u < v) pairs.
struct EdgeSplit {
  std::vector<Edge> train_pos;
  std::vector<Edge> val_pos;
  std::vector<Edge> test_pos;
  std::vector<Edge> val_neg;
  std::vector<Edge> test_neg;
};

struct SplitRatios {
  double train = 0.8;
  double val = 0.1;
  double test = 0.1;
};

/// Shuffles the undirected edges; val and test get floor(ratio * |E|) edges
/// and train takes the remainder. Evaluation negatives are distinct global
/// uniform non-edges, neg_multiplier per positive.
EdgeSplit split_edges(const Graph &g, SplitRatios ratios, int neg_multiplier, std::uint64_t seed);

/// The graph restricted to the training positives (message-passing graph).
Graph training_graph(const Graph &g, const EdgeSplit &split);

} // namespace lpsim
