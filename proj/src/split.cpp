#include "lpsim/split.hpp"

#include <cmath>
#include <stdexcept>

#include "lpsim/random.hpp"
#include "lpsim/sampler.hpp"

namespace lpsim {

EdgeSplit split_edges(const Graph &g, SplitRatios ratios, int neg_multiplier, std::uint64_t seed) {
  if (ratios.train < 0 || ratios.val < 0 || ratios.test < 0 ||
      std::abs(ratios.train + ratios.val + ratios.test - 1.0) > 1e-9) {
    throw std::invalid_argument("split ratios must be nonnegative and sum to 1");
  }
  if (neg_multiplier < 1) {
    throw std::invalid_argument("negative multiplier must be at least 1");
  }
  std::vector<Edge> edges = g.edge_list();
  if (edges.size() < 10) {
    throw std::invalid_argument("edge split needs at least 10 undirected edges, graph has " +
                                std::to_string(edges.size()));
  }
  const auto m = static_cast<double>(edges.size());
  const auto n_val = static_cast<std::size_t>(std::floor(ratios.val * m + 1e-9));
  const auto n_test = static_cast<std::size_t>(std::floor(ratios.test * m + 1e-9));
  const std::size_t n_train = edges.size() - n_val - n_test;
  if (n_train == 0 || (ratios.val > 0 && n_val == 0) || (ratios.test > 0 && n_test == 0)) {
    throw std::invalid_argument("graph too small to populate every split");
  }

  Rng rng(derive_seed(seed, {0x5911}));
  rng.shuffle(std::span<Edge>(edges));

  EdgeSplit split;
  split.val_pos.assign(edges.begin(), edges.begin() + static_cast<std::ptrdiff_t>(n_val));
  split.test_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_val),
                        edges.begin() + static_cast<std::ptrdiff_t>(n_val + n_test));
  split.train_pos.assign(edges.begin() + static_cast<std::ptrdiff_t>(n_val + n_test), edges.end());

  const std::size_t n_val_neg = n_val * static_cast<std::size_t>(neg_multiplier);
  const std::size_t n_test_neg = n_test * static_cast<std::size_t>(neg_multiplier);
  Rng neg_rng(derive_seed(seed, {0x4e9}));
  auto negatives = negative_global_uniform(g, n_val_neg + n_test_neg, neg_rng);
  split.val_neg.assign(negatives.begin(), negatives.begin() + static_cast<std::ptrdiff_t>(n_val_neg));
  split.test_neg.assign(negatives.begin() + static_cast<std::ptrdiff_t>(n_val_neg), negatives.end());
  return split;
}

Graph training_graph(const Graph &g, const EdgeSplit &split) { return g.with_edges(split.train_pos); }

} // namespace lpsim
