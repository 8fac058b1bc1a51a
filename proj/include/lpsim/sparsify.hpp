#pragma once

#include <cstddef>
#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "lpsim/graph.hpp"
#include "lpsim/partition.hpp"
#include "lpsim/random.hpp"

namespace lpsim {

/// Which degrees feed the resistance proxy: the worker subgraph's own
/// (owned + halo edges) or the full graph's.
enum class DegreeScope { subgraph, global };

std::string_view to_string(DegreeScope s);
DegreeScope parse_degree_scope(std::string_view name);

/// Degree-based effective-resistance proxy 1/d_u + 1/d_v.
double approx_resistance(int degree_u, int degree_v);

/// Number of draws for a subgraph with edge_count edges: max(1, round(alpha * edge_count)).
std::size_t sample_count(double alpha, std::size_t edge_count);

/// Walker/Vose alias table for O(1) categorical draws.
class AliasTable {
public:
  AliasTable() = default;
  /// weights need not be normalized but must be nonnegative with a positive sum.
  explicit AliasTable(std::span<const double> weights);

  std::size_t size() const { return prob_.size(); }
  std::size_t sample(Rng &rng) const;

private:
  std::vector<double> prob_;
  std::vector<std::size_t> alias_;
};

/// Result of drawing with replacement from a categorical distribution and
/// turning the counts into importance weights count / (draws * p).
struct ImportanceDraws {
  std::vector<std::uint32_t> counts;
  std::vector<double> weights;
  std::size_t draws = 0;
};

/// accumulate_duplicates = false replaces instead of summing on repeated
/// draws; it exists only so the verification suite can prove it notices.
ImportanceDraws importance_sample(std::span<const double> probabilities, std::size_t draws, Rng &rng,
                                  bool accumulate_duplicates = true);

struct SparsifyOptions {
  double alpha = 0.15;
  std::uint64_t seed = 0;
  DegreeScope degree_scope = DegreeScope::subgraph;
  bool accumulate_duplicates = true;
};

/// Weighted edge subset of one worker subgraph; node set unchanged.
struct SparsifiedSubgraph {
  int part_id = 0;
  std::vector<NodeId> nodes; // global ids, identical to the source's owned + halo
  std::vector<Edge> edges;   // distinct sampled edges, global ids, u < v, sorted
  std::vector<double> weights;
  std::vector<std::uint32_t> draw_counts;
  std::vector<double> probabilities; // p_e of each retained edge
  std::size_t source_edge_count = 0;
  std::size_t samples_drawn = 0;

  double retention_ratio() const {
    return source_edge_count == 0 ? 0.0 : static_cast<double>(edges.size()) / source_edge_count;
  }
};

/// Sampling distribution over the subgraph's undirected edges (in the order
/// of WorkerSubgraph::edges()), p_e proportional to approx_resistance.
/// full_graph is required for DegreeScope::global.
std::vector<double> edge_probabilities(const WorkerSubgraph &sub, std::span<const Edge> edges,
                                       DegreeScope scope, const Graph *full_graph = nullptr);

SparsifiedSubgraph sparsify_subgraph(const WorkerSubgraph &sub, const SparsifyOptions &options,
                                     const Graph *full_graph = nullptr);

/// Header "u,v,weight" then one row per retained edge.
void write_sparsified_csv(std::ostream &out, const SparsifiedSubgraph &s);

/// "part=i source_edges=|E| samples=L retained=k retention=r".
std::string sparsify_summary(const SparsifiedSubgraph &s);

} // namespace lpsim
