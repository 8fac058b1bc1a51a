#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace lpsim {

using NodeId = std::int32_t;
using EdgeIndex = std::int64_t;

/// Node features are stored and billed as 4-byte floats.
inline constexpr std::size_t kFeatureScalarBytes = sizeof(float);

/// Undirected edge. Functions returning edge lists use u < v.
struct Edge {
  NodeId u = 0;
  NodeId v = 0;

  friend bool operator==(const Edge &, const Edge &) = default;
  friend auto operator<=>(const Edge &, const Edge &) = default;
};

inline Edge canonical(NodeId a, NodeId b) { return a < b ? Edge{a, b} : Edge{b, a}; }

struct WeightedEdge {
  NodeId u = 0;
  NodeId v = 0;
  double weight = 1.0;
};

/// Immutable undirected graph in symmetric CSR form with a dense float feature
/// matrix. Neighbor lists are sorted by id, contain no self-loops and no
/// duplicates; both directions of each edge are stored with equal weight.
class Graph {
public:
  Graph() = default;

  /// Symmetrizes, drops self-loops and merges duplicates. features is
  /// row-major num_nodes x feature_dim (may be empty when feature_dim == 0).
  static Graph from_edges(NodeId num_nodes, std::span<const Edge> edges,
                          std::vector<float> features, std::size_t feature_dim);

  /// Weighted variant; for duplicate entries the first occurrence wins.
  static Graph from_weighted_edges(NodeId num_nodes, std::span<const WeightedEdge> edges,
                                   std::vector<float> features, std::size_t feature_dim);

  /// Adopts prebuilt CSR arrays after checking every structural invariant
  /// (monotone offsets, sorted duplicate-free lists, no self-loops, symmetry).
  /// weights may be empty for an unweighted graph.
  static Graph from_csr(NodeId num_nodes, std::vector<EdgeIndex> offsets, std::vector<NodeId> targets,
                        std::vector<double> weights, std::vector<float> features,
                        std::size_t feature_dim);

  NodeId num_nodes() const { return num_nodes_; }
  EdgeIndex num_directed_entries() const { return static_cast<EdgeIndex>(targets_.size()); }
  EdgeIndex num_edges() const { return num_directed_entries() / 2; }
  std::size_t feature_dim() const { return feature_dim_; }
  bool weighted() const { return !weights_.empty(); }

  std::span<const EdgeIndex> offsets() const { return offsets_; }
  std::span<const NodeId> targets() const { return targets_; }
  std::span<const double> weights() const { return weights_; }

  std::span<const NodeId> neighbors(NodeId u) const {
    return {targets_.data() + offsets_[u], static_cast<std::size_t>(degree(u))};
  }
  /// Empty for unweighted graphs (every weight is 1).
  std::span<const double> neighbor_weights(NodeId u) const {
    if (weights_.empty()) {
      return {};
    }
    return {weights_.data() + offsets_[u], static_cast<std::size_t>(degree(u))};
  }

  int degree(NodeId u) const { return static_cast<int>(offsets_[u + 1] - offsets_[u]); }
  double weighted_degree(NodeId u) const;
  bool has_edge(NodeId u, NodeId v) const;
  /// Weight of edge (u, v); 0 when absent.
  double edge_weight(NodeId u, NodeId v) const;

  std::span<const float> features(NodeId u) const {
    return {features_.data() + static_cast<std::size_t>(u) * feature_dim_, feature_dim_};
  }
  const std::vector<float> &feature_matrix() const { return features_; }

  /// Each undirected edge once, u < v, in CSR order.
  std::vector<Edge> edge_list() const;

  /// Same nodes and features with a different edge set.
  Graph with_edges(std::span<const Edge> edges) const;

private:
  NodeId num_nodes_ = 0;
  std::vector<EdgeIndex> offsets_{0};
  std::vector<NodeId> targets_;
  std::vector<double> weights_;
  std::vector<float> features_;
  std::size_t feature_dim_ = 0;
};

/// Reads a whitespace-separated "u v" edge file and a CSV feature file. The
/// number of feature rows fixes num_nodes.
Graph load_graph(const std::filesystem::path &edge_file, const std::filesystem::path &feature_file);

/// Writes each undirected edge once and features with round-trip float text.
void save_graph(const Graph &g, const std::filesystem::path &edge_file,
                const std::filesystem::path &feature_file);

enum class SyntheticKind { erdos_renyi, barabasi_albert, sbm };

struct SyntheticSpec {
  SyntheticKind kind = SyntheticKind::erdos_renyi;
  NodeId num_nodes = 0;       // ER, BA
  double edge_probability = 0; // ER
  int attach_edges = 2;       // BA: edges added per new node
  std::vector<NodeId> block_sizes; // SBM
  double p_in = 0;
  double p_out = 0;
  /// Mixes a per-block prototype into node features (SBM only). 0 keeps the
  /// features pure i.i.d. noise.
  double block_feature_signal = 0;
};

/// Generates the graph, keeps its largest connected component (relabelled in
/// original order) and draws features uniformly from [-1, 1].
Graph generate_synthetic(const SyntheticSpec &spec, std::size_t feature_dim, std::uint64_t seed);

/// Sum over undirected edges of w_uv (x_u - x_v)^2.
double laplacian_quadratic_form(const Graph &g, std::span<const double> x);

bool is_connected(const Graph &g);

/// Largest connected component, relabelled densely in increasing id order.
Graph largest_component(const Graph &g);

/// Dense weighted Laplacian D - A. For test oracles on small graphs only.
Eigen::MatrixXd dense_laplacian(const Graph &g);

/// Second smallest eigenvalue of D^{-1/2} L D^{-1/2}, dense eigensolve.
/// Throws std::domain_error for disconnected graphs.
double normalized_laplacian_gamma(const Graph &g);

} // namespace lpsim
