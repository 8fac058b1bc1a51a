#pragma once

#include <cstdint>
#include <filesystem>
#include <span>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

#include "lpsim/graph.hpp"
#include "lpsim/sampler.hpp"

namespace lpsim {

using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

enum class Architecture { gcn, sage };
enum class PredictorKind { mlp, dot };

std::string_view to_string(Architecture a);
Architecture parse_architecture(std::string_view name);
std::string_view to_string(PredictorKind p);
PredictorKind parse_predictor(std::string_view name);

struct ModelSpec {
  Architecture architecture = Architecture::sage;
  PredictorKind predictor = PredictorKind::mlp;
  std::size_t input_dim = 0;
  std::size_t hidden_dim = 256;
  int num_layers = 3;
  bool use_edge_weights = true;

  friend bool operator==(const ModelSpec &, const ModelSpec &) = default;
};

/// Tensor layout: [W1, b1, ..., WK, bK] then, for the MLP predictor,
/// [P1, c1, P2, c2, P3, c3]. Weights are (in x out), biases (1 x out). A SAGE
/// layer's weight has 2 * in rows: self block on top, neighbor mean below.
struct ModelParams {
  ModelSpec spec;
  std::vector<Matrix> tensors;

  std::size_t num_scalars() const;
  Matrix &layer_weight(int k) { return tensors[static_cast<std::size_t>(2 * k)]; }
  Matrix &layer_bias(int k) { return tensors[static_cast<std::size_t>(2 * k + 1)]; }
  const Matrix &layer_weight(int k) const { return tensors[static_cast<std::size_t>(2 * k)]; }
  const Matrix &layer_bias(int k) const { return tensors[static_cast<std::size_t>(2 * k + 1)]; }
  /// Predictor tensor j in 0..5 (P1, c1, P2, c2, P3, c3).
  Matrix &predictor(int j) { return tensors[static_cast<std::size_t>(2 * spec.num_layers + j)]; }
  const Matrix &predictor(int j) const { return tensors[static_cast<std::size_t>(2 * spec.num_layers + j)]; }
};

/// Glorot-uniform weights in +-sqrt(6 / (fan_in + fan_out)), zero biases.
ModelParams init_params(const ModelSpec &spec, std::uint64_t seed);
/// Same shapes, all zeros.
std::vector<Matrix> zeros_like(const std::vector<Matrix> &tensors);

/// Raised when a forward or backward intermediate is NaN or infinite. layer()
/// is the 1-based GNN layer, or num_layers + 1 for the predictor and loss.
class NonFiniteError : public std::runtime_error {
public:
  NonFiniteError(int layer, const std::string &what) : std::runtime_error(what), layer_(layer) {}
  int layer() const { return layer_; }

private:
  int layer_;
};

/// Feature rows of `nodes` widened to double.
Matrix gather_features(const Graph &g, std::span<const NodeId> nodes);

/// Sparse aggregation operator of one hop: out.row(r) += coef * in.row(c).
struct Aggregation {
  struct Term {
    std::int32_t row = 0;
    std::int32_t col = 0;
    double coef = 0.0;
  };
  std::size_t rows = 0;
  std::size_t cols = 0;
  std::vector<Term> terms;
};

/// GCN operator including the self term: coefficients 1/sqrt(d_v d_u) with
/// d_x = 1 + summed weight of the distinct sampled edges touching x (an edge
/// drawn from both ends counts once), and 1/d_v on the diagonal.
Aggregation gcn_aggregation(const ComputationGraph &cg, int hop, bool use_weights);
/// SAGE neighbor mean: coefficients w / sum(w) over each node's sampled edges.
Aggregation mean_aggregation(const ComputationGraph &cg, int hop, bool use_weights);

struct ForwardCache {
  std::vector<Aggregation> ops;   // per model layer (layer l uses hop K - l)
  std::vector<Matrix> inputs;     // H^{l-1}
  std::vector<Matrix> aggregated; // X^l, the operand of W^l
  std::vector<Matrix> pre;        // Z^l = X^l W^l + b^l
};

/// Embeddings of cg.layers[0], one row per seed. features holds one row per
/// node of cg.all_nodes(), in that order.
Matrix forward_embeddings(const ComputationGraph &cg, const Matrix &features, const ModelParams &params,
                          ForwardCache *cache = nullptr);

/// Row indices into the seed embeddings for one scored pair.
struct PairIndex {
  std::int32_t u = 0;
  std::int32_t v = 0;
};

/// Positions of every pair's endpoints within cg.layers[0].
std::vector<PairIndex> pair_indices(const ComputationGraph &cg, std::span<const LabeledPair> pairs);

struct PredictorCache {
  Matrix hadamard;
  Matrix pre1;
  Matrix pre2;
};

/// Logits for the given pairs.
std::vector<double> score_pairs(const Matrix &embeddings, std::span<const PairIndex> pairs,
                                const ModelParams &params, PredictorCache *cache = nullptr);

/// Logit of a single pair; symmetric in (u, v).
double edge_score(std::span<const double> h_u, std::span<const double> h_v, const ModelParams &params);

/// Mean binary cross-entropy with logits, max(s, 0) - s y + log1p(exp(-|s|)).
double bce_loss(std::span<const double> scores, std::span<const std::uint8_t> labels);

struct LossAndGradients {
  double loss = 0.0;
  std::vector<Matrix> gradients;
};

/// Loss of the pairs and its exact gradient with respect to every tensor,
/// both multiplied by loss_scale.
LossAndGradients loss_and_gradients(const ComputationGraph &cg, const Matrix &features, const ModelParams &params,
                                    std::span<const PairIndex> pairs, std::span<const std::uint8_t> labels,
                                    double loss_scale = 1.0);

struct OptimizerState {
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
  std::uint64_t step = 0;
  std::vector<Matrix> first;
  std::vector<Matrix> second;

  static OptimizerState for_params(const ModelParams &params, double lr = 1e-3);
};

/// Bias-corrected Adam update in place.
void adam_step(ModelParams &params, const std::vector<Matrix> &gradients, OptimizerState &state);

/// Versioned little-endian binary: magic, version, spec, then every tensor's
/// shape and row-major values. Round-trips bit-exactly.
void save_checkpoint(const ModelParams &params, const std::filesystem::path &path);
ModelParams load_checkpoint(const std::filesystem::path &path);

} // namespace lpsim
