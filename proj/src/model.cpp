#include "lpsim/model.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>
#include <unordered_set>

#include "lpsim/random.hpp"

namespace lpsim {

namespace {

constexpr char kMagic[8] = {'L', 'P', 'S', 'I', 'M', 'C', 'K', 'P'};
constexpr std::uint32_t kCheckpointVersion = 1;

void require_finite(const Matrix &m, int layer, const char *what) {
  if (!m.allFinite()) {
    throw NonFiniteError(layer, std::string("non-finite ") + what + " at layer " + std::to_string(layer));
  }
}

void apply(const Aggregation &op, const Matrix &in, Matrix &out) {
  out.setZero(static_cast<Eigen::Index>(op.rows), in.cols());
  for (const auto &t : op.terms) {
    out.row(t.row).noalias() += t.coef * in.row(t.col);
  }
}

void apply_transposed(const Aggregation &op, const Matrix &grad_out, Matrix &grad_in) {
  for (const auto &t : op.terms) {
    grad_in.row(t.col).noalias() += t.coef * grad_out.row(t.row);
  }
}

Matrix relu(const Matrix &z) { return z.cwiseMax(0.0); }

Matrix relu_mask(const Matrix &z) { return (z.array() > 0.0).cast<double>().matrix(); }

std::size_t layer_in_dim(const ModelSpec &spec, int k) { return k == 0 ? spec.input_dim : spec.hidden_dim; }

double sigmoid(double s) {
  if (s >= 0) {
    return 1.0 / (1.0 + std::exp(-s));
  }
  const double e = std::exp(s);
  return e / (1.0 + e);
}

template <typename T>
void write_pod(std::ostream &out, const T &value) {
  out.write(reinterpret_cast<const char *>(&value), sizeof(T));
}

template <typename T>
T read_pod(std::istream &in) {
  T value{};
  in.read(reinterpret_cast<char *>(&value), sizeof(T));
  if (!in) {
    throw std::runtime_error("truncated checkpoint");
  }
  return value;
}

} // namespace

std::string_view to_string(Architecture a) { return a == Architecture::gcn ? "gcn" : "sage"; }

Architecture parse_architecture(std::string_view name) {
  if (name == "gcn") {
    return Architecture::gcn;
  }
  if (name == "sage" || name == "graphsage") {
    return Architecture::sage;
  }
  throw std::invalid_argument("unknown architecture '" + std::string(name) + "'");
}

std::string_view to_string(PredictorKind p) { return p == PredictorKind::mlp ? "mlp" : "dot"; }

PredictorKind parse_predictor(std::string_view name) {
  if (name == "mlp") {
    return PredictorKind::mlp;
  }
  if (name == "dot") {
    return PredictorKind::dot;
  }
  throw std::invalid_argument("unknown predictor '" + std::string(name) + "'");
}

std::size_t ModelParams::num_scalars() const {
  std::size_t total = 0;
  for (const auto &t : tensors) {
    total += static_cast<std::size_t>(t.size());
  }
  return total;
}

ModelParams init_params(const ModelSpec &spec, std::uint64_t seed) {
  if (spec.input_dim == 0 || spec.hidden_dim == 0 || spec.num_layers < 1) {
    throw std::invalid_argument("model needs positive input_dim, hidden_dim and num_layers");
  }
  Rng rng(derive_seed(seed, {0x1417}));
  const auto glorot = [&](std::size_t in, std::size_t out) {
    Matrix w(static_cast<Eigen::Index>(in), static_cast<Eigen::Index>(out));
    const double limit = std::sqrt(6.0 / static_cast<double>(in + out));
    for (Eigen::Index i = 0; i < w.size(); ++i) {
      w.data()[i] = rng.uniform(-limit, limit);
    }
    return w;
  };
  ModelParams params;
  params.spec = spec;
  const std::size_t h = spec.hidden_dim;
  for (int k = 0; k < spec.num_layers; ++k) {
    const std::size_t in = layer_in_dim(spec, k);
    const std::size_t rows = spec.architecture == Architecture::sage ? 2 * in : in;
    params.tensors.push_back(glorot(rows, h));
    params.tensors.push_back(Matrix::Zero(1, static_cast<Eigen::Index>(h)));
  }
  if (spec.predictor == PredictorKind::mlp) {
    params.tensors.push_back(glorot(h, h));
    params.tensors.push_back(Matrix::Zero(1, static_cast<Eigen::Index>(h)));
    params.tensors.push_back(glorot(h, h));
    params.tensors.push_back(Matrix::Zero(1, static_cast<Eigen::Index>(h)));
    params.tensors.push_back(glorot(h, 1));
    params.tensors.push_back(Matrix::Zero(1, 1));
  }
  return params;
}

std::vector<Matrix> zeros_like(const std::vector<Matrix> &tensors) {
  std::vector<Matrix> out;
  out.reserve(tensors.size());
  for (const auto &t : tensors) {
    out.push_back(Matrix::Zero(t.rows(), t.cols()));
  }
  return out;
}

Matrix gather_features(const Graph &g, std::span<const NodeId> nodes) {
  Matrix x(static_cast<Eigen::Index>(nodes.size()), static_cast<Eigen::Index>(g.feature_dim()));
  for (std::size_t i = 0; i < nodes.size(); ++i) {
    const auto row = g.features(nodes[i]);
    for (std::size_t j = 0; j < row.size(); ++j) {
      x(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j)) = row[j];
    }
  }
  return x;
}

Aggregation gcn_aggregation(const ComputationGraph &cg, int hop, bool use_weights) {
  const auto &edges = cg.hops[static_cast<std::size_t>(hop)];
  Aggregation op;
  op.rows = cg.layers[static_cast<std::size_t>(hop)].size();
  op.cols = cg.layers[static_cast<std::size_t>(hop) + 1].size();
  // layers[hop + 1] starts with layers[hop], so a dst index is also a src
  // index. An edge sampled from both ends counts once per endpoint.
  const auto &next = cg.layers[static_cast<std::size_t>(hop) + 1];
  std::vector<double> degree(op.cols, 1.0);
  std::unordered_set<std::uint64_t> seen;
  seen.reserve(edges.size());
  for (const auto &e : edges) {
    const auto a = static_cast<std::uint32_t>(next[static_cast<std::size_t>(e.dst)]);
    const auto b = static_cast<std::uint32_t>(next[static_cast<std::size_t>(e.src)]);
    const std::uint64_t key = (static_cast<std::uint64_t>(std::min(a, b)) << 32) | std::max(a, b);
    if (!seen.insert(key).second) {
      continue;
    }
    const double w = use_weights ? e.weight : 1.0;
    degree[static_cast<std::size_t>(e.dst)] += w;
    degree[static_cast<std::size_t>(e.src)] += w;
  }
  op.terms.reserve(op.rows + edges.size());
  for (std::size_t i = 0; i < op.rows; ++i) {
    op.terms.push_back({static_cast<std::int32_t>(i), static_cast<std::int32_t>(i), 1.0 / degree[i]});
  }
  for (const auto &e : edges) {
    const double w = use_weights ? e.weight : 1.0;
    const double norm = std::sqrt(degree[static_cast<std::size_t>(e.dst)] * degree[static_cast<std::size_t>(e.src)]);
    op.terms.push_back({e.dst, e.src, w / norm});
  }
  return op;
}

Aggregation mean_aggregation(const ComputationGraph &cg, int hop, bool use_weights) {
  const auto &edges = cg.hops[static_cast<std::size_t>(hop)];
  Aggregation op;
  op.rows = cg.layers[static_cast<std::size_t>(hop)].size();
  op.cols = cg.layers[static_cast<std::size_t>(hop) + 1].size();
  std::vector<double> total(op.rows, 0.0);
  for (const auto &e : edges) {
    total[static_cast<std::size_t>(e.dst)] += use_weights ? e.weight : 1.0;
  }
  op.terms.reserve(edges.size());
  for (const auto &e : edges) {
    const double w = use_weights ? e.weight : 1.0;
    op.terms.push_back({e.dst, e.src, w / total[static_cast<std::size_t>(e.dst)]});
  }
  return op;
}

Matrix forward_embeddings(const ComputationGraph &cg, const Matrix &features, const ModelParams &params,
                          ForwardCache *cache) {
  const ModelSpec &spec = params.spec;
  const int layers = spec.num_layers;
  if (cg.num_hops() != layers) {
    throw std::invalid_argument("computation graph has " + std::to_string(cg.num_hops()) + " hops but the model has " +
                                std::to_string(layers) + " layers");
  }
  if (static_cast<std::size_t>(features.rows()) != cg.all_nodes().size() ||
      static_cast<std::size_t>(features.cols()) != spec.input_dim) {
    throw std::invalid_argument("feature matrix shape does not match the computation graph and model");
  }
  require_finite(features, 0, "input features");
  if (cache != nullptr) {
    cache->ops.clear();
    cache->inputs.clear();
    cache->aggregated.clear();
    cache->pre.clear();
  }
  Matrix h = features;
  for (int l = 1; l <= layers; ++l) {
    const int hop = layers - l;
    const std::size_t rows = cg.layers[static_cast<std::size_t>(hop)].size();
    Matrix x;
    Aggregation op;
    if (spec.architecture == Architecture::gcn) {
      op = gcn_aggregation(cg, hop, spec.use_edge_weights);
      apply(op, h, x);
    } else {
      op = mean_aggregation(cg, hop, spec.use_edge_weights);
      Matrix mean;
      apply(op, h, mean);
      x.resize(static_cast<Eigen::Index>(rows), 2 * h.cols());
      x.leftCols(h.cols()) = h.topRows(static_cast<Eigen::Index>(rows));
      x.rightCols(h.cols()) = mean;
    }
    if (x.cols() != params.layer_weight(l - 1).rows()) {
      throw std::invalid_argument("layer " + std::to_string(l) + " weight does not match its input width");
    }
    Matrix z = x * params.layer_weight(l - 1);
    z.rowwise() += params.layer_bias(l - 1).row(0);
    require_finite(z, l, "pre-activation");
    Matrix next = l < layers ? relu(z) : z;
    if (cache != nullptr) {
      cache->ops.push_back(std::move(op));
      cache->inputs.push_back(std::move(h));
      cache->aggregated.push_back(std::move(x));
      cache->pre.push_back(std::move(z));
    }
    h = std::move(next);
  }
  return h;
}

std::vector<PairIndex> pair_indices(const ComputationGraph &cg, std::span<const LabeledPair> pairs) {
  std::unordered_map<NodeId, std::int32_t> position;
  position.reserve(cg.layers[0].size());
  for (std::size_t i = 0; i < cg.layers[0].size(); ++i) {
    position.emplace(cg.layers[0][i], static_cast<std::int32_t>(i));
  }
  std::vector<PairIndex> out;
  out.reserve(pairs.size());
  for (const auto &p : pairs) {
    const auto a = position.find(p.src);
    const auto b = position.find(p.dst);
    if (a == position.end() || b == position.end()) {
      throw std::invalid_argument("pair endpoint is not a seed of the computation graph");
    }
    out.push_back({a->second, b->second});
  }
  return out;
}

std::vector<double> score_pairs(const Matrix &embeddings, std::span<const PairIndex> pairs,
                                const ModelParams &params, PredictorCache *cache) {
  if (static_cast<std::size_t>(embeddings.cols()) != params.spec.hidden_dim) {
    throw std::invalid_argument("embedding width does not match the predictor");
  }
  const auto n = static_cast<Eigen::Index>(pairs.size());
  Matrix had(n, embeddings.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &p = pairs[static_cast<std::size_t>(i)];
    had.row(i) = embeddings.row(p.u).cwiseProduct(embeddings.row(p.v));
  }
  std::vector<double> scores(pairs.size());
  if (params.spec.predictor == PredictorKind::dot) {
    for (Eigen::Index i = 0; i < n; ++i) {
      scores[static_cast<std::size_t>(i)] = had.row(i).sum();
    }
    if (cache != nullptr) {
      cache->hadamard = std::move(had);
    }
    return scores;
  }
  Matrix z1 = had * params.predictor(0);
  z1.rowwise() += params.predictor(1).row(0);
  Matrix z2 = relu(z1) * params.predictor(2);
  z2.rowwise() += params.predictor(3).row(0);
  Matrix s = relu(z2) * params.predictor(4);
  s.array() += params.predictor(5)(0, 0);
  for (Eigen::Index i = 0; i < n; ++i) {
    scores[static_cast<std::size_t>(i)] = s(i, 0);
  }
  if (cache != nullptr) {
    cache->hadamard = std::move(had);
    cache->pre1 = std::move(z1);
    cache->pre2 = std::move(z2);
  }
  return scores;
}

double edge_score(std::span<const double> h_u, std::span<const double> h_v, const ModelParams &params) {
  if (h_u.size() != h_v.size() || h_u.size() != params.spec.hidden_dim) {
    throw std::invalid_argument("embedding width does not match the predictor");
  }
  Matrix emb(2, static_cast<Eigen::Index>(h_u.size()));
  for (std::size_t j = 0; j < h_u.size(); ++j) {
    emb(0, static_cast<Eigen::Index>(j)) = h_u[j];
    emb(1, static_cast<Eigen::Index>(j)) = h_v[j];
  }
  const PairIndex pair{0, 1};
  return score_pairs(emb, std::span<const PairIndex>(&pair, 1), params)[0];
}

double bce_loss(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.empty()) {
    throw std::invalid_argument("loss of an empty batch");
  }
  if (scores.size() != labels.size()) {
    throw std::invalid_argument("scores and labels differ in length");
  }
  double total = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double s = scores[i];
    if (labels[i] > 1) {
      throw std::invalid_argument("labels must be 0 or 1");
    }
    total += std::max(s, 0.0) - s * labels[i] + std::log1p(std::exp(-std::abs(s)));
  }
  return total / static_cast<double>(scores.size());
}

LossAndGradients loss_and_gradients(const ComputationGraph &cg, const Matrix &features, const ModelParams &params,
                                    std::span<const PairIndex> pairs, std::span<const std::uint8_t> labels,
                                    double loss_scale) {
  const ModelSpec &spec = params.spec;
  const int layers = spec.num_layers;
  ForwardCache fwd;
  const Matrix emb = forward_embeddings(cg, features, params, &fwd);
  PredictorCache pc;
  const std::vector<double> scores = score_pairs(emb, pairs, params, &pc);

  LossAndGradients out;
  out.loss = loss_scale * bce_loss(scores, labels);
  if (!std::isfinite(out.loss)) {
    throw NonFiniteError(layers + 1, "non-finite loss");
  }
  out.gradients = zeros_like(params.tensors);
  auto &grads = out.gradients;

  const auto n = static_cast<Eigen::Index>(pairs.size());
  Eigen::VectorXd ds(n);
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    ds(i) = loss_scale * (sigmoid(scores[k]) - labels[k]) / static_cast<double>(n);
  }

  // Gradient with respect to the Hadamard input of the predictor.
  Matrix d_had;
  if (spec.predictor == PredictorKind::dot) {
    d_had = ds.asDiagonal() * Matrix::Ones(n, emb.cols());
  } else {
    const std::size_t base = 2 * static_cast<std::size_t>(layers);
    const Matrix a1 = relu(pc.pre1);
    const Matrix a2 = relu(pc.pre2);
    grads[base + 4] = a2.transpose() * ds;
    grads[base + 5](0, 0) = ds.sum();
    Matrix d2 = (ds * params.predictor(4).transpose()).cwiseProduct(relu_mask(pc.pre2));
    grads[base + 2] = a1.transpose() * d2;
    grads[base + 3] = d2.colwise().sum();
    Matrix d1 = (d2 * params.predictor(2).transpose()).cwiseProduct(relu_mask(pc.pre1));
    grads[base + 0] = pc.hadamard.transpose() * d1;
    grads[base + 1] = d1.colwise().sum();
    d_had = d1 * params.predictor(0).transpose();
  }
  require_finite(d_had, layers + 1, "predictor gradient");

  Matrix dh = Matrix::Zero(emb.rows(), emb.cols());
  for (Eigen::Index i = 0; i < n; ++i) {
    const auto &p = pairs[static_cast<std::size_t>(i)];
    dh.row(p.u) += d_had.row(i).cwiseProduct(emb.row(p.v));
    dh.row(p.v) += d_had.row(i).cwiseProduct(emb.row(p.u));
  }

  for (int l = layers; l >= 1; --l) {
    const auto idx = static_cast<std::size_t>(l - 1);
    Matrix dz = l < layers ? Matrix(dh.cwiseProduct(relu_mask(fwd.pre[idx]))) : dh;
    grads[2 * idx] = fwd.aggregated[idx].transpose() * dz;
    grads[2 * idx + 1] = dz.colwise().sum();
    require_finite(grads[2 * idx], l, "weight gradient");
    if (l == 1) {
      break;
    }
    const Matrix dx = dz * params.layer_weight(l - 1).transpose();
    const Matrix &input = fwd.inputs[idx];
    Matrix din = Matrix::Zero(input.rows(), input.cols());
    if (spec.architecture == Architecture::gcn) {
      apply_transposed(fwd.ops[idx], dx, din);
    } else {
      const Eigen::Index d = input.cols();
      din.topRows(dx.rows()) += dx.leftCols(d);
      apply_transposed(fwd.ops[idx], dx.rightCols(d), din);
    }
    dh = std::move(din);
  }
  return out;
}

OptimizerState OptimizerState::for_params(const ModelParams &params, double lr) {
  OptimizerState state;
  state.lr = lr;
  state.first = zeros_like(params.tensors);
  state.second = zeros_like(params.tensors);
  return state;
}

void adam_step(ModelParams &params, const std::vector<Matrix> &gradients, OptimizerState &state) {
  if (gradients.size() != params.tensors.size()) {
    throw std::invalid_argument("gradient count does not match parameter count");
  }
  if (state.first.size() != params.tensors.size()) {
    state.first = zeros_like(params.tensors);
    state.second = zeros_like(params.tensors);
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t i = 0; i < params.tensors.size(); ++i) {
    const Matrix &g = gradients[i];
    if (g.rows() != params.tensors[i].rows() || g.cols() != params.tensors[i].cols()) {
      throw std::invalid_argument("gradient shape mismatch at tensor " + std::to_string(i));
    }
    auto m = state.first[i].array();
    auto v = state.second[i].array();
    m = state.beta1 * m + (1.0 - state.beta1) * g.array();
    v = state.beta2 * v + (1.0 - state.beta2) * g.array().square();
    params.tensors[i].array() -= state.lr * (m / c1) / ((v / c2).sqrt() + state.epsilon);
  }
}

void save_checkpoint(const ModelParams &params, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write checkpoint " + path.string());
  }
  out.write(kMagic, sizeof(kMagic));
  write_pod(out, kCheckpointVersion);
  const ModelSpec &s = params.spec;
  write_pod(out, static_cast<std::uint8_t>(s.architecture));
  write_pod(out, static_cast<std::uint8_t>(s.predictor));
  write_pod(out, static_cast<std::uint8_t>(s.use_edge_weights));
  write_pod(out, static_cast<std::uint64_t>(s.input_dim));
  write_pod(out, static_cast<std::uint64_t>(s.hidden_dim));
  write_pod(out, static_cast<std::int32_t>(s.num_layers));
  write_pod(out, static_cast<std::uint64_t>(params.tensors.size()));
  for (const auto &t : params.tensors) {
    write_pod(out, static_cast<std::uint64_t>(t.rows()));
    write_pod(out, static_cast<std::uint64_t>(t.cols()));
    out.write(reinterpret_cast<const char *>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
  }
  if (!out) {
    throw std::runtime_error("failed writing checkpoint " + path.string());
  }
}

ModelParams load_checkpoint(const std::filesystem::path &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open checkpoint " + path.string());
  }
  char magic[sizeof(kMagic)];
  in.read(magic, sizeof(magic));
  if (!in || std::memcmp(magic, kMagic, sizeof(kMagic)) != 0) {
    throw std::runtime_error(path.string() + " is not a checkpoint");
  }
  const auto version = read_pod<std::uint32_t>(in);
  if (version != kCheckpointVersion) {
    throw std::runtime_error("unsupported checkpoint version " + std::to_string(version));
  }
  ModelParams params;
  ModelSpec &s = params.spec;
  s.architecture = static_cast<Architecture>(read_pod<std::uint8_t>(in));
  s.predictor = static_cast<PredictorKind>(read_pod<std::uint8_t>(in));
  s.use_edge_weights = read_pod<std::uint8_t>(in) != 0;
  s.input_dim = read_pod<std::uint64_t>(in);
  s.hidden_dim = read_pod<std::uint64_t>(in);
  s.num_layers = read_pod<std::int32_t>(in);
  const auto count = read_pod<std::uint64_t>(in);
  const ModelParams expected = init_params(s, 0);
  if (count != expected.tensors.size()) {
    throw std::runtime_error("checkpoint tensor count does not match its model spec");
  }
  for (std::uint64_t i = 0; i < count; ++i) {
    const auto rows = read_pod<std::uint64_t>(in);
    const auto cols = read_pod<std::uint64_t>(in);
    const Matrix &ref = expected.tensors[i];
    if (rows != static_cast<std::uint64_t>(ref.rows()) || cols != static_cast<std::uint64_t>(ref.cols())) {
      throw std::runtime_error("checkpoint tensor " + std::to_string(i) + " has the wrong shape");
    }
    Matrix t(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
    in.read(reinterpret_cast<char *>(t.data()), static_cast<std::streamsize>(t.size() * sizeof(double)));
    if (!in) {
      throw std::runtime_error("truncated checkpoint");
    }
    params.tensors.push_back(std::move(t));
  }
  return params;
}

} // namespace lpsim
