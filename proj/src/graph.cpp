#include "lpsim/graph.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <sstream>
#include <stdexcept>

#include "lpsim/random.hpp"

namespace lpsim {

namespace {

Graph build_from_list(NodeId num_nodes, std::vector<WeightedEdge> input, bool weighted,
                      std::vector<float> features, std::size_t feature_dim) {
  if (num_nodes < 0) {
    throw std::invalid_argument("negative node count");
  }
  std::vector<WeightedEdge> directed;
  directed.reserve(input.size() * 2);
  for (const WeightedEdge &e : input) {
    if (e.u < 0 || e.v < 0 || e.u >= num_nodes || e.v >= num_nodes) {
      throw std::out_of_range("edge (" + std::to_string(e.u) + ", " + std::to_string(e.v) +
                              ") references a node outside [0, " + std::to_string(num_nodes) + ")");
    }
    if (e.u == e.v) {
      continue;
    }
    // Both directions carry the canonical entry's weight.
    directed.push_back(e);
    directed.push_back({e.v, e.u, e.weight});
  }
  std::stable_sort(directed.begin(), directed.end(), [](const WeightedEdge &a, const WeightedEdge &b) {
    return a.u != b.u ? a.u < b.u : a.v < b.v;
  });
  directed.erase(std::unique(directed.begin(), directed.end(),
                             [](const WeightedEdge &a, const WeightedEdge &b) {
                               return a.u == b.u && a.v == b.v;
                             }),
                 directed.end());

  std::vector<EdgeIndex> offsets(static_cast<std::size_t>(num_nodes) + 1, 0);
  for (const WeightedEdge &e : directed) {
    ++offsets[static_cast<std::size_t>(e.u) + 1];
  }
  std::partial_sum(offsets.begin(), offsets.end(), offsets.begin());
  std::vector<NodeId> targets(directed.size());
  std::vector<double> weights(weighted ? directed.size() : 0);
  for (std::size_t i = 0; i < directed.size(); ++i) {
    targets[i] = directed[i].v;
    if (weighted) {
      weights[i] = directed[i].weight;
    }
  }
  if (weighted) {
    // A duplicate given in both orientations may disagree; the lower-id row wins.
    for (NodeId u = 0; u < num_nodes; ++u) {
      for (EdgeIndex e = offsets[u]; e < offsets[u + 1]; ++e) {
        const NodeId v = targets[e];
        if (v < u) {
          const auto first = targets.begin() + offsets[v];
          const auto last = targets.begin() + offsets[v + 1];
          const auto it = std::lower_bound(first, last, u);
          weights[e] = weights[static_cast<std::size_t>(it - targets.begin())];
        }
      }
    }
  }
  return Graph::from_csr(num_nodes, std::move(offsets), std::move(targets), std::move(weights),
                         std::move(features), feature_dim);
}

template <typename T>
T parse_number(std::string_view token, const std::string &context) {
  T value{};
  const auto *first = token.data();
  const auto *last = token.data() + token.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc{} || ptr != last) {
    throw std::runtime_error(context + ": cannot parse '" + std::string(token) + "'");
  }
  return value;
}

std::string_view trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r\n");
  if (b == std::string_view::npos) {
    return {};
  }
  const auto e = s.find_last_not_of(" \t\r\n");
  return s.substr(b, e - b + 1);
}

std::vector<NodeId> component_labels(const Graph &g, NodeId &num_components) {
  std::vector<NodeId> label(static_cast<std::size_t>(g.num_nodes()), -1);
  std::vector<NodeId> stack;
  num_components = 0;
  for (NodeId s = 0; s < g.num_nodes(); ++s) {
    if (label[s] >= 0) {
      continue;
    }
    label[s] = num_components;
    stack.push_back(s);
    while (!stack.empty()) {
      const NodeId u = stack.back();
      stack.pop_back();
      for (const NodeId v : g.neighbors(u)) {
        if (label[v] < 0) {
          label[v] = num_components;
          stack.push_back(v);
        }
      }
    }
    ++num_components;
  }
  return label;
}

} // namespace

Graph Graph::from_edges(NodeId num_nodes, std::span<const Edge> edges, std::vector<float> features,
                        std::size_t feature_dim) {
  std::vector<WeightedEdge> w;
  w.reserve(edges.size());
  for (const Edge &e : edges) {
    w.push_back({e.u, e.v, 1.0});
  }
  return build_from_list(num_nodes, std::move(w), false, std::move(features), feature_dim);
}

Graph Graph::from_weighted_edges(NodeId num_nodes, std::span<const WeightedEdge> edges,
                                 std::vector<float> features, std::size_t feature_dim) {
  for (const WeightedEdge &e : edges) {
    if (!std::isfinite(e.weight) || e.weight < 0.0) {
      throw std::invalid_argument("edge weight must be finite and nonnegative");
    }
  }
  return build_from_list(num_nodes, {edges.begin(), edges.end()}, true, std::move(features),
                         feature_dim);
}

Graph Graph::from_csr(NodeId num_nodes, std::vector<EdgeIndex> offsets, std::vector<NodeId> targets,
                      std::vector<double> weights, std::vector<float> features,
                      std::size_t feature_dim) {
  if (num_nodes < 0 || offsets.size() != static_cast<std::size_t>(num_nodes) + 1) {
    throw std::invalid_argument("offset array must have num_nodes + 1 entries");
  }
  if (offsets.front() != 0 || offsets.back() != static_cast<EdgeIndex>(targets.size())) {
    throw std::invalid_argument("offsets must start at 0 and end at the target count");
  }
  if (!weights.empty() && weights.size() != targets.size()) {
    throw std::invalid_argument("weight array must match the target array");
  }
  if (features.size() != static_cast<std::size_t>(num_nodes) * feature_dim) {
    throw std::invalid_argument("feature matrix size does not match num_nodes x feature_dim");
  }
  Graph g;
  g.num_nodes_ = num_nodes;
  g.offsets_ = std::move(offsets);
  g.targets_ = std::move(targets);
  g.weights_ = std::move(weights);
  g.features_ = std::move(features);
  g.feature_dim_ = feature_dim;
  for (NodeId u = 0; u < num_nodes; ++u) {
    if (g.offsets_[u + 1] < g.offsets_[u]) {
      throw std::invalid_argument("offsets must be nondecreasing");
    }
    const auto nbrs = g.neighbors(u);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      const NodeId v = nbrs[i];
      if (v < 0 || v >= num_nodes) {
        throw std::out_of_range("target outside node range");
      }
      if (v == u) {
        throw std::invalid_argument("self-loop at node " + std::to_string(u));
      }
      if (i > 0 && nbrs[i - 1] >= v) {
        throw std::invalid_argument("neighbor list of node " + std::to_string(u) +
                                    " is unsorted or has duplicates");
      }
      if (!g.has_edge(v, u)) {
        throw std::invalid_argument("adjacency is not symmetric");
      }
      if (g.weighted() && g.edge_weight(v, u) != g.neighbor_weights(u)[i]) {
        throw std::invalid_argument("edge weights are not symmetric");
      }
    }
  }
  return g;
}

double Graph::weighted_degree(NodeId u) const {
  if (weights_.empty()) {
    return degree(u);
  }
  const auto w = neighbor_weights(u);
  return std::accumulate(w.begin(), w.end(), 0.0);
}

bool Graph::has_edge(NodeId u, NodeId v) const {
  const auto nbrs = neighbors(u);
  return std::binary_search(nbrs.begin(), nbrs.end(), v);
}

double Graph::edge_weight(NodeId u, NodeId v) const {
  const auto nbrs = neighbors(u);
  const auto it = std::lower_bound(nbrs.begin(), nbrs.end(), v);
  if (it == nbrs.end() || *it != v) {
    return 0.0;
  }
  return weights_.empty() ? 1.0 : neighbor_weights(u)[static_cast<std::size_t>(it - nbrs.begin())];
}

std::vector<Edge> Graph::edge_list() const {
  std::vector<Edge> out;
  out.reserve(static_cast<std::size_t>(num_edges()));
  for (NodeId u = 0; u < num_nodes_; ++u) {
    for (const NodeId v : neighbors(u)) {
      if (u < v) {
        out.push_back({u, v});
      }
    }
  }
  return out;
}

Graph Graph::with_edges(std::span<const Edge> edges) const {
  return from_edges(num_nodes_, edges, features_, feature_dim_);
}

Graph load_graph(const std::filesystem::path &edge_file, const std::filesystem::path &feature_file) {
  std::ifstream fin(feature_file);
  if (!fin) {
    throw std::runtime_error("cannot open feature file " + feature_file.string());
  }
  std::vector<float> features;
  std::size_t feature_dim = 0;
  NodeId rows = 0;
  std::string line;
  while (std::getline(fin, line)) {
    const auto body = trim(line);
    if (body.empty()) {
      continue;
    }
    std::size_t cols = 0;
    std::size_t pos = 0;
    while (pos <= body.size()) {
      const auto comma = body.find(',', pos);
      const auto cell = trim(body.substr(pos, comma == std::string_view::npos ? body.npos : comma - pos));
      features.push_back(parse_number<float>(cell, feature_file.string() + " row " + std::to_string(rows)));
      ++cols;
      if (comma == std::string_view::npos) {
        break;
      }
      pos = comma + 1;
    }
    if (rows == 0) {
      feature_dim = cols;
    } else if (cols != feature_dim) {
      throw std::runtime_error(feature_file.string() + ": row " + std::to_string(rows) + " has " +
                               std::to_string(cols) + " columns, expected " + std::to_string(feature_dim));
    }
    ++rows;
  }

  std::ifstream ein(edge_file);
  if (!ein) {
    throw std::runtime_error("cannot open edge file " + edge_file.string());
  }
  std::vector<Edge> edges;
  std::size_t line_no = 0;
  while (std::getline(ein, line)) {
    ++line_no;
    std::istringstream tokens(line);
    std::string a;
    std::string b;
    if (!(tokens >> a)) {
      continue;
    }
    if (!(tokens >> b)) {
      throw std::runtime_error(edge_file.string() + ":" + std::to_string(line_no) + ": expected 'u v'");
    }
    const std::string ctx = edge_file.string() + ":" + std::to_string(line_no);
    const auto u = parse_number<std::int64_t>(a, ctx);
    const auto v = parse_number<std::int64_t>(b, ctx);
    if (u < 0 || v < 0) {
      throw std::out_of_range(ctx + ": negative node id");
    }
    if (u >= rows || v >= rows) {
      throw std::out_of_range(ctx + ": node id " + std::to_string(std::max(u, v)) +
                              " has no row in the feature file (" + std::to_string(rows) + " rows)");
    }
    edges.push_back({static_cast<NodeId>(u), static_cast<NodeId>(v)});
  }
  Graph g = Graph::from_edges(rows, edges, std::move(features), feature_dim);
  if (g.num_nodes() == 0 || g.num_edges() == 0) {
    throw std::runtime_error("graph loaded from " + edge_file.string() + " is empty");
  }
  return g;
}

void save_graph(const Graph &g, const std::filesystem::path &edge_file,
                const std::filesystem::path &feature_file) {
  std::ofstream eout(edge_file);
  if (!eout) {
    throw std::runtime_error("cannot write " + edge_file.string());
  }
  for (const Edge &e : g.edge_list()) {
    eout << e.u << ' ' << e.v << '\n';
  }
  std::ofstream fout(feature_file);
  if (!fout) {
    throw std::runtime_error("cannot write " + feature_file.string());
  }
  char buf[32];
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    const auto row = g.features(u);
    for (std::size_t j = 0; j < row.size(); ++j) {
      const auto res = std::to_chars(buf, buf + sizeof(buf), row[j]);
      if (j > 0) {
        fout << ',';
      }
      fout.write(buf, res.ptr - buf);
    }
    fout << '\n';
  }
}

Graph generate_synthetic(const SyntheticSpec &spec, std::size_t feature_dim, std::uint64_t seed) {
  Rng rng(derive_seed(seed, {0x5e7}));
  std::vector<Edge> edges;
  NodeId n = 0;
  std::vector<NodeId> block_of;
  switch (spec.kind) {
  case SyntheticKind::erdos_renyi: {
    n = spec.num_nodes;
    if (!(spec.edge_probability > 0.0 && spec.edge_probability <= 1.0)) {
      throw std::invalid_argument("Erdos-Renyi edge probability must lie in (0, 1]");
    }
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v = u + 1; v < n; ++v) {
        if (rng.bernoulli(spec.edge_probability)) {
          edges.push_back({u, v});
        }
      }
    }
    break;
  }
  case SyntheticKind::barabasi_albert: {
    n = spec.num_nodes;
    const int m = spec.attach_edges;
    if (m < 1 || n <= m) {
      throw std::invalid_argument("Barabasi-Albert needs attach_edges >= 1 and num_nodes > attach_edges");
    }
    // Seed clique on m + 1 nodes, then preferential attachment through the
    // endpoint multiset (each node appears once per incident edge).
    std::vector<NodeId> endpoints;
    for (NodeId u = 0; u <= m; ++u) {
      for (NodeId v = u + 1; v <= m; ++v) {
        edges.push_back({u, v});
        endpoints.push_back(u);
        endpoints.push_back(v);
      }
    }
    std::vector<NodeId> chosen;
    for (NodeId u = m + 1; u < n; ++u) {
      chosen.clear();
      while (static_cast<int>(chosen.size()) < m) {
        const NodeId t = endpoints[rng.below(endpoints.size())];
        if (std::find(chosen.begin(), chosen.end(), t) == chosen.end()) {
          chosen.push_back(t);
        }
      }
      for (const NodeId t : chosen) {
        edges.push_back({t, u});
        endpoints.push_back(t);
        endpoints.push_back(u);
      }
    }
    break;
  }
  case SyntheticKind::sbm: {
    if (spec.block_sizes.empty()) {
      throw std::invalid_argument("SBM needs at least one block");
    }
    if (spec.p_in < 0 || spec.p_in > 1 || spec.p_out < 0 || spec.p_out > 1) {
      throw std::invalid_argument("SBM probabilities must lie in [0, 1]");
    }
    for (std::size_t b = 0; b < spec.block_sizes.size(); ++b) {
      if (spec.block_sizes[b] < 0) {
        throw std::invalid_argument("SBM block sizes must be nonnegative");
      }
      block_of.insert(block_of.end(), static_cast<std::size_t>(spec.block_sizes[b]), static_cast<NodeId>(b));
    }
    n = static_cast<NodeId>(block_of.size());
    for (NodeId u = 0; u < n; ++u) {
      for (NodeId v = u + 1; v < n; ++v) {
        if (rng.bernoulli(block_of[u] == block_of[v] ? spec.p_in : spec.p_out)) {
          edges.push_back({u, v});
        }
      }
    }
    break;
  }
  }
  if (n < 2) {
    throw std::invalid_argument("synthetic graph parameters produce fewer than 2 nodes");
  }

  Rng feature_rng(derive_seed(seed, {0xfea7}));
  std::vector<float> features(static_cast<std::size_t>(n) * feature_dim);
  for (float &x : features) {
    x = static_cast<float>(feature_rng.uniform(-1.0, 1.0));
  }
  if (spec.kind == SyntheticKind::sbm && spec.block_feature_signal > 0.0) {
    const double s = std::clamp(spec.block_feature_signal, 0.0, 1.0);
    std::vector<double> prototypes(spec.block_sizes.size() * feature_dim);
    for (double &x : prototypes) {
      x = feature_rng.uniform(-1.0, 1.0);
    }
    for (NodeId u = 0; u < n; ++u) {
      for (std::size_t j = 0; j < feature_dim; ++j) {
        float &x = features[static_cast<std::size_t>(u) * feature_dim + j];
        x = static_cast<float>((1.0 - s) * x + s * prototypes[static_cast<std::size_t>(block_of[u]) * feature_dim + j]);
      }
    }
  }

  Graph g = largest_component(Graph::from_edges(n, edges, std::move(features), feature_dim));
  if (g.num_nodes() < 2) {
    throw std::invalid_argument("synthetic graph parameters produce fewer than 2 connected nodes");
  }
  return g;
}

double laplacian_quadratic_form(const Graph &g, std::span<const double> x) {
  if (x.size() != static_cast<std::size_t>(g.num_nodes())) {
    throw std::invalid_argument("vector length " + std::to_string(x.size()) + " does not match " +
                                std::to_string(g.num_nodes()) + " nodes");
  }
  double total = 0.0;
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    const auto nbrs = g.neighbors(u);
    const auto w = g.neighbor_weights(u);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      const NodeId v = nbrs[i];
      if (u < v) {
        const double d = x[u] - x[v];
        total += (w.empty() ? 1.0 : w[i]) * d * d;
      }
    }
  }
  return total;
}

bool is_connected(const Graph &g) {
  NodeId components = 0;
  component_labels(g, components);
  return components <= 1;
}

Graph largest_component(const Graph &g) {
  NodeId components = 0;
  const auto label = component_labels(g, components);
  if (components <= 1) {
    return g;
  }
  std::vector<NodeId> sizes(static_cast<std::size_t>(components), 0);
  for (const NodeId l : label) {
    ++sizes[l];
  }
  // Ties go to the component holding the smallest node id (lowest label).
  const NodeId keep = static_cast<NodeId>(std::max_element(sizes.begin(), sizes.end()) - sizes.begin());
  std::vector<NodeId> new_id(label.size(), -1);
  NodeId next = 0;
  for (std::size_t u = 0; u < label.size(); ++u) {
    if (label[u] == keep) {
      new_id[u] = next++;
    }
  }
  std::vector<WeightedEdge> edges;
  std::vector<float> features;
  features.reserve(static_cast<std::size_t>(next) * g.feature_dim());
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    if (new_id[u] < 0) {
      continue;
    }
    const auto f = g.features(u);
    features.insert(features.end(), f.begin(), f.end());
    const auto nbrs = g.neighbors(u);
    const auto w = g.neighbor_weights(u);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      if (u < nbrs[i]) {
        edges.push_back({new_id[u], new_id[nbrs[i]], w.empty() ? 1.0 : w[i]});
      }
    }
  }
  if (g.weighted()) {
    return Graph::from_weighted_edges(next, edges, std::move(features), g.feature_dim());
  }
  std::vector<Edge> plain;
  plain.reserve(edges.size());
  for (const auto &e : edges) {
    plain.push_back({e.u, e.v});
  }
  return Graph::from_edges(next, plain, std::move(features), g.feature_dim());
}

Eigen::MatrixXd dense_laplacian(const Graph &g) {
  const auto n = static_cast<Eigen::Index>(g.num_nodes());
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (NodeId u = 0; u < g.num_nodes(); ++u) {
    const auto nbrs = g.neighbors(u);
    const auto w = g.neighbor_weights(u);
    for (std::size_t i = 0; i < nbrs.size(); ++i) {
      const double wi = w.empty() ? 1.0 : w[i];
      lap(u, nbrs[i]) -= wi;
      lap(u, u) += wi;
    }
  }
  return lap;
}

double normalized_laplacian_gamma(const Graph &g) {
  if (g.num_nodes() < 2) {
    throw std::domain_error("normalized Laplacian gap needs at least 2 nodes");
  }
  if (!is_connected(g)) {
    throw std::domain_error("graph is disconnected; the normalized Laplacian gap is 0");
  }
  const Eigen::MatrixXd lap = dense_laplacian(g);
  Eigen::VectorXd inv_sqrt(lap.rows());
  for (Eigen::Index u = 0; u < lap.rows(); ++u) {
    inv_sqrt(u) = 1.0 / std::sqrt(lap(u, u));
  }
  const Eigen::MatrixXd sym = inv_sqrt.asDiagonal() * lap * inv_sqrt.asDiagonal();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(sym, Eigen::EigenvaluesOnly);
  return solver.eigenvalues()(1);
}

} // namespace lpsim
