#include "lpsim/verify.hpp"

#include <cmath>
#include <cstdio>
#include <fstream>
#include <ostream>
#include <sstream>

#include "lpsim/oracles.hpp"
#include "lpsim/partition.hpp"
#include "lpsim/random.hpp"
#include "lpsim/sampler.hpp"
#include "lpsim/sparsify.hpp"

namespace lpsim {

namespace {

std::string fmt(const char *format, auto... args) {
  char buf[256];
  std::snprintf(buf, sizeof(buf), format, args...);
  return buf;
}

Graph complete_graph(NodeId n) {
  std::vector<Edge> edges;
  for (NodeId u = 0; u < n; ++u) {
    for (NodeId v = u + 1; v < n; ++v) {
      edges.push_back({u, v});
    }
  }
  return Graph::from_edges(n, edges, {}, 0);
}

Graph path_graph(NodeId n) {
  std::vector<Edge> edges;
  for (NodeId u = 0; u + 1 < n; ++u) {
    edges.push_back({u, u + 1});
  }
  return Graph::from_edges(n, edges, {}, 0);
}

} // namespace

Graph random_connected_graph(std::uint64_t seed, std::size_t index, NodeId n_min, NodeId n_max) {
  Rng rng(derive_seed(seed, {0xc0, index}));
  for (std::uint64_t attempt = 0;; ++attempt) {
    const auto n = static_cast<NodeId>(n_min + static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n_max - n_min + 1))));
    SyntheticSpec spec;
    switch (index % 3) {
    case 0:
      spec.kind = SyntheticKind::erdos_renyi;
      spec.num_nodes = n;
      spec.edge_probability = std::min(1.0, 2.5 * std::log(static_cast<double>(n)) / n);
      break;
    case 1:
      spec.kind = SyntheticKind::barabasi_albert;
      spec.num_nodes = n;
      spec.attach_edges = 1 + static_cast<int>(rng.below(3));
      break;
    default: {
      spec.kind = SyntheticKind::sbm;
      const NodeId blocks = 2 + static_cast<NodeId>(rng.below(3));
      for (NodeId b = 0; b < blocks; ++b) {
        spec.block_sizes.push_back(n / blocks + (b < n % blocks ? 1 : 0));
      }
      spec.p_in = std::min(1.0, 4.0 * blocks / n + 0.1);
      spec.p_out = 0.3 / n;
      break;
    }
    }
    Graph g = generate_synthetic(spec, 0, derive_seed(seed, {0xc1, index, attempt}));
    if (!is_connected(g)) {
      g = largest_component(g);
    }
    if (g.num_nodes() >= n_min && g.num_edges() > 0) {
      return g;
    }
  }
}

std::string serialize_graph(const Graph &g) {
  std::string out = "n=" + std::to_string(g.num_nodes()) + "\n";
  for (const Edge &e : g.edge_list()) {
    out += std::to_string(e.u) + " " + std::to_string(e.v) + "\n";
  }
  return out;
}

PropertyResult check_bounds_random(std::size_t count, NodeId n_min, NodeId n_max, std::uint64_t seed,
                                   double tolerance) {
  PropertyResult r{"resistance_bounds", true, "", ""};
  std::size_t edges = 0;
  double worst = 0.0;
  for (std::size_t i = 0; i < count; ++i) {
    const Graph g = random_connected_graph(seed, i, n_min, n_max);
    const ResistanceBoundsReport report = check_resistance_bounds(g, tolerance);
    edges += report.edges_checked;
    worst = i == 0 ? report.worst_slack : std::min(worst, report.worst_slack);
    if (!report.holds && r.passed) {
      r.passed = false;
      r.instance = fmt("graph %zu violates at edge (%d, %d), gamma=%.17g\n", i, report.first_violation->u,
                       report.first_violation->v, report.gamma) +
                   serialize_graph(g);
    }
  }
  r.detail = fmt("%zu graphs, %zu edges, worst slack %.3e", count, edges, worst);
  return r;
}

PropertyResult check_triangle_tight_upper() {
  const Graph k3 = complete_graph(3);
  const ResistanceBoundsReport report = check_resistance_bounds(k3);
  PropertyResult r{"triangle_upper_bound_tight", report.holds && report.tight_upper == 3, "", ""};
  r.detail = fmt("gamma=%.6f, r=%.6f, %zu of 3 edges at the upper bound", report.gamma,
                 exact_effective_resistance(k3, 0, 1), report.tight_upper);
  if (!r.passed) {
    r.instance = serialize_graph(k3);
  }
  return r;
}

PropertyResult check_path_bridges() {
  const Graph p5 = path_graph(5);
  const ResistanceOracle oracle(p5);
  double worst = 0.0;
  for (const Edge &e : p5.edge_list()) {
    worst = std::max(worst, std::abs(oracle.resistance(e.u, e.v) - 1.0));
  }
  PropertyResult r{"bridge_resistance_one", worst <= 1e-9, fmt("max |r - 1| = %.3e on P5", worst), ""};
  if (!r.passed) {
    r.instance = serialize_graph(p5);
  }
  return r;
}

PropertyResult check_spectral(std::size_t graphs, NodeId nodes, std::size_t vectors, double epsilon,
                              double fraction, std::uint64_t seed) {
  PropertyResult r{"spectral_closeness", true, "", ""};
  const auto draws = static_cast<std::size_t>(16.0 * nodes * std::log(static_cast<double>(nodes)));
  double lowest = 1.0;
  for (std::size_t i = 0; i < graphs; ++i) {
    Graph g;
    for (std::uint64_t attempt = 0;; ++attempt) {
      SyntheticSpec spec;
      spec.kind = SyntheticKind::erdos_renyi;
      spec.num_nodes = nodes;
      spec.edge_probability = 0.15;
      g = generate_synthetic(spec, 0, derive_seed(seed, {0x5c, i, attempt}));
      if (is_connected(g)) {
        break;
      }
    }
    const SpectralClosenessReport report = spectral_closeness(g, draws, vectors, epsilon, derive_seed(seed, {0x5d, i}));
    lowest = std::min(lowest, report.fraction_within());
    if (report.fraction_within() < fraction && r.passed) {
      r.passed = false;
      r.instance = fmt("graph %zu: %zu of %zu vectors within %.2f, worst ratio %.4f\n", i, report.within,
                       report.vectors, epsilon, report.worst_ratio) +
                   serialize_graph(g);
    }
  }
  r.detail = fmt("%zu graphs of %d nodes, %zu draws each, lowest fraction within %.2f: %.3f", graphs, nodes, draws,
                 epsilon, lowest);
  return r;
}

PropertyResult check_unbiased(NodeId n, double alpha, int trials, double tolerance, bool accumulate_duplicates,
                              std::uint64_t seed) {
  const Graph kn = complete_graph(n);
  PartitionPlan plan;
  plan.num_parts = 1;
  plan.assignment.assign(static_cast<std::size_t>(n), 0);
  const std::vector<WorkerSubgraph> subs = build_worker_subgraphs(kn, plan);
  const double error = expected_laplacian_error(subs[0], alpha, trials, seed, accumulate_duplicates);
  PropertyResult r{"laplacian_unbiased", error <= tolerance, "", ""};
  r.detail = fmt("K%d alpha=%.2f, %d trials, relative Frobenius error %.4f (limit %.2f)", n, alpha, trials, error,
                 tolerance);
  if (!r.passed) {
    r.instance = fmt("alpha=%.17g trials=%d seed=%llu accumulate=%d\n", alpha, trials,
                     static_cast<unsigned long long>(seed), accumulate_duplicates ? 1 : 0) +
                 serialize_graph(kn);
  }
  return r;
}

GradientCheckStats gradient_check(Architecture architecture, PredictorKind predictor, std::size_t samples,
                                  double tolerance, std::uint64_t seed) {
  SyntheticSpec gspec;
  gspec.kind = SyntheticKind::erdos_renyi;
  gspec.num_nodes = 20;
  gspec.edge_probability = 0.25;
  const Graph g = generate_synthetic(gspec, 6, derive_seed(seed, {0x9a0}));
  ModelSpec spec;
  spec.architecture = architecture;
  spec.predictor = predictor;
  spec.input_dim = 6;
  spec.hidden_dim = 5;
  spec.num_layers = 2;
  const std::vector<int> fanouts{3, 2};
  ModelParams params = init_params(spec, derive_seed(seed, {0x9a1}));
  // Nonzero biases so that every tensor carries gradient signal.
  Rng rng(derive_seed(seed, {0x9a2}));
  for (auto &t : params.tensors) {
    if (t.rows() == 1) {
      for (Eigen::Index j = 0; j < t.cols(); ++j) {
        t(0, j) = rng.uniform(-0.3, 0.3);
      }
    }
  }
  std::vector<LabeledPair> pairs;
  for (int i = 0; i < 6; ++i) {
    const NodeId n = g.num_nodes();
    const auto u = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n)));
    auto v = static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(n)));
    if (v == u) {
      v = (u + 1) % n;
    }
    pairs.push_back({u, v, static_cast<std::uint8_t>(i % 2)});
  }
  const GraphView view = GraphView::whole(g);
  const std::vector<NodeId> seeds = pair_endpoints(pairs);
  const ComputationGraph cg = build_computation_graph(seeds, view, fanouts, rng);
  const Matrix features = gather_features(g, cg.all_nodes());
  const std::vector<PairIndex> idx = pair_indices(cg, pairs);
  std::vector<std::uint8_t> labels;
  for (const auto &p : pairs) {
    labels.push_back(p.label);
  }
  const LossAndGradients analytic = loss_and_gradients(cg, features, params, idx, labels);
  const auto loss = [&](const ModelParams &p) {
    const Matrix emb = forward_embeddings(cg, features, p);
    return bce_loss(score_pairs(emb, idx, p), labels);
  };

  GradientCheckStats stats;
  const double h = 1e-4;
  for (std::size_t s = 0; s < samples; ++s) {
    const auto t = static_cast<std::size_t>(rng.below(params.tensors.size()));
    Matrix &tensor = params.tensors[t];
    const auto i = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(tensor.size())));
    const double saved = tensor.data()[i];
    tensor.data()[i] = saved + h;
    const double plus = loss(params);
    tensor.data()[i] = saved - h;
    const double minus = loss(params);
    tensor.data()[i] = saved;
    const double numeric = (plus - minus) / (2.0 * h);
    const double a = analytic.gradients[t].data()[i];
    const double rel = std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1e-6});
    ++stats.checked;
    stats.failed += rel < tolerance ? 0 : 1;
    stats.worst_relative = std::max(stats.worst_relative, rel);
  }
  return stats;
}

PropertyResult check_gradients(Architecture architecture, PredictorKind predictor, std::size_t samples,
                               double tolerance, std::uint64_t seed) {
  const GradientCheckStats stats = gradient_check(architecture, predictor, samples, tolerance, seed);
  PropertyResult r;
  r.name = "gradients_" + std::string(to_string(architecture)) + "_" + std::string(to_string(predictor));
  r.passed = stats.failed == 0 && stats.checked >= samples;
  r.detail = fmt("%zu scalars, worst relative error %.3e (limit %.0e)", stats.checked, stats.worst_relative,
                 tolerance);
  if (!r.passed) {
    r.instance = fmt("architecture=%s predictor=%s seed=%llu failed=%zu\n", std::string(to_string(architecture)).c_str(),
                     std::string(to_string(predictor)).c_str(), static_cast<unsigned long long>(seed), stats.failed);
  }
  return r;
}

std::vector<PropertyResult> run_verify_suite(const VerifyOptions &options) {
  const std::uint64_t s = options.seed;
  std::vector<PropertyResult> results;
  results.push_back(check_bounds_random(50, 10, 200, derive_seed(s, {1})));
  results.push_back(check_triangle_tight_upper());
  results.push_back(check_path_bridges());
  results.push_back(check_spectral(20, 50, 100, 0.3, 0.95, derive_seed(s, {2})));
  results.push_back(check_unbiased(10, 0.5, 2000, 0.05, !options.inject_no_accumulation, derive_seed(s, {3})));
  for (const Architecture a : {Architecture::gcn, Architecture::sage}) {
    for (const PredictorKind p : {PredictorKind::mlp, PredictorKind::dot}) {
      results.push_back(check_gradients(a, p, 200, 1e-4, derive_seed(s, {4})));
    }
  }
  return results;
}

int cmd_verify(const VerifyOptions &options, std::ostream &out, std::ostream &err) {
  std::vector<PropertyResult> results;
  try {
    results = run_verify_suite(options);
  } catch (const std::exception &e) {
    err << "[verify] " << e.what() << "\n";
    return 3;
  }
  bool all = true;
  for (const auto &r : results) {
    out << (r.passed ? "PASS " : "FAIL ") << r.name << ": " << r.detail << "\n";
    if (r.passed) {
      continue;
    }
    all = false;
    err << "counterexample for " << r.name << ":\n" << r.instance;
    if (!options.failure_dir.empty()) {
      std::filesystem::create_directories(options.failure_dir);
      std::ofstream f(options.failure_dir / (r.name + ".txt"));
      f << r.instance;
    }
  }
  return all ? 0 : 2;
}

} // namespace lpsim
