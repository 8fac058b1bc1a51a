#include "lpsim/oracles.hpp"

#include <cmath>
#include <stdexcept>

#include "lpsim/random.hpp"
#include "lpsim/sparsify.hpp"

namespace lpsim {

ResistanceOracle::ResistanceOracle(const Graph &g) {
  if (!is_connected(g)) {
    throw std::domain_error("effective resistance oracle needs a connected graph");
  }
  const Eigen::MatrixXd lap = dense_laplacian(g);
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver(lap);
  const Eigen::VectorXd &lambda = solver.eigenvalues();
  const Eigen::MatrixXd &q = solver.eigenvectors();
  // Connected: exactly one zero eigenvalue, the smallest.
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
  for (Eigen::Index i = 1; i < lambda.size(); ++i) {
    inv(i) = 1.0 / lambda(i);
  }
  pinv_ = q * inv.asDiagonal() * q.transpose();
}

double ResistanceOracle::resistance(NodeId u, NodeId v) const {
  return pinv_(u, u) + pinv_(v, v) - pinv_(u, v) - pinv_(v, u);
}

double exact_effective_resistance(const Graph &g, NodeId u, NodeId v) {
  return ResistanceOracle(g).resistance(u, v);
}

ResistanceBoundsReport check_resistance_bounds(const Graph &g, double tolerance) {
  const ResistanceOracle oracle(g);
  ResistanceBoundsReport report;
  report.gamma = normalized_laplacian_gamma(g);
  for (const Edge &e : g.edge_list()) {
    const double proxy = approx_resistance(g.degree(e.u), g.degree(e.v));
    const double lower = 0.5 * proxy;
    const double upper = proxy / report.gamma;
    const double r = oracle.resistance(e.u, e.v);
    ++report.edges_checked;
    report.tight_lower += std::abs(r - lower) <= tolerance ? 1 : 0;
    report.tight_upper += std::abs(r - upper) <= tolerance ? 1 : 0;
    const double slack = std::min(r - lower, upper - r);
    report.worst_slack = report.edges_checked == 1 ? slack : std::min(report.worst_slack, slack);
    if (slack < -tolerance && report.holds) {
      report.holds = false;
      report.first_violation = e;
    }
  }
  return report;
}

Eigen::MatrixXd laplacian_from_edges(NodeId n, std::span<const Edge> edges, std::span<const double> weights) {
  Eigen::MatrixXd lap = Eigen::MatrixXd::Zero(n, n);
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const double w = weights.empty() ? 1.0 : weights[i];
    const Edge e = edges[i];
    lap(e.u, e.u) += w;
    lap(e.v, e.v) += w;
    lap(e.u, e.v) -= w;
    lap(e.v, e.u) -= w;
  }
  return lap;
}

double expected_laplacian_error(const WorkerSubgraph &sub, double alpha, int trials, std::uint64_t seed,
                                bool accumulate_duplicates) {
  if (trials < 1) {
    throw std::invalid_argument("need at least one trial");
  }
  std::vector<Edge> local_edges;
  for (const Edge &e : sub.edges()) {
    local_edges.push_back(canonical(*sub.local_id(e.u), *sub.local_id(e.v)));
  }
  const Eigen::MatrixXd reference = laplacian_from_edges(sub.num_local(), local_edges, {});
  Eigen::MatrixXd mean = Eigen::MatrixXd::Zero(reference.rows(), reference.cols());
  for (int t = 0; t < trials; ++t) {
    SparsifyOptions options;
    options.alpha = alpha;
    options.seed = derive_seed(seed, {static_cast<std::uint64_t>(t)});
    options.accumulate_duplicates = accumulate_duplicates;
    const SparsifiedSubgraph s = sparsify_subgraph(sub, options);
    std::vector<Edge> edges;
    for (const Edge &e : s.edges) {
      edges.push_back(canonical(*sub.local_id(e.u), *sub.local_id(e.v)));
    }
    mean += laplacian_from_edges(sub.num_local(), edges, s.weights);
  }
  mean /= trials;
  return (mean - reference).norm() / reference.norm();
}

SpectralClosenessReport spectral_closeness(const Graph &g, std::size_t draws, std::size_t vectors,
                                           double epsilon, std::uint64_t seed) {
  const ResistanceOracle oracle(g);
  const std::vector<Edge> edges = g.edge_list();
  std::vector<double> probs(edges.size());
  double total = 0.0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    probs[i] = oracle.resistance(edges[i].u, edges[i].v);
    total += probs[i];
  }
  for (double &p : probs) {
    p /= total;
  }
  Rng rng(derive_seed(seed, {0x5bec}));
  const ImportanceDraws sampled = importance_sample(probs, draws, rng);
  std::vector<WeightedEdge> kept;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (sampled.counts[i] > 0) {
      kept.push_back({edges[i].u, edges[i].v, sampled.weights[i]});
    }
  }
  const Graph sparse = Graph::from_weighted_edges(g.num_nodes(), kept, {}, 0);

  SpectralClosenessReport report;
  report.draws = draws;
  report.vectors = vectors;
  std::vector<double> x(static_cast<std::size_t>(g.num_nodes()));
  for (std::size_t k = 0; k < vectors; ++k) {
    // Gaussian direction via Box-Muller, then normalized.
    double norm = 0.0;
    for (std::size_t i = 0; i < x.size(); ++i) {
      const double u1 = 1.0 - rng.uniform();
      const double u2 = rng.uniform();
      x[i] = std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * M_PI * u2);
      norm += x[i] * x[i];
    }
    norm = std::sqrt(norm);
    for (double &xi : x) {
      xi /= norm;
    }
    const double exact = laplacian_quadratic_form(g, x);
    const double approx = laplacian_quadratic_form(sparse, x);
    const double ratio = std::abs(approx - exact) / exact;
    report.within += ratio <= epsilon ? 1 : 0;
    report.worst_ratio = std::max(report.worst_ratio, ratio);
  }
  return report;
}

} // namespace lpsim
