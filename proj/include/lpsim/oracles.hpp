#pragma once

// Dense reference computations used to verify the sparsifier. All of them
// build n x n matrices and are meant for graphs of a few hundred nodes.

#include <cstdint>
#include <optional>
#include <span>
#include <vector>

#include <Eigen/Dense>

#include "lpsim/graph.hpp"
#include "lpsim/partition.hpp"

namespace lpsim {

/// Holds the Laplacian pseudo-inverse of a connected graph and answers
/// effective-resistance queries (e_u - e_v)^T L^+ (e_u - e_v).
class ResistanceOracle {
public:
  explicit ResistanceOracle(const Graph &g);

  double resistance(NodeId u, NodeId v) const;
  const Eigen::MatrixXd &pseudo_inverse() const { return pinv_; }

private:
  Eigen::MatrixXd pinv_;
};

double exact_effective_resistance(const Graph &g, NodeId u, NodeId v);

struct ResistanceBoundsReport {
  bool holds = true;
  double gamma = 0.0;
  std::size_t edges_checked = 0;
  std::size_t tight_lower = 0; // |r - lower| <= tolerance
  std::size_t tight_upper = 0; // |r - upper| <= tolerance
  std::optional<Edge> first_violation;
  double worst_slack = 0.0; // most negative of (r - lower, upper - r)
};

/// Checks 1/2 (1/d_u + 1/d_v) <= r_uv <= (1/gamma)(1/d_u + 1/d_v) on every edge.
ResistanceBoundsReport check_resistance_bounds(const Graph &g, double tolerance = 1e-9);

inline bool resistance_bounds_hold(const Graph &g) { return check_resistance_bounds(g).holds; }

/// Dense Laplacian of a weighted edge list on n nodes.
Eigen::MatrixXd laplacian_from_edges(NodeId n, std::span<const Edge> edges, std::span<const double> weights);

/// Frobenius distance between the trial-averaged sparsified Laplacian and the
/// subgraph Laplacian, relative to the latter's norm. Both are indexed by the
/// subgraph's local ids.
double expected_laplacian_error(const WorkerSubgraph &sub, double alpha, int trials, std::uint64_t seed,
                                bool accumulate_duplicates = true);

struct SpectralClosenessReport {
  std::size_t draws = 0;
  std::size_t vectors = 0;
  std::size_t within = 0; // |x'L~x - x'Lx| <= eps x'Lx
  double worst_ratio = 0.0; // max |x'L~x / x'Lx - 1|
  double fraction_within() const { return vectors == 0 ? 0.0 : static_cast<double>(within) / vectors; }
};

/// Samples `draws` edges with replacement with probabilities proportional to
/// exact effective resistances, weights 1/(draws p_e), and compares quadratic
/// forms on `vectors` random unit vectors.
SpectralClosenessReport spectral_closeness(const Graph &g, std::size_t draws, std::size_t vectors,
                                           double epsilon, std::uint64_t seed);

} // namespace lpsim
