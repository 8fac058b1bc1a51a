#pragma once

// Property suite behind `lpsim verify`. Each check returns a result instead of
// throwing so the suite can report every property in one pass.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include "lpsim/graph.hpp"
#include "lpsim/model.hpp"

namespace lpsim {

struct PropertyResult {
  std::string name;
  bool passed = false;
  std::string detail;   // one line of measured values
  std::string instance; // serialized counterexample when failed, else empty
};

/// Connected graph with num_nodes in [n_min, n_max]; the generator family
/// (ER, BA, SBM) cycles with `index`.
Graph random_connected_graph(std::uint64_t seed, std::size_t index, NodeId n_min, NodeId n_max);

/// "n=<n>" then one "u v" line per edge.
std::string serialize_graph(const Graph &g);

/// Lower and upper resistance bounds on `count` random connected graphs.
PropertyResult check_bounds_random(std::size_t count, NodeId n_min, NodeId n_max, std::uint64_t seed,
                                   double tolerance = 1e-9);
/// Every K3 edge meets the upper bound with equality.
PropertyResult check_triangle_tight_upper();
/// Every edge of the 5-node path has resistance exactly 1.
PropertyResult check_path_bridges();
/// `graphs` connected graphs of `nodes` nodes, 16 n ln n exact-resistance
/// draws each, `fraction` of `vectors` unit vectors within relative `epsilon`.
PropertyResult check_spectral(std::size_t graphs, NodeId nodes, std::size_t vectors, double epsilon,
                              double fraction, std::uint64_t seed);
/// Trial-averaged sparsified Laplacian of K_n at alpha within `tolerance`
/// relative Frobenius error.
PropertyResult check_unbiased(NodeId n, double alpha, int trials, double tolerance, bool accumulate_duplicates,
                              std::uint64_t seed);

struct GradientCheckStats {
  std::size_t checked = 0;
  std::size_t failed = 0;
  double worst_relative = 0.0;
};
/// Central differences on `samples` randomly chosen scalars of a small model.
/// Relative error |a - n| / max(|a|, |n|, 1e-6).
GradientCheckStats gradient_check(Architecture architecture, PredictorKind predictor, std::size_t samples,
                                  double tolerance, std::uint64_t seed);
PropertyResult check_gradients(Architecture architecture, PredictorKind predictor, std::size_t samples,
                               double tolerance, std::uint64_t seed);

struct VerifyOptions {
  std::uint64_t seed = 1;
  bool inject_no_accumulation = false; // mutation: duplicate draws overwrite
  std::filesystem::path failure_dir;   // counterexamples written here when set
};

std::vector<PropertyResult> run_verify_suite(const VerifyOptions &options);

/// Prints "PASS|FAIL <name>: <detail>" per property. Returns 0 when all pass,
/// 2 otherwise (counterexamples go to err and failure_dir).
int cmd_verify(const VerifyOptions &options, std::ostream &out, std::ostream &err);

} // namespace lpsim
