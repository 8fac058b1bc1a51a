#include "lpsim/sparsify.hpp"

#include <cmath>
#include <cstdio>
#include <numeric>
#include <ostream>
#include <stdexcept>

namespace lpsim {

std::string_view to_string(DegreeScope s) { return s == DegreeScope::subgraph ? "subgraph" : "global"; }

DegreeScope parse_degree_scope(std::string_view name) {
  if (name == "subgraph" || name == "local") {
    return DegreeScope::subgraph;
  }
  if (name == "global") {
    return DegreeScope::global;
  }
  throw std::invalid_argument("unknown degree scope '" + std::string(name) + "'");
}

double approx_resistance(int degree_u, int degree_v) {
  if (degree_u < 1 || degree_v < 1) {
    throw std::invalid_argument("resistance proxy needs positive degrees");
  }
  return 1.0 / degree_u + 1.0 / degree_v;
}

std::size_t sample_count(double alpha, std::size_t edge_count) {
  if (!(alpha > 0.0) || !std::isfinite(alpha)) {
    throw std::invalid_argument("alpha must be positive");
  }
  const double raw = std::round(alpha * static_cast<double>(edge_count));
  return std::max<std::size_t>(1, static_cast<std::size_t>(raw));
}

AliasTable::AliasTable(std::span<const double> weights) {
  const std::size_t n = weights.size();
  if (n == 0) {
    throw std::invalid_argument("alias table needs at least one category");
  }
  double total = 0.0;
  for (const double w : weights) {
    if (!(w >= 0.0) || !std::isfinite(w)) {
      throw std::invalid_argument("alias table weights must be finite and nonnegative");
    }
    total += w;
  }
  if (!(total > 0.0)) {
    throw std::invalid_argument("alias table weights sum to zero");
  }
  prob_.resize(n);
  alias_.resize(n);
  std::vector<double> scaled(n);
  std::vector<std::size_t> small;
  std::vector<std::size_t> large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = weights[i] * static_cast<double>(n) / total;
    (scaled[i] < 1.0 ? small : large).push_back(i);
  }
  while (!small.empty() && !large.empty()) {
    const std::size_t s = small.back();
    small.pop_back();
    const std::size_t l = large.back();
    prob_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  // Leftovers are 1 up to rounding.
  for (const std::size_t i : large) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
  for (const std::size_t i : small) {
    prob_[i] = 1.0;
    alias_[i] = i;
  }
}

std::size_t AliasTable::sample(Rng &rng) const {
  const auto column = static_cast<std::size_t>(rng.below(prob_.size()));
  return rng.uniform() < prob_[column] ? column : alias_[column];
}

ImportanceDraws importance_sample(std::span<const double> probabilities, std::size_t draws, Rng &rng,
                                  bool accumulate_duplicates) {
  const AliasTable table(probabilities);
  ImportanceDraws out;
  out.draws = draws;
  out.counts.assign(probabilities.size(), 0);
  out.weights.assign(probabilities.size(), 0.0);
  const double scale = static_cast<double>(draws);
  for (std::size_t l = 0; l < draws; ++l) {
    const std::size_t e = table.sample(rng);
    ++out.counts[e];
    const double increment = 1.0 / (scale * probabilities[e]);
    if (accumulate_duplicates) {
      out.weights[e] += increment;
    } else {
      out.weights[e] = increment;
    }
  }
  if (accumulate_duplicates) {
    // Recompute from counts so that weight * draws * p is an exact integer
    // ratio rather than a running sum of rounded increments.
    for (std::size_t e = 0; e < out.weights.size(); ++e) {
      out.weights[e] = out.counts[e] / (scale * probabilities[e]);
    }
  }
  return out;
}

std::vector<double> edge_probabilities(const WorkerSubgraph &sub, std::span<const Edge> edges,
                                       DegreeScope scope, const Graph *full_graph) {
  if (scope == DegreeScope::global && full_graph == nullptr) {
    throw std::invalid_argument("global degree scope needs the full graph");
  }
  std::vector<double> p(edges.size());
  double total = 0.0;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    const Edge e = edges[i];
    int du = 0;
    int dv = 0;
    if (scope == DegreeScope::subgraph) {
      du = sub.local_degree(*sub.local_id(e.u));
      dv = sub.local_degree(*sub.local_id(e.v));
    } else {
      du = full_graph->degree(e.u);
      dv = full_graph->degree(e.v);
    }
    p[i] = approx_resistance(du, dv);
    total += p[i];
  }
  for (double &x : p) {
    x /= total;
  }
  return p;
}

SparsifiedSubgraph sparsify_subgraph(const WorkerSubgraph &sub, const SparsifyOptions &options,
                                     const Graph *full_graph) {
  const std::vector<Edge> edges = sub.edges();
  if (edges.empty()) {
    throw std::invalid_argument("cannot sparsify worker " + std::to_string(sub.part_id) +
                                ": subgraph has no edges");
  }
  const std::vector<double> probs = edge_probabilities(sub, edges, options.degree_scope, full_graph);
  const std::size_t draws = sample_count(options.alpha, edges.size());
  Rng rng(derive_seed(options.seed, {0x59a, static_cast<std::uint64_t>(sub.part_id)}));
  const ImportanceDraws sampled = importance_sample(probs, draws, rng, options.accumulate_duplicates);

  SparsifiedSubgraph out;
  out.part_id = sub.part_id;
  out.nodes = sub.local_to_global;
  out.source_edge_count = edges.size();
  out.samples_drawn = draws;
  for (std::size_t i = 0; i < edges.size(); ++i) {
    if (sampled.counts[i] > 0) {
      out.edges.push_back(edges[i]);
      out.weights.push_back(sampled.weights[i]);
      out.draw_counts.push_back(sampled.counts[i]);
      out.probabilities.push_back(probs[i]);
    }
  }
  return out;
}

void write_sparsified_csv(std::ostream &out, const SparsifiedSubgraph &s) {
  out << "u,v,weight\n";
  char buf[64];
  for (std::size_t i = 0; i < s.edges.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%.17g", s.weights[i]);
    out << s.edges[i].u << ',' << s.edges[i].v << ',' << buf << '\n';
  }
}

std::string sparsify_summary(const SparsifiedSubgraph &s) {
  char buf[192];
  std::snprintf(buf, sizeof(buf), "part=%d source_edges=%zu samples=%zu retained=%zu retention=%.4f",
                s.part_id, s.source_edge_count, s.samples_drawn, s.edges.size(), s.retention_ratio());
  return buf;
}

} // namespace lpsim
