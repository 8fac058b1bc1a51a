#include "lpsim/eval.hpp"

#include <algorithm>
#include <cstdio>
#include <functional>
#include <stdexcept>

#include "lpsim/random.hpp"
#include "lpsim/sampler.hpp"

namespace lpsim {

double hits_at_k(std::span<const double> positive, std::span<const double> negative, std::size_t k) {
  if (k == 0) {
    throw std::invalid_argument("k must be positive");
  }
  if (negative.size() < k) {
    throw std::invalid_argument("hits@" + std::to_string(k) + " needs at least " + std::to_string(k) +
                                " negatives, got " + std::to_string(negative.size()));
  }
  if (positive.empty()) {
    return 0.0;
  }
  std::vector<double> neg(negative.begin(), negative.end());
  std::nth_element(neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(k - 1), neg.end(), std::greater<>());
  const double threshold = neg[k - 1];
  const auto above = std::count_if(positive.begin(), positive.end(), [&](double s) { return s > threshold; });
  return static_cast<double>(above) / static_cast<double>(positive.size());
}

std::size_t default_hits_k(std::size_t num_negatives) {
  return std::max<std::size_t>(1, std::min<std::size_t>(100, num_negatives / 3));
}

double EvalReport::hits_at(std::size_t k) const {
  for (std::size_t i = 0; i < ks.size(); ++i) {
    if (ks[i] == k) {
      return hits[i];
    }
  }
  throw std::out_of_range("hits@" + std::to_string(k) + " was not evaluated");
}

std::vector<double> score_edges(const ModelParams &params, const Graph &message_graph, std::span<const Edge> pairs,
                                std::span<const int> fanouts, std::uint64_t seed, std::size_t chunk) {
  if (chunk == 0) {
    throw std::invalid_argument("chunk must be positive");
  }
  const GraphView view = GraphView::whole(message_graph);
  std::vector<double> scores;
  scores.reserve(pairs.size());
  std::vector<LabeledPair> labeled;
  for (std::size_t begin = 0, c = 0; begin < pairs.size(); begin += chunk, ++c) {
    const std::size_t end = std::min(pairs.size(), begin + chunk);
    labeled.clear();
    for (std::size_t i = begin; i < end; ++i) {
      labeled.push_back({pairs[i].u, pairs[i].v, 0});
    }
    Rng rng(derive_seed(seed, {0xe7a1, c}));
    const std::vector<NodeId> seeds = pair_endpoints(labeled);
    const ComputationGraph cg = build_computation_graph(seeds, view, fanouts, rng);
    const Matrix features = gather_features(message_graph, cg.all_nodes());
    const Matrix emb = forward_embeddings(cg, features, params);
    const std::vector<PairIndex> idx = pair_indices(cg, labeled);
    const std::vector<double> s = score_pairs(emb, idx, params);
    scores.insert(scores.end(), s.begin(), s.end());
  }
  return scores;
}

EvalReport evaluate_model(const ModelParams &params, const EdgeSplit &split, const Graph &message_graph,
                          std::span<const int> fanouts, std::span<const std::size_t> ks, std::uint64_t seed,
                          EvalSet which) {
  const bool val = which == EvalSet::validation;
  const std::vector<Edge> &pos = val ? split.val_pos : split.test_pos;
  const std::vector<Edge> &neg = val ? split.val_neg : split.test_neg;
  for (const std::size_t k : ks) {
    if (k == 0 || k > neg.size()) {
      throw std::invalid_argument("hits@" + std::to_string(k) + " needs at least " + std::to_string(k) +
                                  " negatives, got " + std::to_string(neg.size()));
    }
  }
  const std::uint64_t set_tag = val ? 1 : 2;
  const std::vector<double> ps = score_edges(params, message_graph, pos, fanouts, derive_seed(seed, {set_tag, 1}));
  const std::vector<double> ns = score_edges(params, message_graph, neg, fanouts, derive_seed(seed, {set_tag, 0}));
  EvalReport report;
  report.ks.assign(ks.begin(), ks.end());
  for (const std::size_t k : ks) {
    report.hits.push_back(hits_at_k(ps, ns, k));
  }
  const auto mean = [](const std::vector<double> &v) {
    double total = 0.0;
    for (const double x : v) {
      total += x;
    }
    return v.empty() ? 0.0 : total / static_cast<double>(v.size());
  };
  report.positive_mean = mean(ps);
  report.negative_mean = mean(ns);
  return report;
}

std::string format_summary(std::span<const SummaryRow> rows) {
  std::string out;
  char line[256];
  std::snprintf(line, sizeof(line), "%-18s %6s %3s %5s %5s %16s %9s %9s %9s\n", "variant", "alpha", "p", "seeds", "K",
                "epoch_bytes", "saving%", "val_hits", "test_hits");
  out += line;
  for (const auto &r : rows) {
    char saving[32];
    if (r.saving_percent) {
      std::snprintf(saving, sizeof(saving), "%.1f", *r.saving_percent);
    } else {
      std::snprintf(saving, sizeof(saving), "-");
    }
    char alpha[32];
    if (r.alpha) {
      std::snprintf(alpha, sizeof(alpha), "%.3f", *r.alpha);
    } else {
      std::snprintf(alpha, sizeof(alpha), "-");
    }
    std::snprintf(line, sizeof(line), "%-18s %6s %3d %5zu %5zu %16.1f %9s %9.4f %9.4f\n", r.variant.c_str(), alpha,
                  r.num_parts, r.seeds, r.k, r.epoch_bytes, saving, r.val_hits, r.test_hits);
    out += line;
  }
  return out;
}

} // namespace lpsim
