#include <algorithm>

#include "doctest.h"

#include "lpsim/eval.hpp"
#include "lpsim/random.hpp"
#include "lpsim/split.hpp"

using namespace lpsim;

namespace {

// A positive hits iff fewer than k negatives score at least as high.
double hits_by_counting(const std::vector<double> &pos, const std::vector<double> &neg, std::size_t k) {
  std::size_t hit = 0;
  for (const double s : pos) {
    const auto at_least = std::count_if(neg.begin(), neg.end(), [&](double n) { return n >= s; });
    hit += static_cast<std::size_t>(at_least) < k ? 1 : 0;
  }
  return static_cast<double>(hit) / static_cast<double>(pos.size());
}

struct Setup {
  Graph g;
  EdgeSplit split;
  Graph message;
  ModelParams params;
  std::vector<int> fanouts{4, 2};

  Setup() {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::erdos_renyi;
    spec.num_nodes = 120;
    spec.edge_probability = 0.06;
    g = generate_synthetic(spec, 6, 2);
    split = split_edges(g, {}, 3, 9);
    message = training_graph(g, split);
    ModelSpec m;
    m.input_dim = 6;
    m.hidden_dim = 8;
    m.num_layers = 2;
    params = init_params(m, 11);
  }
};

} // namespace

TEST_CASE("hits@k on the worked example") {
  const std::vector<double> pos{0.9, 0.4};
  const std::vector<double> neg{0.8, 0.5, 0.3, 0.2};
  CHECK(hits_at_k(pos, neg, 2) == doctest::Approx(0.5));
  CHECK(hits_at_k(pos, neg, 1) == doctest::Approx(0.5));
  CHECK(hits_at_k(pos, neg, 3) == doctest::Approx(1.0));
}

TEST_CASE("hits@k edge cases") {
  const std::vector<double> neg{0.1, 0.2, 0.3};
  CHECK(hits_at_k(std::vector<double>{0.5, 0.9}, neg, 1) == 1.0);
  // A tie with the k-th negative is not a hit.
  CHECK(hits_at_k(std::vector<double>{0.3}, neg, 1) == 0.0);
  CHECK(hits_at_k(std::vector<double>{0.2}, neg, 2) == 0.0);
  CHECK_THROWS_AS(hits_at_k(std::vector<double>{0.5}, neg, 4), std::invalid_argument);
  CHECK_THROWS_AS(hits_at_k(std::vector<double>{0.5}, neg, 0), std::invalid_argument);
}

TEST_CASE("hits@k agrees with counting and grows with k") {
  Rng rng(13);
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> pos(20), neg(60);
    for (double &s : pos) {
      s = static_cast<double>(rng.below(10)) / 10.0;
    }
    for (double &s : neg) {
      s = static_cast<double>(rng.below(10)) / 10.0;
    }
    double previous = 0.0;
    for (std::size_t k = 1; k <= 60; k += 7) {
      const double h = hits_at_k(pos, neg, k);
      CHECK(h == doctest::Approx(hits_by_counting(pos, neg, k)));
      CHECK(h >= previous);
      previous = h;
    }
  }
}

TEST_CASE("default_hits_k") {
  CHECK(default_hits_k(3000) == 100);
  CHECK(default_hits_k(90) == 30);
  CHECK(default_hits_k(1) == 1);
}

TEST_CASE("evaluate_model: deterministic and consistent with score_edges") {
  const Setup s;
  const std::vector<std::size_t> ks{1, 5};
  const EvalReport a = evaluate_model(s.params, s.split, s.message, s.fanouts, ks, 7, EvalSet::validation);
  const EvalReport b = evaluate_model(s.params, s.split, s.message, s.fanouts, ks, 7, EvalSet::validation);
  CHECK(a.hits == b.hits);
  CHECK(a.positive_mean == b.positive_mean);
  CHECK(a.hits_at(5) >= a.hits_at(1));
  CHECK_THROWS_AS(a.hits_at(3), std::out_of_range);
  CHECK(a.ks == ks);

  // Chunking changes nothing: each chunk draws from its own stream.
  const auto whole = score_edges(s.params, s.message, s.split.val_pos, s.fanouts, 3, 1024);
  const auto again = score_edges(s.params, s.message, s.split.val_pos, s.fanouts, 3, 1024);
  CHECK(whole == again);
  CHECK(whole.size() == s.split.val_pos.size());
}

TEST_CASE("a constant predictor scores no hits") {
  Setup s;
  for (Matrix &t : s.params.tensors) {
    t.setZero();
  }
  const std::vector<std::size_t> ks{1, 10};
  const EvalReport r = evaluate_model(s.params, s.split, s.message, s.fanouts, ks, 1, EvalSet::test);
  CHECK(r.hits_at(1) == 0.0);
  CHECK(r.hits_at(10) == 0.0);
  CHECK(r.positive_mean == doctest::Approx(r.negative_mean));
}

TEST_CASE("format_summary") {
  std::vector<SummaryRow> rows(2);
  rows[0].variant = "splpg";
  rows[0].alpha = 0.15;
  rows[0].num_parts = 4;
  rows[0].k = 100;
  rows[0].epoch_bytes = 1234.0;
  rows[0].saving_percent = 80.0;
  rows[0].val_hits = 0.5;
  rows[0].test_hits = 0.25;
  rows[1].variant = "splpg_plus";
  rows[1].num_parts = 4;
  const std::string text = format_summary(rows);
  CHECK(std::count(text.begin(), text.end(), '\n') == 3);
  CHECK(text.rfind("variant", 0) == 0);
  CHECK(text.find("0.150") != std::string::npos);
  CHECK(text.find("80.0") != std::string::npos);
  CHECK(text.find("0.2500") != std::string::npos);
}
