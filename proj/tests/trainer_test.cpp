#include <filesystem>
#include <sstream>

#include "doctest.h"

#include "lpsim/split.hpp"
#include "lpsim/trainer.hpp"

using namespace lpsim;

namespace {

struct Fixture {
  Graph g;
  EdgeSplit split;

  explicit Fixture(NodeId n = 300, std::uint64_t seed = 4) {
    SyntheticSpec spec;
    spec.kind = SyntheticKind::barabasi_albert;
    spec.num_nodes = n;
    spec.attach_edges = 3;
    g = generate_synthetic(spec, 8, seed);
    split = split_edges(g, {}, 3, seed + 1);
  }
};

TrainConfig small_config() {
  TrainConfig c;
  c.num_parts = 4;
  c.fanouts = {5, 3};
  c.model.num_layers = 2;
  c.model.hidden_dim = 12;
  c.batch_size = 64;
  c.epochs = 2;
  c.lr = 5e-3;
  return c;
}

std::vector<Matrix> filled(double value, std::initializer_list<std::pair<int, int>> shapes) {
  std::vector<Matrix> out;
  for (const auto &[r, c] : shapes) {
    out.push_back(Matrix::Constant(r, c, value));
  }
  return out;
}

std::uint64_t epoch_bytes(const TrainResult &r, std::size_t epoch) {
  const auto t = r.ledger.epoch_total(epoch);
  return t.feature_bytes + t.structure_bytes;
}

} // namespace

TEST_CASE("config validation names the bad field") {
  TrainConfig c = small_config();
  CHECK_NOTHROW(c.validate());
  c.alpha = 0.0;
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("alpha"), std::invalid_argument);
  c = small_config();
  c.fanouts = {5, 3, 2};
  CHECK_THROWS_WITH_AS(c.validate(), doctest::Contains("fanouts"), std::invalid_argument);
  c = small_config();
  c.num_parts = 0;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c = small_config();
  c.sharing = SharingMode::none;
  CHECK_THROWS_AS(c.validate(), std::invalid_argument);
  c.local_only_negatives = true;
  CHECK_NOTHROW(c.validate());
}

TEST_CASE("variant flag bundles") {
  const TrainConfig base = small_config();
  const TrainConfig mm = apply_variant(base, Variant::splpg_minus_minus);
  CHECK(mm.sharing == SharingMode::none);
  CHECK_FALSE(mm.full_neighbor_halo);
  CHECK(mm.local_only_negatives);
  const TrainConfig m = apply_variant(base, Variant::splpg_minus);
  CHECK(m.sharing == SharingMode::none);
  CHECK(m.full_neighbor_halo);
  CHECK(apply_variant(base, Variant::splpg).sharing == SharingMode::sparsified);
  CHECK(apply_variant(base, Variant::splpg_plus).sharing == SharingMode::complete);
  CHECK(apply_variant(base, Variant::random_tma).partitioner == PartitionStrategy::random_tma);
  CHECK(apply_variant(base, Variant::super_tma).partitioner == PartitionStrategy::super_tma);
  CHECK(apply_variant(base, Variant::centralized).num_parts == 1);
  CHECK(apply_variant(base, Variant::splpg).fanouts == base.fanouts);
  CHECK(parse_variant("splpg_minus_minus") == Variant::splpg_minus_minus);
  CHECK(parse_variant("psgd_pa") == Variant::psgd_pa);
  CHECK_THROWS(parse_variant("nope"));
}

TEST_CASE("sync_gradients") {
  const std::vector<Matrix> g = filled(1.5, {{2, 3}, {1, 3}});
  const std::vector<Matrix> neg = filled(-1.5, {{2, 3}, {1, 3}});
  const std::vector<std::vector<Matrix>> pair{g, neg};
  for (const Matrix &m : sync_gradients(pair)) {
    CHECK(m.isZero(0.0));
  }
  const std::vector<std::vector<Matrix>> one{g};
  CHECK(sync_gradients(one) == g);

  const std::vector<Matrix> a = filled(1.0, {{2, 2}});
  const std::vector<Matrix> b = filled(2.0, {{2, 2}});
  const std::vector<Matrix> c = filled(6.0, {{2, 2}});
  const std::vector<std::vector<Matrix>> abc{a, b, c};
  const std::vector<std::vector<Matrix>> cab{c, a, b};
  CHECK(sync_gradients(abc) == sync_gradients(cab));
  CHECK(sync_gradients(abc)[0](0, 0) == doctest::Approx(3.0));

  const std::vector<std::vector<Matrix>> bad{a, filled(1.0, {{3, 2}})};
  CHECK_THROWS(sync_gradients(bad));
}

TEST_CASE("sync_models") {
  const std::vector<Matrix> theta = filled(0.25, {{3, 2}, {1, 2}});
  const std::vector<std::vector<Matrix>> same{theta, theta, theta};
  CHECK(sync_models(same) == theta);
  std::vector<Matrix> shifted = theta;
  for (Matrix &m : shifted) {
    m.array() += 2.0 * 0.125;
  }
  const std::vector<std::vector<Matrix>> two{theta, shifted};
  for (const Matrix &m : sync_models(two)) {
    CHECK(m.isApproxToConstant(0.25 + 0.125));
  }
}

TEST_CASE("account_transfer: per-node billing and the no-sharing law") {
  ComputationGraph cg;
  cg.layers = {{1}, {1, 5, 7}};
  cg.hops = {{{0, 1, 1.0}, {0, 2, 1.0}}};
  cg.remote_nodes = {5, 7};
  cg.remote_edges = {{1, 5}};
  CommLedger ledger(1, 2, 128);
  account_transfer(cg, 1, 0, ledger, SharingMode::complete);
  CHECK(ledger.cell(0, 1).feature_bytes == 2 * 512);
  CHECK(ledger.cell(0, 1).structure_bytes == 8);
  CHECK(ledger.cell(0, 0).feature_bytes == 0);

  CommLedger quiet(1, 1, 128);
  account_transfer(cg, 0, 0, quiet, SharingMode::none);
  CHECK(quiet.epoch_total(0).feature_bytes == 0);
  CHECK(quiet.epoch_total(0).structure_bytes == 0);

  ComputationGraph local = cg;
  local.remote_nodes.clear();
  local.remote_edges.clear();
  CommLedger untouched(1, 1, 16);
  account_transfer(local, 0, 0, untouched, SharingMode::sparsified);
  CHECK(untouched.epoch_total(0).feature_bytes == 0);
  CHECK(untouched.epoch_total(0).remote_nodes == 0);
}

TEST_CASE("ledger CSV rows") {
  CommLedger ledger(2, 2, 4);
  ledger.bill(1, 0, 3, 2);
  ledger.bill_setup(64, 24);
  std::ostringstream out;
  ledger.write_csv(out, true, "run", "x");
  const std::string text = out.str();
  CHECK(text.rfind("phase,epoch,worker,feature_bytes,structure_bytes,remote_nodes,remote_edges,run\n", 0) == 0);
  CHECK(text.find("train,2,0,48,16,3,2,x\n") != std::string::npos);
  CHECK(text.find("setup,0,-1,64,24,") != std::string::npos);
}

TEST_CASE("p = 1 without sharing retraces the centralized run") {
  const Fixture f;
  TrainConfig c = small_config();
  c.num_parts = 1;
  c.sharing = SharingMode::none;
  const TrainResult dist = run_training(f.g, f.split, c);
  const TrainResult central = run_centralized(f.g, f.split, c);
  REQUIRE(dist.history.size() == central.history.size());
  for (std::size_t e = 0; e < dist.history.size(); ++e) {
    CHECK(std::abs(dist.history[e].train_loss - central.history[e].train_loss) <= 1e-10);
    CHECK(std::abs(dist.history[e].val_hits - central.history[e].val_hits) <= 1e-10);
  }
  CHECK(dist.test_hits == central.test_hits);
}

TEST_CASE("replicas are identical after every synchronization") {
  const Fixture f;
  for (const SyncMode mode : {SyncMode::gradient_avg, SyncMode::model_avg}) {
    TrainConfig c = small_config();
    c.sync_mode = mode;
    const TrainResult r = run_training(f.g, f.split, c);
    CHECK(r.max_replica_divergence == 0.0);
    CHECK(r.final_params.tensors.size() == r.best_params.tensors.size());
  }
}

TEST_CASE("no sharing bills no per-epoch bytes") {
  const Fixture f;
  for (const Variant v : {Variant::splpg_minus_minus, Variant::splpg_minus, Variant::psgd_pa, Variant::random_tma,
                          Variant::super_tma}) {
    const TrainResult r = run_baseline(f.g, f.split, v, small_config());
    for (std::size_t e = 0; e < r.ledger.epochs(); ++e) {
      CHECK(epoch_bytes(r, e) == 0);
    }
    CHECK(r.history.back().feature_bytes == 0);
  }
}

TEST_CASE("sparsified sharing moves fewer bytes than complete sharing") {
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    const Fixture f(600, seed);
    TrainConfig c = small_config();
    c.epochs = 1;
    c.partition_seed = seed;
    c.sample_seed = seed + 10;
    const TrainResult sparse = run_baseline(f.g, f.split, Variant::splpg, c);
    const TrainResult full = run_baseline(f.g, f.split, Variant::splpg_plus, c);
    CHECK(epoch_bytes(sparse, 0) > 0);
    CHECK(epoch_bytes(sparse, 0) < epoch_bytes(full, 0));
  }
}

TEST_CASE("cumulative metric bytes are monotone and match the ledger") {
  const Fixture f;
  TrainConfig c = small_config();
  c.epochs = 3;
  const TrainResult r = run_baseline(f.g, f.split, Variant::splpg_plus, c);
  std::uint64_t total = 0;
  for (std::size_t e = 0; e < r.history.size(); ++e) {
    total += r.ledger.epoch_total(e).feature_bytes;
    CHECK(r.history[e].feature_bytes == total);
    if (e > 0) {
      CHECK(r.history[e].feature_bytes >= r.history[e - 1].feature_bytes);
    }
    CHECK(r.ledger.epoch_total(e).feature_bytes == 4 * 8 * r.ledger.epoch_total(e).remote_nodes);
  }
}

TEST_CASE("training is deterministic and independent of the thread count") {
  const Fixture f;
  TrainConfig c = small_config();
  const TrainResult a = run_baseline(f.g, f.split, Variant::splpg, c);
  c.threads = 4;
  const TrainResult b = run_baseline(f.g, f.split, Variant::splpg, c);
  std::ostringstream la, lb, ma, mb;
  a.ledger.write_csv(la);
  b.ledger.write_csv(lb);
  write_metrics_csv(ma, a.history, "splpg");
  write_metrics_csv(mb, b.history, "splpg");
  CHECK(la.str() == lb.str());
  CHECK(ma.str() == mb.str());
  CHECK(a.final_params.tensors == b.final_params.tensors);
}

TEST_CASE("training lowers the loss") {
  const Fixture f;
  TrainConfig c = small_config();
  c.epochs = 8;
  const TrainResult r = run_baseline(f.g, f.split, Variant::splpg_plus, c);
  CHECK(r.history.back().train_loss < r.history.front().train_loss);
  CHECK(r.k > 0);
}

TEST_CASE("checkpoints are written at the configured period") {
  const Fixture f;
  TrainConfig c = small_config();
  c.epochs = 2;
  c.checkpoint_period = 1;
  c.checkpoint_dir = std::filesystem::temp_directory_path() / "lpsim_ckpt_test";
  std::filesystem::remove_all(c.checkpoint_dir);
  const TrainResult r = run_baseline(f.g, f.split, Variant::splpg, c);
  const auto last = c.checkpoint_dir / "splpg_epoch2.ckpt";
  REQUIRE(std::filesystem::exists(last));
  CHECK(std::filesystem::exists(c.checkpoint_dir / "splpg_epoch1.ckpt"));
  CHECK(load_checkpoint(last).tensors == r.final_params.tensors);
}

TEST_CASE("metrics CSV format") {
  std::vector<EpochMetrics> h{{0, 0.5, 0.25, 100, 8}};
  std::ostringstream out;
  write_metrics_csv(out, h, "splpg", true, "seed", "3");
  CHECK(out.str() == "epoch,variant,train_loss,val_hits,feature_bytes,structure_bytes,seed\n"
                     "0,splpg,0.5,0.25,100,8,3\n");
}
