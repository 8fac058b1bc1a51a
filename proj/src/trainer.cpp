#include "lpsim/trainer.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <ostream>
#include <stdexcept>
#include <thread>

#include "lpsim/random.hpp"

namespace lpsim {

std::string_view to_string(SyncMode m) { return m == SyncMode::model_avg ? "model_avg" : "gradient_avg"; }

SyncMode parse_sync_mode(std::string_view name) {
  if (name == "model_avg") {
    return SyncMode::model_avg;
  }
  if (name == "gradient_avg") {
    return SyncMode::gradient_avg;
  }
  throw std::invalid_argument("unknown sync mode '" + std::string(name) + "'");
}

namespace {

struct VariantName {
  Variant variant;
  std::string_view name;
};

constexpr VariantName kVariantNames[] = {
    {Variant::custom, "custom"},
    {Variant::psgd_pa, "psgd_pa"},
    {Variant::random_tma, "random_tma"},
    {Variant::super_tma, "super_tma"},
    {Variant::splpg_minus_minus, "splpg_minus_minus"},
    {Variant::splpg_minus, "splpg_minus"},
    {Variant::splpg, "splpg"},
    {Variant::splpg_plus, "splpg_plus"},
    {Variant::centralized, "centralized"},
};

} // namespace

std::string_view to_string(Variant v) {
  for (const auto &entry : kVariantNames) {
    if (entry.variant == v) {
      return entry.name;
    }
  }
  return "?";
}

Variant parse_variant(std::string_view name) {
  for (const auto &entry : kVariantNames) {
    if (entry.name == name) {
      return entry.variant;
    }
  }
  throw std::invalid_argument("unknown variant '" + std::string(name) + "'");
}

void TrainConfig::validate() const {
  const auto fail = [](const std::string &what) { throw std::invalid_argument(what); };
  if (num_parts < 1) {
    fail("num_parts must be at least 1");
  }
  if (!(alpha > 0.0 && alpha <= 1.0)) {
    fail("alpha must lie in (0, 1]");
  }
  if (fanouts.empty()) {
    fail("fanouts must not be empty");
  }
  for (const int f : fanouts) {
    if (f < 1) {
      fail("fanouts must be positive");
    }
  }
  if (static_cast<int>(fanouts.size()) != model.num_layers) {
    fail("fanouts has " + std::to_string(fanouts.size()) + " entries but the model has " +
         std::to_string(model.num_layers) + " layers");
  }
  if (batch_size < 2) {
    fail("batch_size must be at least 2");
  }
  if (!(lr > 0.0) || !std::isfinite(lr)) {
    fail("lr must be positive");
  }
  if (epochs < 1) {
    fail("epochs must be at least 1");
  }
  if (sync_period < 1) {
    fail("sync_period must be at least 1");
  }
  if (threads < 1) {
    fail("threads must be at least 1");
  }
  if (model.hidden_dim < 1) {
    fail("hidden_dim must be positive");
  }
  if (sharing == SharingMode::none && num_parts > 1 && !local_only_negatives) {
    fail("sharing_mode none with more than one part requires local_only_negatives: "
         "a worker cannot reach nodes it neither stores nor may fetch");
  }
}

TrainConfig apply_variant(TrainConfig base, Variant variant) {
  TrainConfig c = std::move(base);
  c.label = std::string(to_string(variant));
  switch (variant) {
  case Variant::custom:
    break;
  case Variant::psgd_pa:
  case Variant::splpg_minus_minus:
    c.partitioner = PartitionStrategy::greedy_cut;
    c.sharing = SharingMode::none;
    c.full_neighbor_halo = false;
    c.local_only_negatives = true;
    break;
  case Variant::random_tma:
    c.partitioner = PartitionStrategy::random_tma;
    c.sharing = SharingMode::none;
    c.full_neighbor_halo = false;
    c.local_only_negatives = true;
    break;
  case Variant::super_tma:
    c.partitioner = PartitionStrategy::super_tma;
    c.sharing = SharingMode::none;
    c.full_neighbor_halo = false;
    c.local_only_negatives = true;
    break;
  case Variant::splpg_minus:
    c.partitioner = PartitionStrategy::greedy_cut;
    c.sharing = SharingMode::none;
    c.full_neighbor_halo = true;
    c.local_only_negatives = true;
    break;
  case Variant::splpg:
    c.partitioner = PartitionStrategy::greedy_cut;
    c.sharing = SharingMode::sparsified;
    c.full_neighbor_halo = true;
    c.local_only_negatives = false;
    break;
  case Variant::splpg_plus:
    c.partitioner = PartitionStrategy::greedy_cut;
    c.sharing = SharingMode::complete;
    c.full_neighbor_halo = true;
    c.local_only_negatives = false;
    break;
  case Variant::centralized:
    c.num_parts = 1;
    c.sharing = SharingMode::none;
    c.full_neighbor_halo = true;
    c.local_only_negatives = false;
    break;
  }
  return c;
}

CommLedger::CommLedger(std::size_t epochs, int workers, std::size_t feature_dim)
    : epochs_(epochs), workers_(workers), feature_dim_(feature_dim),
      cells_(epochs * static_cast<std::size_t>(workers)) {}

void CommLedger::bill(std::size_t epoch, int worker, std::uint64_t nodes, std::uint64_t edges) {
  Cell &c = cells_.at(epoch * static_cast<std::size_t>(workers_) + static_cast<std::size_t>(worker));
  c.remote_nodes += nodes;
  c.remote_edges += edges;
  c.feature_bytes += nodes * kFeatureScalarBytes * feature_dim_;
  c.structure_bytes += edges * 2 * sizeof(NodeId);
}

void CommLedger::bill_setup(std::uint64_t feature_bytes, std::uint64_t structure_bytes) {
  setup_feature_bytes_ += feature_bytes;
  setup_structure_bytes_ += structure_bytes;
}

const CommLedger::Cell &CommLedger::cell(std::size_t epoch, int worker) const {
  return cells_.at(epoch * static_cast<std::size_t>(workers_) + static_cast<std::size_t>(worker));
}

CommLedger::Cell CommLedger::epoch_total(std::size_t epoch) const {
  Cell total;
  for (int w = 0; w < workers_; ++w) {
    const Cell &c = cell(epoch, w);
    total.feature_bytes += c.feature_bytes;
    total.structure_bytes += c.structure_bytes;
    total.remote_nodes += c.remote_nodes;
    total.remote_edges += c.remote_edges;
  }
  return total;
}

void CommLedger::write_csv(std::ostream &out, bool header, std::string_view tag_header,
                           std::string_view tag_values) const {
  const bool tagged = !tag_header.empty();
  if (header) {
    out << "phase,epoch,worker,feature_bytes,structure_bytes,remote_nodes,remote_edges";
    if (tagged) {
      out << ',' << tag_header;
    }
    out << '\n';
  }
  const auto end_row = [&] {
    if (tagged) {
      out << ',' << tag_values;
    }
    out << '\n';
  };
  out << "setup,0,-1," << setup_feature_bytes_ << ',' << setup_structure_bytes_ << ",0,0";
  end_row();
  for (std::size_t e = 0; e < epochs_; ++e) {
    for (int w = 0; w < workers_; ++w) {
      const Cell &c = cell(e, w);
      out << "train," << e + 1 << ',' << w << ',' << c.feature_bytes << ',' << c.structure_bytes << ','
          << c.remote_nodes << ',' << c.remote_edges;
      end_row();
    }
  }
}

void account_transfer(const ComputationGraph &cg, int worker, std::size_t epoch, CommLedger &ledger,
                      SharingMode sharing) {
  if (sharing == SharingMode::none) {
    return;
  }
  // remote_nodes and remote_edges are distinct within the batch already.
  if (cg.remote_nodes.empty() && cg.remote_edges.empty()) {
    return;
  }
  ledger.bill(epoch, worker, cg.remote_nodes.size(), cg.remote_edges.size());
}

namespace {

std::vector<Matrix> mean_of(std::span<const std::vector<Matrix>> sets) {
  if (sets.empty()) {
    throw std::invalid_argument("nothing to average");
  }
  std::vector<Matrix> mean = sets[0];
  for (std::size_t w = 1; w < sets.size(); ++w) {
    if (sets[w].size() != mean.size()) {
      throw std::invalid_argument("replicas disagree on tensor count");
    }
    for (std::size_t i = 0; i < mean.size(); ++i) {
      if (sets[w][i].rows() != mean[i].rows() || sets[w][i].cols() != mean[i].cols()) {
        throw std::invalid_argument("replicas disagree on the shape of tensor " + std::to_string(i));
      }
      mean[i] += sets[w][i];
    }
  }
  if (sets.size() > 1) {
    const double scale = 1.0 / static_cast<double>(sets.size());
    for (auto &t : mean) {
      t *= scale;
    }
  }
  return mean;
}

} // namespace

std::vector<Matrix> sync_gradients(std::span<const std::vector<Matrix>> worker_grads) { return mean_of(worker_grads); }

std::vector<Matrix> sync_models(std::span<const std::vector<Matrix>> worker_params) { return mean_of(worker_params); }

void write_metrics_csv(std::ostream &out, std::span<const EpochMetrics> history, std::string_view variant,
                       bool header, std::string_view tag_header, std::string_view tag_values) {
  const bool tagged = !tag_header.empty();
  if (header) {
    out << "epoch,variant,train_loss,val_hits,feature_bytes,structure_bytes";
    if (tagged) {
      out << ',' << tag_header;
    }
    out << '\n';
  }
  char buf[64];
  for (const auto &m : history) {
    out << m.epoch << ',' << variant << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", m.train_loss);
    out << buf << ',';
    std::snprintf(buf, sizeof(buf), "%.17g", m.val_hits);
    out << buf << ',' << m.feature_bytes << ',' << m.structure_bytes;
    if (tagged) {
      out << ',' << tag_values;
    }
    out << '\n';
  }
}

namespace {

/// Everything one simulated worker needs between barriers.
struct WorkerState {
  int id = 0;
  const GraphView *view = nullptr;
  std::vector<Edge> owned;
  NegativePool pool;
};

struct StepResult {
  bool active = false;
  double loss = 0.0;
  std::vector<Matrix> gradients;
  ComputationGraph cg;
};

StepResult worker_step(const Graph &g, const WorkerState &worker, const PositiveSchedule &schedule, std::size_t batch,
                       std::size_t per_batch, std::size_t epoch, const TrainConfig &config, const ModelParams &params) {
  StepResult out;
  std::vector<LabeledPair> pairs = schedule.batch(batch, per_batch);
  if (pairs.empty()) {
    return out;
  }
  out.active = true;
  const auto w = static_cast<std::uint64_t>(worker.id);
  Rng neg_rng(derive_seed(config.sample_seed, {0x4e6, epoch, batch, w}));
  const NegativePool everything;
  const std::size_t positives = pairs.size();
  for (std::size_t i = 0; i < positives; ++i) {
    const NodeId u = pairs[i].src;
    // A source adjacent to every local candidate falls back to all nodes.
    const NegativePool &pool =
        worker.pool.everything() || available_destinations(g, u, worker.pool) > 0 ? worker.pool : everything;
    const std::vector<LabeledPair> neg = negative_per_source(std::span<const NodeId>(&u, 1), g, neg_rng, pool);
    pairs.push_back(neg[0]);
  }
  const std::vector<NodeId> seeds = pair_endpoints(pairs);
  Rng cg_rng(derive_seed(config.sample_seed, {0xc6, epoch, batch, w}));
  out.cg = build_computation_graph(seeds, *worker.view, config.fanouts, cg_rng);
  const Matrix features = gather_features(g, out.cg.all_nodes());
  const std::vector<PairIndex> idx = pair_indices(out.cg, pairs);
  std::vector<std::uint8_t> labels(pairs.size());
  for (std::size_t i = 0; i < pairs.size(); ++i) {
    labels[i] = pairs[i].label;
  }
  LossAndGradients lg = loss_and_gradients(out.cg, features, params, idx, labels);
  out.loss = lg.loss;
  out.gradients = std::move(lg.gradients);
  return out;
}

template <typename Fn>
void for_each_worker(std::size_t count, std::size_t threads, Fn &&fn) {
  if (threads <= 1 || count <= 1) {
    for (std::size_t i = 0; i < count; ++i) {
      fn(i);
    }
    return;
  }
  const std::size_t used = std::min(threads, count);
  std::vector<std::jthread> pool;
  std::vector<std::exception_ptr> errors(used);
  for (std::size_t t = 0; t < used; ++t) {
    pool.emplace_back([&, t] {
      try {
        for (std::size_t i = t; i < count; i += used) {
          fn(i);
        }
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  pool.clear();
  for (const auto &e : errors) {
    if (e) {
      std::rethrow_exception(e);
    }
  }
}

double max_divergence(const std::vector<ModelParams> &replicas) {
  double worst = 0.0;
  for (std::size_t w = 1; w < replicas.size(); ++w) {
    for (std::size_t i = 0; i < replicas[0].tensors.size(); ++i) {
      worst = std::max(worst, (replicas[w].tensors[i] - replicas[0].tensors[i]).cwiseAbs().maxCoeff());
    }
  }
  return worst;
}

std::size_t resolve_k(const EdgeSplit &split, const TrainConfig &config) {
  const std::size_t available = std::min(split.val_neg.size(), split.test_neg.size());
  const std::size_t k = config.eval_k == 0 ? default_hits_k(available) : config.eval_k;
  if (k > available) {
    throw std::invalid_argument("eval_k " + std::to_string(k) + " exceeds the " + std::to_string(available) +
                                " evaluation negatives");
  }
  return k;
}

/// The synchronous training loop shared by distributed and centralized runs.
TrainResult train_loop(const Graph &g, const Graph &message_graph, const EdgeSplit &split,
                       const std::vector<WorkerState> &workers, const TrainConfig &config, TrainResult result) {
  const std::size_t p = workers.size();
  ModelSpec spec = config.model;
  spec.input_dim = g.feature_dim();
  spec.num_layers = static_cast<int>(config.fanouts.size());
  const ModelParams initial = init_params(spec, config.init_seed);
  std::vector<ModelParams> replicas(p, initial);
  std::vector<OptimizerState> optimizers(p, OptimizerState::for_params(initial, config.lr));
  result.k = resolve_k(split, config);
  result.ledger = CommLedger(config.epochs, static_cast<int>(p), g.feature_dim());
  const std::size_t ks[] = {result.k};
  const std::size_t per_batch = std::max<std::size_t>(1, config.batch_size / 2);
  bool have_best = false;
  std::uint64_t cumulative_features = 0;
  std::uint64_t cumulative_structure = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    std::vector<PositiveSchedule> schedules;
    std::size_t batches = 0;
    for (const auto &w : workers) {
      schedules.emplace_back(w.owned, config.sample_seed, epoch, w.id);
      batches = std::max(batches, schedules.back().num_batches(per_batch));
    }
    if (batches == 0) {
      throw std::invalid_argument("no worker owns a training edge");
    }
    double loss_total = 0.0;
    std::size_t loss_count = 0;
    std::vector<char> stepped(p, 0);
    std::vector<StepResult> steps(p);
    for (std::size_t b = 0; b < batches; ++b) {
      for_each_worker(p, config.threads, [&](std::size_t w) {
        steps[w] = worker_step(g, workers[w], schedules[w], b, per_batch, epoch, config, replicas[w]);
      });
      // Barrier: merge ledgers and losses in worker order.
      for (std::size_t w = 0; w < p; ++w) {
        if (!steps[w].active) {
          continue;
        }
        if (!std::isfinite(steps[w].loss)) {
          throw NonFiniteError(spec.num_layers + 1, "non-finite loss on worker " + std::to_string(w) + " epoch " +
                                                        std::to_string(epoch + 1) + " batch " + std::to_string(b));
        }
        loss_total += steps[w].loss;
        ++loss_count;
        account_transfer(steps[w].cg, static_cast<int>(w), epoch, result.ledger, config.sharing);
      }
      if (config.sync_mode == SyncMode::gradient_avg) {
        std::vector<std::vector<Matrix>> grads;
        grads.reserve(p);
        for (std::size_t w = 0; w < p; ++w) {
          grads.push_back(steps[w].active ? std::move(steps[w].gradients) : zeros_like(replicas[w].tensors));
        }
        const std::vector<Matrix> mean = sync_gradients(grads);
        adam_step(replicas[0], mean, optimizers[0]);
        for (std::size_t w = 1; w < p; ++w) {
          replicas[w].tensors = replicas[0].tensors;
          optimizers[w] = optimizers[0];
        }
        result.max_replica_divergence = std::max(result.max_replica_divergence, max_divergence(replicas));
      } else {
        for (std::size_t w = 0; w < p; ++w) {
          if (steps[w].active) {
            adam_step(replicas[w], steps[w].gradients, optimizers[w]);
            stepped[w] = 1;
          }
        }
        if ((b + 1) % config.sync_period == 0 || b + 1 == batches) {
          std::vector<std::vector<Matrix>> active;
          for (std::size_t w = 0; w < p; ++w) {
            if (stepped[w]) {
              active.push_back(replicas[w].tensors);
            }
          }
          if (!active.empty()) {
            const std::vector<Matrix> mean = sync_models(active);
            for (auto &r : replicas) {
              r.tensors = mean;
            }
          }
          std::fill(stepped.begin(), stepped.end(), 0);
          result.max_replica_divergence = std::max(result.max_replica_divergence, max_divergence(replicas));
        }
      }
    }

    const EvalReport val =
        evaluate_model(replicas[0], split, message_graph, config.fanouts, ks, config.eval_seed, EvalSet::validation);
    const CommLedger::Cell bytes = result.ledger.epoch_total(epoch);
    cumulative_features += bytes.feature_bytes;
    cumulative_structure += bytes.structure_bytes;
    EpochMetrics m;
    m.epoch = epoch + 1;
    m.train_loss = loss_count == 0 ? 0.0 : loss_total / static_cast<double>(loss_count);
    m.val_hits = val.hits[0];
    m.feature_bytes = cumulative_features;
    m.structure_bytes = cumulative_structure;
    result.history.push_back(m);
    if (!have_best || m.val_hits > result.best_val_hits) {
      have_best = true;
      result.best_val_hits = m.val_hits;
      result.best_epoch = m.epoch;
      result.best_params = replicas[0];
    }
    if (config.checkpoint_period > 0 && (epoch + 1) % config.checkpoint_period == 0) {
      std::filesystem::create_directories(config.checkpoint_dir);
      save_checkpoint(replicas[0],
                      config.checkpoint_dir / (config.label + "_epoch" + std::to_string(epoch + 1) + ".ckpt"));
    }
  }
  result.final_params = replicas[0];
  const EvalReport test =
      evaluate_model(result.best_params, split, message_graph, config.fanouts, ks, config.eval_seed, EvalSet::test);
  result.test_hits = test.hits[0];
  result.test_report = test;
  return result;
}

} // namespace

TrainResult run_training(const Graph &g, const EdgeSplit &split, const TrainConfig &config) {
  config.validate();
  const Graph message_graph = training_graph(g, split);
  const PartitionPlan plan = make_partition(message_graph, config.partitioner, config.num_parts,
                                            config.num_miniclusters == 0 ? 16 * config.num_parts
                                                                         : config.num_miniclusters,
                                            config.partition_seed);
  const std::vector<WorkerSubgraph> subs = build_worker_subgraphs(message_graph, plan, config.full_neighbor_halo);

  TrainResult result;
  result.edge_cut = plan.edge_cut(message_graph);
  SparsifiedStore store;
  if (config.sharing == SharingMode::sparsified) {
    std::vector<SparsifiedSubgraph> parts;
    SparsifyOptions options;
    options.alpha = config.alpha;
    options.seed = config.sparsify_seed;
    options.degree_scope = config.degree_scope;
    for (const auto &sub : subs) {
      if (sub.edges().empty()) {
        // Nothing to share from an edgeless part; keep its node set.
        SparsifiedSubgraph empty;
        empty.part_id = sub.part_id;
        empty.nodes = sub.local_to_global;
        parts.push_back(std::move(empty));
        continue;
      }
      parts.push_back(sparsify_subgraph(sub, options, &message_graph));
      result.subgraph_edges += parts.back().source_edge_count;
    }
    store = SparsifiedStore(std::move(parts), g.num_nodes());
    result.sparsified_edges = store.total_edges();
  }

  std::vector<GraphView> views;
  views.reserve(subs.size());
  for (const auto &sub : subs) {
    views.emplace_back(message_graph, plan, sub, config.sharing,
                       config.sharing == SharingMode::sparsified ? &store : nullptr);
  }
  std::vector<WorkerState> workers(subs.size());
  std::uint64_t halo_nodes = 0;
  for (std::size_t w = 0; w < subs.size(); ++w) {
    workers[w].id = static_cast<int>(w);
    workers[w].view = &views[w];
    workers[w].owned = owned_train_edges(split.train_pos, plan, static_cast<int>(w), !config.full_neighbor_halo);
    if (config.local_only_negatives && subs[w].owned_nodes.size() < static_cast<std::size_t>(g.num_nodes())) {
      workers[w].pool = NegativePool(subs[w].owned_nodes, g.num_nodes());
    }
    halo_nodes += subs[w].halo_nodes.size();
  }

  TrainResult trained = train_loop(g, message_graph, split, workers, config, std::move(result));
  // One-off costs: halo feature caches, and the sparsified subgraphs placed in
  // shared memory (two ids and one float weight per edge).
  trained.ledger.bill_setup(halo_nodes * kFeatureScalarBytes * g.feature_dim(),
                            trained.sparsified_edges * (2 * sizeof(NodeId) + sizeof(float)));
  return trained;
}

TrainResult run_centralized(const Graph &g, const EdgeSplit &split, const TrainConfig &config) {
  TrainConfig c = config;
  c.num_parts = 1;
  c.sharing = SharingMode::none;
  c.validate();
  const Graph message_graph = training_graph(g, split);
  const GraphView view = GraphView::whole(message_graph);
  std::vector<WorkerState> workers(1);
  workers[0].id = 0;
  workers[0].view = &view;
  for (const Edge &e : split.train_pos) {
    workers[0].owned.push_back(canonical(e.u, e.v));
  }
  return train_loop(g, message_graph, split, workers, c, TrainResult{});
}

TrainResult run_baseline(const Graph &g, const EdgeSplit &split, Variant variant, const TrainConfig &config) {
  const TrainConfig c = apply_variant(config, variant);
  if (variant == Variant::centralized) {
    return run_centralized(g, split, c);
  }
  return run_training(g, split, c);
}

} // namespace lpsim
