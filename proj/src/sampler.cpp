#include "lpsim/sampler.hpp"

#include <algorithm>
#include <numeric>
#include <ostream>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <unordered_set>

namespace lpsim {

std::string_view to_string(SharingMode m) {
  switch (m) {
  case SharingMode::none:
    return "none";
  case SharingMode::complete:
    return "complete";
  case SharingMode::sparsified:
    return "sparsified";
  }
  return "?";
}

SharingMode parse_sharing_mode(std::string_view name) {
  if (name == "none") {
    return SharingMode::none;
  }
  if (name == "complete") {
    return SharingMode::complete;
  }
  if (name == "sparsified") {
    return SharingMode::sparsified;
  }
  throw std::invalid_argument("unknown sharing mode '" + std::string(name) + "'");
}

SparsifiedStore::SparsifiedStore(std::vector<SparsifiedSubgraph> parts, NodeId num_nodes)
    : parts_(std::move(parts)) {
  adjacency_.resize(parts_.size());
  for (std::size_t p = 0; p < parts_.size(); ++p) {
    const SparsifiedSubgraph &s = parts_[p];
    Adjacency &a = adjacency_[p];
    a.row_of.assign(static_cast<std::size_t>(num_nodes), -1);
    for (std::size_t i = 0; i < s.nodes.size(); ++i) {
      a.row_of[static_cast<std::size_t>(s.nodes[i])] = static_cast<NodeId>(i);
    }
    std::vector<EdgeIndex> degree(s.nodes.size() + 1, 0);
    for (const Edge &e : s.edges) {
      ++degree[static_cast<std::size_t>(a.row_of[e.u]) + 1];
      ++degree[static_cast<std::size_t>(a.row_of[e.v]) + 1];
    }
    std::partial_sum(degree.begin(), degree.end(), degree.begin());
    a.offsets = degree;
    a.targets.resize(static_cast<std::size_t>(a.offsets.back()));
    a.weights.resize(a.targets.size());
    std::vector<EdgeIndex> cursor(a.offsets.begin(), a.offsets.end() - 1);
    // Edges are sorted (u, v) with u < v, so each row fills in increasing id
    // order for its upper neighbors; sort rows afterwards to merge both sides.
    for (std::size_t i = 0; i < s.edges.size(); ++i) {
      const Edge e = s.edges[i];
      const auto ru = static_cast<std::size_t>(a.row_of[e.u]);
      const auto rv = static_cast<std::size_t>(a.row_of[e.v]);
      a.targets[static_cast<std::size_t>(cursor[ru])] = e.v;
      a.weights[static_cast<std::size_t>(cursor[ru]++)] = s.weights[i];
      a.targets[static_cast<std::size_t>(cursor[rv])] = e.u;
      a.weights[static_cast<std::size_t>(cursor[rv]++)] = s.weights[i];
    }
    std::vector<std::pair<NodeId, double>> row;
    for (std::size_t r = 0; r < s.nodes.size(); ++r) {
      const auto b = static_cast<std::size_t>(a.offsets[r]);
      const auto e = static_cast<std::size_t>(a.offsets[r + 1]);
      row.clear();
      for (std::size_t k = b; k < e; ++k) {
        row.emplace_back(a.targets[k], a.weights[k]);
      }
      std::sort(row.begin(), row.end());
      for (std::size_t k = b; k < e; ++k) {
        a.targets[k] = row[k - b].first;
        a.weights[k] = row[k - b].second;
      }
    }
  }
}

NeighborList SparsifiedStore::neighbors(int part, NodeId u) const {
  const Adjacency &a = adjacency_[static_cast<std::size_t>(part)];
  const NodeId r = a.row_of[static_cast<std::size_t>(u)];
  if (r < 0) {
    return {{}, {}, Locality::remote};
  }
  const auto b = static_cast<std::size_t>(a.offsets[r]);
  const auto len = static_cast<std::size_t>(a.offsets[r + 1] - a.offsets[r]);
  return {{a.targets.data() + b, len}, {a.weights.data() + b, len}, Locality::remote};
}

std::size_t SparsifiedStore::total_edges() const {
  std::size_t total = 0;
  for (const auto &p : parts_) {
    total += p.edges.size();
  }
  return total;
}

GraphView GraphView::whole(const Graph &g) {
  GraphView view;
  view.graph_ = &g;
  return view;
}

GraphView::GraphView(const Graph &g, const PartitionPlan &plan, const WorkerSubgraph &local, SharingMode mode,
                     const SparsifiedStore *store)
    : graph_(&g), plan_(&plan), local_(&local), mode_(mode), store_(store) {
  if (mode == SharingMode::sparsified && store == nullptr) {
    throw std::invalid_argument("sparsified sharing needs a sparsified store");
  }
  local_rows_global_.reserve(local.local_targets.size());
  for (const NodeId l : local.local_targets) {
    local_rows_global_.push_back(local.local_to_global[static_cast<std::size_t>(l)]);
  }
}

NeighborList GraphView::neighbors(NodeId u) const {
  if (local_ == nullptr) {
    return {graph_->neighbors(u), graph_->neighbor_weights(u), Locality::local};
  }
  const auto local_row = [&](NodeId l) -> NeighborList {
    const auto b = static_cast<std::size_t>(local_->local_offsets[l]);
    return {{local_rows_global_.data() + b, static_cast<std::size_t>(local_->local_degree(l))}, {}, Locality::local};
  };
  const NodeId l = local_->global_to_local[static_cast<std::size_t>(u)];
  if (l >= 0 && l < static_cast<NodeId>(local_->owned_nodes.size())) {
    return local_row(l);
  }
  switch (mode_) {
  case SharingMode::none:
    // Halo rows only reach back into the part.
    return l >= 0 ? local_row(l) : NeighborList{};
  case SharingMode::complete:
    return {graph_->neighbors(u), graph_->neighbor_weights(u), Locality::remote};
  case SharingMode::sparsified:
    return store_->neighbors(plan_->part_of(u), u);
  }
  return {};
}

void write_batch_csv(std::ostream &out, const Batch &batch, bool header) {
  if (header) {
    out << "u,v,label,worker,batch\n";
  }
  for (const LabeledPair &p : batch.pairs) {
    out << p.src << ',' << p.dst << ',' << static_cast<int>(p.label) << ',' << batch.worker_id << ','
        << batch.batch_index << '\n';
  }
}

std::vector<Edge> owned_train_edges(std::span<const Edge> train_edges, const PartitionPlan &plan, int worker,
                                    bool internal_only) {
  std::vector<Edge> out;
  for (const Edge &e : train_edges) {
    const Edge c = canonical(e.u, e.v);
    if (plan.part_of(c.u) != worker) {
      continue;
    }
    if (internal_only && plan.part_of(c.v) != worker) {
      continue;
    }
    out.push_back(c);
  }
  return out;
}

PositiveSchedule::PositiveSchedule(std::span<const Edge> owned, std::uint64_t seed, std::size_t epoch, int worker) {
  Rng rng(derive_seed(seed, {0x905, epoch, static_cast<std::uint64_t>(worker)}));
  order_.reserve(owned.size());
  for (const Edge &e : owned) {
    order_.push_back({e.u, e.v, 1});
  }
  rng.shuffle(std::span<LabeledPair>(order_));
  for (LabeledPair &p : order_) {
    if (rng.next() & 1U) {
      std::swap(p.src, p.dst);
    }
  }
}

std::vector<LabeledPair> PositiveSchedule::batch(std::size_t index, std::size_t per_batch) const {
  const std::size_t begin = std::min(order_.size(), index * per_batch);
  const std::size_t end = std::min(order_.size(), begin + per_batch);
  return {order_.begin() + static_cast<std::ptrdiff_t>(begin), order_.begin() + static_cast<std::ptrdiff_t>(end)};
}

std::vector<LabeledPair> positive_batch(std::span<const Edge> owned, std::size_t batch_size, std::uint64_t seed,
                                        std::size_t epoch, std::size_t batch_index, int worker) {
  if (owned.empty()) {
    throw std::invalid_argument("worker " + std::to_string(worker) + " owns no training edges");
  }
  const std::size_t per_batch = std::max<std::size_t>(1, batch_size / 2);
  return PositiveSchedule(owned, seed, epoch, worker).batch(batch_index, per_batch);
}

NegativePool::NegativePool(std::vector<NodeId> candidates, NodeId num_nodes) : candidates_(std::move(candidates)) {
  if (candidates_.empty()) {
    throw std::invalid_argument("negative pool must not be empty");
  }
  member_.assign(static_cast<std::size_t>(num_nodes), 0);
  for (const NodeId u : candidates_) {
    member_[static_cast<std::size_t>(u)] = 1;
  }
}

std::size_t available_destinations(const Graph &g, NodeId source, const NegativePool &pool) {
  if (pool.everything()) {
    return static_cast<std::size_t>(g.num_nodes() - 1 - g.degree(source));
  }
  std::size_t blocked = pool.contains(source) ? 1 : 0;
  for (const NodeId v : g.neighbors(source)) {
    blocked += pool.contains(v) ? 1 : 0;
  }
  return pool.candidates().size() - blocked;
}

std::vector<LabeledPair> negative_per_source(std::span<const NodeId> sources, const Graph &g, Rng &rng,
                                             const NegativePool &pool) {
  std::vector<LabeledPair> out;
  out.reserve(sources.size());
  for (const NodeId u : sources) {
    if (available_destinations(g, u, pool) == 0) {
      throw std::invalid_argument("node " + std::to_string(u) + " is adjacent to every candidate destination");
    }
    NodeId v = u;
    do {
      v = pool.everything() ? static_cast<NodeId>(rng.below(static_cast<std::uint64_t>(g.num_nodes())))
                            : pool.candidates()[rng.below(pool.candidates().size())];
    } while (v == u || g.has_edge(u, v));
    out.push_back({u, v, 0});
  }
  return out;
}

std::vector<Edge> negative_global_uniform(const Graph &g, std::size_t count, Rng &rng) {
  const auto n = static_cast<std::uint64_t>(g.num_nodes());
  const std::uint64_t pairs = n * (n - 1) / 2;
  const auto available = pairs - static_cast<std::uint64_t>(g.num_edges());
  if (count > available) {
    throw std::invalid_argument("requested " + std::to_string(count) + " negative pairs but only " +
                                std::to_string(available) + " non-edges exist");
  }
  std::vector<Edge> out;
  out.reserve(count);
  if (count * 2 > available) {
    // Dense request: enumerate the complement and take a random prefix.
    std::vector<Edge> all;
    all.reserve(available);
    for (NodeId u = 0; u < g.num_nodes(); ++u) {
      for (NodeId v = u + 1; v < g.num_nodes(); ++v) {
        if (!g.has_edge(u, v)) {
          all.push_back({u, v});
        }
      }
    }
    rng.shuffle(std::span<Edge>(all));
    out.assign(all.begin(), all.begin() + static_cast<std::ptrdiff_t>(count));
    return out;
  }
  struct EdgeHash {
    std::size_t operator()(const Edge &e) const {
      return static_cast<std::size_t>(mix64((static_cast<std::uint64_t>(e.u) << 32) ^ static_cast<std::uint32_t>(e.v)));
    }
  };
  std::unordered_set<Edge, EdgeHash> seen;
  seen.reserve(count * 2);
  while (out.size() < count) {
    const auto a = static_cast<NodeId>(rng.below(n));
    const auto b = static_cast<NodeId>(rng.below(n));
    if (a == b || g.has_edge(a, b)) {
      continue;
    }
    const Edge e = canonical(a, b);
    if (seen.insert(e).second) {
      out.push_back(e);
    }
  }
  return out;
}

std::vector<NodeId> pair_endpoints(std::span<const LabeledPair> pairs) {
  std::vector<NodeId> seeds;
  std::unordered_set<NodeId> seen;
  seen.reserve(pairs.size() * 2);
  for (const LabeledPair &p : pairs) {
    for (const NodeId u : {p.src, p.dst}) {
      if (seen.insert(u).second) {
        seeds.push_back(u);
      }
    }
  }
  return seeds;
}

ComputationGraph build_computation_graph(std::span<const NodeId> seeds, const GraphView &view,
                                         std::span<const int> fanouts, Rng &rng) {
  for (const int f : fanouts) {
    if (f < 1) {
      throw std::invalid_argument("fanouts must be positive");
    }
  }
  ComputationGraph cg;
  std::unordered_map<NodeId, std::int32_t> position;
  position.reserve(seeds.size() * 8);
  std::vector<NodeId> first;
  for (const NodeId u : seeds) {
    if (u < 0 || u >= view.num_nodes()) {
      throw std::out_of_range("seed " + std::to_string(u) + " is not a node of the view");
    }
    if (position.emplace(u, static_cast<std::int32_t>(first.size())).second) {
      first.push_back(u);
    }
  }
  cg.layers.push_back(std::move(first));

  std::vector<std::uint32_t> scratch;
  for (const int fanout : fanouts) {
    const std::vector<NodeId> &frontier = cg.layers.back();
    std::vector<NodeId> next = frontier;
    std::vector<SampledEdge> edges;
    for (std::size_t i = 0; i < frontier.size(); ++i) {
      const NodeId v = frontier[i];
      const NeighborList nbrs = view.neighbors(v);
      const std::size_t degree = nbrs.nodes.size();
      const std::size_t take = std::min<std::size_t>(static_cast<std::size_t>(fanout), degree);
      scratch.resize(degree);
      std::iota(scratch.begin(), scratch.end(), 0U);
      for (std::size_t k = 0; k < take; ++k) {
        const std::size_t j = k + static_cast<std::size_t>(rng.below(degree - k));
        std::swap(scratch[k], scratch[j]);
        const NodeId u = nbrs.nodes[scratch[k]];
        const double w = nbrs.weights.empty() ? 1.0 : nbrs.weights[scratch[k]];
        auto [it, inserted] = position.emplace(u, static_cast<std::int32_t>(next.size()));
        if (inserted) {
          next.push_back(u);
        }
        edges.push_back({static_cast<std::int32_t>(i), it->second, w});
        if (nbrs.locality == Locality::remote) {
          cg.remote_edges.push_back(canonical(v, u));
        }
      }
    }
    cg.hops.push_back(std::move(edges));
    cg.layers.push_back(std::move(next));
  }
  for (const NodeId u : cg.layers.back()) {
    if (!view.has_local_features(u)) {
      cg.remote_nodes.push_back(u);
    }
  }
  std::sort(cg.remote_nodes.begin(), cg.remote_nodes.end());
  std::sort(cg.remote_edges.begin(), cg.remote_edges.end());
  cg.remote_edges.erase(std::unique(cg.remote_edges.begin(), cg.remote_edges.end()), cg.remote_edges.end());
  return cg;
}

} // namespace lpsim
