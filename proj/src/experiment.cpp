#include "lpsim/experiment.hpp"

#include <algorithm>
#include <charconv>
#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <map>
#include <set>
#include <sstream>
#include <thread>

#include "CLI11.hpp"

#include "lpsim/random.hpp"

namespace lpsim {

namespace {

using Values = std::vector<std::string>;

std::string join(const Values &values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    out += (i == 0 ? "" : ",") + values[i];
  }
  return out;
}

std::string format_double(double x) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.17g", x);
  return buf;
}

template <typename T>
T parse_number(const std::string &key, const std::string &text) {
  T value{};
  const char *first = text.data();
  const char *last = text.data() + text.size();
  const auto [ptr, ec] = std::from_chars(first, last, value);
  if (ec != std::errc() || ptr != last) {
    throw ConfigError(key, "'" + text + "' is not a valid number");
  }
  return value;
}

bool parse_bool(const std::string &key, const std::string &text) {
  if (text == "true" || text == "1" || text == "yes" || text == "on") {
    return true;
  }
  if (text == "false" || text == "0" || text == "no" || text == "off") {
    return false;
  }
  throw ConfigError(key, "'" + text + "' is not a boolean");
}

const std::string &single(const std::string &key, const Values &values) {
  if (values.size() != 1) {
    throw ConfigError(key, "expects exactly one value");
  }
  return values[0];
}

/// Wraps a parser of an enum-like name so that its std::invalid_argument turns
/// into a ConfigError for `key`.
template <typename Fn>
auto named(const std::string &key, Fn &&fn) -> decltype(fn()) {
  try {
    return fn();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(key, e.what());
  }
}

SyntheticSpec &synthetic(ExperimentConfig &c) {
  if (!c.graph.synthetic) {
    c.graph.synthetic = SyntheticSpec{};
  }
  return *c.graph.synthetic;
}

std::string_view kind_name(SyntheticKind k) {
  switch (k) {
  case SyntheticKind::erdos_renyi:
    return "erdos_renyi";
  case SyntheticKind::barabasi_albert:
    return "barabasi_albert";
  case SyntheticKind::sbm:
    return "sbm";
  }
  return "?";
}

struct KeySpec {
  std::string name;
  bool affects_results;
  std::function<void(ExperimentConfig &, const std::string &, const Values &)> set;
  std::function<std::string(const ExperimentConfig &)> get;
};

template <typename T>
std::string to_text(const std::vector<T> &values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) {
    if constexpr (std::is_floating_point_v<T>) {
      out += (i == 0 ? "" : ",") + format_double(values[i]);
    } else {
      out += (i == 0 ? "" : ",") + std::to_string(values[i]);
    }
  }
  return out;
}

std::string optional_seed(const std::optional<std::uint64_t> &s) { return s ? std::to_string(*s) : "derived"; }

const std::vector<KeySpec> &key_table() {
  static const std::vector<KeySpec> table = [] {
    std::vector<KeySpec> t;
    const auto add = [&](std::string name, bool affects, auto set, auto get) {
      t.push_back({std::move(name), affects, set, get});
    };
    // experiment
    add("experiment.output_dir", false,
        [](ExperimentConfig &c, const std::string &k, const Values &v) { c.output_dir = single(k, v); },
        [](const ExperimentConfig &c) { return c.output_dir.string(); });
    add("experiment.variants", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          if (v.empty()) {
            throw ConfigError(k, "variant list must not be empty");
          }
          c.variants.clear();
          for (const auto &name : v) {
            c.variants.push_back(named(k, [&] { return parse_variant(name); }));
          }
        },
        [](const ExperimentConfig &c) {
          Values names;
          for (const Variant v : c.variants) {
            names.emplace_back(to_string(v));
          }
          return join(names);
        });
    add("experiment.seeds", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          if (v.empty()) {
            throw ConfigError(k, "seed list must not be empty");
          }
          c.seeds.clear();
          for (const auto &s : v) {
            c.seeds.push_back(parse_number<std::uint64_t>(k, s));
          }
        },
        [](const ExperimentConfig &c) { return to_text(c.seeds); });
    add("experiment.reference", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) { c.reference = parse_bool(k, single(k, v)); },
        [](const ExperimentConfig &c) { return std::string(c.reference ? "true" : "false"); });
    add("experiment.parallel_runs", false,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.parallel_runs = parse_number<std::size_t>(k, single(k, v));
          if (c.parallel_runs < 1) {
            throw ConfigError(k, "must be at least 1");
          }
        },
        [](const ExperimentConfig &c) { return std::to_string(c.parallel_runs); });
    // graph
    add("graph.edges", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) { c.graph.edges = single(k, v); },
        [](const ExperimentConfig &c) { return c.graph.edges.string(); });
    add("graph.features", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) { c.graph.features = single(k, v); },
        [](const ExperimentConfig &c) { return c.graph.features.string(); });
    add("graph.kind", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          const std::string &name = single(k, v);
          SyntheticSpec &s = synthetic(c);
          if (name == "erdos_renyi" || name == "er") {
            s.kind = SyntheticKind::erdos_renyi;
          } else if (name == "barabasi_albert" || name == "ba") {
            s.kind = SyntheticKind::barabasi_albert;
          } else if (name == "sbm") {
            s.kind = SyntheticKind::sbm;
          } else {
            throw ConfigError(k, "unknown graph kind '" + name + "'");
          }
        },
        [](const ExperimentConfig &c) {
          return c.graph.synthetic ? std::string(kind_name(c.graph.synthetic->kind)) : std::string("file");
        });
    add("graph.num_nodes", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          synthetic(c).num_nodes = parse_number<NodeId>(k, single(k, v));
        },
        [](const ExperimentConfig &c) {
          return c.graph.synthetic ? std::to_string(c.graph.synthetic->num_nodes) : std::string("-");
        });
    add("graph.edge_probability", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          synthetic(c).edge_probability = parse_number<double>(k, single(k, v));
        },
        [](const ExperimentConfig &c) {
          return c.graph.synthetic ? format_double(c.graph.synthetic->edge_probability) : std::string("-");
        });
    add("graph.attach_edges", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          synthetic(c).attach_edges = parse_number<int>(k, single(k, v));
        },
        [](const ExperimentConfig &c) {
          return c.graph.synthetic ? std::to_string(c.graph.synthetic->attach_edges) : std::string("-");
        });
    add("graph.block_sizes", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          auto &blocks = synthetic(c).block_sizes;
          blocks.clear();
          for (const auto &s : v) {
            blocks.push_back(parse_number<NodeId>(k, s));
          }
        },
        [](const ExperimentConfig &c) {
          return c.graph.synthetic ? to_text(c.graph.synthetic->block_sizes) : std::string("-");
        });
    add("graph.p_in", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          synthetic(c).p_in = parse_number<double>(k, single(k, v));
        },
        [](const ExperimentConfig &c) {
          return c.graph.synthetic ? format_double(c.graph.synthetic->p_in) : std::string("-");
        });
    add("graph.p_out", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          synthetic(c).p_out = parse_number<double>(k, single(k, v));
        },
        [](const ExperimentConfig &c) {
          return c.graph.synthetic ? format_double(c.graph.synthetic->p_out) : std::string("-");
        });
    add("graph.block_feature_signal", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          synthetic(c).block_feature_signal = parse_number<double>(k, single(k, v));
        },
        [](const ExperimentConfig &c) {
          return c.graph.synthetic ? format_double(c.graph.synthetic->block_feature_signal) : std::string("-");
        });
    add("graph.feature_dim", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.graph.feature_dim = parse_number<std::size_t>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::to_string(c.graph.feature_dim); });
    // split
    add("split.train", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.ratios.train = parse_number<double>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return format_double(c.ratios.train); });
    add("split.val", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.ratios.val = parse_number<double>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return format_double(c.ratios.val); });
    add("split.test", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.ratios.test = parse_number<double>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return format_double(c.ratios.test); });
    add("split.neg_multiplier", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.neg_multiplier = parse_number<int>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::to_string(c.neg_multiplier); });
    // train
    add("train.num_parts", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.num_parts = parse_number<int>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.num_parts); });
    add("train.alpha", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.alpha = parse_number<double>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return format_double(c.train.alpha); });
    add("train.fanouts", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.fanouts.clear();
          for (const auto &s : v) {
            c.train.fanouts.push_back(parse_number<int>(k, s));
          }
          c.train.model.num_layers = static_cast<int>(c.train.fanouts.size());
        },
        [](const ExperimentConfig &c) { return to_text(c.train.fanouts); });
    add("train.batch_size", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.batch_size = parse_number<std::size_t>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.batch_size); });
    add("train.lr", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.lr = parse_number<double>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return format_double(c.train.lr); });
    add("train.epochs", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.epochs = parse_number<std::size_t>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.epochs); });
    add("train.sync_mode", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.sync_mode = named(k, [&] { return parse_sync_mode(single(k, v)); });
        },
        [](const ExperimentConfig &c) { return std::string(to_string(c.train.sync_mode)); });
    add("train.sync_period", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.sync_period = parse_number<std::size_t>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.sync_period); });
    add("train.sharing_mode", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.sharing = named(k, [&] { return parse_sharing_mode(single(k, v)); });
        },
        [](const ExperimentConfig &c) { return std::string(to_string(c.train.sharing)); });
    add("train.partitioner", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.partitioner = named(k, [&] { return parse_partition_strategy(single(k, v)); });
        },
        [](const ExperimentConfig &c) { return std::string(to_string(c.train.partitioner)); });
    add("train.num_miniclusters", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.num_miniclusters = parse_number<NodeId>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.num_miniclusters); });
    add("train.degree_scope", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.degree_scope = named(k, [&] { return parse_degree_scope(single(k, v)); });
        },
        [](const ExperimentConfig &c) { return std::string(to_string(c.train.degree_scope)); });
    add("train.architecture", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.model.architecture = named(k, [&] { return parse_architecture(single(k, v)); });
        },
        [](const ExperimentConfig &c) { return std::string(to_string(c.train.model.architecture)); });
    add("train.predictor", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.model.predictor = named(k, [&] { return parse_predictor(single(k, v)); });
        },
        [](const ExperimentConfig &c) { return std::string(to_string(c.train.model.predictor)); });
    add("train.hidden_dim", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.model.hidden_dim = parse_number<std::size_t>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.model.hidden_dim); });
    add("train.use_edge_weights", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.model.use_edge_weights = parse_bool(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::string(c.train.model.use_edge_weights ? "true" : "false"); });
    add("train.full_neighbor_halo", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.full_neighbor_halo = parse_bool(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::string(c.train.full_neighbor_halo ? "true" : "false"); });
    add("train.local_only_negatives", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.local_only_negatives = parse_bool(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::string(c.train.local_only_negatives ? "true" : "false"); });
    add("train.eval_k", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.eval_k = parse_number<std::size_t>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.eval_k); });
    add("train.threads", false,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.threads = parse_number<std::size_t>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.threads); });
    add("train.checkpoint_period", false,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.train.checkpoint_period = parse_number<std::size_t>(k, single(k, v));
        },
        [](const ExperimentConfig &c) { return std::to_string(c.train.checkpoint_period); });
    // seeds
    const auto seed_key = [&](const std::string &name, std::optional<std::uint64_t> SeedOverrides::*member) {
      add("seeds." + name, true,
          [member](ExperimentConfig &c, const std::string &k, const Values &v) {
            c.seed_overrides.*member = parse_number<std::uint64_t>(k, single(k, v));
          },
          [member](const ExperimentConfig &c) { return optional_seed(c.seed_overrides.*member); });
    };
    seed_key("graph", &SeedOverrides::graph);
    seed_key("split", &SeedOverrides::split);
    seed_key("partition", &SeedOverrides::partition);
    seed_key("sparsify", &SeedOverrides::sparsify);
    seed_key("sample", &SeedOverrides::sample);
    seed_key("init", &SeedOverrides::init);
    seed_key("eval", &SeedOverrides::eval);
    // sweep
    add("sweep.alphas", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.sweep_alphas.clear();
          for (const auto &s : v) {
            c.sweep_alphas.push_back(parse_number<double>(k, s));
          }
          if (c.sweep_alphas.empty()) {
            throw ConfigError(k, "sweep grid must not be empty");
          }
        },
        [](const ExperimentConfig &c) { return to_text(c.sweep_alphas); });
    add("sweep.parts", true,
        [](ExperimentConfig &c, const std::string &k, const Values &v) {
          c.sweep_parts.clear();
          for (const auto &s : v) {
            c.sweep_parts.push_back(parse_number<int>(k, s));
          }
          if (c.sweep_parts.empty()) {
            throw ConfigError(k, "sweep grid must not be empty");
          }
        },
        [](const ExperimentConfig &c) { return to_text(c.sweep_parts); });
    return t;
  }();
  return table;
}

const KeySpec *find_key(const std::string &name) {
  for (const auto &k : key_table()) {
    if (k.name == name) {
      return &k;
    }
  }
  return nullptr;
}

void apply_key(ExperimentConfig &c, std::string name, const Values &values) {
  if (name.find('.') == std::string::npos) {
    name = "experiment." + name;
  }
  const KeySpec *spec = find_key(name);
  if (spec == nullptr) {
    throw ConfigError(name, "unknown key");
  }
  spec->set(c, name, values);
}

Values split_list(const std::string &text) {
  Values out;
  std::string current;
  for (const char ch : text) {
    if (ch == ',') {
      out.push_back(current);
      current.clear();
    } else if (ch != ' ' && ch != '[' && ch != ']' && ch != '"') {
      current += ch;
    }
  }
  if (!current.empty() || !out.empty()) {
    out.push_back(current);
  }
  return out;
}

void validate_config(const ExperimentConfig &c) {
  const bool files = !c.graph.edges.empty() || !c.graph.features.empty();
  if (files && c.graph.synthetic) {
    throw ConfigError("graph", "give either graph.edges/graph.features or a synthetic graph.kind, not both");
  }
  if (files && (c.graph.edges.empty() || c.graph.features.empty())) {
    throw ConfigError(c.graph.edges.empty() ? "graph.edges" : "graph.features",
                      "edge and feature files must be given together");
  }
  if (!files && !c.graph.synthetic) {
    throw ConfigError("graph.kind", "no graph: set graph.kind or graph.edges and graph.features");
  }
  if (c.graph.synthetic) {
    const SyntheticSpec &s = *c.graph.synthetic;
    if (c.graph.feature_dim == 0) {
      throw ConfigError("graph.feature_dim", "must be positive");
    }
    if (s.kind == SyntheticKind::sbm && s.block_sizes.empty()) {
      throw ConfigError("graph.block_sizes", "sbm needs block sizes");
    }
    if (s.kind != SyntheticKind::sbm && s.num_nodes < 2) {
      throw ConfigError("graph.num_nodes", "needs at least 2 nodes");
    }
    if (s.kind == SyntheticKind::erdos_renyi && !(s.edge_probability > 0.0 && s.edge_probability <= 1.0)) {
      throw ConfigError("graph.edge_probability", "must lie in (0, 1]");
    }
    if (s.kind == SyntheticKind::barabasi_albert && s.attach_edges < 1) {
      throw ConfigError("graph.attach_edges", "must be positive");
    }
  }
  if (std::abs(c.ratios.train + c.ratios.val + c.ratios.test - 1.0) > 1e-9) {
    throw ConfigError("split", "train, val and test ratios must sum to 1");
  }
  if (c.neg_multiplier < 1) {
    throw ConfigError("split.neg_multiplier", "must be positive");
  }
  if (c.variants.empty()) {
    throw ConfigError("experiment.variants", "variant list must not be empty");
  }
  for (const double a : c.sweep_alphas) {
    if (!(a > 0.0 && a <= 1.0)) {
      throw ConfigError("sweep.alphas", "every alpha must lie in (0, 1]");
    }
  }
  for (const int p : c.sweep_parts) {
    if (p < 1) {
      throw ConfigError("sweep.parts", "every part count must be at least 1");
    }
  }
  for (const Variant v : c.variants) {
    TrainConfig t = apply_variant(c.train, v);
    if (v == Variant::centralized) {
      t.sharing = SharingMode::none;
    }
    try {
      t.validate();
    } catch (const std::invalid_argument &e) {
      // validate() opens every message with the field name.
      const std::string what = e.what();
      const std::string field = what.substr(0, what.find(' '));
      throw ConfigError("train." + field,
                        std::string("variant ") + std::string(to_string(v)) + ": " + what);
    }
  }
}

} // namespace

ExperimentConfig parse_experiment_config(std::istream &in,
                                         const std::vector<std::pair<std::string, std::string>> &overrides) {
  ExperimentConfig config;
  std::vector<CLI::ConfigItem> items;
  try {
    CLI::ConfigTOML reader;
    items = reader.from_config(in);
  } catch (const CLI::Error &e) {
    throw ConfigError("", std::string("unreadable config: ") + e.what());
  }
  std::set<std::string> seen;
  for (const auto &item : items) {
    if (item.name == "++" || item.name == "--") {
      continue; // section markers
    }
    std::string name = item.fullname();
    if (name.find('.') == std::string::npos) {
      name = "experiment." + name;
    }
    if (!seen.insert(name).second) {
      throw ConfigError(name, "given more than once");
    }
    apply_key(config, name, item.inputs);
  }
  for (const auto &[key, value] : overrides) {
    apply_key(config, key, split_list(value));
  }
  validate_config(config);
  return config;
}

ExperimentConfig load_experiment_config(const std::filesystem::path &path,
                                        const std::vector<std::pair<std::string, std::string>> &overrides) {
  std::ifstream in(path);
  if (!in) {
    throw ConfigError("", "cannot open config file " + path.string());
  }
  ExperimentConfig config = parse_experiment_config(in, overrides);
  // Relative data paths are relative to the config file.
  const std::filesystem::path base = path.parent_path();
  if (!config.graph.edges.empty() && config.graph.edges.is_relative()) {
    config.graph.edges = base / config.graph.edges;
  }
  if (!config.graph.features.empty() && config.graph.features.is_relative()) {
    config.graph.features = base / config.graph.features;
  }
  return config;
}

std::string canonical_config(const ExperimentConfig &config) {
  std::string out;
  for (const auto &k : key_table()) {
    if (k.affects_results) {
      out += k.name + " = " + k.get(config) + "\n";
    }
  }
  return out;
}

std::uint64_t config_hash(const ExperimentConfig &config) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (const unsigned char ch : canonical_config(config)) {
    h ^= ch;
    h *= 0x100000001b3ULL;
  }
  return h;
}

RunSeeds resolve_seeds(const ExperimentConfig &config, std::uint64_t run_seed) {
  const SeedOverrides &o = config.seed_overrides;
  RunSeeds s;
  s.run = run_seed;
  s.graph = o.graph.value_or(derive_seed(run_seed, {0x67}));
  s.split = o.split.value_or(derive_seed(run_seed, {0x5b}));
  s.partition = o.partition.value_or(derive_seed(run_seed, {0x9a}));
  s.sparsify = o.sparsify.value_or(derive_seed(run_seed, {0x59}));
  s.sample = o.sample.value_or(derive_seed(run_seed, {0x5a}));
  s.init = o.init.value_or(derive_seed(run_seed, {0x1a}));
  s.eval = o.eval.value_or(derive_seed(run_seed, {0xe0}));
  return s;
}

Graph build_graph(const ExperimentConfig &config, std::uint64_t graph_seed) {
  if (config.graph.synthetic) {
    return generate_synthetic(*config.graph.synthetic, config.graph.feature_dim, graph_seed);
  }
  return load_graph(config.graph.edges, config.graph.features);
}

std::vector<PlannedRun> plan_runs(const ExperimentConfig &config) {
  const std::vector<int> parts = config.sweep_parts.empty() ? std::vector<int>{config.train.num_parts}
                                                            : config.sweep_parts;
  const std::vector<double> alphas = config.sweep_alphas.empty() ? std::vector<double>{config.train.alpha}
                                                                 : config.sweep_alphas;
  bool any_sparsified = false;
  bool any_complete = false;
  for (const Variant v : config.variants) {
    const SharingMode m = apply_variant(config.train, v).sharing;
    any_sparsified |= m == SharingMode::sparsified && v != Variant::centralized;
    any_complete |= m == SharingMode::complete && v != Variant::centralized;
  }
  std::vector<PlannedRun> runs;
  for (const std::uint64_t seed : config.seeds) {
    bool centralized_done = false;
    for (const int p : parts) {
      for (const Variant v : config.variants) {
        if (v == Variant::centralized) {
          if (!centralized_done) {
            runs.push_back({v, seed, config.train.alpha, 1, false});
            centralized_done = true;
          }
          continue;
        }
        if (apply_variant(config.train, v).sharing == SharingMode::sparsified) {
          for (const double a : alphas) {
            runs.push_back({v, seed, a, p, false});
          }
        } else {
          runs.push_back({v, seed, config.train.alpha, p, false});
        }
      }
      if (config.reference && any_sparsified && !any_complete) {
        runs.push_back({Variant::splpg_plus, seed, config.train.alpha, p, true});
      }
    }
  }
  return runs;
}

RunSummary summarize_run(const RunRecord &run) {
  RunSummary s;
  s.variant = std::string(to_string(run.variant));
  s.sharing = std::string(to_string(run.sharing));
  s.seed = run.seeds.run;
  s.alpha = run.alpha;
  s.num_parts = run.num_parts;
  s.reference_only = run.reference_only;
  s.k = run.result.k;
  s.epochs = run.epochs;
  s.best_epoch = run.result.best_epoch;
  s.best_val_hits = run.result.best_val_hits;
  s.test_hits = run.result.test_hits;
  s.positive_mean = run.result.test_report.positive_mean;
  s.negative_mean = run.result.test_report.negative_mean;
  if (!run.result.history.empty()) {
    s.train_bytes = run.result.history.back().feature_bytes + run.result.history.back().structure_bytes;
  }
  return s;
}

std::vector<SummaryRow> summarize(const std::vector<RunSummary> &runs, std::vector<SummaryRow> *references) {
  struct Group {
    SummaryRow row;
    std::string sharing;
    bool reference_only = false;
    double bytes = 0.0;
    double val = 0.0;
    double test = 0.0;
    std::size_t count = 0;
  };
  std::vector<Group> groups;
  for (const auto &r : runs) {
    const std::optional<double> alpha = r.sharing == "sparsified" ? std::optional<double>(r.alpha) : std::nullopt;
    auto it = std::find_if(groups.begin(), groups.end(), [&](const Group &g) {
      return g.row.variant == r.variant && g.row.alpha == alpha && g.row.num_parts == r.num_parts &&
             g.reference_only == r.reference_only;
    });
    if (it == groups.end()) {
      Group g;
      g.row.variant = r.variant;
      g.row.alpha = alpha;
      g.row.num_parts = r.num_parts;
      g.row.k = r.k;
      g.sharing = r.sharing;
      g.reference_only = r.reference_only;
      groups.push_back(g);
      it = groups.end() - 1;
    }
    it->bytes += r.epochs == 0 ? 0.0 : static_cast<double>(r.train_bytes) / static_cast<double>(r.epochs);
    it->val += r.best_val_hits;
    it->test += r.test_hits;
    ++it->count;
  }
  for (auto &g : groups) {
    const auto n = static_cast<double>(g.count);
    g.row.seeds = g.count;
    g.row.epoch_bytes = g.bytes / n;
    g.row.val_hits = g.val / n;
    g.row.test_hits = g.test / n;
  }
  std::vector<SummaryRow> rows;
  for (const auto &g : groups) {
    SummaryRow row = g.row;
    const auto ref = std::find_if(groups.begin(), groups.end(), [&](const Group &other) {
      return other.sharing == "complete" && other.row.num_parts == g.row.num_parts;
    });
    if (ref != groups.end() && ref->row.epoch_bytes > 0.0) {
      row.saving_percent = 100.0 * (1.0 - row.epoch_bytes / ref->row.epoch_bytes);
    }
    if (g.reference_only) {
      if (references != nullptr) {
        references->push_back(row);
      }
    } else {
      rows.push_back(row);
    }
  }
  return rows;
}

std::string summary_text(const std::vector<RunSummary> &runs, std::uint64_t hash) {
  std::vector<SummaryRow> references;
  const std::vector<SummaryRow> rows = summarize(runs, &references);
  char head[96];
  std::snprintf(head, sizeof(head), "# config_hash=%016llx\n", static_cast<unsigned long long>(hash));
  std::string out = head;
  out += format_summary(rows);
  for (const auto &r : references) {
    char line[160];
    std::snprintf(line, sizeof(line), "reference %s p=%d epoch_bytes=%.1f test_hits=%.4f\n", r.variant.c_str(),
                  r.num_parts, r.epoch_bytes, r.test_hits);
    out += line;
  }
  return out;
}

std::vector<RunRecord> run_experiment(const ExperimentConfig &config, std::ostream *log) {
  struct Data {
    Graph graph;
    EdgeSplit split;
  };
  std::map<std::uint64_t, Data> data;
  for (const std::uint64_t seed : config.seeds) {
    if (data.count(seed) != 0) {
      continue;
    }
    const RunSeeds s = resolve_seeds(config, seed);
    Graph g = build_graph(config, s.graph);
    EdgeSplit split = split_edges(g, config.ratios, config.neg_multiplier, s.split);
    data.emplace(seed, Data{std::move(g), std::move(split)});
  }
  const std::vector<PlannedRun> plan = plan_runs(config);
  std::vector<RunRecord> records(plan.size());
  const auto execute = [&](std::size_t i) {
    const PlannedRun &p = plan[i];
    RunRecord &r = records[i];
    r.variant = p.variant;
    r.seeds = resolve_seeds(config, p.seed);
    r.alpha = p.alpha;
    r.num_parts = p.num_parts;
    r.reference_only = p.reference_only;
    TrainConfig t = config.train;
    t.alpha = p.alpha;
    t.num_parts = p.num_parts;
    t.partition_seed = r.seeds.partition;
    t.sparsify_seed = r.seeds.sparsify;
    t.sample_seed = r.seeds.sample;
    t.init_seed = r.seeds.init;
    t.eval_seed = r.seeds.eval;
    t.checkpoint_dir = config.output_dir / "checkpoints";
    t = apply_variant(t, p.variant);
    t.label += "_s" + std::to_string(p.seed) + "_p" + std::to_string(p.num_parts);
    r.sharing = p.variant == Variant::centralized ? SharingMode::none : t.sharing;
    r.epochs = t.epochs;
    const Data &d = data.at(p.seed);
    r.result = run_baseline(d.graph, d.split, p.variant, t);
  };
  const std::size_t workers = std::min(config.parallel_runs, std::max<std::size_t>(1, plan.size()));
  if (workers <= 1) {
    for (std::size_t i = 0; i < plan.size(); ++i) {
      execute(i);
      if (log != nullptr) {
        const RunRecord &r = records[i];
        *log << "run " << i + 1 << "/" << plan.size() << ": " << to_string(r.variant) << " seed=" << r.seeds.run
             << " p=" << r.num_parts << " alpha=" << r.alpha << " test_hits@" << r.result.k << "="
             << r.result.test_hits << "\n";
      }
    }
  } else {
    std::vector<std::exception_ptr> errors(workers);
    {
      std::vector<std::jthread> pool;
      for (std::size_t t = 0; t < workers; ++t) {
        pool.emplace_back([&, t] {
          try {
            for (std::size_t i = t; i < plan.size(); i += workers) {
              execute(i);
            }
          } catch (...) {
            errors[t] = std::current_exception();
          }
        });
      }
    }
    for (const auto &e : errors) {
      if (e) {
        std::rethrow_exception(e);
      }
    }
  }
  return records;
}

namespace {

std::string hash_line(const ExperimentConfig &config) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(config_hash(config)));
  return "# config_hash=" + std::string(buf) + " seeds=" + to_text(config.seeds) + "\n";
}

std::string run_tag(const RunRecord &r) {
  return std::to_string(r.seeds.run) + "," + format_double(r.alpha) + "," + std::to_string(r.num_parts);
}

void write_file(const std::filesystem::path &path, const std::string &content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) {
    throw std::runtime_error("cannot write " + path.string());
  }
  out << content;
}

} // namespace

void write_artifacts(const ExperimentConfig &config, const std::vector<RunRecord> &runs) {
  std::filesystem::create_directories(config.output_dir);
  const std::string head = hash_line(config);

  std::ostringstream metrics;
  metrics << head;
  std::ostringstream ledger;
  ledger << head;
  std::ostringstream table;
  table << head << "variant,sharing,seed,alpha,num_parts,reference_only,k,epochs,best_epoch,best_val_hits,test_hits,"
                   "positive_mean,negative_mean,train_bytes\n";
  std::vector<RunSummary> summaries;
  for (std::size_t i = 0; i < runs.size(); ++i) {
    const RunRecord &r = runs[i];
    const std::string variant(to_string(r.variant));
    write_metrics_csv(metrics, r.result.history, variant, i == 0, "seed,alpha,num_parts", run_tag(r));
    r.result.ledger.write_csv(ledger, i == 0, "variant,seed,alpha,num_parts", variant + "," + run_tag(r));
    const RunSummary s = summarize_run(r);
    summaries.push_back(s);
    table << s.variant << ',' << s.sharing << ',' << s.seed << ',' << format_double(s.alpha) << ',' << s.num_parts
          << ',' << (s.reference_only ? 1 : 0) << ',' << s.k << ',' << s.epochs << ',' << s.best_epoch << ','
          << format_double(s.best_val_hits) << ',' << format_double(s.test_hits) << ','
          << format_double(s.positive_mean) << ',' << format_double(s.negative_mean) << ',' << s.train_bytes << '\n';
  }
  write_file(config.output_dir / "metrics.csv", metrics.str());
  write_file(config.output_dir / "ledger.csv", ledger.str());
  write_file(config.output_dir / "runs.csv", table.str());
  write_file(config.output_dir / "summary.txt", summary_text(summaries, config_hash(config)));

  std::ostringstream manifest;
  manifest << head << canonical_config(config);
  for (const auto &r : runs) {
    const RunSeeds &s = r.seeds;
    manifest << "run variant=" << to_string(r.variant) << " seed=" << s.run << " alpha=" << format_double(r.alpha)
             << " num_parts=" << r.num_parts << " graph_seed=" << s.graph << " split_seed=" << s.split
             << " partition_seed=" << s.partition << " sparsify_seed=" << s.sparsify << " sample_seed=" << s.sample
             << " init_seed=" << s.init << " eval_seed=" << s.eval << " edge_cut=" << r.result.edge_cut
             << " subgraph_edges=" << r.result.subgraph_edges << " sparsified_edges=" << r.result.sparsified_edges
             << " setup_feature_bytes=" << r.result.ledger.setup_feature_bytes()
             << " setup_structure_bytes=" << r.result.ledger.setup_structure_bytes() << "\n";
  }
  write_file(config.output_dir / "manifest.txt", manifest.str());
}

std::vector<RunSummary> read_runs_csv(std::istream &in, std::uint64_t *hash) {
  std::vector<RunSummary> out;
  std::string line;
  std::size_t line_no = 0;
  bool header_seen = false;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) {
      continue;
    }
    if (line[0] == '#') {
      const auto pos = line.find("config_hash=");
      if (hash != nullptr && pos != std::string::npos) {
        *hash = std::stoull(line.substr(pos + 12, 16), nullptr, 16);
      }
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const Values f = split_list(line);
    if (f.size() != 14) {
      throw std::runtime_error("runs.csv line " + std::to_string(line_no) + ": expected 14 fields");
    }
    const std::string key = "runs.csv line " + std::to_string(line_no);
    RunSummary s;
    s.variant = f[0];
    s.sharing = f[1];
    s.seed = parse_number<std::uint64_t>(key, f[2]);
    s.alpha = parse_number<double>(key, f[3]);
    s.num_parts = parse_number<int>(key, f[4]);
    s.reference_only = f[5] == "1";
    s.k = parse_number<std::size_t>(key, f[6]);
    s.epochs = parse_number<std::size_t>(key, f[7]);
    s.best_epoch = parse_number<std::size_t>(key, f[8]);
    s.best_val_hits = parse_number<double>(key, f[9]);
    s.test_hits = parse_number<double>(key, f[10]);
    s.positive_mean = parse_number<double>(key, f[11]);
    s.negative_mean = parse_number<double>(key, f[12]);
    s.train_bytes = parse_number<std::uint64_t>(key, f[13]);
    out.push_back(s);
  }
  return out;
}

namespace {

/// Per-run training bytes summed from ledger.csv, keyed by
/// "variant,seed,alpha,num_parts".
std::map<std::string, std::uint64_t> ledger_totals(std::istream &in) {
  std::map<std::string, std::uint64_t> totals;
  std::string line;
  bool header_seen = false;
  while (std::getline(in, line)) {
    if (line.empty() || line[0] == '#') {
      continue;
    }
    if (!header_seen) {
      header_seen = true;
      continue;
    }
    const Values f = split_list(line);
    if (f.size() != 11 || f[0] != "train") {
      continue;
    }
    const std::string key = f[7] + "," + f[8] + "," + f[9] + "," + f[10];
    totals[key] += parse_number<std::uint64_t>("ledger.csv", f[3]) + parse_number<std::uint64_t>("ledger.csv", f[4]);
  }
  return totals;
}

template <typename Fn>
int guarded(std::ostream &err, const char *stage, Fn &&fn) {
  try {
    return fn();
  } catch (const ConfigError &e) {
    err << "config error: " << e.what() << "\n";
    return 1;
  } catch (const std::exception &e) {
    err << "[" << stage << "] " << e.what() << "\n";
    return 3;
  }
}

struct Prepared {
  ExperimentConfig config;
  RunSeeds seeds;
  Graph graph;
  EdgeSplit split;
  Graph message_graph;
  PartitionPlan plan;
};

Prepared prepare(const std::filesystem::path &config_file,
                 const std::vector<std::pair<std::string, std::string>> &overrides) {
  Prepared p;
  p.config = load_experiment_config(config_file, overrides);
  p.seeds = resolve_seeds(p.config, p.config.seeds.front());
  p.graph = build_graph(p.config, p.seeds.graph);
  p.split = split_edges(p.graph, p.config.ratios, p.config.neg_multiplier, p.seeds.split);
  p.message_graph = training_graph(p.graph, p.split);
  const TrainConfig &t = p.config.train;
  p.plan = make_partition(p.message_graph, t.partitioner, t.num_parts,
                          t.num_miniclusters == 0 ? 16 * t.num_parts : t.num_miniclusters, p.seeds.partition);
  return p;
}

} // namespace

int cmd_run(const std::filesystem::path &config_file,
            const std::vector<std::pair<std::string, std::string>> &overrides, std::ostream &out,
            std::ostream &err) {
  ExperimentConfig config;
  const int parsed = guarded(err, "config", [&] {
    config = load_experiment_config(config_file, overrides);
    return 0;
  });
  if (parsed != 0) {
    return parsed;
  }
  std::vector<RunRecord> runs;
  const int trained = guarded(err, "training", [&] {
    runs = run_experiment(config, &err);
    return 0;
  });
  if (trained != 0) {
    return trained;
  }
  return guarded(err, "artifacts", [&] {
    write_artifacts(config, runs);
    std::ifstream summary(config.output_dir / "summary.txt");
    out << summary.rdbuf();
    out << "artifacts written to " << config.output_dir.string() << "\n";
    return 0;
  });
}

int cmd_report(const std::filesystem::path &dir, std::ostream &out, std::ostream &err) {
  return guarded(err, "report", [&]() -> int {
    std::ifstream runs_in(dir / "runs.csv");
    if (!runs_in) {
      throw std::runtime_error("cannot open " + (dir / "runs.csv").string());
    }
    std::uint64_t hash = 0;
    std::vector<RunSummary> runs = read_runs_csv(runs_in, &hash);
    std::ifstream ledger_in(dir / "ledger.csv");
    if (ledger_in) {
      const auto totals = ledger_totals(ledger_in);
      for (const auto &r : runs) {
        const std::string key =
            r.variant + "," + std::to_string(r.seed) + "," + format_double(r.alpha) + "," + std::to_string(r.num_parts);
        const auto it = totals.find(key);
        const std::uint64_t ledger_bytes = it == totals.end() ? 0 : it->second;
        if (ledger_bytes != r.train_bytes) {
          err << "ledger.csv disagrees with runs.csv for " << key << ": " << ledger_bytes << " vs " << r.train_bytes
              << " bytes\n";
          return 2;
        }
      }
    }
    const std::string text = summary_text(runs, hash);
    write_file(dir / "summary.txt", text);
    out << text;
    return 0;
  });
}

int cmd_partition(const std::filesystem::path &config_file,
                  const std::vector<std::pair<std::string, std::string>> &overrides,
                  const std::filesystem::path &out_file, std::ostream &out, std::ostream &err) {
  return guarded(err, "partition", [&] {
    const Prepared p = prepare(config_file, overrides);
    if (out_file.empty()) {
      write_partition_csv(out, p.plan);
    } else {
      std::ofstream f(out_file);
      if (!f) {
        throw std::runtime_error("cannot write " + out_file.string());
      }
      write_partition_csv(f, p.plan);
    }
    std::ostream &info = out_file.empty() ? err : out;
    info << "strategy=" << to_string(p.plan.strategy) << " parts=" << p.plan.num_parts
         << " nodes=" << p.message_graph.num_nodes() << " train_edges=" << p.message_graph.num_edges()
         << " edge_cut=" << p.plan.edge_cut(p.message_graph) << " sizes=";
    const auto sizes = p.plan.part_sizes();
    for (std::size_t i = 0; i < sizes.size(); ++i) {
      info << (i == 0 ? "" : ",") << sizes[i];
    }
    info << "\n";
    return 0;
  });
}

int cmd_sparsify(const std::filesystem::path &config_file,
                 const std::vector<std::pair<std::string, std::string>> &overrides,
                 const std::filesystem::path &out_dir, std::ostream &out, std::ostream &err) {
  return guarded(err, "sparsify", [&] {
    const Prepared p = prepare(config_file, overrides);
    const TrainConfig &t = p.config.train;
    const auto subs = build_worker_subgraphs(p.message_graph, p.plan, t.full_neighbor_halo);
    SparsifyOptions options;
    options.alpha = t.alpha;
    options.seed = p.seeds.sparsify;
    options.degree_scope = t.degree_scope;
    std::filesystem::create_directories(out_dir);
    for (const auto &sub : subs) {
      if (sub.edges().empty()) {
        out << "part=" << sub.part_id << " source_edges=0 (skipped)\n";
        continue;
      }
      const SparsifiedSubgraph s = sparsify_subgraph(sub, options, &p.message_graph);
      std::ofstream f(out_dir / ("part_" + std::to_string(sub.part_id) + ".csv"));
      if (!f) {
        throw std::runtime_error("cannot write into " + out_dir.string());
      }
      write_sparsified_csv(f, s);
      out << sparsify_summary(s) << "\n";
    }
    return 0;
  });
}

} // namespace lpsim
