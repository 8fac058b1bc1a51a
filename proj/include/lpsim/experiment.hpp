#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "lpsim/eval.hpp"
#include "lpsim/graph.hpp"
#include "lpsim/split.hpp"
#include "lpsim/trainer.hpp"

namespace lpsim {

/// Invalid configuration. key() is the offending "section.key" (may be empty
/// for whole-file problems).
class ConfigError : public std::runtime_error {
public:
  ConfigError(std::string key, const std::string &reason)
      : std::runtime_error(key.empty() ? reason : key + ": " + reason), key_(std::move(key)) {}
  const std::string &key() const { return key_; }

private:
  std::string key_;
};

struct GraphSource {
  std::filesystem::path edges;    // with features: load from files
  std::filesystem::path features;
  std::optional<SyntheticSpec> synthetic;
  std::size_t feature_dim = 32;   // synthetic only
};

/// Seeds fixed explicitly in the config; unset ones derive from the run seed.
struct SeedOverrides {
  std::optional<std::uint64_t> graph, split, partition, sparsify, sample, init, eval;
};

struct ExperimentConfig {
  GraphSource graph;
  SplitRatios ratios;
  int neg_multiplier = 3;
  TrainConfig train;
  std::vector<Variant> variants{Variant::splpg};
  std::vector<std::uint64_t> seeds{1};
  SeedOverrides seed_overrides;
  std::vector<double> sweep_alphas; // empty: train.alpha only
  std::vector<int> sweep_parts;     // empty: train.num_parts only
  bool reference = true;            // add a complete-sharing reference when savings need one
  std::size_t parallel_runs = 1;
  std::filesystem::path output_dir = "lpsim_out";
};

/// Key/value text with [sections]; see README for the key list. Overrides are
/// "section.key" -> value pairs applied after the file. Throws ConfigError.
ExperimentConfig parse_experiment_config(std::istream &in,
                                         const std::vector<std::pair<std::string, std::string>> &overrides = {});
ExperimentConfig load_experiment_config(const std::filesystem::path &path,
                                        const std::vector<std::pair<std::string, std::string>> &overrides = {});

/// Every resolved key as "section.key = value", one per line, fixed order.
/// Output paths and thread counts are excluded since they cannot change results.
std::string canonical_config(const ExperimentConfig &config);
/// FNV-1a 64 of canonical_config.
std::uint64_t config_hash(const ExperimentConfig &config);

/// Seeds of one run, derived from its run seed unless overridden.
struct RunSeeds {
  std::uint64_t run = 0;
  std::uint64_t graph = 0, split = 0, partition = 0, sparsify = 0, sample = 0, init = 0, eval = 0;
};
RunSeeds resolve_seeds(const ExperimentConfig &config, std::uint64_t run_seed);

Graph build_graph(const ExperimentConfig &config, std::uint64_t graph_seed);

/// One (variant, seed, alpha, p) training run.
struct RunRecord {
  Variant variant = Variant::custom;
  RunSeeds seeds;
  double alpha = 0.0;
  int num_parts = 1;
  SharingMode sharing = SharingMode::none;
  bool reference_only = false; // added for savings, not requested
  std::size_t epochs = 0;
  TrainResult result;
};

/// The run grid in execution order.
struct PlannedRun {
  Variant variant;
  std::uint64_t seed;
  double alpha;
  int num_parts;
  bool reference_only;
};
std::vector<PlannedRun> plan_runs(const ExperimentConfig &config);

/// One row of runs.csv, enough to rebuild the summary.
struct RunSummary {
  std::string variant;
  std::string sharing;
  std::uint64_t seed = 0;
  double alpha = 0.0;
  int num_parts = 1;
  bool reference_only = false;
  std::size_t k = 0;
  std::size_t epochs = 0;
  std::size_t best_epoch = 0;
  double best_val_hits = 0.0;
  double test_hits = 0.0;
  double positive_mean = 0.0;
  double negative_mean = 0.0;
  std::uint64_t train_bytes = 0; // feature + structure over all epochs
};

RunSummary summarize_run(const RunRecord &run);

/// Rows grouped by (variant, alpha under sparsified sharing, p) and averaged
/// over seeds; savings relative to the complete-sharing run with the same p.
/// Reference-only runs are not rows and are returned in `references`.
std::vector<SummaryRow> summarize(const std::vector<RunSummary> &runs, std::vector<SummaryRow> *references = nullptr);
std::string summary_text(const std::vector<RunSummary> &runs, std::uint64_t hash);

/// Executes every planned run; logs one line per run when log is given.
std::vector<RunRecord> run_experiment(const ExperimentConfig &config, std::ostream *log = nullptr);

/// Writes metrics.csv, ledger.csv, runs.csv, summary.txt and manifest.txt.
void write_artifacts(const ExperimentConfig &config, const std::vector<RunRecord> &runs);

/// Parses runs.csv (with its leading comment line).
std::vector<RunSummary> read_runs_csv(std::istream &in, std::uint64_t *hash = nullptr);

/// Command entry points. Exit codes: 0 success, 1 configuration error,
/// 2 property or acceptance failure, 3 runtime failure.
int cmd_run(const std::filesystem::path &config_file,
            const std::vector<std::pair<std::string, std::string>> &overrides, std::ostream &out,
            std::ostream &err);
int cmd_report(const std::filesystem::path &dir, std::ostream &out, std::ostream &err);
int cmd_partition(const std::filesystem::path &config_file,
                  const std::vector<std::pair<std::string, std::string>> &overrides,
                  const std::filesystem::path &out_file, std::ostream &out, std::ostream &err);
int cmd_sparsify(const std::filesystem::path &config_file,
                 const std::vector<std::pair<std::string, std::string>> &overrides,
                 const std::filesystem::path &out_dir, std::ostream &out, std::ostream &err);

} // namespace lpsim
