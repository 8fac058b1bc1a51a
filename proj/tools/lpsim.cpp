#include <iostream>
#include <string>
#include <utility>
#include <vector>

#include "CLI11.hpp"

#include "lpsim/experiment.hpp"
#include "lpsim/verify.hpp"

namespace {

using Overrides = std::vector<std::pair<std::string, std::string>>;

/// --set and the shorthand flags shared by every config-driven command.
struct ConfigFlags {
  std::string config;
  std::vector<std::string> sets;
  std::string output_dir, variants, seeds, alpha, parts, epochs, threads, parallel_runs;

  void attach(CLI::App *cmd, bool with_config_required = true) {
    auto *opt = cmd->add_option("-c,--config", config, "experiment config file")->check(CLI::ExistingFile);
    if (with_config_required) {
      opt->required();
    }
    cmd->add_option("--set", sets, "override a key, section.key=value (repeatable)");
    cmd->add_option("-o,--output-dir", output_dir, "experiment.output_dir");
    cmd->add_option("--variants", variants, "experiment.variants, comma separated");
    cmd->add_option("--seeds", seeds, "experiment.seeds, comma separated");
    cmd->add_option("--alpha", alpha, "train.alpha");
    cmd->add_option("--parts", parts, "train.num_parts");
    cmd->add_option("--epochs", epochs, "train.epochs");
    cmd->add_option("--threads", threads, "train.threads");
    cmd->add_option("--parallel-runs", parallel_runs, "experiment.parallel_runs");
  }

  /// Returns false (after reporting) on a malformed --set.
  bool overrides(Overrides &out) const {
    for (const auto &s : sets) {
      const auto eq = s.find('=');
      if (eq == std::string::npos || eq == 0) {
        std::cerr << "config error: --set expects section.key=value, got '" << s << "'\n";
        return false;
      }
      out.emplace_back(s.substr(0, eq), s.substr(eq + 1));
    }
    const std::pair<const std::string *, const char *> flags[] = {
        {&output_dir, "experiment.output_dir"}, {&variants, "experiment.variants"},
        {&seeds, "experiment.seeds"},           {&alpha, "train.alpha"},
        {&parts, "train.num_parts"},            {&epochs, "train.epochs"},
        {&threads, "train.threads"},            {&parallel_runs, "experiment.parallel_runs"},
    };
    for (const auto &[value, key] : flags) {
      if (!value->empty()) {
        out.emplace_back(key, *value);
      }
    }
    return true;
  }
};

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"Distributed GNN link-prediction training simulator"};
  app.require_subcommand(1);

  ConfigFlags run_flags;
  auto *run = app.add_subcommand("run", "train the configured variants and sweeps, write artifacts");
  run_flags.attach(run);

  lpsim::VerifyOptions verify_options;
  std::string fault;
  std::string failure_dir;
  auto *verify = app.add_subcommand("verify", "run the built-in property suite");
  verify->add_option("--seed", verify_options.seed, "suite seed");
  verify->add_option("--inject-fault", fault, "mutation to inject")->check(CLI::IsMember({"no-accumulation"}));
  verify->add_option("--failure-dir", failure_dir, "directory for counterexample files");

  ConfigFlags partition_flags;
  std::string partition_out;
  auto *partition = app.add_subcommand("partition", "dump the partition plan of the first seed as node,part");
  partition_flags.attach(partition);
  partition->add_option("--out", partition_out, "CSV path (stdout when omitted)");

  ConfigFlags sparsify_flags;
  std::string sparsify_out = "sparsified";
  auto *sparsify = app.add_subcommand("sparsify", "dump every worker's sparsified edges with retention stats");
  sparsify_flags.attach(sparsify);
  sparsify->add_option("--out-dir", sparsify_out, "directory for part_<i>.csv");

  std::string report_dir;
  auto *report = app.add_subcommand("report", "rebuild summary.txt from runs.csv and ledger.csv");
  report->add_option("dir", report_dir, "artifact directory")->required()->check(CLI::ExistingDirectory);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e) == 0 ? 0 : 1;
  }

  Overrides overrides;
  if (run->parsed()) {
    if (!run_flags.overrides(overrides)) {
      return 1;
    }
    return lpsim::cmd_run(run_flags.config, overrides, std::cout, std::cerr);
  }
  if (verify->parsed()) {
    verify_options.inject_no_accumulation = fault == "no-accumulation";
    verify_options.failure_dir = failure_dir;
    return lpsim::cmd_verify(verify_options, std::cout, std::cerr);
  }
  if (partition->parsed()) {
    if (!partition_flags.overrides(overrides)) {
      return 1;
    }
    return lpsim::cmd_partition(partition_flags.config, overrides, partition_out, std::cout, std::cerr);
  }
  if (sparsify->parsed()) {
    if (!sparsify_flags.overrides(overrides)) {
      return 1;
    }
    return lpsim::cmd_sparsify(sparsify_flags.config, overrides, sparsify_out, std::cout, std::cerr);
  }
  return lpsim::cmd_report(report_dir, std::cout, std::cerr);
}
