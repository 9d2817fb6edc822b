// Command-line front end: four subcommands over a shared flat configuration.
// Precedence: built-in defaults < --config file < key=value overrides < flags.

#include <cstdio>
#include <exception>
#include <functional>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "dpmeter/experiment.hpp"
#include "dpmeter/io.hpp"

namespace {

struct CommonArgs {
  std::string config_path;
  std::vector<std::string> overrides;
  std::string out;
  std::string corpus;
  std::uint64_t seed = 0;
  long long threads = -1;
  long long trials = -1;
  long long households = -1;
};

void add_common(CLI::App* cmd, CommonArgs& args) {
  cmd->add_option("--config", args.config_path, "configuration file (key = value lines)");
  cmd->add_option("--seed", args.seed, "master seed")->default_val(0);
  cmd->add_option("--out", args.out, "output directory");
  cmd->add_option("--threads", args.threads, "worker threads, 0 = all cores");
  cmd->add_option("override", args.overrides, "key=value configuration overrides");
}

int merge_config(const CLI::App* cmd, const CommonArgs& args,
                 dpmeter::io::Config& config) {
  if (!args.config_path.empty()) {
    config = dpmeter::io::load_config(args.config_path);
  }
  try {
    for (const std::string& assignment : args.overrides) {
      dpmeter::io::apply_override(config, assignment);
    }
  } catch (const std::exception& e) {
    std::fprintf(stderr, "config error: %s\n", e.what());
    return dpmeter::runner::kBadConfig;
  }
  // Flags outrank both the file and positional overrides.
  if (cmd->count("--seed")) config.set("seed", std::to_string(args.seed));
  if (!args.out.empty()) config.set("out", args.out);
  if (!args.corpus.empty()) config.set("corpus", args.corpus);
  if (args.threads >= 0) config.set("threads", std::to_string(args.threads));
  if (args.trials >= 0) config.set("trials", std::to_string(args.trials));
  if (args.households >= 0) {
    config.set("households", std::to_string(args.households));
  }
  return dpmeter::runner::kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"differentially private smart-meter aggregation simulator"};
  app.require_subcommand(1);

  CommonArgs gen_args;
  CLI::App* gen = app.add_subcommand("gen-traces", "synthesise a household corpus");
  add_common(gen, gen_args);
  gen->add_option("--households", gen_args.households, "number of households");

  CommonArgs sweep_args;
  CLI::App* sweep = app.add_subcommand(
      "error-sweep", "aggregation error across cluster sizes and failure rates");
  add_common(sweep, sweep_args);
  sweep->add_option("--corpus", sweep_args.corpus, "corpus directory from gen-traces");

  CommonArgs report_args;
  CLI::App* report = app.add_subcommand(
      "privacy-report", "presence privacy and start-time inference benchmark");
  add_common(report, report_args);
  report->add_option("--corpus", report_args.corpus, "corpus directory from gen-traces");
  report->add_option("--trials", report_args.trials, "inference trials per appliance");

  CommonArgs check_args;
  CLI::App* check = app.add_subcommand(
      "protocol-check", "verify masked aggregation rounds and attack bounds");
  add_common(check, check_args);
  check->add_option("--trials", check_args.trials, "attack simulation trials");

  CLI11_PARSE(app, argc, argv);

  struct Dispatch {
    CLI::App* cmd;
    CommonArgs* args;
    std::function<int(const dpmeter::io::Config&)> run;
  };
  const Dispatch table[] = {
      {gen, &gen_args, dpmeter::runner::run_gen_traces},
      {sweep, &sweep_args, dpmeter::runner::run_error_sweep},
      {report, &report_args, dpmeter::runner::run_privacy_report},
      {check, &check_args, dpmeter::runner::run_protocol_check},
  };
  for (const Dispatch& entry : table) {
    if (!entry.cmd->parsed()) continue;
    dpmeter::io::Config config;
    try {
      const int rc = merge_config(entry.cmd, *entry.args, config);
      if (rc != dpmeter::runner::kOk) return rc;
    } catch (const std::exception& e) {
      std::fprintf(stderr, "config error: %s\n", e.what());
      return dpmeter::runner::kBadConfig;
    }
    if (entry.cmd == check && check_args.trials >= 0) {
      config.set("attack.trials", std::to_string(check_args.trials));
    }
    return entry.run(config);
  }
  return dpmeter::runner::kBadConfig;
}
