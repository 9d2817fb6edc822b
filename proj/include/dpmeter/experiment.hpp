#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "dpmeter/io.hpp"

namespace dpmeter::runner {

// Process exit codes shared by every subcommand.
enum ExitCode : int {
  kOk = 0,
  kBadConfig = 2,
  kRuntimeFailure = 3,
  kCheckFailure = 4,
};

// Synthesises a household corpus and writes it under <out>:
//   manifest.txt, households.csv, traces/hh_NNNNN.csv (+ _components, +
//   _activations).
int run_gen_traces(const io::Config& config);

// Reads a corpus, clusters it randomly and by consumption, and sweeps the
// expected relative aggregation error over cluster sizes and failure
// fractions.  Writes error_sweep.csv and error_slots.csv.
int run_error_sweep(const io::Config& config);

// Reads a corpus and reports per-appliance presence privacy over window
// lengths plus a start-time inference benchmark across adversaries.
// Writes presence_epsilon.csv, inference_accuracy.csv and ml_success.csv.
int run_privacy_report(const io::Config& config);

// Runs masked aggregation rounds, verifying each recovered sum bit-exactly
// against direct recomputation, and tabulates isolation-attack
// probabilities next to their simulated rates.  Writes protocol_rounds.csv
// and attack_probabilities.csv.  Returns kCheckFailure when a verification
// fails.
int run_protocol_check(const io::Config& config);

// Corpus on disk, as written by run_gen_traces.
struct CorpusOnDisk {
  std::vector<std::uint32_t> ids;
  std::map<std::uint32_t, int> residents;
  std::map<std::uint32_t, double> daily_mean;
  std::map<std::uint32_t, std::vector<double>> totals;  // 1440 minutes
};

CorpusOnDisk load_corpus_totals(const std::string& dir);
std::map<std::string, std::vector<double>> load_components(const std::string& dir,
                                                           std::uint32_t id);
struct ActivationRecord {
  std::string appliance;
  int start_minute;
  int duration_minutes;
};
std::vector<ActivationRecord> load_activations(const std::string& dir,
                                               std::uint32_t id);

}  // namespace dpmeter::runner
