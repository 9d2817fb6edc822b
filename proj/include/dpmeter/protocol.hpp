#pragma once

#include <cstdint>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dpmeter/noise.hpp"
#include "dpmeter/rng.hpp"
#include "dpmeter/secure_agg.hpp"

namespace dpmeter::protocol {

// Static parameters of one metering cluster.
struct ClusterConfig {
  std::uint32_t cluster_size = 100;      // N
  std::uint32_t tolerated_failures = 0;  // M, shares are calibrated for N-M
  double participation = 30.0;           // w, expected participants per node
  std::uint32_t slot_minutes = 10;
  double codec_scale = 10.0;       // encoding units per watt
  double max_meter_watts = 20000;  // largest single-meter reading
  double max_lambda = 20000;       // largest noise scale any round may use
  // Two-round recovery on by default.  The single-round variant drops the
  // commitments and round 2; it only works when nobody fails.
  bool robust = true;
};

struct RoundOptions {
  bool zero_noise = false;  // test hook: run the masking with no noise
  // Nodes that send round 1 but silently vanish before round 2.
  std::vector<agg::NodeId> die_after_round1;
};

struct RoundResult {
  std::uint32_t slot = 0;
  double recovered_noisy_sum = 0;  // watts; NaN when failed
  double true_sum = 0;             // sum of live nodes' readings
  std::uint32_t live_count = 0;
  std::uint32_t messages_round1 = 0;
  std::uint32_t messages_round2 = 0;
  std::uint32_t broadcasts = 0;
  bool failed = false;
  std::string failure_reason;
  // Recovered residue in encoding units, and each live node's noisy reading
  // in round-1 send order; both exist so exactness can be checked against an
  // independent recomputation.
  std::uint64_t recovered_residue = 0;
  std::vector<double> live_noisy_values;
  std::vector<agg::NodeId> live_nodes;
};

// One cluster wired up with keys; rounds can then be run per slot.
// Node ids are 0 .. N-1.  All randomness (noise shares, commitments) is
// derived from the master seed, per node and slot, so a round is a pure
// function of (slot, measurements, lambda, failures, options).
class ClusterSim {
 public:
  ClusterSim(const ClusterConfig& config, std::uint64_t master_seed);
  ~ClusterSim();
  ClusterSim(ClusterSim&&) noexcept;
  ClusterSim& operator=(ClusterSim&&) noexcept;

  // measurements.size() == N; failures are announced dropouts (no round-1
  // message).  lambda must not exceed config.max_lambda.
  RoundResult run_round(std::uint32_t slot, std::span<const double> measurements,
                        noise::LaplaceScale lambda,
                        std::span<const agg::NodeId> failures,
                        const RoundOptions& options = {});

  const ClusterConfig& config() const;
  const agg::Modulus& modulus() const;
  const agg::FixedPointCodec& codec() const;
  const agg::KeyTable& keys() const;

 private:
  struct Impl;
  std::unique_ptr<Impl> impl_;
};

// Convenience wrapper: build the cluster and run a single round.
RoundResult run_round(const ClusterConfig& config,
                      std::span<const double> measurements,
                      noise::LaplaceScale lambda,
                      std::span<const agg::NodeId> failures,
                      std::uint64_t master_seed,
                      const RoundOptions& options = {});

// --- Isolation attacks -----------------------------------------------------
//
// An adversary controlling the aggregator and T cluster nodes learns a
// target's reading exactly when every participant of the target is under its
// control; the closed forms below give that probability under independent
// pair selection with expected participation w.

struct AdversaryConfig {
  std::uint32_t colluding = 0;  // T, malicious nodes besides the aggregator
  std::uint32_t claimable = 0;  // honest nodes the aggregator may falsely
                                // report missing (0 when it follows protocol)
  std::uint32_t slots = 1;      // rounds that must all isolate the target
  bool lying = true;            // false forces claimable = 0
};

// (1 - w/(N-1))^(N-T-1): all the target's honest peers unselected.
double collusion_success_prob(std::uint32_t cluster_size, std::uint32_t colluding,
                              double participation);

// Isolation in k independent slots: the single-slot probability to the k.
double k_slot_compromise_prob(std::uint32_t cluster_size, std::uint32_t colluding,
                              double participation, std::uint32_t slots);

// Aggregator additionally claims M honest nodes missing, shrinking the
// honest pool: (1 - w/(N-1))^(N-(T+M)-1).
double lying_supplier_success_prob(std::uint32_t cluster_size,
                                   std::uint32_t colluding,
                                   std::uint32_t claimed_missing,
                                   double participation);

// Empirical counterpart.  Counts algebraic recoverability only: a trial
// succeeds when no honest, unclaimed peer of the target is selected, per
// slot.  No keys are exercised, so huge trial counts stay cheap.
double simulate_attack(std::uint32_t cluster_size, double participation,
                       const AdversaryConfig& adversary, std::uint64_t trials,
                       RngStream& rng);

}  // namespace dpmeter::protocol
