#include "dpmeter/protocol.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <stdexcept>

#include "dpmeter/errors.hpp"

namespace dpmeter::protocol {

namespace {

// Stream purposes under one (seed, node, slot) triple.
constexpr std::uint64_t kStreamNoise = 1;
constexpr std::uint64_t kStreamCommitment = 2;

void validate(const ClusterConfig& c) {
  if (c.cluster_size < 2) throw std::invalid_argument("ClusterConfig: cluster_size must be >= 2");
  if (c.tolerated_failures >= c.cluster_size) {
    throw std::invalid_argument("ClusterConfig: tolerated_failures must be < cluster_size");
  }
  if (!(c.participation > 0) ||
      c.participation > static_cast<double>(c.cluster_size - 1)) {
    throw std::invalid_argument("ClusterConfig: need 0 < participation <= N-1");
  }
  if (!(c.codec_scale > 0)) throw std::invalid_argument("ClusterConfig: codec_scale must be > 0");
  if (!(c.max_meter_watts > 0)) throw std::invalid_argument("ClusterConfig: max_meter_watts must be > 0");
  if (!(c.max_lambda >= 0)) throw std::invalid_argument("ClusterConfig: max_lambda must be >= 0");
}

std::array<std::uint8_t, 16> master_secret_bytes(std::uint64_t master_seed) {
  std::array<std::uint8_t, 16> out;
  const std::uint64_t a = splitmix64(master_seed ^ 0xA5A5A5A5A5A5A5A5ULL);
  const std::uint64_t b = splitmix64(a);
  for (int i = 0; i < 8; ++i) {
    out[i] = static_cast<std::uint8_t>(a >> (8 * i));
    out[8 + i] = static_cast<std::uint8_t>(b >> (8 * i));
  }
  return out;
}

}  // namespace

struct ClusterSim::Impl {
  ClusterConfig config;
  std::uint64_t master_seed;
  agg::Modulus modulus;
  agg::FixedPointCodec codec;
  std::vector<agg::NodeId> ids;
  agg::KeyTable keys;

  Impl(const ClusterConfig& c, std::uint64_t seed, std::vector<agg::NodeId> node_ids)
      : config(c),
        master_seed(seed),
        modulus(),
        codec(),
        ids(std::move(node_ids)),
        keys(ids, master_secret_bytes(seed)) {
    // Headroom: the aggregate plus Laplace noise stays below
    // N * max_meter + 20 * max_lambda except with probability ~e^-20.
    const double plain_watts =
        config.cluster_size * config.max_meter_watts + 20.0 * config.max_lambda;
    const auto max_plain =
        static_cast<std::uint64_t>(std::ceil(plain_watts * config.codec_scale));
    modulus = agg::choose_modulus(max_plain, config.cluster_size);
    codec = agg::FixedPointCodec{config.codec_scale, max_plain};
  }
};

ClusterSim::ClusterSim(const ClusterConfig& config, std::uint64_t master_seed) {
  validate(config);
  std::vector<agg::NodeId> ids(config.cluster_size);
  std::iota(ids.begin(), ids.end(), 0u);
  impl_ = std::make_unique<Impl>(config, master_seed, std::move(ids));
}

ClusterSim::~ClusterSim() = default;
ClusterSim::ClusterSim(ClusterSim&&) noexcept = default;
ClusterSim& ClusterSim::operator=(ClusterSim&&) noexcept = default;

const ClusterConfig& ClusterSim::config() const { return impl_->config; }
const agg::Modulus& ClusterSim::modulus() const { return impl_->modulus; }
const agg::FixedPointCodec& ClusterSim::codec() const { return impl_->codec; }
const agg::KeyTable& ClusterSim::keys() const { return impl_->keys; }

RoundResult ClusterSim::run_round(std::uint32_t slot,
                                  std::span<const double> measurements,
                                  noise::LaplaceScale lambda,
                                  std::span<const agg::NodeId> failures,
                                  const RoundOptions& options) {
  const ClusterConfig& cfg = impl_->config;
  const std::uint32_t n = cfg.cluster_size;
  if (measurements.size() != n) {
    throw std::invalid_argument("run_round: need one measurement per node");
  }
  if (lambda.value() > cfg.max_lambda) {
    throw std::invalid_argument("run_round: lambda exceeds configured max_lambda");
  }
  std::set<agg::NodeId> failed(failures.begin(), failures.end());
  if (failed.size() != failures.size()) {
    throw std::invalid_argument("run_round: duplicate failure ids");
  }
  for (const auto id : failed) {
    if (id >= n) throw std::invalid_argument("run_round: failure id out of range");
  }
  for (const double x : measurements) {
    if (!(x >= 0) || x > cfg.max_meter_watts) {
      throw std::invalid_argument("run_round: measurement outside [0, max_meter_watts]");
    }
  }

  RoundResult res;
  res.slot = slot;

  const auto nonces = agg::slot_nonces(slot);
  const std::set<agg::NodeId> dying(options.die_after_round1.begin(),
                                    options.die_after_round1.end());

  // Shares are calibrated for the tolerated survivor count, not the actual
  // one: n_shares = N - M regardless of how many really fail.
  const std::uint32_t n_shares = n - cfg.tolerated_failures;
  const noise::GammaShareParams share_params(static_cast<int>(n_shares), lambda);

  std::vector<agg::Ciphertext> cts;
  std::vector<std::vector<agg::NodeId>> participants(n);
  std::vector<std::uint64_t> commitments(n, 0);
  cts.reserve(n);

  // Round 1: every live node sends one masked reading.
  for (agg::NodeId id = 0; id < n; ++id) {
    if (failed.count(id)) continue;
    auto noise_rng = RngStream::derive(impl_->master_seed, {id, slot, kStreamNoise});
    const double share = (options.zero_noise || lambda.value() == 0)
                             ? 0.0
                             : noise::sample_noise_share(share_params, noise_rng);
    const double noisy = measurements[id] + share;

    participants[id] =
        agg::select_participants(id, impl_->keys, nonces.selection, cfg.participation);
    if (cfg.robust) {
      auto commit_rng =
          RngStream::derive(impl_->master_seed, {id, slot, kStreamCommitment});
      commitments[id] = commit_rng.next_below(impl_->modulus.value);
    }
    cts.push_back(agg::encrypt_share(id, slot, noisy, impl_->keys, participants[id],
                                     commitments[id], impl_->codec, impl_->modulus));
    res.live_nodes.push_back(id);
    res.live_noisy_values.push_back(noisy);
    res.true_sum += measurements[id];
  }
  res.live_count = static_cast<std::uint32_t>(cts.size());
  res.messages_round1 = res.live_count;

  std::vector<agg::RecoveryResponse> responses;
  std::uint64_t keystream_sum = 0;
  for (const auto id : res.live_nodes) {
    keystream_sum =
        impl_->modulus.add(keystream_sum, agg::keystream(id, impl_->keys, slot, impl_->modulus));
  }

  bool missing_response = false;
  if (cfg.robust) {
    // The aggregator broadcasts the missing set; every node still alive
    // answers, dead-between-rounds nodes silently do not.
    res.broadcasts = 1;
    const std::vector<agg::NodeId> missing(failed.begin(), failed.end());
    for (const auto id : res.live_nodes) {
      if (dying.count(id)) {
        missing_response = true;
        continue;
      }
      responses.push_back(agg::recovery_response(id, slot, missing, participants[id],
                                                 impl_->keys, commitments[id],
                                                 impl_->modulus));
    }
    res.messages_round2 = static_cast<std::uint32_t>(responses.size());
  } else if (!failed.empty()) {
    // Single-round variant has no recovery path; unmatched dummy keys will
    // spoil the residual below.
  }

  double recovered = std::numeric_limits<double>::quiet_NaN();
  std::string reason;
  try {
    std::uint64_t acc = 0;
    for (const auto& ct : cts) acc = impl_->modulus.add(acc, ct.value);
    for (const auto& r : responses) acc = impl_->modulus.sub(acc, r.value);
    acc = impl_->modulus.sub(acc, keystream_sum);
    res.recovered_residue = acc;
    recovered = agg::aggregate_decrypt(cts, responses, keystream_sum, impl_->codec,
                                       impl_->modulus);
  } catch (const ProtocolFailure& e) {
    reason = e.what();
  }

  if (missing_response) {
    res.failed = true;
    res.failure_reason = reason.empty()
                             ? "unannounced dropout between rounds"
                             : "unannounced dropout between rounds: " + reason;
    res.recovered_noisy_sum = std::numeric_limits<double>::quiet_NaN();
  } else if (!reason.empty()) {
    res.failed = true;
    res.failure_reason = reason;
    res.recovered_noisy_sum = std::numeric_limits<double>::quiet_NaN();
  } else {
    res.recovered_noisy_sum = recovered;
  }
  return res;
}

RoundResult run_round(const ClusterConfig& config,
                      std::span<const double> measurements,
                      noise::LaplaceScale lambda,
                      std::span<const agg::NodeId> failures,
                      std::uint64_t master_seed, const RoundOptions& options) {
  ClusterSim sim(config, master_seed);
  return sim.run_round(0, measurements, lambda, failures, options);
}

namespace {

void validate_attack(std::uint32_t n, std::uint32_t t, std::uint32_t m, double w) {
  if (n < 2) throw std::invalid_argument("attack: cluster_size must be >= 2");
  if (t + m > n - 1) {
    throw std::invalid_argument("attack: colluding + claimed must leave the target a peer set");
  }
  if (!(w > 0) || w > static_cast<double>(n - 1)) {
    throw std::invalid_argument("attack: need 0 < w <= N-1");
  }
}

}  // namespace

double collusion_success_prob(std::uint32_t cluster_size, std::uint32_t colluding,
                              double participation) {
  validate_attack(cluster_size, colluding, 0, participation);
  const double p = participation / static_cast<double>(cluster_size - 1);
  const double honest = static_cast<double>(cluster_size - 1 - colluding);
  return std::pow(1.0 - p, honest);
}

double k_slot_compromise_prob(std::uint32_t cluster_size, std::uint32_t colluding,
                              double participation, std::uint32_t slots) {
  if (slots == 0) throw std::invalid_argument("k_slot_compromise_prob: slots must be >= 1");
  return std::pow(collusion_success_prob(cluster_size, colluding, participation),
                  static_cast<double>(slots));
}

double lying_supplier_success_prob(std::uint32_t cluster_size,
                                   std::uint32_t colluding,
                                   std::uint32_t claimed_missing,
                                   double participation) {
  validate_attack(cluster_size, colluding, claimed_missing, participation);
  const double p = participation / static_cast<double>(cluster_size - 1);
  const double honest =
      static_cast<double>(cluster_size - 1 - colluding - claimed_missing);
  return std::pow(1.0 - p, honest);
}

double simulate_attack(std::uint32_t cluster_size, double participation,
                       const AdversaryConfig& adversary, std::uint64_t trials,
                       RngStream& rng) {
  const std::uint32_t claimed = adversary.lying ? adversary.claimable : 0;
  validate_attack(cluster_size, adversary.colluding, claimed, participation);
  if (adversary.slots == 0) throw std::invalid_argument("simulate_attack: slots must be >= 1");
  if (trials == 0) throw std::invalid_argument("simulate_attack: trials must be >= 1");

  const double p = participation / static_cast<double>(cluster_size - 1);
  const std::uint32_t honest = cluster_size - 1 - adversary.colluding - claimed;

  std::uint64_t successes = 0;
  for (std::uint64_t t = 0; t < trials; ++t) {
    bool isolated = true;
    for (std::uint32_t s = 0; s < adversary.slots && isolated; ++s) {
      for (std::uint32_t i = 0; i < honest; ++i) {
        if (rng.next_double() <= p) {
          isolated = false;
          break;
        }
      }
    }
    successes += isolated ? 1 : 0;
  }
  return static_cast<double>(successes) / static_cast<double>(trials);
}

}  // namespace dpmeter::protocol
