#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <unordered_map>
#include <vector>

#include "dpmeter/prf.hpp"

namespace dpmeter::agg {

using NodeId = std::uint32_t;

// Arithmetic modulus of the masking scheme.  Always a power of two, so
// residues are uniform when masked down from PRF output and reduction is a
// bit-and.  value >= 2, bits <= 62.
struct Modulus {
  std::uint64_t value;
  int bits;

  std::uint64_t reduce(std::uint64_t x) const { return x & (value - 1); }
  std::uint64_t add(std::uint64_t a, std::uint64_t b) const {
    return (a + b) & (value - 1);
  }
  std::uint64_t sub(std::uint64_t a, std::uint64_t b) const {
    return (a - b) & (value - 1);
  }
  std::uint64_t neg(std::uint64_t a) const { return (0 - a) & (value - 1); }
};

// Smallest power of two holding cluster_size values of magnitude up to
// max_plain: 2^ceil(log2(max_plain * cluster_size)), floored at 2.
Modulus choose_modulus(std::uint64_t max_plain, std::uint32_t cluster_size);

// Fixed-point map between measurements and residues.  scale is encoding
// units per measurement unit; max_plain bounds |encoded| for both the range
// check on encode and the plausibility check on decode.  Negative values
// wrap: the centered representative of residue r is r when r < m/2, else
// r - m.
struct FixedPointCodec {
  double scale;
  std::uint64_t max_plain;

  std::uint64_t encode(double value, Modulus m) const;
  std::int64_t decode_units(std::uint64_t residue, Modulus m) const;
  double decode(std::uint64_t residue, Modulus m) const;
};

// Pairwise and node-to-aggregator PRF keys for one cluster, all derived
// deterministically from a single master secret.  pairwise(i, j) is
// symmetric; asking for a node's key with itself is an error.
class KeyTable {
 public:
  KeyTable(std::span<const NodeId> nodes,
           std::span<const std::uint8_t> master_secret);

  const Prf& pairwise(NodeId i, NodeId j) const;
  const Prf& aggregator(NodeId i) const;
  std::span<const NodeId> nodes() const { return nodes_; }

 private:
  std::vector<NodeId> nodes_;
  std::unordered_map<std::uint64_t, Prf> pair_;
  std::unordered_map<NodeId, Prf> agg_;
};

// Public per-slot nonces.  Selection draws and dummy keys must never reuse
// the other's input, so slot s uses counters 2s and 2s+1 plus distinct
// domain tags inside the PRF message.
struct RoundNonces {
  std::uint64_t selection;
  std::uint64_t dummy;
};
inline RoundNonces slot_nonces(std::uint32_t slot) {
  return {2ull * slot, 2ull * slot + 1};
}

// True when the (i, j) pair is active this round.  Both endpoints evaluate
// the same keyed draw, so the relation is symmetric without messages.
// threshold = w / (N - 1) yields w expected participants per node.
bool pair_selected(const Prf& pairwise, std::uint64_t selection_nonce,
                   double threshold);

// All peers of `self` whose pair is active this round, ascending.
// participation is w, the expected participant count, 0 < w <= N-1.
std::vector<NodeId> select_participants(NodeId self, const KeyTable& keys,
                                        std::uint64_t selection_nonce,
                                        double participation);

// Pairwise mask contribution of the (i, j) pair as seen from i:
// +PRF when i > j, -PRF when i < j, so the two sides cancel mod m.
std::uint64_t dummy_key(NodeId i, NodeId j, const KeyTable& keys,
                        std::uint64_t dummy_nonce, Modulus m);

// Per-slot keystream shared between node i and the aggregator.
std::uint64_t keystream(NodeId i, const KeyTable& keys, std::uint32_t slot,
                        Modulus m);

struct Ciphertext {
  NodeId sender;
  std::uint32_t slot;
  std::uint64_t value;
};

struct RecoveryResponse {
  NodeId sender;
  std::uint32_t slot;
  std::uint64_t value;
};

// Round-1 message: encode(value) + keystream + sum of dummy keys towards
// participants + commitment, mod m.  commitment is the sender's fresh
// random residue; it keeps the round-2 response from exposing the dummy-key
// sum on its own.  Pass commitment = 0 for the single-round variant.
Ciphertext encrypt_share(NodeId self, std::uint32_t slot, double value,
                         const KeyTable& keys,
                         std::span<const NodeId> participants,
                         std::uint64_t commitment, const FixedPointCodec& codec,
                         Modulus m);

// Round-2 message: sum of dummy keys towards (missing ∩ participants) plus
// the sender's round-1 commitment.  Every live node answers, whether or not
// the intersection is empty.
RecoveryResponse recovery_response(NodeId self, std::uint32_t slot,
                                   std::span<const NodeId> missing,
                                   std::span<const NodeId> participants,
                                   const KeyTable& keys,
                                   std::uint64_t commitment, Modulus m);

// Final unmasking: sum of ciphertexts minus sum of responses minus the
// keystreams of the senders.  Returns the decoded aggregate; throws
// ProtocolFailure if the residual decodes outside max_plain, which is the
// signature of masks that failed to cancel (an unannounced dropout between
// rounds).
double aggregate_decrypt(std::span<const Ciphertext> ciphertexts,
                         std::span<const RecoveryResponse> responses,
                         std::uint64_t keystream_sum,
                         const FixedPointCodec& codec, Modulus m);

// Replayable round transcript.
//
// Byte layout, all little-endian:
//   magic "DPMT" | u16 version = 1 | u8 modulus bits | u8 zero
//   u32 ciphertext count | u32 response count
//   records, ciphertexts first:
//     u8 kind (1 = ciphertext, 2 = response) | u32 sender | u32 slot |
//     u64 value
struct Transcript {
  Modulus modulus;
  std::vector<Ciphertext> ciphertexts;
  std::vector<RecoveryResponse> responses;
};

void write_transcript(std::ostream& out, const Transcript& t);
Transcript read_transcript(std::istream& in);

}  // namespace dpmeter::agg
