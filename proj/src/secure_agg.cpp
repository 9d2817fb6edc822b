#include "dpmeter/secure_agg.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

#include "dpmeter/errors.hpp"

namespace dpmeter::agg {

namespace {

// Domain tags keep the different uses of one key from ever sharing a PRF
// input.
constexpr std::uint8_t kTagKeyDerivePair = 0x01;
constexpr std::uint8_t kTagKeyDeriveAgg = 0x02;
constexpr std::uint8_t kTagSelect = 0x03;
constexpr std::uint8_t kTagDummy = 0x04;
constexpr std::uint8_t kTagKeystream = 0x05;

std::array<std::uint8_t, 17> prf_message(std::uint8_t tag, std::uint64_t a,
                                         std::uint64_t b) {
  std::array<std::uint8_t, 17> msg;
  msg[0] = tag;
  for (int i = 0; i < 8; ++i) {
    msg[1 + i] = static_cast<std::uint8_t>(a >> (8 * i));
    msg[9 + i] = static_cast<std::uint8_t>(b >> (8 * i));
  }
  return msg;
}

std::array<std::uint8_t, 16> to_key(Prf128 v) {
  std::array<std::uint8_t, 16> key;
  std::memcpy(key.data(), &v.lo, 8);
  std::memcpy(key.data() + 8, &v.hi, 8);
  return key;
}

std::uint64_t pair_index(NodeId i, NodeId j) {
  const NodeId lo = std::min(i, j);
  const NodeId hi = std::max(i, j);
  return (static_cast<std::uint64_t>(lo) << 32) | hi;
}

// 128-bit PRF output reduced into Z_m.  m is a power of two, so the
// reduction is exact masking and the residue is uniform.
std::uint64_t residue_from_prf(Prf128 v, Modulus m) {
  return m.reduce(v.lo);
}

// High half mapped to [0,1); used for selection draws so the residue half
// stays independent of it.
double unit_from_prf(Prf128 v) {
  return static_cast<double>(v.hi >> 11) * 0x1.0p-53;
}

}  // namespace

Modulus choose_modulus(std::uint64_t max_plain, std::uint32_t cluster_size) {
  if (max_plain == 0) throw std::invalid_argument("choose_modulus: max_plain must be > 0");
  if (cluster_size == 0) throw std::invalid_argument("choose_modulus: cluster_size must be > 0");
  const unsigned __int128 need =
      static_cast<unsigned __int128>(max_plain) * cluster_size;
  int bits = 1;
  while ((static_cast<unsigned __int128>(1) << bits) < need) {
    ++bits;
    if (bits > 62) throw std::invalid_argument("choose_modulus: range exceeds 2^62");
  }
  return {std::uint64_t{1} << bits, bits};
}

std::uint64_t FixedPointCodec::encode(double value, Modulus m) const {
  if (!std::isfinite(value)) throw RangeError("encode: value not finite");
  const double scaled = std::round(value * scale);
  if (std::fabs(scaled) > static_cast<double>(max_plain)) {
    throw RangeError("encode: value outside plaintext range");
  }
  const std::int64_t units = static_cast<std::int64_t>(scaled);
  return m.reduce(static_cast<std::uint64_t>(units));
}

std::int64_t FixedPointCodec::decode_units(std::uint64_t residue, Modulus m) const {
  residue = m.reduce(residue);
  if (residue < m.value / 2) return static_cast<std::int64_t>(residue);
  return static_cast<std::int64_t>(residue) - static_cast<std::int64_t>(m.value);
}

double FixedPointCodec::decode(std::uint64_t residue, Modulus m) const {
  return static_cast<double>(decode_units(residue, m)) / scale;
}

KeyTable::KeyTable(std::span<const NodeId> nodes,
                   std::span<const std::uint8_t> master_secret) {
  if (nodes.size() < 2) throw std::invalid_argument("KeyTable: need at least 2 nodes");
  nodes_.assign(nodes.begin(), nodes.end());
  std::sort(nodes_.begin(), nodes_.end());
  if (std::adjacent_find(nodes_.begin(), nodes_.end()) != nodes_.end()) {
    throw std::invalid_argument("KeyTable: duplicate node ids");
  }

  // Compress the master secret to a 16-byte PRF key, then expand.
  std::array<std::uint8_t, 16> root{};
  {
    const Prf zero(root);
    const Prf128 h = zero.eval128(master_secret);
    root = to_key(h);
  }
  const Prf master(root);

  pair_.reserve(nodes_.size() * (nodes_.size() - 1) / 2);
  for (std::size_t a = 0; a < nodes_.size(); ++a) {
    for (std::size_t b = a + 1; b < nodes_.size(); ++b) {
      const auto msg = prf_message(kTagKeyDerivePair, nodes_[a], nodes_[b]);
      pair_.emplace(pair_index(nodes_[a], nodes_[b]),
                    Prf(to_key(master.eval128(msg))));
    }
    const auto msg = prf_message(kTagKeyDeriveAgg, nodes_[a], 0);
    agg_.emplace(nodes_[a], Prf(to_key(master.eval128(msg))));
  }
}

const Prf& KeyTable::pairwise(NodeId i, NodeId j) const {
  if (i == j) throw std::invalid_argument("KeyTable::pairwise: i == j");
  const auto it = pair_.find(pair_index(i, j));
  if (it == pair_.end()) throw std::invalid_argument("KeyTable::pairwise: unknown pair");
  return it->second;
}

const Prf& KeyTable::aggregator(NodeId i) const {
  const auto it = agg_.find(i);
  if (it == agg_.end()) throw std::invalid_argument("KeyTable::aggregator: unknown node");
  return it->second;
}

bool pair_selected(const Prf& pairwise, std::uint64_t selection_nonce,
                   double threshold) {
  const auto msg = prf_message(kTagSelect, selection_nonce, 0);
  return unit_from_prf(pairwise.eval128(msg)) <= threshold;
}

std::vector<NodeId> select_participants(NodeId self, const KeyTable& keys,
                                        std::uint64_t selection_nonce,
                                        double participation) {
  const auto nodes = keys.nodes();
  const double others = static_cast<double>(nodes.size()) - 1.0;
  if (!(participation > 0) || participation > others) {
    throw std::invalid_argument("select_participants: need 0 < w <= N-1");
  }
  const double threshold = participation / others;
  std::vector<NodeId> out;
  for (const NodeId peer : nodes) {
    if (peer == self) continue;
    if (pair_selected(keys.pairwise(self, peer), selection_nonce, threshold)) {
      out.push_back(peer);
    }
  }
  return out;
}

std::uint64_t dummy_key(NodeId i, NodeId j, const KeyTable& keys,
                        std::uint64_t dummy_nonce, Modulus m) {
  if (i == j) throw std::invalid_argument("dummy_key: i == j");
  const auto msg = prf_message(kTagDummy, dummy_nonce, 0);
  const std::uint64_t v = residue_from_prf(keys.pairwise(i, j).eval128(msg), m);
  return i > j ? v : m.neg(v);
}

std::uint64_t keystream(NodeId i, const KeyTable& keys, std::uint32_t slot,
                        Modulus m) {
  const auto msg = prf_message(kTagKeystream, slot, 0);
  return residue_from_prf(keys.aggregator(i).eval128(msg), m);
}

Ciphertext encrypt_share(NodeId self, std::uint32_t slot, double value,
                         const KeyTable& keys,
                         std::span<const NodeId> participants,
                         std::uint64_t commitment, const FixedPointCodec& codec,
                         Modulus m) {
  const RoundNonces nonces = slot_nonces(slot);
  std::uint64_t acc = codec.encode(value, m);
  acc = m.add(acc, keystream(self, keys, slot, m));
  for (const NodeId peer : participants) {
    acc = m.add(acc, dummy_key(self, peer, keys, nonces.dummy, m));
  }
  acc = m.add(acc, m.reduce(commitment));
  return {self, slot, acc};
}

RecoveryResponse recovery_response(NodeId self, std::uint32_t slot,
                                   std::span<const NodeId> missing,
                                   std::span<const NodeId> participants,
                                   const KeyTable& keys,
                                   std::uint64_t commitment, Modulus m) {
  const RoundNonces nonces = slot_nonces(slot);
  std::uint64_t acc = m.reduce(commitment);
  for (const NodeId peer : participants) {
    if (std::find(missing.begin(), missing.end(), peer) != missing.end()) {
      acc = m.add(acc, dummy_key(self, peer, keys, nonces.dummy, m));
    }
  }
  return {self, slot, acc};
}

double aggregate_decrypt(std::span<const Ciphertext> ciphertexts,
                         std::span<const RecoveryResponse> responses,
                         std::uint64_t keystream_sum,
                         const FixedPointCodec& codec, Modulus m) {
  std::uint64_t acc = 0;
  for (const auto& ct : ciphertexts) acc = m.add(acc, ct.value);
  for (const auto& r : responses) acc = m.sub(acc, r.value);
  acc = m.sub(acc, m.reduce(keystream_sum));
  const std::int64_t units = codec.decode_units(acc, m);
  if (std::llabs(units) > static_cast<long long>(codec.max_plain)) {
    throw ProtocolFailure("aggregate_decrypt: residual outside plaintext range");
  }
  return static_cast<double>(units) / codec.scale;
}

namespace {

template <typename T>
void put_le(std::ostream& out, T v) {
  std::uint8_t buf[sizeof(T)];
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    buf[i] = static_cast<std::uint8_t>(static_cast<std::uint64_t>(v) >> (8 * i));
  }
  out.write(reinterpret_cast<const char*>(buf), sizeof(T));
}

template <typename T>
T get_le(std::istream& in) {
  std::uint8_t buf[sizeof(T)];
  in.read(reinterpret_cast<char*>(buf), sizeof(T));
  if (!in) throw std::runtime_error("transcript: truncated stream");
  std::uint64_t v = 0;
  for (std::size_t i = 0; i < sizeof(T); ++i) {
    v |= static_cast<std::uint64_t>(buf[i]) << (8 * i);
  }
  return static_cast<T>(v);
}

constexpr char kMagic[4] = {'D', 'P', 'M', 'T'};
constexpr std::uint16_t kVersion = 1;

}  // namespace

void write_transcript(std::ostream& out, const Transcript& t) {
  out.write(kMagic, 4);
  put_le<std::uint16_t>(out, kVersion);
  put_le<std::uint8_t>(out, static_cast<std::uint8_t>(t.modulus.bits));
  put_le<std::uint8_t>(out, 0);
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.ciphertexts.size()));
  put_le<std::uint32_t>(out, static_cast<std::uint32_t>(t.responses.size()));
  for (const auto& ct : t.ciphertexts) {
    put_le<std::uint8_t>(out, 1);
    put_le<std::uint32_t>(out, ct.sender);
    put_le<std::uint32_t>(out, ct.slot);
    put_le<std::uint64_t>(out, ct.value);
  }
  for (const auto& r : t.responses) {
    put_le<std::uint8_t>(out, 2);
    put_le<std::uint32_t>(out, r.sender);
    put_le<std::uint32_t>(out, r.slot);
    put_le<std::uint64_t>(out, r.value);
  }
}

Transcript read_transcript(std::istream& in) {
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMagic, 4) != 0) {
    throw std::runtime_error("transcript: bad magic");
  }
  if (get_le<std::uint16_t>(in) != kVersion) {
    throw std::runtime_error("transcript: unsupported version");
  }
  const int bits = get_le<std::uint8_t>(in);
  if (bits < 1 || bits > 62) throw std::runtime_error("transcript: bad modulus");
  get_le<std::uint8_t>(in);
  Transcript t;
  t.modulus = {std::uint64_t{1} << bits, bits};
  const auto n_ct = get_le<std::uint32_t>(in);
  const auto n_resp = get_le<std::uint32_t>(in);
  t.ciphertexts.reserve(n_ct);
  t.responses.reserve(n_resp);
  for (std::uint32_t i = 0; i < n_ct + n_resp; ++i) {
    const auto kind = get_le<std::uint8_t>(in);
    const auto sender = get_le<std::uint32_t>(in);
    const auto slot = get_le<std::uint32_t>(in);
    const auto value = get_le<std::uint64_t>(in);
    if (kind == 1) {
      t.ciphertexts.push_back({sender, slot, value});
    } else if (kind == 2) {
      t.responses.push_back({sender, slot, value});
    } else {
      throw std::runtime_error("transcript: unknown record kind");
    }
  }
  if (t.ciphertexts.size() != n_ct || t.responses.size() != n_resp) {
    throw std::runtime_error("transcript: record counts disagree with header");
  }
  return t;
}

}  // namespace dpmeter::agg
