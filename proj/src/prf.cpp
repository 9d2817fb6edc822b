#include "dpmeter/prf.hpp"

#include <cstring>

namespace dpmeter::agg {

std::atomic<std::uint64_t> Prf::eval_count_{0};

namespace {

inline std::uint64_t rotl(std::uint64_t x, int b) {
  return (x << b) | (x >> (64 - b));
}

inline std::uint64_t load_le64(const std::uint8_t* p) {
  std::uint64_t v;
  std::memcpy(&v, p, 8);  // little-endian hosts only; enforced in CMake
  return v;
}

struct SipState {
  std::uint64_t v0, v1, v2, v3;

  void round() {
    v0 += v1; v1 = rotl(v1, 13); v1 ^= v0; v0 = rotl(v0, 32);
    v2 += v3; v3 = rotl(v3, 16); v3 ^= v2;
    v0 += v3; v3 = rotl(v3, 21); v3 ^= v0;
    v2 += v1; v1 = rotl(v1, 17); v1 ^= v2; v2 = rotl(v2, 32);
  }
};

// Core of SipHash-2-4; when wide is true the 128-bit tweaks are applied and
// both halves are produced, otherwise hi is unused.
Prf128 siphash(std::uint64_t k0, std::uint64_t k1,
               std::span<const std::uint8_t> msg, bool wide) {
  SipState s{
      0x736f6d6570736575ULL ^ k0,
      0x646f72616e646f6dULL ^ k1,
      0x6c7967656e657261ULL ^ k0,
      0x7465646279746573ULL ^ k1,
  };
  if (wide) s.v1 ^= 0xee;

  const std::size_t len = msg.size();
  const std::size_t full = len & ~std::size_t{7};
  for (std::size_t i = 0; i < full; i += 8) {
    const std::uint64_t m = load_le64(msg.data() + i);
    s.v3 ^= m;
    s.round();
    s.round();
    s.v0 ^= m;
  }
  std::uint64_t last = static_cast<std::uint64_t>(len & 0xff) << 56;
  for (std::size_t i = full; i < len; ++i) {
    last |= static_cast<std::uint64_t>(msg[i]) << (8 * (i - full));
  }
  s.v3 ^= last;
  s.round();
  s.round();
  s.v0 ^= last;

  s.v2 ^= wide ? 0xee : 0xff;
  s.round();
  s.round();
  s.round();
  s.round();
  Prf128 out{s.v0 ^ s.v1 ^ s.v2 ^ s.v3, 0};
  if (wide) {
    s.v1 ^= 0xdd;
    s.round();
    s.round();
    s.round();
    s.round();
    out.hi = s.v0 ^ s.v1 ^ s.v2 ^ s.v3;
  }
  return out;
}

}  // namespace

Prf::Prf(const std::array<std::uint8_t, 16>& key)
    : k0_(load_le64(key.data())), k1_(load_le64(key.data() + 8)) {}

std::uint64_t Prf::eval64(std::span<const std::uint8_t> msg) const {
  eval_count_.fetch_add(1, std::memory_order_relaxed);
  return siphash(k0_, k1_, msg, false).lo;
}

Prf128 Prf::eval128(std::span<const std::uint8_t> msg) const {
  eval_count_.fetch_add(1, std::memory_order_relaxed);
  return siphash(k0_, k1_, msg, true);
}

std::array<std::uint8_t, 16> Prf::key_bytes() const {
  std::array<std::uint8_t, 16> out;
  std::memcpy(out.data(), &k0_, 8);
  std::memcpy(out.data() + 8, &k1_, 8);
  return out;
}

}  // namespace dpmeter::agg
