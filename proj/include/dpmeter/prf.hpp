#pragma once

#include <array>
#include <atomic>
#include <cstdint>
#include <span>

namespace dpmeter::agg {

struct Prf128 {
  std::uint64_t lo;
  std::uint64_t hi;
};

// SipHash-2-4 keyed PRF (128-bit key).  eval64 is the classic 8-byte-output
// variant, eval128 the extended one; both follow the reference construction.
// A real deployment would agree the keys via a key exchange; here they are
// injected, which keeps the masking algebra intact and the simulation
// deterministic.
//
// Evaluations are counted globally so tests can check per-slot work bounds.
class Prf {
 public:
  explicit Prf(const std::array<std::uint8_t, 16>& key);

  std::uint64_t eval64(std::span<const std::uint8_t> msg) const;
  Prf128 eval128(std::span<const std::uint8_t> msg) const;

  std::array<std::uint8_t, 16> key_bytes() const;

  static void reset_eval_count() { eval_count_.store(0); }
  static std::uint64_t eval_count() { return eval_count_.load(); }

 private:
  std::uint64_t k0_;
  std::uint64_t k1_;
  static std::atomic<std::uint64_t> eval_count_;
};

}  // namespace dpmeter::agg
