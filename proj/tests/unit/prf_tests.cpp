#include <array>
#include <cstdint>
#include <vector>

#include "doctest.h"
#include "dpmeter/prf.hpp"

using dpmeter::agg::Prf;
using dpmeter::agg::Prf128;

namespace {

std::array<std::uint8_t, 16> reference_key() {
  std::array<std::uint8_t, 16> key{};
  for (int i = 0; i < 16; ++i) key[i] = static_cast<std::uint8_t>(i);
  return key;
}

std::vector<std::uint8_t> counting_message(std::size_t n) {
  std::vector<std::uint8_t> msg(n);
  for (std::size_t i = 0; i < n; ++i) msg[i] = static_cast<std::uint8_t>(i);
  return msg;
}

}  // namespace

TEST_SUITE("prf") {
  TEST_CASE("published 64-bit test vectors") {
    const Prf prf(reference_key());
    struct Vector {
      std::size_t len;
      std::uint64_t expect;
    };
    const Vector vectors[] = {
        {0, 0x726fdb47dd0e0e31ULL},
        {1, 0x74f839c593dc67fdULL},
        {2, 0x0d6c8009d9a94f5aULL},
    };
    for (const auto& v : vectors) {
      const auto msg = counting_message(v.len);
      CAPTURE(v.len);
      CHECK(prf.eval64(msg) == v.expect);
    }
  }

  TEST_CASE("published 128-bit test vectors") {
    const Prf prf(reference_key());
    struct Vector {
      std::size_t len;
      std::uint64_t lo;
      std::uint64_t hi;
    };
    const Vector vectors[] = {
        {0, 0xe6a825ba047f81a3ULL, 0x930255c71472f66dULL},
        {1, 0x44af996bd8c187daULL, 0x45fc229b11597634ULL},
        {2, 0xc75da4a48d227781ULL, 0xe4ff0af6de8ba3fcULL},
    };
    for (const auto& v : vectors) {
      const auto msg = counting_message(v.len);
      const Prf128 out = prf.eval128(msg);
      CAPTURE(v.len);
      CHECK(out.lo == v.lo);
      CHECK(out.hi == v.hi);
    }
  }

  TEST_CASE("keyed: different keys give different streams") {
    auto k1 = reference_key();
    auto k2 = reference_key();
    k2[0] ^= 1;
    const Prf a(k1), b(k2);
    const auto msg = counting_message(8);
    CHECK(a.eval64(msg) != b.eval64(msg));
    CHECK(a.eval128(msg).lo != b.eval128(msg).lo);
  }

  TEST_CASE("message-sensitive") {
    const Prf prf(reference_key());
    const auto m1 = counting_message(9);
    auto m2 = m1;
    m2[8] ^= 0x80;
    CHECK(prf.eval64(m1) != prf.eval64(m2));
  }

  TEST_CASE("key bytes round-trip") {
    const auto key = reference_key();
    const Prf prf(key);
    CHECK(prf.key_bytes() == key);
  }

  TEST_CASE("evaluation counter tracks work") {
    const Prf prf(reference_key());
    const auto msg = counting_message(4);
    Prf::reset_eval_count();
    CHECK(Prf::eval_count() == 0);
    (void)prf.eval64(msg);
    (void)prf.eval128(msg);
    (void)prf.eval64(msg);
    CHECK(Prf::eval_count() == 3);
  }

  TEST_CASE("output looks uniform per bit") {
    // Cheap avalanche check: across 4096 consecutive messages every output
    // bit flips roughly half the time.
    const Prf prf(reference_key());
    int bit_counts[64] = {};
    const int trials = 4096;
    for (int t = 0; t < trials; ++t) {
      std::array<std::uint8_t, 4> msg{
          static_cast<std::uint8_t>(t), static_cast<std::uint8_t>(t >> 8),
          static_cast<std::uint8_t>(t >> 16), 0};
      const std::uint64_t v = prf.eval64(msg);
      for (int b = 0; b < 64; ++b) bit_counts[b] += (v >> b) & 1;
    }
    for (int b = 0; b < 64; ++b) {
      CAPTURE(b);
      CHECK(bit_counts[b] > trials / 2 - 300);
      CHECK(bit_counts[b] < trials / 2 + 300);
    }
  }
}
