#pragma once

#include <cstdint>
#include <initializer_list>
#include <random>

namespace dpmeter {

// 64-bit finalizer with full avalanche; used to fold stream ids into seeds.
constexpr std::uint64_t splitmix64(std::uint64_t x) noexcept {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Seedable uniform stream.  Every stochastic component takes one of these
// instead of sharing global state, so simulations stay reproducible and
// parallelisable: give each (node, trial, purpose) its own stream via
// derive() and results do not depend on scheduling.
//
// Derivation rule: h = splitmix64(master), then for each id in order
// h = splitmix64(h ^ splitmix64(id)).  Distinct id tuples give streams
// that are independent for simulation purposes.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : engine_(splitmix64(seed)) {}

  static RngStream derive(std::uint64_t master,
                          std::initializer_list<std::uint64_t> ids) {
    std::uint64_t h = splitmix64(master);
    for (std::uint64_t id : ids) h = splitmix64(h ^ splitmix64(id));
    RngStream s(0);
    s.engine_.seed(h);
    return s;
  }

  std::uint64_t next_u64() { return engine_(); }

  // Uniform on [0,1), 53-bit resolution.
  double next_double() {
    return static_cast<double>(engine_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0,1); safe under log().
  double next_double_open() {
    return (static_cast<double>(engine_() >> 11) + 0.5) * 0x1.0p-53;
  }

  // Uniform integer in [0, bound); bound must be nonzero.  Rejection keeps
  // the result exactly uniform.
  std::uint64_t next_below(std::uint64_t bound) {
    const std::uint64_t threshold = (0 - bound) % bound;
    for (;;) {
      const std::uint64_t x = engine_();
      if (x >= threshold) return x % bound;
    }
  }

 private:
  std::mt19937_64 engine_;
};

}  // namespace dpmeter
