#pragma once

#include <stdexcept>

namespace dpmeter {

// An encoded value fell outside the configured plaintext range.
struct RangeError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// The aggregate could not be recovered from a round's messages.
struct ProtocolFailure : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace dpmeter
