#pragma once

#include <stdexcept>
#include <string>

namespace mish {

// Malformed on-disk data (bad magic, misaligned records, corrupt header).
struct FormatError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// File shorter or longer than its declared contents.
struct LengthError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Failed filesystem access; message carries the offending path.
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Bad or inconsistent experiment configuration.
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Object used in a way its current state does not support
// (e.g. fused backward without a fused forward cache).
struct StateError : std::logic_error {
  using std::logic_error::logic_error;
};

// Layer list that does not compose into a valid network.
struct SpecError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace mish
