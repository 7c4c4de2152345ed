#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace qualsim {

struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InvalidPointError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct InconsistentHistoryError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Thrown when exhaustive history enumeration would exceed the configured
// branch cap. Carries the offending count so callers can report it.
struct CapExceededError : std::runtime_error {
  std::uint64_t branch_count;
  std::uint64_t cap;
  CapExceededError(std::uint64_t count, std::uint64_t cap_)
      : std::runtime_error("history enumeration needs " + std::to_string(count) +
                           " branches, cap is " + std::to_string(cap_)),
        branch_count(count),
        cap(cap_) {}
};

}  // namespace qualsim
