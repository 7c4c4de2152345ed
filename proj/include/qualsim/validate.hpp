#pragma once

#include <string>
#include <vector>

#include "qualsim/config.hpp"

namespace qualsim {

struct CheckResult {
  std::string name;
  enum class Status { Pass, Fail, Skip } status = Status::Pass;
  std::string detail;
};

// Cross-module invariant battery against the configured instance (plus
// built-in micro-instances where the configured one is too large to probe
// exhaustively). Pure given the config's seed.
std::vector<CheckResult> run_validation(const RunConfig& cfg);

bool all_passed(const std::vector<CheckResult>& checks);

}  // namespace qualsim
