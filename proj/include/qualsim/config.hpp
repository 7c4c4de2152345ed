#pragma once

#include <cstdint>
#include <memory>
#include <optional>
#include <string>
#include <vector>

#include "qualsim/evolution.hpp"
#include "qualsim/weights.hpp"

namespace qualsim {

struct SamplerSettings {
  long long samples = 10000;
  std::uint64_t seed = 1;
  std::uint64_t enumeration_cap = 1ull << 20;
  double ess_floor = 10.0;
};

// One run, fully described. Loading resolves predicate files to their text,
// so the echo written next to every output is self-contained and reruns
// byte-identically.
struct RunConfig {
  LatticeConfig lattice;
  SubstrateConfig substrate;

  std::shared_ptr<const dsl::PredicateProgram> program;  // null if absent
  std::string program_source;

  WeightSpec weights;
  SamplerSettings sampler;
  std::string output_dir = "out";

  std::optional<EvolveSetup> evolve;
  std::vector<double> evolve_betas;
  long long evolve_samples = 0;  // 0 = exact enumeration

  Instance instance() const;
  QualiaRule rule() const;

  std::string echo_json() const;

  // `base_dir` anchors relative predicate file paths.
  static RunConfig from_json_text(const std::string& text, const std::string& base_dir);
  static RunConfig load_file(const std::string& path);
};

}  // namespace qualsim
