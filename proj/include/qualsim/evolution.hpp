#pragma once

#include <memory>
#include <string>
#include <vector>

#include "qualsim/weights.hpp"

namespace qualsim {

// One competing creature stand-in: a cell range with its own initial
// occupation pattern, hopping angle and predicate subprogram. Its predicates
// are evaluated only at points inside its range.
struct MotifSpec {
  int region_start = 0;
  int region_size = 0;
  std::string pattern;  // region-local, 0/1 per cell
  double theta = 0.0;
  std::shared_ptr<const dsl::PredicateProgram> program;
  std::string program_source;  // for output echoes
};

struct EvolveSetup {
  LatticeConfig lattice;  // 1D
  double collapse_rate = 0.0;
  int cell_cap = 12;
  std::uint64_t enumeration_cap = 1ull << 20;
  MotifSpec first;
  MotifSpec second;

  void validate() const;  // disjoint ranges, equal sizes, matching patterns

  Instance instance() const;

  // Combined rule: the first motif's quale types, then the second's, each
  // prefixed A./B. so typed weights and reports can tell them apart.
  QualiaRule rule() const;

  // Qualia counted inside each motif's range, from the combined type split.
  std::pair<long long, long long> region_counts(const SupportRow& row) const;
};

// dominance = P(first motif produces strictly more qualia than the second),
// ties counted half. Exact when n_samples == 0 (full enumeration), sampled
// otherwise. baseline is the same functional under the unweighted quantum
// law.
struct SelectionResult {
  double beta = 0.0;
  Estimate dominance;
  double baseline = 0.0;
  bool exact = false;
  double ess = 0.0;
};

SelectionResult run_selection(const EvolveSetup& setup, const WeightSpec& spec,
                              long long n_samples, std::uint64_t seed,
                              const SampleOptions& opts = {});

// One result per strength value; a single enumeration (or a single sample
// set) is reweighted across the sweep.
std::vector<SelectionResult> beta_sweep(const EvolveSetup& setup,
                                        const WeightSpec& variant,
                                        const std::vector<double>& strengths,
                                        long long n_samples, std::uint64_t seed,
                                        const SampleOptions& opts = {});

}  // namespace qualsim
