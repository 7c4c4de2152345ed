#pragma once

#include <optional>
#include <string>
#include <vector>

#include "qualsim/dsl.hpp"
#include "qualsim/lattice.hpp"
#include "qualsim/substrate.hpp"

namespace qualsim {

struct Quale {
  long long point = 0;  // point index
  int type = 0;         // index into the program's declaration order

  bool operator==(const Quale&) const = default;
};

// All qualia over the whole block. At most one per point; stored in point
// index order, so equality of the canonical key is equality of distributions.
struct QualiaDistribution {
  std::vector<Quale> qualia;
  std::vector<long long> type_counts;

  long long size() const { return static_cast<long long>(qualia.size()); }
  std::string canonical_key() const;
  std::uint64_t hash() const;  // FNV-1a of the canonical key
};

// Evaluation problems that do not abort a run, only mark the offending
// predicate false at that point.
struct EvalDiagnostics {
  long long division_by_zero = 0;
  std::string first_context;  // "<type> at line L, col C" of the first hit
};

// First declaration (in program order) that holds at p, none if all fail.
std::optional<int> evaluate(const dsl::PredicateProgram& program,
                            const DensityField& field, const SpacetimePoint& p,
                            const LatticeConfig& cfg,
                            EvalDiagnostics* diag = nullptr);

// Evaluate every lattice point. Deterministic; exclusivity holds by
// construction (one verdict per point).
QualiaDistribution assign_qualia(const dsl::PredicateProgram& program,
                                 const DensityField& field,
                                 const LatticeConfig& cfg,
                                 EvalDiagnostics* diag = nullptr);

}  // namespace qualsim
