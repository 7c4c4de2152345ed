#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "qualsim/dsl.hpp"
#include "qualsim/grouping.hpp"
#include "qualsim/qualia.hpp"
#include "qualsim/substrate.hpp"

namespace qualsim {

// The weight functional A(D) > 0. All arithmetic stays in the log domain.
//   counting:    A(D) = exp(beta * |D|)
//   typed:       A(D) = exp(sum_j beta_j * count_j(D)); unlisted types get 0
//   factorized:  A(D) = prod_c exp(beta * |c|) over consciousness components,
//                which reduces to the counting value on the same D
enum class WeightVariant { Counting, Typed, Factorized };

struct WeightSpec {
  WeightVariant variant = WeightVariant::Counting;
  double beta = 0.0;
  std::map<std::string, double> type_betas;

  void validate() const;  // rejects non-finite parameters

  // Sweep handle: counting/factorized take `strength` as beta; typed scales
  // every beta_j by it.
  WeightSpec with_strength(double strength) const;
};

double log_weight(const QualiaDistribution& d, const WeightSpec& spec,
                  const std::vector<std::string>& type_names,
                  const std::vector<Consciousness>* components);

// A lattice + substrate bundle with the enumeration budget.
struct Instance {
  LatticeConfig lattice;
  SubstrateConfig substrate;
  std::uint64_t enumeration_cap = 1ull << 20;
};

// How a density field turns into qualia. The plain rule evaluates one
// program everywhere; the evolution module substitutes a per-region rule.
struct QualiaRule {
  std::vector<std::string> type_names;
  std::function<QualiaDistribution(const DensityField&, EvalDiagnostics*)> assign;
};

QualiaRule whole_lattice_rule(std::shared_ptr<const dsl::PredicateProgram> program,
                              LatticeConfig lattice);

struct SupportRow {
  QualiaDistribution d;
  std::string key;
  std::vector<long long> component_sizes;
  double p_q = 0.0;     // quantum mass aggregated over histories
  double log_a = 0.0;
  double p_true = 0.0;  // C * p_q * a
};

struct TrueDistribution {
  std::vector<SupportRow> support;  // sorted by p_true desc, then key
  double normalizer = 0.0;          // C
  double total_pq = 0.0;            // enumerated quantum mass
};

// Enumeration-only part: distributions and their quantum masses, weights not
// yet applied. Rows are in first-appearance order of enumeration.
struct ExactSupport {
  std::vector<SupportRow> rows;
  double total_pq = 0.0;
  EvalDiagnostics diagnostics;
};

ExactSupport enumerate_support(const Instance& inst, const QualiaRule& rule);
TrueDistribution apply_weights(const ExactSupport& support, const WeightSpec& spec,
                               const std::vector<std::string>& type_names);

TrueDistribution exact_true_distribution(const Instance& inst,
                                         const dsl::PredicateProgram& program,
                                         const WeightSpec& spec);
TrueDistribution exact_true_distribution(const Instance& inst, const QualiaRule& rule,
                                         const WeightSpec& spec);

struct Estimate {
  double value = 0.0;
  double std_error = 0.0;
};

// Histories drawn from the quantum law, grouped by the qualia distribution
// they produce. Weight-independent, so one draw serves any number of weight
// specs.
struct RawSamples {
  long long n = 0;
  std::uint64_t seed = 0;
  std::vector<SupportRow> rows;    // p_q/log_a/p_true unused here
  std::vector<long long> row_n;    // samples per row
  std::vector<int> sample_row;     // row index per sample, in draw order
  EvalDiagnostics diagnostics;
};

struct SampleOptions {
  int workers = 1;
  double ess_floor = 10.0;
};

RawSamples draw_samples(const Instance& inst, const QualiaRule& rule, long long n,
                        std::uint64_t seed, int workers = 1);

// Self-normalized importance weights over raw samples. exp of log-weight
// differences only, so |beta * |D|| up to ~700 stays finite.
struct Snis {
  std::vector<double> normalized;  // per row, multiplied by row_n gives mass
  double ess = 0.0;
};
Snis snis_weights(const RawSamples& samples, const WeightSpec& spec,
                  const std::vector<std::string>& type_names);

// Weighted estimate of a per-row functional with its delta-method error.
Estimate snis_estimate(const RawSamples& samples, const Snis& w,
                       const std::function<double(const SupportRow&)>& f);

struct SampleResult {
  long long n = 0;
  std::uint64_t seed = 0;
  double ess = 0.0;
  bool ess_warning = false;
  Estimate expected_size;
  Estimate expected_components;
  std::vector<Estimate> expected_type_counts;
  std::vector<SupportRow> rows;      // weight_mass in p_true field
  std::vector<long long> row_n;
  EvalDiagnostics diagnostics;
};

SampleResult sample_true(const Instance& inst, const QualiaRule& rule,
                         const WeightSpec& spec, long long n, std::uint64_t seed,
                         const SampleOptions& opts = {});
SampleResult sample_true(const Instance& inst, const dsl::PredicateProgram& program,
                         const WeightSpec& spec, long long n, std::uint64_t seed,
                         const SampleOptions& opts = {});

Estimate expected_qualia_count(const TrueDistribution& exact);
Estimate expected_qualia_count(const SampleResult& sampled);

}  // namespace qualsim
