#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "qualsim/lattice.hpp"

namespace qualsim {

// One qubit per cell, occupation basis {|0>, |1>}. Cell 0 occupies the most
// significant bit of a basis index, so the pattern string "10" is index 2.

// Contiguous 1D cell range evolved by its own brickwork, uncoupled from the
// rest of the lattice.
struct RegionSpec {
  int start = 0;
  int size = 0;
  double theta = 0.0;
};

struct SubstrateConfig {
  double theta = 0.0;          // hopping angle of the global brickwork
  double collapse_rate = 0.0;  // per-cell, per-step collapse probability
  std::string initial = "0";   // occupation pattern, or preset bell|plus|ghz
  int cell_cap = 12;           // dimension guard: 2^cells

  // When nonempty, replaces the global brickwork. 1D lattices only.
  std::vector<RegionSpec> regions;

  // (layer, first cell index) -> angle. Test hook for causality probes.
  std::map<std::pair<int, int>, double> gate_theta_overrides;

  void validate(const LatticeConfig& lattice) const;
};

// Two-cell number-conserving hopping gate: identity on |00>,|11>, a rotation
// by theta mixing |01>,|10>. Equals exp(-i theta (XX+YY)/2).
Eigen::Matrix4cd hopping_gate(double theta);

struct GateSite {
  int cell_a = 0;  // paired cells, adjacent along one axis
  int cell_b = 0;
  double theta = 0.0;
};

// Gates of unitary layer `layer` (the map from slice `layer` to `layer+1`).
std::vector<GateSite> brickwork_layer(const SubstrateConfig& sub,
                                      const LatticeConfig& lattice, int layer);

class StateVec {
 public:
  StateVec() = default;
  StateVec(int n_cells, Eigen::VectorXcd amps);
  static StateVec computational(int n_cells, std::uint64_t pattern_bits);

  int n_cells() const { return n_cells_; }
  Eigen::Index dim() const { return amps_.size(); }
  const Eigen::VectorXcd& amplitudes() const { return amps_; }

  int bit_of(int cell) const { return n_cells_ - 1 - cell; }

  void apply_gate(const GateSite& g);
  void apply_layer(const SubstrateConfig& sub, const LatticeConfig& lattice, int layer);

  double occupation_probability(int cell) const;

  // Selective projection onto `outcome` at `cell`; renormalizes.
  // Returns the pre-projection probability of that outcome.
  double project(int cell, int outcome);

 private:
  int n_cells_ = 0;
  Eigen::VectorXcd amps_;
};

class DensityOperator {
 public:
  DensityOperator() = default;
  explicit DensityOperator(const StateVec& pure);
  DensityOperator(int n_cells, Eigen::MatrixXcd rho);

  int n_cells() const { return n_cells_; }
  Eigen::Index dim() const { return rho_.rows(); }
  const Eigen::MatrixXcd& matrix() const { return rho_; }

  int bit_of(int cell) const { return n_cells_ - 1 - cell; }

  void apply_gate(const GateSite& g);
  void apply_layer(const SubstrateConfig& sub, const LatticeConfig& lattice, int layer);

  // Selective projection, result left unnormalized; returns its trace.
  double project(int cell, int outcome);
  // Non-selective occupation measurement: kills coherences across the
  // outcome sectors of `cell`, trace preserved.
  void dephase(int cell);
  void scale(double s) { rho_ *= s; }

  double trace_real() const { return rho_.trace().real(); }
  double occupation_expectation(int cell) const;
  Eigen::Matrix2cd reduced_single_cell(int cell) const;

 private:
  int n_cells_ = 0;
  Eigen::MatrixXcd rho_;
};

StateVec initial_state(const SubstrateConfig& sub, const LatticeConfig& lattice);

// Applies the layer-`t` brickwork to a density operator; trace and spectrum
// are preserved (unitary conjugation).
DensityOperator evolve_step(const DensityOperator& state, const SubstrateConfig& sub,
                            const LatticeConfig& lattice, int t);

struct CollapseEvent {
  SpacetimePoint point;
  int outcome = 0;  // occupation found, 0 or 1
};

// A full record of where collapses happened and what they found. The log
// probability factorizes: site selection (Bernoulli collapse_rate per
// cell-step) times Born outcome probabilities along the collapsed state.
struct CollapseHistory {
  std::vector<CollapseEvent> events;  // ordered by (t, cell index)
  double log_probability = 0.0;

  std::vector<long long> site_indices(const LatticeConfig& cfg) const;

  // Canonical per-site encoding ('.', '0' or '1'), one char per lattice
  // point in point-index order. Two histories are equal iff keys match.
  std::string key(const LatticeConfig& cfg) const;
};

CollapseHistory sample_history(const SubstrateConfig& sub, const LatticeConfig& lattice,
                               std::uint64_t seed);

// A priori branch count of exhaustive enumeration: product over cell-steps
// of 1 (never collapses), 2 (always, outcomes branch) or 3 (may or may not,
// then outcomes). Saturates instead of overflowing.
std::uint64_t enumeration_branch_bound(const SubstrateConfig& sub,
                                       const LatticeConfig& lattice);

// All histories with probability above the pruning floor (1e-18 of branch
// mass, so the returned masses sum to 1 within ~1e-12). Throws
// CapExceededError if the a priori bound exceeds `cap`.
std::vector<std::pair<CollapseHistory, double>> enumerate_histories(
    const SubstrateConfig& sub, const LatticeConfig& lattice, std::uint64_t cap);

// Local state at p given h: evolve from the initial state to slice p.t,
// applying events inside past_cone(p) as selective projections and events
// outside as dephasing, then trace out every cell but p's. Trace-one,
// Hermitian, PSD.
Eigen::Matrix2cd conditioned_local_state(const CollapseHistory& h,
                                         const SpacetimePoint& p,
                                         const SubstrateConfig& sub,
                                         const LatticeConfig& lattice);

// Same evolution but event `event_index` is forced selective with
// `forced_outcome` whether or not it sits in the cone. Returns the final
// local state and the branch weight (product of all selective projection
// traces along the way). Averaging the two forced branches by weight
// reproduces the dephasing route; probe for that identity.
std::pair<Eigen::Matrix2cd, double> conditioned_local_state_forced(
    const CollapseHistory& h, const SpacetimePoint& p, std::size_t event_index,
    int forced_outcome, const SubstrateConfig& sub, const LatticeConfig& lattice);

// Occupation expectation per point: the mass-density ontology (unit mass per
// excitation, cell volume 1).
struct DensityField {
  std::vector<double> rho;  // indexed by point index

  double at(const SpacetimePoint& p, const LatticeConfig& cfg) const {
    return rho[static_cast<std::size_t>(point_index(p, cfg))];
  }
};

// rho(p) = occupation of conditioned_local_state(h, p) at every point.
DensityField density_field(const CollapseHistory& h, const SubstrateConfig& sub,
                           const LatticeConfig& lattice);

// Same field, computed point by point through the channel composition.
// density_field() may instead average a pure-state branch ensemble when the
// outcome tree of h's site pattern is small; the two routes agree to 1e-10.
DensityField density_field_reference(const CollapseHistory& h,
                                     const SubstrateConfig& sub,
                                     const LatticeConfig& lattice);

}  // namespace qualsim
