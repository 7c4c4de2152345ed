#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "qualsim/errors.hpp"

namespace qualsim {

// Cell coordinates. Axes beyond spatial_dims are fixed at zero.
using Cell = std::array<int, 3>;

// Discrete spacetime: a block of cells (unit L = one cell) crossed with a
// time lattice (unit L/c = one step). Signals move at most one cell per step.
struct LatticeConfig {
  int spatial_dims = 1;        // 1..3
  Cell extent = {1, 1, 1};     // cells per axis; unused axes stay 1
  int steps = 1;               // time slices T
  int neighborhood_radius = 1; // N: predicate window, cells/steps
  int grouping_radius = 1;     // K: consciousness connectivity, cells

  int num_cells() const {
    return extent[0] * extent[1] * extent[2];
  }
  long long num_points() const {
    return static_cast<long long>(num_cells()) * steps;
  }
  void validate() const;
};

struct SpacetimePoint {
  Cell cell = {0, 0, 0};
  int t = 0;

  bool operator==(const SpacetimePoint&) const = default;
};

int chebyshev_distance(const Cell& a, const Cell& b);

bool cell_in_bounds(const Cell& c, const LatticeConfig& cfg);
bool point_in_bounds(const SpacetimePoint& p, const LatticeConfig& cfg);

// Row-major cell index; lexicographic order of coordinate tuples.
int cell_index(const Cell& c, const LatticeConfig& cfg);
Cell cell_from_index(int idx, const LatticeConfig& cfg);

// t-major point index: t * num_cells + cell_index.
long long point_index(const SpacetimePoint& p, const LatticeConfig& cfg);
SpacetimePoint point_from_index(long long idx, const LatticeConfig& cfg);

// All points q with q.t <= p.t and chebyshev(q.cell, p.cell) <= p.t - q.t,
// clipped at the lattice boundary. Includes p. Ordered by point index.
// Throws InvalidPointError if p is out of range.
std::vector<SpacetimePoint> past_cone(const SpacetimePoint& p,
                                      const LatticeConfig& cfg);

bool in_past_cone(const SpacetimePoint& q, const SpacetimePoint& p);

// One slot of the predicate window around a point. Slots whose point falls
// outside the lattice are kept, flagged absent, so evaluators see a defined
// out-of-bounds marker rather than a shorter list.
struct NeighborSlot {
  int dt = 0;                  // steps into the past, 0..N
  Cell offset = {0, 0, 0};     // per-axis displacement, each in [-N, N]
  bool present = false;
  SpacetimePoint point;        // valid only when present
};

// All slots with chebyshev offset <= N and 0 <= dt <= N, in lexicographic
// (dt, offset) order.
std::vector<NeighborSlot> neighborhood(const SpacetimePoint& p,
                                       const LatticeConfig& cfg);

// Slot count of a full interior window: (2N+1)^d * (N+1). For d=3 this
// approaches the 8N^4 bulk scaling from below as N grows.
long long neighborhood_size(const LatticeConfig& cfg);

}  // namespace qualsim
