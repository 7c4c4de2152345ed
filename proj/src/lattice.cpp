#include "qualsim/lattice.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <string>

namespace qualsim {

void LatticeConfig::validate() const {
  if (spatial_dims < 1 || spatial_dims > 3)
    throw ConfigError("spatial_dims must be 1..3, got " + std::to_string(spatial_dims));
  for (int a = 0; a < 3; ++a) {
    if (a < spatial_dims) {
      if (extent[a] < 1)
        throw ConfigError("extent must be >= 1 per axis");
    } else if (extent[a] != 1) {
      throw ConfigError("extent on unused axes must be 1");
    }
  }
  if (steps < 1) throw ConfigError("steps must be >= 1");
  if (neighborhood_radius < 1) throw ConfigError("neighborhood radius N must be >= 1");
  if (grouping_radius < 1) throw ConfigError("grouping radius K must be >= 1");
}

int chebyshev_distance(const Cell& a, const Cell& b) {
  int d = 0;
  for (int i = 0; i < 3; ++i) d = std::max(d, std::abs(a[i] - b[i]));
  return d;
}

bool cell_in_bounds(const Cell& c, const LatticeConfig& cfg) {
  for (int a = 0; a < 3; ++a)
    if (c[a] < 0 || c[a] >= cfg.extent[a]) return false;
  return true;
}

bool point_in_bounds(const SpacetimePoint& p, const LatticeConfig& cfg) {
  return p.t >= 0 && p.t < cfg.steps && cell_in_bounds(p.cell, cfg);
}

int cell_index(const Cell& c, const LatticeConfig& cfg) {
  return (c[0] * cfg.extent[1] + c[1]) * cfg.extent[2] + c[2];
}

Cell cell_from_index(int idx, const LatticeConfig& cfg) {
  Cell c;
  c[2] = idx % cfg.extent[2];
  idx /= cfg.extent[2];
  c[1] = idx % cfg.extent[1];
  c[0] = idx / cfg.extent[1];
  return c;
}

long long point_index(const SpacetimePoint& p, const LatticeConfig& cfg) {
  return static_cast<long long>(p.t) * cfg.num_cells() + cell_index(p.cell, cfg);
}

SpacetimePoint point_from_index(long long idx, const LatticeConfig& cfg) {
  SpacetimePoint p;
  p.t = static_cast<int>(idx / cfg.num_cells());
  p.cell = cell_from_index(static_cast<int>(idx % cfg.num_cells()), cfg);
  return p;
}

bool in_past_cone(const SpacetimePoint& q, const SpacetimePoint& p) {
  if (q.t > p.t) return false;
  return chebyshev_distance(q.cell, p.cell) <= p.t - q.t;
}

std::vector<SpacetimePoint> past_cone(const SpacetimePoint& p,
                                      const LatticeConfig& cfg) {
  if (!point_in_bounds(p, cfg))
    throw InvalidPointError("past_cone: point outside lattice");
  std::vector<SpacetimePoint> out;
  for (int t = 0; t <= p.t; ++t) {
    const int r = p.t - t;
    Cell lo, hi;
    for (int a = 0; a < 3; ++a) {
      const int ra = a < cfg.spatial_dims ? r : 0;
      lo[a] = std::max(0, p.cell[a] - ra);
      hi[a] = std::min(cfg.extent[a] - 1, p.cell[a] + ra);
    }
    for (int x = lo[0]; x <= hi[0]; ++x)
      for (int y = lo[1]; y <= hi[1]; ++y)
        for (int z = lo[2]; z <= hi[2]; ++z)
          out.push_back({{x, y, z}, t});
  }
  return out;
}

std::vector<NeighborSlot> neighborhood(const SpacetimePoint& p,
                                       const LatticeConfig& cfg) {
  if (!point_in_bounds(p, cfg))
    throw InvalidPointError("neighborhood: point outside lattice");
  const int n = cfg.neighborhood_radius;
  std::vector<NeighborSlot> out;
  out.reserve(static_cast<std::size_t>(neighborhood_size(cfg)));
  Cell lo = {0, 0, 0}, hi = {0, 0, 0};
  for (int a = 0; a < cfg.spatial_dims; ++a) {
    lo[a] = -n;
    hi[a] = n;
  }
  for (int dt = 0; dt <= n; ++dt) {
    for (int dx = lo[0]; dx <= hi[0]; ++dx)
      for (int dy = lo[1]; dy <= hi[1]; ++dy)
        for (int dz = lo[2]; dz <= hi[2]; ++dz) {
          NeighborSlot slot;
          slot.dt = dt;
          slot.offset = {dx, dy, dz};
          SpacetimePoint q;
          q.cell = {p.cell[0] + dx, p.cell[1] + dy, p.cell[2] + dz};
          q.t = p.t - dt;
          slot.present = point_in_bounds(q, cfg);
          if (slot.present) slot.point = q;
          out.push_back(slot);
        }
  }
  return out;
}

long long neighborhood_size(const LatticeConfig& cfg) {
  const long long n = cfg.neighborhood_radius;
  long long spatial = 1;
  for (int a = 0; a < cfg.spatial_dims; ++a) spatial *= 2 * n + 1;
  return spatial * (n + 1);
}

}  // namespace qualsim
