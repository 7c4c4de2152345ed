#pragma once

#include <map>
#include <vector>

#include "qualsim/lattice.hpp"
#include "qualsim/qualia.hpp"

namespace qualsim {

// A maximal set of same-slice qualia pairwise joined by steps of Chebyshev
// distance at most K. Singleton components count.
struct Consciousness {
  int id = 0;
  int t = 0;
  std::vector<Quale> members;  // ordered by point index
};

// Connected components per time slice under the <=K adjacency, via
// union-find. Ids are assigned in order of each component's minimal member
// point, so the partition is deterministic.
std::vector<Consciousness> group(const QualiaDistribution& d, int k,
                                 const LatticeConfig& cfg);

struct GroupStats {
  long long component_count = 0;
  std::map<long long, long long> size_histogram;   // size -> how many
  std::vector<long long> per_type;                 // quale count per type
  long long total_qualia = 0;
};

GroupStats consciousness_stats(const std::vector<Consciousness>& components,
                               int type_count);

}  // namespace qualsim
