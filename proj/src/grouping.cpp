#include "qualsim/grouping.hpp"

#include <algorithm>
#include <numeric>

namespace qualsim {

namespace {

class UnionFind {
 public:
  explicit UnionFind(std::size_t n) : parent_(n), size_(n, 1) {
    std::iota(parent_.begin(), parent_.end(), 0);
  }

  std::size_t find(std::size_t x) {
    while (parent_[x] != x) {
      parent_[x] = parent_[parent_[x]];
      x = parent_[x];
    }
    return x;
  }

  void unite(std::size_t a, std::size_t b) {
    a = find(a);
    b = find(b);
    if (a == b) return;
    if (size_[a] < size_[b]) std::swap(a, b);
    parent_[b] = a;
    size_[a] += size_[b];
  }

 private:
  std::vector<std::size_t> parent_;
  std::vector<std::size_t> size_;
};

}  // namespace

std::vector<Consciousness> group(const QualiaDistribution& d, int k,
                                 const LatticeConfig& cfg) {
  if (k < 1) throw ConfigError("grouping radius K must be >= 1");
  std::vector<Consciousness> out;
  const auto& qs = d.qualia;
  std::size_t lo = 0;
  int next_id = 0;
  while (lo < qs.size()) {
    // qualia are point-index ordered, so one slice is one contiguous run
    const int t = point_from_index(qs[lo].point, cfg).t;
    std::size_t hi = lo;
    while (hi < qs.size() && point_from_index(qs[hi].point, cfg).t == t) ++hi;
    const std::size_t n = hi - lo;

    std::vector<Cell> cells(n);
    for (std::size_t i = 0; i < n; ++i)
      cells[i] = point_from_index(qs[lo + i].point, cfg).cell;

    UnionFind uf(n);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = i + 1; j < n; ++j)
        if (chebyshev_distance(cells[i], cells[j]) <= k) uf.unite(i, j);

    std::map<std::size_t, std::vector<Quale>> comps;
    for (std::size_t i = 0; i < n; ++i) comps[uf.find(i)].push_back(qs[lo + i]);

    std::vector<std::vector<Quale>> ordered;
    ordered.reserve(comps.size());
    for (auto& [root, members] : comps) ordered.push_back(std::move(members));
    std::sort(ordered.begin(), ordered.end(),
              [](const auto& a, const auto& b) { return a.front().point < b.front().point; });

    for (auto& members : ordered) {
      Consciousness c;
      c.id = next_id++;
      c.t = t;
      c.members = std::move(members);
      out.push_back(std::move(c));
    }
    lo = hi;
  }
  return out;
}

GroupStats consciousness_stats(const std::vector<Consciousness>& components,
                               int type_count) {
  GroupStats s;
  s.component_count = static_cast<long long>(components.size());
  s.per_type.assign(static_cast<std::size_t>(type_count), 0);
  for (const auto& c : components) {
    ++s.size_histogram[static_cast<long long>(c.members.size())];
    s.total_qualia += static_cast<long long>(c.members.size());
    for (const auto& q : c.members) {
      if (q.type >= 0 && q.type < type_count) ++s.per_type[static_cast<std::size_t>(q.type)];
    }
  }
  return s;
}

}  // namespace qualsim
