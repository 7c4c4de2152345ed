#include "qualsim/validate.hpp"

#include <Eigen/Eigenvalues>
#include <algorithm>
#include <cmath>
#include <set>

#include "qualsim/io_util.hpp"
#include "qualsim/rng.hpp"

namespace qualsim {

namespace {

constexpr double kTol = 1e-10;

struct Battery {
  const RunConfig& cfg;
  Instance inst;
  std::vector<CheckResult> results;

  void report(const std::string& name, bool ok, const std::string& detail) {
    results.push_back({name, ok ? CheckResult::Status::Pass : CheckResult::Status::Fail,
                       detail});
  }
  void skip(const std::string& name, const std::string& why) {
    results.push_back({name, CheckResult::Status::Skip, why});
  }
};

double operator_defects(const Eigen::Matrix2cd& rho) {
  double defect = std::abs(rho.trace().real() - 1.0);
  defect = std::max(defect, std::abs(rho.trace().imag()));
  defect = std::max(defect, (rho - Eigen::Matrix2cd(rho.adjoint())).cwiseAbs().maxCoeff());
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2cd> eig(rho);
  defect = std::max(defect, std::max(0.0, -eig.eigenvalues().minCoeff()));
  return defect;
}

void check_operator_sanity(Battery& b) {
  const int n_histories = 24;
  double worst = 0.0;
  for (int k = 0; k < n_histories; ++k) {
    const CollapseHistory h = sample_history(b.inst.substrate, b.inst.lattice,
                                             derive_seed(b.cfg.sampler.seed, 1000 + k));
    for (long long i = 0; i < b.inst.lattice.num_points(); ++i) {
      const SpacetimePoint p = point_from_index(i, b.inst.lattice);
      worst = std::max(
          worst, operator_defects(conditioned_local_state(h, p, b.inst.substrate,
                                                          b.inst.lattice)));
    }
  }
  b.report("local-state-sanity", worst <= kTol,
           "max trace/hermiticity/eigenvalue defect " + format_double(worst));
}

void check_field_routes(Battery& b) {
  double worst = 0.0;
  for (int k = 0; k < 8; ++k) {
    const CollapseHistory h = sample_history(b.inst.substrate, b.inst.lattice,
                                             derive_seed(b.cfg.sampler.seed, 2000 + k));
    const DensityField fast = density_field(h, b.inst.substrate, b.inst.lattice);
    const DensityField ref = density_field_reference(h, b.inst.substrate, b.inst.lattice);
    for (std::size_t i = 0; i < fast.rho.size(); ++i)
      worst = std::max(worst, std::abs(fast.rho[i] - ref.rho[i]));
  }
  b.report("field-route-agreement", worst <= kTol,
           "ensemble vs channel-composition max gap " + format_double(worst));
}

void check_selective_average(Battery& b) {
  double worst = 0.0;
  long long probes = 0;
  for (int k = 0; k < 6; ++k) {
    const CollapseHistory h = sample_history(b.inst.substrate, b.inst.lattice,
                                             derive_seed(b.cfg.sampler.seed, 3000 + k));
    if (h.events.empty()) continue;
    for (long long i = 0; i < b.inst.lattice.num_points(); ++i) {
      const SpacetimePoint p = point_from_index(i, b.inst.lattice);
      for (std::size_t ei = 0; ei < h.events.size(); ++ei) {
        const auto& e = h.events[ei];
        if (e.point.t > p.t || in_past_cone(e.point, p)) continue;
        const auto [r0, w0] = conditioned_local_state_forced(h, p, ei, 0,
                                                             b.inst.substrate,
                                                             b.inst.lattice);
        const auto [r1, w1] = conditioned_local_state_forced(h, p, ei, 1,
                                                             b.inst.substrate,
                                                             b.inst.lattice);
        const Eigen::Matrix2cd avg = (w0 * r0 + w1 * r1) / (w0 + w1);
        const Eigen::Matrix2cd deph =
            conditioned_local_state(h, p, b.inst.substrate, b.inst.lattice);
        worst = std::max(worst, (avg - deph).cwiseAbs().maxCoeff());
        ++probes;
        if (probes >= 500) break;
      }
      if (probes >= 500) break;
    }
    if (probes >= 500) break;
  }
  if (probes == 0) {
    b.skip("selective-average", "no collapse events to probe");
    return;
  }
  b.report("selective-average", worst <= kTol,
           "Born-weighted branch average vs dephasing, max gap " + format_double(worst) +
               " over " + std::to_string(probes) + " probes");
}

void check_cone_causality(Battery& b) {
  LatticeConfig lat = b.inst.lattice;
  SubstrateConfig sub = b.inst.substrate;
  if (lat.num_cells() > 4) {
    // probe a built-in instance instead; exhaustive perturbation on the
    // configured one would be too wide
    lat = LatticeConfig{1, {4, 1, 1}, 3, 1, 1};
    sub = SubstrateConfig{};
    sub.theta = 0.7;
    sub.collapse_rate = 0.6;
    sub.initial = "1010";
  }
  double worst = 0.0;
  long long probes = 0;
  for (int k = 0; k < 6; ++k) {
    const CollapseHistory h =
        sample_history(sub, lat, derive_seed(b.cfg.sampler.seed, 4000 + k));
    for (long long i = 0; i < lat.num_points(); ++i) {
      const SpacetimePoint p = point_from_index(i, lat);
      const Eigen::Matrix2cd base = conditioned_local_state(h, p, sub, lat);
      // gate angles strictly outside the cone
      for (int layer = 0; layer + 1 <= p.t; ++layer) {
        for (const auto& g : brickwork_layer(sub, lat, layer)) {
          const SpacetimePoint qa{cell_from_index(g.cell_a, lat), layer};
          const SpacetimePoint qb{cell_from_index(g.cell_b, lat), layer};
          const SpacetimePoint qa2{qa.cell, layer + 1};
          const SpacetimePoint qb2{qb.cell, layer + 1};
          if (in_past_cone(qa, p) || in_past_cone(qb, p) || in_past_cone(qa2, p) ||
              in_past_cone(qb2, p))
            continue;
          SubstrateConfig bent = sub;
          bent.gate_theta_overrides[{layer, g.cell_a}] = g.theta + 0.37;
          const Eigen::Matrix2cd alt = conditioned_local_state(h, p, bent, lat);
          worst = std::max(worst, (alt - base).cwiseAbs().maxCoeff());
          ++probes;
        }
      }
      // outcomes of events strictly outside the cone
      for (std::size_t ei = 0; ei < h.events.size(); ++ei) {
        const auto& e = h.events[ei];
        if (e.point.t > p.t || in_past_cone(e.point, p)) continue;
        CollapseHistory flipped = h;
        flipped.events[ei].outcome = 1 - flipped.events[ei].outcome;
        const Eigen::Matrix2cd alt = conditioned_local_state(flipped, p, sub, lat);
        worst = std::max(worst, (alt - base).cwiseAbs().maxCoeff());
        ++probes;
      }
    }
  }
  b.report("cone-causality", worst <= kTol,
           "outside-cone perturbations moved local states by at most " +
               format_double(worst) + " over " + std::to_string(probes) + " probes");
}

void check_enumeration(Battery& b) {
  const std::uint64_t bound = enumeration_branch_bound(b.inst.substrate, b.inst.lattice);
  if (bound > b.inst.enumeration_cap) {
    b.skip("enumeration-normalization",
           "instance not enumerable (bound " + std::to_string(bound) + ")");
    b.skip("beta-zero-reduction", "instance not enumerable");
    return;
  }
  const auto rule = b.cfg.rule();
  const ExactSupport support = enumerate_support(b.inst, rule);
  b.report("enumeration-normalization", std::abs(support.total_pq - 1.0) <= kTol,
           "total history mass " + format_double(support.total_pq));

  WeightSpec zero = b.cfg.weights.with_strength(0.0);
  const TrueDistribution dist = apply_weights(support, zero, rule.type_names);
  double tv = 0.0;
  for (const auto& row : dist.support)
    tv += std::abs(row.p_true - row.p_q / support.total_pq);
  tv *= 0.5;
  b.report("beta-zero-reduction", tv <= 1e-12,
           "total variation against the quantum law " + format_double(tv));
}

// independent closure oracle: breadth-first search on the adjacency lists
std::vector<std::vector<long long>> closure_components(
    const std::vector<SpacetimePoint>& pts, int k, const LatticeConfig& cfg) {
  const std::size_t n = pts.size();
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j)
      if (pts[i].t == pts[j].t && chebyshev_distance(pts[i].cell, pts[j].cell) <= k) {
        adj[i].push_back(j);
        adj[j].push_back(i);
      }
  std::vector<int> comp(n, -1);
  int next = 0;
  std::vector<std::vector<long long>> out;
  for (std::size_t i = 0; i < n; ++i) {
    if (comp[i] != -1) continue;
    std::vector<std::size_t> queue = {i};
    comp[i] = next;
    out.emplace_back();
    while (!queue.empty()) {
      const std::size_t v = queue.back();
      queue.pop_back();
      out.back().push_back(point_index(pts[v], cfg));
      for (const std::size_t w : adj[v])
        if (comp[w] == -1) {
          comp[w] = next;
          queue.push_back(w);
        }
    }
    ++next;
  }
  for (auto& members : out) std::sort(members.begin(), members.end());
  std::sort(out.begin(), out.end());
  return out;
}

void check_grouping(Battery& b) {
  Rng rng(derive_seed(b.cfg.sampler.seed, 5000));
  const LatticeConfig lat{2, {24, 24, 1}, 4, 1, 1};
  bool ok = true;
  std::string detail = "union-find matches closure on 200 random sets";
  for (int rep = 0; rep < 200 && ok; ++rep) {
    const int count = static_cast<int>(rng.uniform() * 60);
    std::set<long long> picked;
    while (static_cast<int>(picked.size()) < count)
      picked.insert(static_cast<long long>(rng.uniform() *
                                           static_cast<double>(lat.num_points())));
    QualiaDistribution d;
    d.type_counts = {static_cast<long long>(picked.size())};
    std::vector<SpacetimePoint> pts;
    for (const long long idx : picked) {
      d.qualia.push_back({idx, 0});
      pts.push_back(point_from_index(idx, lat));
    }
    const int k = 1 + static_cast<int>(rng.uniform() * 3);
    const auto grouped = group(d, k, lat);
    std::vector<std::vector<long long>> got;
    for (const auto& c : grouped) {
      got.emplace_back();
      for (const auto& q : c.members) got.back().push_back(q.point);
      std::sort(got.back().begin(), got.back().end());
    }
    std::sort(got.begin(), got.end());
    if (got != closure_components(pts, k, lat)) {
      ok = false;
      detail = "mismatch against the closure oracle at rep " + std::to_string(rep);
    }
    if (ok) {
      const auto coarser = group(d, k + 1, lat);
      if (coarser.size() > grouped.size()) {
        ok = false;
        detail = "component count increased with K at rep " + std::to_string(rep);
      }
    }
  }
  b.report("grouping-closure", ok, detail);
}

void check_flat_weights(Battery& b) {
  const auto rule = b.cfg.rule();
  const long long n = 500;
  const RawSamples raw = draw_samples(b.inst, rule, n, b.cfg.sampler.seed, 1);
  const Snis w = snis_weights(raw, b.cfg.weights.with_strength(0.0), rule.type_names);
  bool ok = w.ess == static_cast<double>(n);
  for (const double v : w.normalized)
    if (v != 1.0 / static_cast<double>(n)) ok = false;
  b.report("flat-weights-at-zero", ok,
           "beta=0 sampler weights all equal 1/n, ESS = n");
}

}  // namespace

std::vector<CheckResult> run_validation(const RunConfig& cfg) {
  Battery b{cfg, cfg.instance(), {}};
  check_operator_sanity(b);
  check_field_routes(b);
  check_selective_average(b);
  check_cone_causality(b);
  check_enumeration(b);
  check_grouping(b);
  check_flat_weights(b);
  return b.results;
}

bool all_passed(const std::vector<CheckResult>& checks) {
  for (const auto& c : checks)
    if (c.status == CheckResult::Status::Fail) return false;
  return true;
}

}  // namespace qualsim
