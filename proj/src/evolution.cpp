#include "qualsim/evolution.hpp"

#include <algorithm>
#include <cmath>

namespace qualsim {

namespace {

bool pattern_ok(const std::string& s, int size) {
  if (static_cast<int>(s.size()) != size) return false;
  for (char c : s)
    if (c != '0' && c != '1') return false;
  return true;
}

double dominance_value(long long a, long long b) {
  if (a > b) return 1.0;
  if (a == b) return 0.5;
  return 0.0;
}

}  // namespace

void EvolveSetup::validate() const {
  lattice.validate();
  if (lattice.spatial_dims != 1)
    throw ConfigError("motif competition runs on 1D lattices");
  if (!(collapse_rate >= 0.0 && collapse_rate <= 1.0))
    throw ConfigError("collapse_rate must lie in [0, 1]");
  for (const MotifSpec* m : {&first, &second}) {
    if (m->program == nullptr) throw ConfigError("motif needs a predicate program");
    if (m->region_size < 1) throw ConfigError("motif region must be nonempty");
    if (m->region_start < 0 || m->region_start + m->region_size > lattice.extent[0])
      throw ConfigError("motif region out of lattice bounds");
    if (!pattern_ok(m->pattern, m->region_size))
      throw ConfigError("motif pattern must be 0/1 of the region's length");
    if (!std::isfinite(m->theta)) throw ConfigError("motif theta must be finite");
  }
  if (first.region_size != second.region_size)
    throw ConfigError("motif regions must have identical sizes");
  const int a0 = first.region_start, a1 = a0 + first.region_size;
  const int b0 = second.region_start, b1 = b0 + second.region_size;
  if (a0 < b1 && b0 < a1) throw ConfigError("motif regions must be disjoint");
}

Instance EvolveSetup::instance() const {
  validate();
  Instance inst;
  inst.lattice = lattice;
  inst.enumeration_cap = enumeration_cap;
  SubstrateConfig sub;
  sub.collapse_rate = collapse_rate;
  sub.cell_cap = cell_cap;
  std::string init(static_cast<std::size_t>(lattice.extent[0]), '0');
  for (const MotifSpec* m : {&first, &second})
    for (int i = 0; i < m->region_size; ++i)
      init[static_cast<std::size_t>(m->region_start + i)] =
          m->pattern[static_cast<std::size_t>(i)];
  sub.initial = std::move(init);
  sub.regions = {{first.region_start, first.region_size, first.theta},
                 {second.region_start, second.region_size, second.theta}};
  sub.validate(inst.lattice);
  inst.substrate = sub;
  return inst;
}

QualiaRule EvolveSetup::rule() const {
  QualiaRule r;
  for (const auto& name : first.program->type_names()) r.type_names.push_back("A." + name);
  for (const auto& name : second.program->type_names()) r.type_names.push_back("B." + name);
  const auto progA = first.program;
  const auto progB = second.program;
  const int a0 = first.region_start, a1 = a0 + first.region_size;
  const int b0 = second.region_start, b1 = b0 + second.region_size;
  const int offsetB = progA->type_count();
  const LatticeConfig lat = lattice;
  const int total_types = progA->type_count() + progB->type_count();
  r.assign = [=](const DensityField& field, EvalDiagnostics* diag) {
    QualiaDistribution d;
    d.type_counts.assign(static_cast<std::size_t>(total_types), 0);
    const long long n = lat.num_points();
    for (long long i = 0; i < n; ++i) {
      const SpacetimePoint p = point_from_index(i, lat);
      const int x = p.cell[0];
      const dsl::PredicateProgram* prog = nullptr;
      int offset = 0;
      if (x >= a0 && x < a1) {
        prog = progA.get();
      } else if (x >= b0 && x < b1) {
        prog = progB.get();
        offset = offsetB;
      } else {
        continue;
      }
      if (auto t = evaluate(*prog, field, p, lat, diag)) {
        const int type = offset + *t;
        d.qualia.push_back({i, type});
        ++d.type_counts[static_cast<std::size_t>(type)];
      }
    }
    return d;
  };
  return r;
}

std::pair<long long, long long> EvolveSetup::region_counts(const SupportRow& row) const {
  const int split = first.program->type_count();
  long long a = 0, b = 0;
  for (std::size_t j = 0; j < row.d.type_counts.size(); ++j) {
    if (static_cast<int>(j) < split)
      a += row.d.type_counts[j];
    else
      b += row.d.type_counts[j];
  }
  return {a, b};
}

SelectionResult run_selection(const EvolveSetup& setup, const WeightSpec& spec,
                              long long n_samples, std::uint64_t seed,
                              const SampleOptions& opts) {
  std::vector<SelectionResult> one = beta_sweep(
      setup, spec, {spec.variant == WeightVariant::Typed ? 1.0 : spec.beta}, n_samples,
      seed, opts);
  return one.front();
}

std::vector<SelectionResult> beta_sweep(const EvolveSetup& setup,
                                        const WeightSpec& variant,
                                        const std::vector<double>& strengths,
                                        long long n_samples, std::uint64_t seed,
                                        const SampleOptions& opts) {
  for (const double s : strengths)
    if (!std::isfinite(s)) throw ConfigError("sweep strengths must be finite");
  const Instance inst = setup.instance();
  const QualiaRule rule = setup.rule();
  std::vector<SelectionResult> out;
  out.reserve(strengths.size());

  const auto dom = [&](const SupportRow& row) {
    const auto [a, b] = setup.region_counts(row);
    return dominance_value(a, b);
  };

  if (n_samples == 0) {
    const ExactSupport support = enumerate_support(inst, rule);
    double baseline = 0.0;
    for (const auto& row : support.rows) baseline += row.p_q * dom(row);
    baseline /= support.total_pq;
    for (const double s : strengths) {
      const TrueDistribution dist =
          apply_weights(support, variant.with_strength(s), rule.type_names);
      double d = 0.0;
      for (const auto& row : dist.support) d += row.p_true * dom(row);
      SelectionResult r;
      r.beta = s;
      r.dominance = {d, 0.0};
      r.baseline = baseline;
      r.exact = true;
      out.push_back(r);
    }
    return out;
  }

  const RawSamples raw = draw_samples(inst, rule, n_samples, seed, opts.workers);
  const Snis flat = snis_weights(raw, variant.with_strength(0.0), rule.type_names);
  const double baseline = snis_estimate(raw, flat, dom).value;
  for (const double s : strengths) {
    const Snis w = snis_weights(raw, variant.with_strength(s), rule.type_names);
    SelectionResult r;
    r.beta = s;
    r.dominance = snis_estimate(raw, w, dom);
    r.baseline = baseline;
    r.exact = false;
    r.ess = w.ess;
    out.push_back(r);
  }
  return out;
}

}  // namespace qualsim
