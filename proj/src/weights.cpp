#include "qualsim/weights.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <unordered_map>

#include "qualsim/parallel.hpp"
#include "qualsim/rng.hpp"

namespace qualsim {

namespace {

double log_weight_from_sizes(const QualiaDistribution& d, const WeightSpec& spec,
                             const std::vector<std::string>& type_names,
                             const std::vector<long long>* component_sizes) {
  switch (spec.variant) {
    case WeightVariant::Counting:
      return spec.beta * static_cast<double>(d.size());
    case WeightVariant::Typed: {
      double acc = 0.0;
      for (std::size_t j = 0; j < d.type_counts.size(); ++j) {
        const auto it = spec.type_betas.find(type_names[j]);
        if (it != spec.type_betas.end())
          acc += it->second * static_cast<double>(d.type_counts[j]);
      }
      return acc;
    }
    case WeightVariant::Factorized: {
      if (component_sizes == nullptr)
        throw std::invalid_argument("factorized weights need consciousness components");
      double acc = 0.0;
      for (const long long s : *component_sizes) acc += spec.beta * static_cast<double>(s);
      return acc;
    }
  }
  return 0.0;
}

std::vector<long long> sizes_of(const std::vector<Consciousness>& components) {
  std::vector<long long> out;
  out.reserve(components.size());
  for (const auto& c : components) out.push_back(static_cast<long long>(c.members.size()));
  return out;
}

void merge_diagnostics(EvalDiagnostics& into, const EvalDiagnostics& from) {
  into.division_by_zero += from.division_by_zero;
  if (into.first_context.empty()) into.first_context = from.first_context;
}

}  // namespace

void WeightSpec::validate() const {
  if (!std::isfinite(beta)) throw ConfigError("weight beta must be finite");
  for (const auto& [name, b] : type_betas)
    if (!std::isfinite(b))
      throw ConfigError("weight beta for type '" + name + "' must be finite");
}

WeightSpec WeightSpec::with_strength(double strength) const {
  WeightSpec out = *this;
  if (variant == WeightVariant::Typed) {
    for (auto& [name, b] : out.type_betas) b *= strength;
  } else {
    out.beta = strength;
  }
  return out;
}

double log_weight(const QualiaDistribution& d, const WeightSpec& spec,
                  const std::vector<std::string>& type_names,
                  const std::vector<Consciousness>* components) {
  spec.validate();
  if (spec.variant == WeightVariant::Factorized) {
    if (components == nullptr)
      throw std::invalid_argument("factorized weights need consciousness components");
    const auto sizes = sizes_of(*components);
    return log_weight_from_sizes(d, spec, type_names, &sizes);
  }
  return log_weight_from_sizes(d, spec, type_names, nullptr);
}

QualiaRule whole_lattice_rule(std::shared_ptr<const dsl::PredicateProgram> program,
                              LatticeConfig lattice) {
  QualiaRule rule;
  rule.type_names = program->type_names();
  rule.assign = [program, lattice](const DensityField& field, EvalDiagnostics* diag) {
    return assign_qualia(*program, field, lattice, diag);
  };
  return rule;
}

ExactSupport enumerate_support(const Instance& inst, const QualiaRule& rule) {
  const auto histories =
      enumerate_histories(inst.substrate, inst.lattice, inst.enumeration_cap);
  ExactSupport out;
  std::unordered_map<std::string, std::size_t> index;
  for (const auto& [h, prob] : histories) {
    const DensityField field = density_field(h, inst.substrate, inst.lattice);
    EvalDiagnostics diag;
    QualiaDistribution d = rule.assign(field, &diag);
    merge_diagnostics(out.diagnostics, diag);
    std::string key = d.canonical_key();
    auto it = index.find(key);
    if (it == index.end()) {
      SupportRow row;
      row.component_sizes = sizes_of(group(d, inst.lattice.grouping_radius, inst.lattice));
      row.d = std::move(d);
      row.key = std::move(key);
      it = index.emplace(row.key, out.rows.size()).first;
      out.rows.push_back(std::move(row));
    }
    out.rows[it->second].p_q += prob;
    out.total_pq += prob;
  }
  return out;
}

TrueDistribution apply_weights(const ExactSupport& support, const WeightSpec& spec,
                               const std::vector<std::string>& type_names) {
  spec.validate();
  TrueDistribution out;
  out.total_pq = support.total_pq;
  out.support = support.rows;
  double max_log = -std::numeric_limits<double>::infinity();
  for (auto& row : out.support) {
    row.log_a = log_weight_from_sizes(row.d, spec, type_names, &row.component_sizes);
    max_log = std::max(max_log, std::log(row.p_q) + row.log_a);
  }
  double sum = 0.0;
  for (const auto& row : out.support)
    sum += std::exp(std::log(row.p_q) + row.log_a - max_log);
  const double lse = max_log + std::log(sum);
  for (auto& row : out.support) row.p_true = std::exp(std::log(row.p_q) + row.log_a - lse);
  out.normalizer = std::exp(-lse);
  std::sort(out.support.begin(), out.support.end(),
            [](const SupportRow& a, const SupportRow& b) {
              if (a.p_true != b.p_true) return a.p_true > b.p_true;
              return a.key < b.key;
            });
  return out;
}

TrueDistribution exact_true_distribution(const Instance& inst, const QualiaRule& rule,
                                         const WeightSpec& spec) {
  return apply_weights(enumerate_support(inst, rule), spec, rule.type_names);
}

TrueDistribution exact_true_distribution(const Instance& inst,
                                         const dsl::PredicateProgram& program,
                                         const WeightSpec& spec) {
  const auto alias =
      std::shared_ptr<const dsl::PredicateProgram>(&program, [](const auto*) {});
  return exact_true_distribution(inst, whole_lattice_rule(alias, inst.lattice), spec);
}

RawSamples draw_samples(const Instance& inst, const QualiaRule& rule, long long n,
                        std::uint64_t seed, int workers) {
  if (n < 1) throw ConfigError("sample count must be >= 1");
  RawSamples out;
  out.n = n;
  out.seed = seed;
  const auto nn = static_cast<std::size_t>(n);

  // Pass 1: draw histories, keep only their canonical keys.
  std::vector<std::string> keys(nn);
  parallel_for(nn, workers, [&](std::size_t i) {
    const CollapseHistory h =
        sample_history(inst.substrate, inst.lattice, derive_seed(seed, i));
    keys[i] = h.key(inst.lattice);
  });

  // Pass 2: distinct histories in first-appearance order.
  std::unordered_map<std::string, int> hist_index;
  std::vector<std::size_t> first_sample;
  std::vector<int> sample_hist(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    auto [it, fresh] =
        hist_index.emplace(keys[i], static_cast<int>(first_sample.size()));
    if (fresh) first_sample.push_back(i);
    sample_hist[i] = it->second;
  }

  // Pass 3: one field/qualia evaluation per distinct history.
  const std::size_t nh = first_sample.size();
  std::vector<QualiaDistribution> dists(nh);
  std::vector<EvalDiagnostics> diags(nh);
  parallel_for(nh, workers, [&](std::size_t r) {
    const CollapseHistory h = sample_history(inst.substrate, inst.lattice,
                                             derive_seed(seed, first_sample[r]));
    const DensityField field = density_field(h, inst.substrate, inst.lattice);
    dists[r] = rule.assign(field, &diags[r]);
  });
  for (const auto& dg : diags) merge_diagnostics(out.diagnostics, dg);

  // Pass 4: merge histories that produced the same distribution.
  std::unordered_map<std::string, int> row_index;
  std::vector<int> hist_row(nh);
  for (std::size_t r = 0; r < nh; ++r) {
    std::string key = dists[r].canonical_key();
    auto it = row_index.find(key);
    if (it == row_index.end()) {
      SupportRow row;
      row.component_sizes =
          sizes_of(group(dists[r], inst.lattice.grouping_radius, inst.lattice));
      row.d = std::move(dists[r]);
      row.key = key;
      it = row_index.emplace(std::move(key), static_cast<int>(out.rows.size())).first;
      out.rows.push_back(std::move(row));
      out.row_n.push_back(0);
    }
    hist_row[r] = it->second;
  }
  out.sample_row.resize(nn);
  for (std::size_t i = 0; i < nn; ++i) {
    const int row = hist_row[static_cast<std::size_t>(sample_hist[i])];
    out.sample_row[i] = row;
    ++out.row_n[static_cast<std::size_t>(row)];
  }
  return out;
}

Snis snis_weights(const RawSamples& samples, const WeightSpec& spec,
                  const std::vector<std::string>& type_names) {
  spec.validate();
  const std::size_t nr = samples.rows.size();
  std::vector<double> logw(nr);
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (std::size_t r = 0; r < nr; ++r) {
    logw[r] = log_weight_from_sizes(samples.rows[r].d, spec, type_names,
                                    &samples.rows[r].component_sizes);
    lo = std::min(lo, logw[r]);
    hi = std::max(hi, logw[r]);
  }
  Snis out;
  out.normalized.resize(nr);
  const double n = static_cast<double>(samples.n);
  if (lo == hi) {
    // flat weights (e.g. beta = 0): exactly 1/n each
    for (auto& w : out.normalized) w = 1.0 / n;
    out.ess = n;
    return out;
  }
  double sum = 0.0;
  for (std::size_t r = 0; r < nr; ++r)
    sum += static_cast<double>(samples.row_n[r]) * std::exp(logw[r] - hi);
  const double lse = hi + std::log(sum);
  double inv_ess = 0.0;
  for (std::size_t r = 0; r < nr; ++r) {
    out.normalized[r] = std::exp(logw[r] - lse);
    inv_ess += static_cast<double>(samples.row_n[r]) * out.normalized[r] * out.normalized[r];
  }
  out.ess = 1.0 / inv_ess;
  return out;
}

Estimate snis_estimate(const RawSamples& samples, const Snis& w,
                       const std::function<double(const SupportRow&)>& f) {
  double mu = 0.0;
  for (std::size_t r = 0; r < samples.rows.size(); ++r)
    mu += static_cast<double>(samples.row_n[r]) * w.normalized[r] * f(samples.rows[r]);
  double var = 0.0;
  for (std::size_t r = 0; r < samples.rows.size(); ++r) {
    const double dev = f(samples.rows[r]) - mu;
    var += static_cast<double>(samples.row_n[r]) * w.normalized[r] * w.normalized[r] *
           dev * dev;
  }
  return {mu, std::sqrt(var)};
}

SampleResult sample_true(const Instance& inst, const QualiaRule& rule,
                         const WeightSpec& spec, long long n, std::uint64_t seed,
                         const SampleOptions& opts) {
  const RawSamples raw = draw_samples(inst, rule, n, seed, opts.workers);
  const Snis w = snis_weights(raw, spec, rule.type_names);

  SampleResult out;
  out.n = n;
  out.seed = seed;
  out.ess = w.ess;
  out.ess_warning = w.ess < opts.ess_floor;
  out.diagnostics = raw.diagnostics;
  out.expected_size = snis_estimate(
      raw, w, [](const SupportRow& r) { return static_cast<double>(r.d.size()); });
  out.expected_components = snis_estimate(raw, w, [](const SupportRow& r) {
    return static_cast<double>(r.component_sizes.size());
  });
  const std::size_t types = rule.type_names.size();
  out.expected_type_counts.resize(types);
  for (std::size_t j = 0; j < types; ++j)
    out.expected_type_counts[j] = snis_estimate(raw, w, [j](const SupportRow& r) {
      return static_cast<double>(r.d.type_counts[j]);
    });

  out.rows = raw.rows;
  out.row_n = raw.row_n;
  for (std::size_t r = 0; r < out.rows.size(); ++r) {
    out.rows[r].log_a = log_weight_from_sizes(out.rows[r].d, spec, rule.type_names,
                                              &out.rows[r].component_sizes);
    out.rows[r].p_q =
        static_cast<double>(raw.row_n[r]) / static_cast<double>(n);  // frequency
    out.rows[r].p_true = static_cast<double>(raw.row_n[r]) * w.normalized[r];
  }
  // sort rows and their counts together
  std::vector<std::size_t> order(out.rows.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    if (out.rows[a].p_true != out.rows[b].p_true)
      return out.rows[a].p_true > out.rows[b].p_true;
    return out.rows[a].key < out.rows[b].key;
  });
  std::vector<SupportRow> rows;
  std::vector<long long> row_n;
  rows.reserve(order.size());
  row_n.reserve(order.size());
  for (const std::size_t i : order) {
    rows.push_back(std::move(out.rows[i]));
    row_n.push_back(out.row_n[i]);
  }
  out.rows = std::move(rows);
  out.row_n = std::move(row_n);
  return out;
}

SampleResult sample_true(const Instance& inst, const dsl::PredicateProgram& program,
                         const WeightSpec& spec, long long n, std::uint64_t seed,
                         const SampleOptions& opts) {
  const auto alias =
      std::shared_ptr<const dsl::PredicateProgram>(&program, [](const auto*) {});
  return sample_true(inst, whole_lattice_rule(alias, inst.lattice), spec, n, seed, opts);
}

Estimate expected_qualia_count(const TrueDistribution& exact) {
  double e = 0.0;
  for (const auto& row : exact.support)
    e += row.p_true * static_cast<double>(row.d.size());
  return {e, 0.0};
}

Estimate expected_qualia_count(const SampleResult& sampled) {
  return sampled.expected_size;
}

}  // namespace qualsim
