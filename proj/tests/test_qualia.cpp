#include <cmath>

#include "doctest.h"
#include "qualsim/qualia.hpp"
#include "qualsim/rng.hpp"

using namespace qualsim;

namespace {

const dsl::ParseContext ctx1{1, 1};

LatticeConfig line(int cells, int steps, int n = 1) {
  return LatticeConfig{1, {cells, 1, 1}, steps, n, 1};
}

DensityField field_of(const LatticeConfig& cfg, std::vector<double> values) {
  DensityField f;
  f.rho = std::move(values);
  REQUIRE(f.rho.size() == static_cast<std::size_t>(cfg.num_points()));
  return f;
}

dsl::PredicateProgram parse(const std::string& s, const dsl::ParseContext& ctx = ctx1) {
  return dsl::parse_predicates(s, ctx);
}

}  // namespace

TEST_CASE("a satisfied threshold assigns its quale") {
  const auto cfg = line(1, 1);
  const auto program = parse("quale bright: rho[0][0] > 0.8");
  const auto field = field_of(cfg, {0.9});
  CHECK(evaluate(program, field, {{0, 0, 0}, 0}, cfg) == 0);
}

TEST_CASE("the first matching predicate wins") {
  const auto cfg = line(1, 1);
  const auto program = parse("quale a: rho[0][0] > 0.1\nquale b: rho[0][0] > 0.2");
  const auto field = field_of(cfg, {0.9});
  CHECK(evaluate(program, field, {{0, 0, 0}, 0}, cfg) == 0);
  const auto swapped = parse("quale b: rho[0][0] > 0.2\nquale a: rho[0][0] > 0.1");
  CHECK(evaluate(swapped, field, {{0, 0, 0}, 0}, cfg) == 0);  // now type 'b'
  CHECK(swapped.decls[0].quale_type == "b");
}

TEST_CASE("no quale when every predicate fails") {
  const auto cfg = line(1, 1);
  const auto program = parse("quale a: rho[0][0] > 0.95\nquale b: rho[0][0] < 0.05");
  const auto field = field_of(cfg, {0.5});
  CHECK(!evaluate(program, field, {{0, 0, 0}, 0}, cfg).has_value());
}

TEST_CASE("division by zero marks the predicate false and is recorded") {
  const auto cfg = line(1, 1);
  const auto program =
      parse("quale a: 1 / (rho[0][0] - 0.5) > 0\nquale b: rho[0][0] > 0.1");
  const auto field = field_of(cfg, {0.5});
  EvalDiagnostics diag;
  const auto got = evaluate(program, field, {{0, 0, 0}, 0}, cfg, &diag);
  CHECK(got == 1);  // falls through to b
  CHECK(diag.division_by_zero == 1);
  CHECK(diag.first_context.find("a at line 1") != std::string::npos);
}

TEST_CASE("absent neighbours: guards, comparisons and aggregates") {
  const auto cfg = line(2, 2);
  const auto program = parse(
      "quale edge: is_present(rho[1][0]) and rho[1][0] > 0.5\n"
      "quale lonely: not is_present(rho[1][0]) and rho[0][0] > 0.5");
  const auto field = field_of(cfg, {0.9, 0.9, 0.9, 0.9});
  CHECK(evaluate(program, field, {{0, 0, 0}, 0}, cfg) == 0);
  CHECK(evaluate(program, field, {{1, 0, 0}, 0}, cfg) == 1);

  // comparing against an absent reference is simply false
  const auto cmp = parse("quale a: rho[1][0] > -100");
  CHECK(!evaluate(cmp, field, {{1, 0, 0}, 0}, cfg).has_value());
}

TEST_CASE("aggregates run over the present window") {
  const auto cfg = line(3, 1);
  const auto field = field_of(cfg, {0.2, 0.4, 0.9});
  const SpacetimePoint mid{{1, 0, 0}, 0};
  CHECK(evaluate(parse("quale a: mean(rho) = 0.5"), field, mid, cfg) == 0);
  CHECK(evaluate(parse("quale a: min(rho) = 0.2"), field, mid, cfg) == 0);
  CHECK(evaluate(parse("quale a: max(rho) = 0.9"), field, mid, cfg) == 0);
  CHECK(evaluate(parse("quale a: count(rho > 0.3) = 2"), field, mid, cfg) == 0);
  // at the boundary the absent slot is skipped
  const SpacetimePoint left{{0, 0, 0}, 0};
  CHECK(evaluate(parse("quale a: count(rho > 0.0) = 2"), field, left, cfg) == 0);
  CHECK(evaluate(parse("quale a: mean(rho) = 0.3"), field, left, cfg) == 0);
}

TEST_CASE("equality comparisons carry the documented tolerance") {
  const auto cfg = line(1, 1);
  const auto field = field_of(cfg, {0.5 + 5e-10});
  CHECK(evaluate(parse("quale a: rho[0][0] = 0.5"), field, {{0, 0, 0}, 0}, cfg) == 0);
  const auto far = field_of(cfg, {0.5 + 5e-9});
  CHECK(!evaluate(parse("quale a: rho[0][0] = 0.5"), far, {{0, 0, 0}, 0}, cfg)
             .has_value());
}

TEST_CASE("assign_qualia fills or empties the block") {
  const auto cfg = line(3, 4);
  const auto field = field_of(cfg, std::vector<double>(12, 0.5));
  const auto all = assign_qualia(parse("quale a: rho[0][0] >= 0"), field, cfg);
  CHECK(all.size() == cfg.num_points());
  CHECK(all.type_counts[0] == 12);
  const auto none = assign_qualia(parse("quale a: rho[0][0] > 2"), field, cfg);
  CHECK(none.size() == 0);
}

TEST_CASE("the bell-preset field never clears a high threshold") {
  const auto cfg = line(2, 2);
  SubstrateConfig sub;
  sub.theta = 0.9;
  sub.collapse_rate = 0.0;
  sub.initial = "bell";
  const auto field = density_field({}, sub, cfg);
  const auto d = assign_qualia(parse("quale a: rho[0][0] > 0.8"), field, cfg);
  CHECK(d.size() == 0);
}

TEST_CASE("exclusivity and determinism hold on random fields") {
  Rng rng(31337);
  const auto cfg = line(4, 3);
  const auto program = parse(
      "quale a: rho[0][0] > 0.7\n"
      "quale b: mean(rho) > 0.5\n"
      "quale c: count(rho < 0.3) >= 2");
  for (int rep = 0; rep < 25; ++rep) {
    std::vector<double> values;
    for (int i = 0; i < 12; ++i) values.push_back(rng.uniform());
    const auto field = field_of(cfg, values);
    const auto d1 = assign_qualia(program, field, cfg);
    const auto d2 = assign_qualia(program, field, cfg);
    CHECK(d1.canonical_key() == d2.canonical_key());
    for (std::size_t i = 1; i < d1.qualia.size(); ++i)
      CHECK(d1.qualia[i - 1].point < d1.qualia[i].point);
    long long total = 0;
    for (const long long c : d1.type_counts) total += c;
    CHECK(total == d1.size());
  }
}

TEST_CASE("threshold qualia shrink as the threshold rises") {
  Rng rng(4242);
  const auto cfg = line(5, 4);
  std::vector<double> values;
  for (int i = 0; i < 20; ++i) values.push_back(rng.uniform());
  const auto field = field_of(cfg, values);
  long long last = cfg.num_points() + 1;
  for (double tau = 0.0; tau <= 1.0; tau += 0.05) {
    const auto program =
        parse("quale a: rho[0][0] > " + std::to_string(tau));
    const auto d = assign_qualia(program, field, cfg);
    CHECK(d.size() <= last);
    last = d.size();
  }
}
