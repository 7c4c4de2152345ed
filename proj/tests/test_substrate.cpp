#include <cmath>
#include <complex>
#include <map>

#include "doctest.h"
#include "qualsim/rng.hpp"
#include "qualsim/substrate.hpp"

using namespace qualsim;
using std::complex;

namespace {

LatticeConfig line(int cells, int steps, int n = 1, int k = 1) {
  return LatticeConfig{1, {cells, 1, 1}, steps, n, k};
}

SubstrateConfig sub_cfg(double theta, double pc, std::string initial) {
  SubstrateConfig s;
  s.theta = theta;
  s.collapse_rate = pc;
  s.initial = std::move(initial);
  return s;
}

// Taylor-series exponential of -i * theta * (XX + YY)/2; independent route
// to the hopping gate.
Eigen::Matrix4cd gate_by_series(double theta) {
  Eigen::Matrix4cd xx = Eigen::Matrix4cd::Zero();
  xx(0, 3) = xx(1, 2) = xx(2, 1) = xx(3, 0) = 1.0;
  Eigen::Matrix4cd yy = Eigen::Matrix4cd::Zero();
  yy(0, 3) = -1.0;
  yy(1, 2) = 1.0;
  yy(2, 1) = 1.0;
  yy(3, 0) = -1.0;
  const Eigen::Matrix4cd h = complex<double>(0.0, -theta) * (xx + yy) / 2.0;
  Eigen::Matrix4cd term = Eigen::Matrix4cd::Identity();
  Eigen::Matrix4cd sum = term;
  for (int k = 1; k < 40; ++k) {
    term = term * h / static_cast<double>(k);
    sum += term;
  }
  return sum;
}

CollapseHistory history_of(std::initializer_list<std::tuple<int, int, int>> events,
                           const LatticeConfig& cfg) {
  CollapseHistory h;
  for (const auto& [cell, t, outcome] : events)
    h.events.push_back({{cell_from_index(cell, cfg), t}, outcome});
  return h;
}

}  // namespace

TEST_CASE("hopping gate matches the series exponential") {
  for (const double theta : {0.0, 0.3, 0.7853981633974483, 1.5707963267948966, 2.5}) {
    const Eigen::Matrix4cd diff = hopping_gate(theta) - gate_by_series(theta);
    CHECK(diff.cwiseAbs().maxCoeff() < 1e-12);
    const Eigen::Matrix4cd unit =
        hopping_gate(theta) * hopping_gate(theta).adjoint() -
        Eigen::Matrix4cd::Identity();
    CHECK(unit.cwiseAbs().maxCoeff() < 1e-12);
  }
}

TEST_CASE("a half-pi hop swaps the pair") {
  const auto lat = line(2, 2);
  const auto sub = sub_cfg(M_PI / 2, 0.0, "10");
  DensityOperator rho(initial_state(sub, lat));
  const DensityOperator out = evolve_step(rho, sub, lat, 0);
  // |10> -> |01> up to a phase that a density operator cannot see
  Eigen::MatrixXcd expect = Eigen::MatrixXcd::Zero(4, 4);
  expect(1, 1) = 1.0;
  CHECK((out.matrix() - expect).cwiseAbs().maxCoeff() < 1e-12);
  CHECK(out.trace_real() == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("a zero angle leaves the state alone") {
  const auto lat = line(2, 2);
  const auto sub = sub_cfg(0.0, 0.0, "10");
  DensityOperator rho(initial_state(sub, lat));
  const DensityOperator out = evolve_step(rho, sub, lat, 0);
  CHECK((out.matrix() - rho.matrix()).cwiseAbs().maxCoeff() < 1e-15);
}

TEST_CASE("a quarter-pi hop splits the excitation evenly") {
  const auto lat = line(2, 2);
  const auto sub = sub_cfg(M_PI / 4, 0.0, "10");
  const DensityOperator out =
      evolve_step(DensityOperator(initial_state(sub, lat)), sub, lat, 0);
  CHECK(out.occupation_expectation(0) == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(out.occupation_expectation(1) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("evolve_step rejects mismatched dimensions") {
  const auto lat = line(3, 2);
  const auto sub = sub_cfg(0.3, 0.0, "100");
  DensityOperator small(initial_state(sub_cfg(0.3, 0.0, "10"), line(2, 2)));
  CHECK_THROWS_AS(evolve_step(small, sub, lat, 0), ConfigError);
}

TEST_CASE("sampling with no collapses gives the empty history") {
  const auto lat = line(2, 3);
  const auto h = sample_history(sub_cfg(0.5, 0.0, "10"), lat, 99);
  CHECK(h.events.empty());
  CHECK(h.log_probability == 0.0);
}

TEST_CASE("certain collapse of a definite cell reports it with certainty") {
  const auto lat = line(1, 1);
  const auto h = sample_history(sub_cfg(0.0, 1.0, "1"), lat, 4);
  REQUIRE(h.events.size() == 1);
  CHECK(h.events[0].outcome == 1);
  CHECK(h.log_probability == 0.0);
}

TEST_CASE("collapsing a balanced superposition is a fair coin") {
  const auto lat = line(1, 1);
  const auto sub = sub_cfg(0.0, 1.0, "plus");
  std::map<int, int> counts;
  for (std::uint64_t s = 0; s < 2000; ++s)
    ++counts[sample_history(sub, lat, derive_seed(31, s)).events[0].outcome];
  CHECK(counts[0] + counts[1] == 2000);
  // 4 standard errors around the fair split
  CHECK(std::abs(counts[1] - 1000) < 4 * std::sqrt(2000 * 0.25));
  for (const auto& [h, p] : enumerate_histories(sub, lat, 1 << 20))
    CHECK(p == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("sampling is deterministic per seed") {
  const auto lat = line(3, 3);
  const auto sub = sub_cfg(0.9, 0.5, "101");
  const auto a = sample_history(sub, lat, 1234);
  const auto b = sample_history(sub, lat, 1234);
  CHECK(a.key(lat) == b.key(lat));
  CHECK(a.log_probability == b.log_probability);
  const auto c = sample_history(sub, lat, 1235);
  CHECK(a.key(lat) != c.key(lat));  // overwhelmingly likely for this instance
}

TEST_CASE("enumeration covers the sample space") {
  SUBCASE("no collapses: a single certain history") {
    const auto out = enumerate_histories(sub_cfg(0.5, 0.0, "10"), line(2, 2), 1 << 20);
    REQUIRE(out.size() == 1);
    CHECK(out[0].second == doctest::Approx(1.0).epsilon(1e-12));
  }
  SUBCASE("2 cells, 2 steps, partial collapse: mass sums to one") {
    const auto out =
        enumerate_histories(sub_cfg(M_PI / 4, 0.5, "10"), line(2, 2), 1 << 20);
    double total = 0.0;
    for (const auto& [h, p] : out) total += p;
    CHECK(std::abs(total - 1.0) < 1e-10);
  }
  SUBCASE("the a priori bound triggers the cap") {
    try {
      enumerate_histories(sub_cfg(M_PI / 4, 0.5, "10"), line(2, 2), 10);
      FAIL("expected CapExceededError");
    } catch (const CapExceededError& e) {
      CHECK(e.branch_count == 81);  // 3^4 sites
      CHECK(e.cap == 10);
    }
  }
}

TEST_CASE("sampled history frequencies match enumerated probabilities") {
  const auto lat = line(2, 2);
  const auto sub = sub_cfg(M_PI / 3, 0.5, "bell");
  const auto table = enumerate_histories(sub, lat, 1 << 20);
  std::map<std::string, double> expect;
  for (const auto& [h, p] : table) expect[h.key(lat)] += p;
  const long long n = 100000;
  std::map<std::string, long long> seen;
  for (long long i = 0; i < n; ++i)
    ++seen[sample_history(sub, lat, derive_seed(77, static_cast<std::uint64_t>(i)))
               .key(lat)];
  double covered = 0.0;
  for (const auto& [key, p] : expect) {
    const double freq = static_cast<double>(seen[key]) / static_cast<double>(n);
    const double se = std::sqrt(p * (1.0 - p) / static_cast<double>(n));
    CHECK(std::abs(freq - p) <= 4.0 * se + 1e-12);
    covered += freq;
  }
  CHECK(covered == doctest::Approx(1.0).epsilon(1e-9));
}

TEST_CASE("bell marginals are maximally mixed") {
  const auto lat = line(2, 3);
  const auto sub = sub_cfg(0.6, 0.0, "bell");
  const CollapseHistory none;
  for (int cell = 0; cell < 2; ++cell) {
    for (int t = 0; t < 3; ++t) {
      const auto red =
          conditioned_local_state(none, {{cell, 0, 0}, t}, sub, lat);
      CHECK(std::abs(red(0, 0).real() - 0.5) < 1e-12);
      CHECK(std::abs(red(1, 1).real() - 0.5) < 1e-12);
      CHECK(std::abs(red(0, 1)) < 1e-12);
    }
  }
}

TEST_CASE("product states stay pure without collapses or gates") {
  const auto lat = line(3, 2);
  const auto sub = sub_cfg(0.0, 0.0, "010");
  const CollapseHistory none;
  const auto red = conditioned_local_state(none, {{1, 0, 0}, 1}, sub, lat);
  CHECK(std::abs(red(1, 1).real() - 1.0) < 1e-12);
}

TEST_CASE("an event outside the cone contributes its Born-weighted average") {
  // 3-cell instance; the probe point never has the far event in its cone
  const auto lat = line(3, 3);
  const auto sub = sub_cfg(0.9, 0.0, "110");
  const auto h = history_of({{2, 1, 0}, {0, 2, 1}}, lat);
  const SpacetimePoint p{{0, 0, 0}, 1};
  REQUIRE(!in_past_cone(h.events[0].point, p));
  const auto [r0, w0] = conditioned_local_state_forced(h, p, 0, 0, sub, lat);
  const auto [r1, w1] = conditioned_local_state_forced(h, p, 0, 1, sub, lat);
  REQUIRE(w0 + w1 > 0.0);
  const Eigen::Matrix2cd avg = (w0 * r0 + w1 * r1) / (w0 + w1);
  const Eigen::Matrix2cd deph = conditioned_local_state(h, p, sub, lat);
  CHECK((avg - deph).cwiseAbs().maxCoeff() < 1e-10);
}

TEST_CASE("flipping an outcome outside the cone leaves the local state alone") {
  const auto lat = line(4, 3);
  const auto sub = sub_cfg(0.8, 0.0, "1010");
  const auto h = history_of({{1, 1, 1}, {3, 1, 0}}, lat);
  const SpacetimePoint p{{0, 0, 0}, 1};
  CollapseHistory flipped = h;
  flipped.events[0].outcome = 1;
  const auto a = conditioned_local_state(h, p, sub, lat);
  const auto b = conditioned_local_state(flipped, p, sub, lat);
  CHECK((a - b).cwiseAbs().maxCoeff() < 1e-12);
}

TEST_CASE("density field: definite occupation stays put") {
  const auto lat = line(1, 4);
  const auto sub = sub_cfg(0.0, 0.0, "1");
  const auto field = density_field({}, sub, lat);
  for (const double v : field.rho) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("density field: bell preset reads one half everywhere") {
  const auto lat = line(2, 3);
  const auto sub = sub_cfg(0.7, 0.0, "bell");
  const auto field = density_field({}, sub, lat);
  for (const double v : field.rho) CHECK(v == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("density field after one conditioning event matches the 4x4 oracle") {
  const auto lat = line(2, 2);
  const auto sub = sub_cfg(M_PI / 4, 0.0, "10");
  const auto h = history_of({{0, 1, 1}}, lat);
  const auto field = density_field(h, sub, lat);

  // by hand: |10> -> cos|10> - i sin|01>; conditioning cell 0 on outcome 1
  // leaves its own density at 1, while cell 1, which dephases that event,
  // keeps the unconditioned share sin^2(pi/4)
  CHECK(field.at({{0, 0, 0}, 0}, lat) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(field.at({{1, 0, 0}, 0}, lat) == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(field.at({{0, 0, 0}, 1}, lat) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(field.at({{1, 0, 0}, 1}, lat) == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("ensemble and channel-composition field routes agree") {
  Rng rng(2024);
  for (int rep = 0; rep < 40; ++rep) {
    const int cells = 2 + static_cast<int>(rng.uniform() * 2);
    const int steps = 1 + static_cast<int>(rng.uniform() * 3);
    const auto lat = line(cells, steps);
    SubstrateConfig sub;
    sub.theta = rng.uniform() * 3.0;
    sub.collapse_rate = rng.uniform();
    if (cells == 2 && rng.uniform() < 0.3) {
      sub.initial = "bell";
    } else {
      sub.initial.clear();
      for (int c = 0; c < cells; ++c) sub.initial += rng.uniform() < 0.5 ? '1' : '0';
    }
    const auto h = sample_history(sub, lat, rng.next_u64());
    const auto fast = density_field(h, sub, lat);
    const auto ref = density_field_reference(h, sub, lat);
    for (std::size_t i = 0; i < fast.rho.size(); ++i)
      CHECK(std::abs(fast.rho[i] - ref.rho[i]) < 1e-10);
  }
}

TEST_CASE("histories are validated before use") {
  const auto lat = line(2, 2);
  const auto sub = sub_cfg(0.4, 0.5, "10");
  CollapseHistory bad = history_of({{1, 1, 0}, {0, 1, 1}}, lat);  // out of order
  CHECK_THROWS_AS(density_field(bad, sub, lat), InconsistentHistoryError);
  CollapseHistory zero = history_of({{1, 0, 1}}, lat);  // cell 1 starts empty
  CHECK_THROWS_AS(conditioned_local_state(zero, {{1, 0, 0}, 1}, sub, lat),
                  InconsistentHistoryError);
}

TEST_CASE("conditioned states are trace-one hermitian and positive") {
  Rng rng(555);
  for (int rep = 0; rep < 60; ++rep) {
    const int cells = 1 + static_cast<int>(rng.uniform() * 3);
    const int steps = 1 + static_cast<int>(rng.uniform() * 3);
    const auto lat = line(cells, steps);
    SubstrateConfig sub;
    sub.theta = rng.uniform() * 3.1;
    sub.collapse_rate = rng.uniform();
    sub.initial.clear();
    for (int c = 0; c < cells; ++c) sub.initial += rng.uniform() < 0.5 ? '1' : '0';
    const auto h = sample_history(sub, lat, rng.next_u64());
    for (long long i = 0; i < lat.num_points(); ++i) {
      const auto red = conditioned_local_state(h, point_from_index(i, lat), sub, lat);
      CHECK(std::abs(red.trace().real() - 1.0) < 1e-10);
      CHECK(std::abs(red.trace().imag()) < 1e-10);
      CHECK(std::abs(red(0, 1) - std::conj(red(1, 0))) < 1e-10);
      // 2x2 hermitian eigenvalue bound via determinant and trace
      const double det = (red(0, 0) * red(1, 1) - red(0, 1) * red(1, 0)).real();
      const double tr = red.trace().real();
      const double disc = std::sqrt(std::max(0.0, tr * tr - 4.0 * det));
      CHECK((tr - disc) / 2.0 >= -1e-10);
    }
  }
}
