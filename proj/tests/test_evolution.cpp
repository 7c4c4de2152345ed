#include <cmath>

#include "doctest.h"
#include "qualsim/evolution.hpp"

using namespace qualsim;

namespace {

std::shared_ptr<const dsl::PredicateProgram> parse_shared(const std::string& s) {
  return std::make_shared<const dsl::PredicateProgram>(
      dsl::parse_predicates(s, dsl::ParseContext{1, 1}));
}

MotifSpec motif(int start, int size, const std::string& pattern, double theta,
                const std::string& source) {
  MotifSpec m;
  m.region_start = start;
  m.region_size = size;
  m.pattern = pattern;
  m.theta = theta;
  m.program = parse_shared(source);
  m.program_source = source;
  return m;
}

const std::string kStay = "quale stay: rho[0][0] > 0.9 and rho[0][1] > 0.9";
const std::string kPulse =
    "quale pulse: rho[0][0] > 0.9 and not is_present(rho[0][1])";

EvolveSetup stock_asymmetric() {
  EvolveSetup s;
  s.lattice = LatticeConfig{1, {6, 1, 1}, 4, 1, 1};
  s.collapse_rate = 1.0;
  s.enumeration_cap = 1ull << 25;
  s.first = motif(0, 3, "100", M_PI / 4, kStay);
  s.second = motif(3, 3, "100", M_PI / 4, kPulse);
  return s;
}

EvolveSetup stock_symmetric() {
  EvolveSetup s = stock_asymmetric();
  s.second = motif(3, 3, "100", M_PI / 4, kStay);
  return s;
}

}  // namespace

TEST_CASE("motif setups are validated") {
  EvolveSetup s = stock_asymmetric();
  SUBCASE("overlapping regions") {
    s.second.region_start = 2;
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }
  SUBCASE("unequal sizes") {
    s.second.region_size = 2;
    s.second.pattern = "10";
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }
  SUBCASE("pattern length mismatch") {
    s.first.pattern = "10";
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }
  SUBCASE("region outside the lattice") {
    s.second.region_start = 4;
    CHECK_THROWS_AS(s.validate(), ConfigError);
  }
  SUBCASE("the stock setup is fine") { CHECK_NOTHROW(s.validate()); }
}

TEST_CASE("identical motifs split dominance evenly") {
  const auto setup = stock_symmetric();
  WeightSpec counting;
  for (const double beta : {0.0, 0.5, 1.0}) {
    counting.beta = beta;
    const auto r = run_selection(setup, counting, 0, 1);
    CHECK(r.exact);
    CHECK(std::abs(r.dominance.value - 0.5) < 1e-10);
  }
}

TEST_CASE("zero tilt equals the quantum baseline exactly") {
  const auto setup = stock_asymmetric();
  WeightSpec counting;
  counting.beta = 0.0;
  const auto r = run_selection(setup, counting, 0, 1);
  CHECK(r.exact);
  CHECK(std::abs(r.dominance.value - r.baseline) < 1e-12);
}

TEST_CASE("swapping the motifs mirrors the dominance") {
  const auto setup = stock_asymmetric();
  EvolveSetup swapped = setup;
  std::swap(swapped.first, swapped.second);
  swapped.first.region_start = 0;
  swapped.second.region_start = 3;
  WeightSpec counting;
  counting.beta = 0.5;
  const auto a = run_selection(setup, counting, 0, 1);
  const auto b = run_selection(swapped, counting, 0, 1);
  CHECK(std::abs(a.dominance.value + b.dominance.value - 1.0) < 1e-10);
}

TEST_CASE("the stock asymmetric instance rewards the qualia-rich motif") {
  const auto setup = stock_asymmetric();
  WeightSpec counting;
  const auto sweep = beta_sweep(setup, counting, {0.0, 0.25, 0.5, 1.0}, 0, 1);
  REQUIRE(sweep.size() == 4);
  CHECK(std::abs(sweep[0].dominance.value - sweep[0].baseline) < 1e-12);
  for (std::size_t i = 1; i < sweep.size(); ++i) {
    CHECK(sweep[i].exact);
    CHECK(sweep[i].dominance.value > sweep[i].baseline);
    CHECK(sweep[i].dominance.value > sweep[i - 1].dominance.value);
  }
}

TEST_CASE("a sampled sweep reproduces exact values within three errors") {
  const auto setup = stock_asymmetric();
  WeightSpec counting;
  const std::vector<double> betas = {0.0, 0.5, 1.0};
  const auto exact = beta_sweep(setup, counting, betas, 0, 1);
  const auto sampled = beta_sweep(setup, counting, betas, 20000, 42);
  for (std::size_t i = 0; i < betas.size(); ++i) {
    CHECK(!sampled[i].exact);
    const double se = sampled[i].dominance.std_error;
    CHECK(std::abs(sampled[i].dominance.value - exact[i].dominance.value) <=
          3.0 * se + 1e-12);
  }
}

TEST_CASE("reweighted shared samples match independent runs") {
  const auto setup = stock_asymmetric();
  WeightSpec counting;
  const auto shared = beta_sweep(setup, counting, {0.25, 1.0}, 20000, 7);
  for (std::size_t i = 0; i < shared.size(); ++i) {
    counting.beta = shared[i].beta;
    const auto solo = run_selection(setup, counting, 20000, 1009 + i);
    const double se = std::hypot(shared[i].dominance.std_error,
                                 solo.dominance.std_error);
    CHECK(std::abs(shared[i].dominance.value - solo.dominance.value) <= 3.0 * se + 1e-12);
  }
}

TEST_CASE("sampled selection is deterministic per seed") {
  const auto setup = stock_asymmetric();
  WeightSpec counting;
  counting.beta = 0.5;
  const auto a = run_selection(setup, counting, 5000, 4);
  const auto b = run_selection(setup, counting, 5000, 4);
  CHECK(a.dominance.value == b.dominance.value);
  CHECK(a.dominance.std_error == b.dominance.std_error);
  CHECK(a.ess == b.ess);
}
