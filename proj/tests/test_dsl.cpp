#include <string>

#include "doctest.h"
#include "dsl_corpus.hpp"
#include "qualsim/dsl.hpp"
#include "qualsim/rng.hpp"

using namespace qualsim;
using dsl::parse_predicates;

namespace {
const dsl::ParseContext ctx1{1, 2};  // 1D, N=2
}

TEST_CASE("a single threshold declaration parses") {
  const auto prog = parse_predicates("quale bright: rho[0][0] > 0.8", ctx1);
  REQUIRE(prog.decls.size() == 1);
  CHECK(prog.decls[0].quale_type == "bright");
  CHECK(prog.decls[0].body->boolean);
  CHECK(prog.type_index("bright") == 0);
  CHECK(prog.type_index("dim") == -1);
}

TEST_CASE("offsets are checked against the window radius") {
  try {
    parse_predicates("quale x: rho[5][0] > 0", ctx1);
    FAIL("expected ParseError");
  } catch (const dsl::ParseError& e) {
    CHECK(e.pos.line == 1);
    CHECK(std::string(e.what()).find("offset") != std::string::npos);
  }
  CHECK_THROWS_AS(parse_predicates("quale x: rho[0][3] > 0", ctx1), dsl::ParseError);
  CHECK_NOTHROW(parse_predicates("quale x: rho[2][2] > 0", ctx1));
  CHECK_NOTHROW(parse_predicates("quale x: rho[-2][0] > 0", ctx1));
}

TEST_CASE("2D references need two spatial brackets") {
  const dsl::ParseContext ctx2{2, 1};
  CHECK_NOTHROW(parse_predicates("quale x: rho[1][-1][0] > 0.5", ctx2));
  CHECK_THROWS_AS(parse_predicates("quale x: rho[1][0] > 0.5", ctx2), dsl::ParseError);
  CHECK_THROWS_AS(parse_predicates("quale x: rho[1][0][0][0] > 0.5", ctx2),
                  dsl::ParseError);
}

TEST_CASE("every valid corpus program parses and round-trips") {
  for (const auto& source : valid_programs()) {
    CAPTURE(source);
    dsl::PredicateProgram first;
    REQUIRE_NOTHROW(first = parse_predicates(source, ctx1));
    const std::string printed = pretty_print(first);
    dsl::PredicateProgram second;
    REQUIRE_NOTHROW(second = parse_predicates(printed, ctx1));
    CHECK(dsl::equal(first, second));
    CHECK(pretty_print(second) == printed);
  }
}

TEST_CASE("every invalid corpus program fails with a positioned error") {
  for (const auto& source : invalid_programs()) {
    CAPTURE(source);
    if (source.empty()) {
      // empty input parses to an empty program; nothing to reject
      CHECK(parse_predicates(source, ctx1).decls.empty());
      continue;
    }
    try {
      parse_predicates(source, ctx1);
      FAIL_CHECK("parsed but should not: ", source);
    } catch (const dsl::ParseError& e) {
      CHECK(e.pos.line >= 1);
      CHECK(e.pos.col >= 1);
    }
  }
}

TEST_CASE("parser survives a fuzz battering") {
  Rng rng(98765);
  const std::string glyphs =
      "quale rho and or not mean min max count is_present [ ] ( ) : < > = ! + - * / "
      "0 1 2 5 . # \n \t x y _";
  for (int rep = 0; rep < 10000; ++rep) {
    std::string s;
    const int len = static_cast<int>(rng.uniform() * 80);
    if (rep % 3 == 0) {
      for (int i = 0; i < len; ++i)
        s.push_back(static_cast<char>(1 + static_cast<int>(rng.uniform() * 255)));
    } else {
      for (int i = 0; i < len; ++i) {
        const auto start = static_cast<std::size_t>(rng.uniform() *
                                                    static_cast<double>(glyphs.size()));
        s.push_back(glyphs[start]);
      }
    }
    try {
      (void)parse_predicates(s, ctx1);
    } catch (const dsl::ParseError&) {
      // positioned rejection is the expected failure mode
    }
  }
  CHECK(true);
}

TEST_CASE("printer output is canonical") {
  const auto prog =
      parse_predicates("quale x: rho[0][0]*2 + 1 > 0.5 and not rho[1][0] < 0.1", ctx1);
  CHECK(pretty_print(prog) ==
        "quale x: ((((rho[0][0] * 2) + 1) > 0.5) and (not (rho[1][0] < 0.1)))\n");
}
