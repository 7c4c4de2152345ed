#pragma once

#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "qualsim/lattice.hpp"

namespace qualsim::dsl {

struct SourcePos {
  int line = 1;  // 1-based
  int col = 1;
};

struct ParseError : std::runtime_error {
  SourcePos pos;
  ParseError(SourcePos p, const std::string& what)
      : std::runtime_error("line " + std::to_string(p.line) + ", col " +
                           std::to_string(p.col) + ": " + what),
        pos(p) {}
};

enum class ExprKind {
  Number,
  RhoRef,    // rho[dx..][dt], fixed window offset
  BareRho,   // the iterated cell inside an aggregate
  IsPresent, // presence guard on a RhoRef
  Negate,
  Not,
  Arith,
  Compare,
  BoolConn,
  Aggregate,
};

enum class ArithOp { Add, Sub, Mul, Div };
enum class CompareOp { Lt, Le, Gt, Ge, Eq, Ne };
enum class BoolOp { And, Or };
enum class AggKind { Mean, Min, Max, Count };

struct Expr {
  ExprKind kind{};
  SourcePos pos;
  bool boolean = false;  // static result type

  double number = 0.0;
  Cell offset = {0, 0, 0};
  int dt = 0;
  ArithOp arith{};
  CompareOp cmp{};
  BoolOp conn{};
  AggKind agg{};

  std::unique_ptr<Expr> a;
  std::unique_ptr<Expr> b;
};

struct PredicateDecl {
  std::string quale_type;
  SourcePos pos;
  std::unique_ptr<Expr> body;  // boolean
};

// An ordered list of typed predicates. The first one that holds at a point
// assigns that point's quale; order is the exclusivity tie-break.
struct PredicateProgram {
  std::vector<PredicateDecl> decls;
  int spatial_dims = 1;  // bracket count of rho references

  int type_count() const { return static_cast<int>(decls.size()); }
  std::vector<std::string> type_names() const;
  int type_index(std::string_view name) const;  // -1 if unknown
};

struct ParseContext {
  int spatial_dims = 1;
  int neighborhood_radius = 1;  // offsets are checked against this
};

// Grammar, one declaration per line ('#' comments, newlines inside brackets
// are ignored):
//   quale NAME : expr
//   expr: or/and/not over comparisons (< <= > >= = !=, equality with
//   tolerance 1e-9) of arithmetic (+ - * /) over numbers, rho[dx..][dt]
//   references, aggregates mean|min|max(e) and count(cond) over the window
//   (bare `rho` names the iterated cell), and is_present(rho[..][..]).
// Throws ParseError with a 1-based position on any malformed input.
PredicateProgram parse_predicates(std::string_view source, const ParseContext& ctx);

// Canonical form; parsing it back yields a structurally identical program.
std::string pretty_print(const PredicateProgram& program);

bool equal(const PredicateProgram& lhs, const PredicateProgram& rhs);

}  // namespace qualsim::dsl
