#include "qualsim/qualia.hpp"

#include <cmath>
#include <cstring>
#include <limits>

namespace qualsim {

namespace {

constexpr double kEqualityTol = 1e-9;

struct DivideByZero {
  dsl::SourcePos pos;
};

// Absent marks a window slot outside the lattice; it propagates through
// arithmetic and makes any comparison false.
struct Value {
  enum class Tag { Num, Bool, Absent } tag = Tag::Absent;
  double num = 0.0;
  bool b = false;

  static Value number(double x) { return {Tag::Num, x, false}; }
  static Value boolean(bool v) { return {Tag::Bool, 0.0, v}; }
  static Value absent() { return {}; }
};

struct EvalCtx {
  const DensityField& field;
  const LatticeConfig& cfg;
  SpacetimePoint p;
  const double* bare_rho = nullptr;  // bound inside aggregates
};

Value eval(const dsl::Expr& e, const EvalCtx& ctx);

Value eval_ref(const dsl::Expr& e, const EvalCtx& ctx) {
  SpacetimePoint q;
  for (int a = 0; a < 3; ++a) q.cell[a] = ctx.p.cell[a] + e.offset[a];
  q.t = ctx.p.t - e.dt;
  if (!point_in_bounds(q, ctx.cfg)) return Value::absent();
  return Value::number(ctx.field.at(q, ctx.cfg));
}

Value eval_aggregate(const dsl::Expr& e, const EvalCtx& ctx) {
  const auto slots = neighborhood(ctx.p, ctx.cfg);
  double acc = 0.0;
  double mn = std::numeric_limits<double>::infinity();
  double mx = -std::numeric_limits<double>::infinity();
  long long n = 0;
  long long hits = 0;
  for (const auto& s : slots) {
    if (!s.present) continue;
    const double here = ctx.field.at(s.point, ctx.cfg);
    EvalCtx inner = ctx;
    inner.bare_rho = &here;
    const Value v = eval(*e.a, inner);
    if (v.tag == Value::Tag::Absent) continue;
    if (e.agg == dsl::AggKind::Count) {
      if (v.b) ++hits;
      ++n;
      continue;
    }
    ++n;
    acc += v.num;
    mn = std::min(mn, v.num);
    mx = std::max(mx, v.num);
  }
  switch (e.agg) {
    case dsl::AggKind::Count:
      return Value::number(static_cast<double>(hits));
    case dsl::AggKind::Mean:
      return n == 0 ? Value::absent() : Value::number(acc / static_cast<double>(n));
    case dsl::AggKind::Min:
      return n == 0 ? Value::absent() : Value::number(mn);
    case dsl::AggKind::Max:
      return n == 0 ? Value::absent() : Value::number(mx);
  }
  return Value::absent();
}

Value eval(const dsl::Expr& e, const EvalCtx& ctx) {
  using dsl::ExprKind;
  switch (e.kind) {
    case ExprKind::Number:
      return Value::number(e.number);
    case ExprKind::BareRho:
      return Value::number(*ctx.bare_rho);
    case ExprKind::RhoRef:
      return eval_ref(e, ctx);
    case ExprKind::IsPresent: {
      SpacetimePoint q;
      for (int a = 0; a < 3; ++a) q.cell[a] = ctx.p.cell[a] + e.a->offset[a];
      q.t = ctx.p.t - e.a->dt;
      return Value::boolean(point_in_bounds(q, ctx.cfg));
    }
    case ExprKind::Negate: {
      const Value v = eval(*e.a, ctx);
      if (v.tag == Value::Tag::Absent) return v;
      return Value::number(-v.num);
    }
    case ExprKind::Not: {
      const Value v = eval(*e.a, ctx);
      return Value::boolean(!v.b);
    }
    case ExprKind::Arith: {
      const Value x = eval(*e.a, ctx);
      const Value y = eval(*e.b, ctx);
      if (x.tag == Value::Tag::Absent || y.tag == Value::Tag::Absent)
        return Value::absent();
      switch (e.arith) {
        case dsl::ArithOp::Add:
          return Value::number(x.num + y.num);
        case dsl::ArithOp::Sub:
          return Value::number(x.num - y.num);
        case dsl::ArithOp::Mul:
          return Value::number(x.num * y.num);
        case dsl::ArithOp::Div:
          if (y.num == 0.0) throw DivideByZero{e.pos};
          return Value::number(x.num / y.num);
      }
      return Value::absent();
    }
    case ExprKind::Compare: {
      const Value x = eval(*e.a, ctx);
      const Value y = eval(*e.b, ctx);
      if (x.tag == Value::Tag::Absent || y.tag == Value::Tag::Absent)
        return Value::boolean(false);
      switch (e.cmp) {
        case dsl::CompareOp::Lt:
          return Value::boolean(x.num < y.num);
        case dsl::CompareOp::Le:
          return Value::boolean(x.num <= y.num);
        case dsl::CompareOp::Gt:
          return Value::boolean(x.num > y.num);
        case dsl::CompareOp::Ge:
          return Value::boolean(x.num >= y.num);
        case dsl::CompareOp::Eq:
          return Value::boolean(std::abs(x.num - y.num) <= kEqualityTol);
        case dsl::CompareOp::Ne:
          return Value::boolean(std::abs(x.num - y.num) > kEqualityTol);
      }
      return Value::boolean(false);
    }
    case ExprKind::BoolConn: {
      const Value x = eval(*e.a, ctx);
      if (e.conn == dsl::BoolOp::And) {
        if (!x.b) return Value::boolean(false);
        return Value::boolean(eval(*e.b, ctx).b);
      }
      if (x.b) return Value::boolean(true);
      return Value::boolean(eval(*e.b, ctx).b);
    }
    case ExprKind::Aggregate:
      return eval_aggregate(e, ctx);
  }
  return Value::absent();
}

}  // namespace

std::string QualiaDistribution::canonical_key() const {
  std::string key;
  key.reserve(qualia.size() * 12);
  for (const auto& q : qualia) {
    char buf[12];
    std::memcpy(buf, &q.point, 8);
    std::memcpy(buf + 8, &q.type, 4);
    key.append(buf, 12);
  }
  return key;
}

std::uint64_t QualiaDistribution::hash() const {
  const std::string key = canonical_key();
  std::uint64_t h = 0xCBF29CE484222325ull;
  for (unsigned char c : key) {
    h ^= c;
    h *= 0x100000001B3ull;
  }
  return h;
}

std::optional<int> evaluate(const dsl::PredicateProgram& program,
                            const DensityField& field, const SpacetimePoint& p,
                            const LatticeConfig& cfg, EvalDiagnostics* diag) {
  if (!point_in_bounds(p, cfg))
    throw InvalidPointError("evaluate: point outside lattice");
  EvalCtx ctx{field, cfg, p, nullptr};
  for (std::size_t i = 0; i < program.decls.size(); ++i) {
    const auto& d = program.decls[i];
    bool holds = false;
    try {
      holds = eval(*d.body, ctx).b;
    } catch (const DivideByZero& z) {
      if (diag) {
        ++diag->division_by_zero;
        if (diag->first_context.empty())
          diag->first_context = d.quale_type + " at line " + std::to_string(z.pos.line) +
                                ", col " + std::to_string(z.pos.col);
      }
      holds = false;
    }
    if (holds) return static_cast<int>(i);
  }
  return std::nullopt;
}

QualiaDistribution assign_qualia(const dsl::PredicateProgram& program,
                                 const DensityField& field, const LatticeConfig& cfg,
                                 EvalDiagnostics* diag) {
  QualiaDistribution d;
  d.type_counts.assign(static_cast<std::size_t>(program.type_count()), 0);
  const long long n = cfg.num_points();
  for (long long i = 0; i < n; ++i) {
    const SpacetimePoint p = point_from_index(i, cfg);
    if (auto t = evaluate(program, field, p, cfg, diag)) {
      d.qualia.push_back({i, *t});
      ++d.type_counts[static_cast<std::size_t>(*t)];
    }
  }
  return d;
}

}  // namespace qualsim
