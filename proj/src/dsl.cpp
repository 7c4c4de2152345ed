#include "qualsim/dsl.hpp"

#include "qualsim/io_util.hpp"

#include <cctype>
#include <cstdio>
#include <cstdlib>
#include <set>
#include <utility>

namespace qualsim::dsl {

namespace {

enum class Tok {
  End,
  Newline,
  Ident,
  Number,
  LParen,
  RParen,
  LBracket,
  RBracket,
  Colon,
  Plus,
  Minus,
  Star,
  Slash,
  Lt,
  Le,
  Gt,
  Ge,
  Eq,
  Ne,
};

struct Token {
  Tok kind = Tok::End;
  SourcePos pos;
  std::string text;   // Ident
  double number = 0;  // Number
};

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    for (;;) {
      if (at_end()) return make(Tok::End);
      const char c = src_[i_];
      if (c == '#') {
        while (!at_end() && src_[i_] != '\n') advance();
        continue;
      }
      if (c == '\n') {
        Token t = make(Tok::Newline);
        advance();
        if (depth_ > 0) continue;  // line continuation inside brackets
        return t;
      }
      if (c == ' ' || c == '\t' || c == '\r') {
        advance();
        continue;
      }
      break;
    }
    const SourcePos pos = here();
    const char c = src_[i_];
    if (std::isdigit(static_cast<unsigned char>(c)) ||
        (c == '.' && i_ + 1 < src_.size() &&
         std::isdigit(static_cast<unsigned char>(src_[i_ + 1])))) {
      return lex_number(pos);
    }
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      std::string ident;
      while (!at_end() && (std::isalnum(static_cast<unsigned char>(src_[i_])) ||
                           src_[i_] == '_')) {
        ident.push_back(src_[i_]);
        advance();
      }
      Token t;
      t.kind = Tok::Ident;
      t.pos = pos;
      t.text = std::move(ident);
      return t;
    }
    advance();
    switch (c) {
      case '(':
        ++depth_;
        return make_at(Tok::LParen, pos);
      case ')':
        if (depth_ > 0) --depth_;
        return make_at(Tok::RParen, pos);
      case '[':
        ++depth_;
        return make_at(Tok::LBracket, pos);
      case ']':
        if (depth_ > 0) --depth_;
        return make_at(Tok::RBracket, pos);
      case ':':
        return make_at(Tok::Colon, pos);
      case '+':
        return make_at(Tok::Plus, pos);
      case '-':
        return make_at(Tok::Minus, pos);
      case '*':
        return make_at(Tok::Star, pos);
      case '/':
        return make_at(Tok::Slash, pos);
      case '<':
        if (!at_end() && src_[i_] == '=') {
          advance();
          return make_at(Tok::Le, pos);
        }
        return make_at(Tok::Lt, pos);
      case '>':
        if (!at_end() && src_[i_] == '=') {
          advance();
          return make_at(Tok::Ge, pos);
        }
        return make_at(Tok::Gt, pos);
      case '=':
        if (!at_end() && src_[i_] == '=') advance();  // '==' accepted as '='
        return make_at(Tok::Eq, pos);
      case '!':
        if (!at_end() && src_[i_] == '=') {
          advance();
          return make_at(Tok::Ne, pos);
        }
        throw ParseError(pos, "unexpected '!'");
      default:
        throw ParseError(pos, std::string("unexpected character '") + c + "'");
    }
  }

 private:
  bool at_end() const { return i_ >= src_.size(); }
  SourcePos here() const { return {line_, col_}; }

  void advance() {
    if (src_[i_] == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    ++i_;
  }

  Token make(Tok k) { return make_at(k, here()); }
  Token make_at(Tok k, SourcePos pos) {
    Token t;
    t.kind = k;
    t.pos = pos;
    return t;
  }

  Token lex_number(SourcePos pos) {
    const std::size_t start = i_;
    while (!at_end() && std::isdigit(static_cast<unsigned char>(src_[i_]))) advance();
    if (!at_end() && src_[i_] == '.') {
      advance();
      while (!at_end() && std::isdigit(static_cast<unsigned char>(src_[i_]))) advance();
    }
    if (!at_end() && (src_[i_] == 'e' || src_[i_] == 'E')) {
      const std::size_t mark = i_;
      advance();
      if (!at_end() && (src_[i_] == '+' || src_[i_] == '-')) advance();
      if (at_end() || !std::isdigit(static_cast<unsigned char>(src_[i_]))) {
        // not an exponent after all; rewind is awkward, reject instead
        throw ParseError({line_, col_}, "malformed number exponent");
        (void)mark;
      }
      while (!at_end() && std::isdigit(static_cast<unsigned char>(src_[i_]))) advance();
    }
    Token t;
    t.kind = Tok::Number;
    t.pos = pos;
    t.number = std::strtod(std::string(src_.substr(start, i_ - start)).c_str(), nullptr);
    return t;
  }

  std::string_view src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
  int depth_ = 0;
};

bool is_keyword(const std::string& s) {
  static const std::set<std::string> kw = {"quale", "and", "or",    "not",  "rho",
                                           "mean",  "min", "max",   "count",
                                           "is_present"};
  return kw.count(s) > 0;
}

class Parser {
 public:
  Parser(std::string_view src, const ParseContext& ctx) : lex_(src), ctx_(ctx) {
    bump();
  }

  PredicateProgram parse_program() {
    PredicateProgram out;
    out.spatial_dims = ctx_.spatial_dims;
    std::set<std::string> seen;
    skip_newlines();
    while (cur_.kind != Tok::End) {
      out.decls.push_back(parse_decl(seen));
      if (cur_.kind != Tok::End && cur_.kind != Tok::Newline)
        throw ParseError(cur_.pos, "expected end of declaration");
      skip_newlines();
    }
    return out;
  }

 private:
  void bump() { cur_ = lex_.next(); }

  void skip_newlines() {
    while (cur_.kind == Tok::Newline) bump();
  }

  void expect(Tok k, const char* what) {
    if (cur_.kind != k) throw ParseError(cur_.pos, std::string("expected ") + what);
    bump();
  }

  PredicateDecl parse_decl(std::set<std::string>& seen) {
    if (cur_.kind != Tok::Ident || cur_.text != "quale")
      throw ParseError(cur_.pos, "expected 'quale'");
    const SourcePos declpos = cur_.pos;
    bump();
    if (cur_.kind != Tok::Ident || is_keyword(cur_.text))
      throw ParseError(cur_.pos, "expected quale type name");
    std::string name = cur_.text;
    if (!seen.insert(name).second)
      throw ParseError(cur_.pos, "duplicate quale type '" + name + "'");
    bump();
    expect(Tok::Colon, "':'");
    auto body = parse_expr();
    if (!body->boolean)
      throw ParseError(body->pos, "predicate body must be a condition, not a number");
    PredicateDecl d;
    d.quale_type = std::move(name);
    d.pos = declpos;
    d.body = std::move(body);
    return d;
  }

  std::unique_ptr<Expr> parse_expr() { return parse_or(); }

  std::unique_ptr<Expr> node(ExprKind k, SourcePos pos) {
    auto e = std::make_unique<Expr>();
    e->kind = k;
    e->pos = pos;
    return e;
  }

  std::unique_ptr<Expr> parse_or() {
    auto lhs = parse_and();
    while (cur_.kind == Tok::Ident && cur_.text == "or") {
      const SourcePos pos = cur_.pos;
      bump();
      auto rhs = parse_and();
      require_bool(*lhs, "'or'");
      require_bool(*rhs, "'or'");
      auto e = node(ExprKind::BoolConn, pos);
      e->conn = BoolOp::Or;
      e->boolean = true;
      e->a = std::move(lhs);
      e->b = std::move(rhs);
      lhs = std::move(e);
    }
    return lhs;
  }

  std::unique_ptr<Expr> parse_and() {
    auto lhs = parse_not();
    while (cur_.kind == Tok::Ident && cur_.text == "and") {
      const SourcePos pos = cur_.pos;
      bump();
      auto rhs = parse_not();
      require_bool(*lhs, "'and'");
      require_bool(*rhs, "'and'");
      auto e = node(ExprKind::BoolConn, pos);
      e->conn = BoolOp::And;
      e->boolean = true;
      e->a = std::move(lhs);
      e->b = std::move(rhs);
      lhs = std::move(e);
    }
    return lhs;
  }

  std::unique_ptr<Expr> parse_not() {
    if (cur_.kind == Tok::Ident && cur_.text == "not") {
      const SourcePos pos = cur_.pos;
      bump();
      auto arg = parse_not();
      require_bool(*arg, "'not'");
      auto e = node(ExprKind::Not, pos);
      e->boolean = true;
      e->a = std::move(arg);
      return e;
    }
    return parse_comparison();
  }

  std::unique_ptr<Expr> parse_comparison() {
    auto lhs = parse_sum();
    CompareOp op;
    switch (cur_.kind) {
      case Tok::Lt: op = CompareOp::Lt; break;
      case Tok::Le: op = CompareOp::Le; break;
      case Tok::Gt: op = CompareOp::Gt; break;
      case Tok::Ge: op = CompareOp::Ge; break;
      case Tok::Eq: op = CompareOp::Eq; break;
      case Tok::Ne: op = CompareOp::Ne; break;
      default:
        return lhs;
    }
    const SourcePos pos = cur_.pos;
    bump();
    auto rhs = parse_sum();
    require_num(*lhs, "comparison");
    require_num(*rhs, "comparison");
    auto e = node(ExprKind::Compare, pos);
    e->cmp = op;
    e->boolean = true;
    e->a = std::move(lhs);
    e->b = std::move(rhs);
    return e;
  }

  std::unique_ptr<Expr> parse_sum() {
    auto lhs = parse_term();
    for (;;) {
      ArithOp op;
      if (cur_.kind == Tok::Plus)
        op = ArithOp::Add;
      else if (cur_.kind == Tok::Minus)
        op = ArithOp::Sub;
      else
        return lhs;
      const SourcePos pos = cur_.pos;
      bump();
      auto rhs = parse_term();
      require_num(*lhs, "arithmetic");
      require_num(*rhs, "arithmetic");
      auto e = node(ExprKind::Arith, pos);
      e->arith = op;
      e->a = std::move(lhs);
      e->b = std::move(rhs);
      lhs = std::move(e);
    }
  }

  std::unique_ptr<Expr> parse_term() {
    auto lhs = parse_factor();
    for (;;) {
      ArithOp op;
      if (cur_.kind == Tok::Star)
        op = ArithOp::Mul;
      else if (cur_.kind == Tok::Slash)
        op = ArithOp::Div;
      else
        return lhs;
      const SourcePos pos = cur_.pos;
      bump();
      auto rhs = parse_factor();
      require_num(*lhs, "arithmetic");
      require_num(*rhs, "arithmetic");
      auto e = node(ExprKind::Arith, pos);
      e->arith = op;
      e->a = std::move(lhs);
      e->b = std::move(rhs);
      lhs = std::move(e);
    }
  }

  std::unique_ptr<Expr> parse_factor() {
    if (cur_.kind == Tok::Minus) {
      const SourcePos pos = cur_.pos;
      bump();
      auto arg = parse_factor();
      require_num(*arg, "unary minus");
      auto e = node(ExprKind::Negate, pos);
      e->a = std::move(arg);
      return e;
    }
    return parse_primary();
  }

  std::unique_ptr<Expr> parse_primary() {
    const SourcePos pos = cur_.pos;
    if (cur_.kind == Tok::Number) {
      auto e = node(ExprKind::Number, pos);
      e->number = cur_.number;
      bump();
      return e;
    }
    if (cur_.kind == Tok::LParen) {
      bump();
      auto e = parse_expr();
      expect(Tok::RParen, "')'");
      return e;
    }
    if (cur_.kind != Tok::Ident)
      throw ParseError(pos, "expected a value");
    const std::string word = cur_.text;
    if (word == "rho") {
      bump();
      if (cur_.kind == Tok::LBracket) return parse_rho_ref(pos);
      if (!in_aggregate_)
        throw ParseError(pos, "bare 'rho' is only meaningful inside an aggregate");
      return node(ExprKind::BareRho, pos);
    }
    if (word == "is_present") {
      bump();
      expect(Tok::LParen, "'('");
      if (cur_.kind != Tok::Ident || cur_.text != "rho")
        throw ParseError(cur_.pos, "is_present expects a rho[..] reference");
      const SourcePos rpos = cur_.pos;
      bump();
      if (cur_.kind != Tok::LBracket)
        throw ParseError(cur_.pos, "is_present expects a rho[..] reference");
      auto ref = parse_rho_ref(rpos);
      expect(Tok::RParen, "')'");
      auto e = node(ExprKind::IsPresent, pos);
      e->boolean = true;
      e->a = std::move(ref);
      return e;
    }
    if (word == "mean" || word == "min" || word == "max" || word == "count") {
      if (in_aggregate_)
        throw ParseError(pos, "aggregates cannot be nested");
      AggKind k = word == "mean"  ? AggKind::Mean
                  : word == "min" ? AggKind::Min
                  : word == "max" ? AggKind::Max
                                  : AggKind::Count;
      bump();
      expect(Tok::LParen, "'('");
      in_aggregate_ = true;
      auto arg = parse_expr();
      in_aggregate_ = false;
      expect(Tok::RParen, "')'");
      if (k == AggKind::Count)
        require_bool(*arg, "count()");
      else
        require_num(*arg, word.c_str());
      auto e = node(ExprKind::Aggregate, pos);
      e->agg = k;
      e->a = std::move(arg);
      return e;
    }
    throw ParseError(pos, "unknown identifier '" + word + "'");
  }

  // cur_ sits on '['. Spatial offsets, one bracket per axis, then [dt].
  std::unique_ptr<Expr> parse_rho_ref(SourcePos pos) {
    int vals[4] = {0, 0, 0, 0};
    int count = 0;
    while (cur_.kind == Tok::LBracket) {
      if (count == ctx_.spatial_dims + 1)
        throw ParseError(cur_.pos, "too many offsets: expected " +
                                       std::to_string(ctx_.spatial_dims) +
                                       " spatial and one time bracket");
      bump();
      int sign = 1;
      if (cur_.kind == Tok::Minus) {
        sign = -1;
        bump();
      }
      if (cur_.kind != Tok::Number || cur_.number != static_cast<int>(cur_.number))
        throw ParseError(cur_.pos, "offset must be an integer");
      vals[count++] = sign * static_cast<int>(cur_.number);
      bump();
      expect(Tok::RBracket, "']'");
    }
    if (count != ctx_.spatial_dims + 1)
      throw ParseError(pos, "rho reference needs " + std::to_string(ctx_.spatial_dims) +
                                " spatial offsets and a trailing time offset");
    auto e = node(ExprKind::RhoRef, pos);
    for (int a = 0; a < ctx_.spatial_dims; ++a) {
      e->offset[a] = vals[a];
      if (std::abs(vals[a]) > ctx_.neighborhood_radius)
        throw ParseError(pos, "spatial offset " + std::to_string(vals[a]) +
                                  " outside the window (|dx| <= " +
                                  std::to_string(ctx_.neighborhood_radius) + ")");
    }
    e->dt = vals[count - 1];
    if (e->dt < 0 || e->dt > ctx_.neighborhood_radius)
      throw ParseError(pos, "time offset " + std::to_string(e->dt) +
                                " outside the window (0 <= dt <= " +
                                std::to_string(ctx_.neighborhood_radius) + ")");
    return e;
  }

  void require_bool(const Expr& e, const char* where) {
    if (!e.boolean)
      throw ParseError(e.pos, std::string(where) + " needs a condition, got a number");
  }
  void require_num(const Expr& e, const char* where) {
    if (e.boolean)
      throw ParseError(e.pos, std::string(where) + " needs a number, got a condition");
  }

  Lexer lex_;
  ParseContext ctx_;
  Token cur_;
  bool in_aggregate_ = false;
};

}  // namespace

std::vector<std::string> PredicateProgram::type_names() const {
  std::vector<std::string> out;
  out.reserve(decls.size());
  for (const auto& d : decls) out.push_back(d.quale_type);
  return out;
}

int PredicateProgram::type_index(std::string_view name) const {
  for (std::size_t i = 0; i < decls.size(); ++i)
    if (decls[i].quale_type == name) return static_cast<int>(i);
  return -1;
}

PredicateProgram parse_predicates(std::string_view source, const ParseContext& ctx) {
  Parser p(source, ctx);
  return p.parse_program();
}

namespace {

// pretty printer: fully parenthesized canonical form
struct Printer {
  int spatial_dims;
  std::string out;

  void expr(const Expr& e) {
    switch (e.kind) {
      case ExprKind::Number:
        out += format_double(e.number);
        break;
      case ExprKind::BareRho:
        out += "rho";
        break;
      case ExprKind::RhoRef:
        out += "rho";
        for (int a = 0; a < spatial_dims; ++a) {
          out += '[';
          out += std::to_string(e.offset[a]);
          out += ']';
        }
        out += '[';
        out += std::to_string(e.dt);
        out += ']';
        break;
      case ExprKind::IsPresent:
        out += "is_present(";
        expr(*e.a);
        out += ')';
        break;
      case ExprKind::Negate:
        out += "(-";
        expr(*e.a);
        out += ')';
        break;
      case ExprKind::Not:
        out += "(not ";
        expr(*e.a);
        out += ')';
        break;
      case ExprKind::Arith: {
        const char* op = e.arith == ArithOp::Add   ? " + "
                         : e.arith == ArithOp::Sub ? " - "
                         : e.arith == ArithOp::Mul ? " * "
                                                   : " / ";
        out += '(';
        expr(*e.a);
        out += op;
        expr(*e.b);
        out += ')';
        break;
      }
      case ExprKind::Compare: {
        const char* op = e.cmp == CompareOp::Lt   ? " < "
                         : e.cmp == CompareOp::Le ? " <= "
                         : e.cmp == CompareOp::Gt ? " > "
                         : e.cmp == CompareOp::Ge ? " >= "
                         : e.cmp == CompareOp::Eq ? " = "
                                                  : " != ";
        out += '(';
        expr(*e.a);
        out += op;
        expr(*e.b);
        out += ')';
        break;
      }
      case ExprKind::BoolConn:
        out += '(';
        expr(*e.a);
        out += e.conn == BoolOp::And ? " and " : " or ";
        expr(*e.b);
        out += ')';
        break;
      case ExprKind::Aggregate: {
        const char* name = e.agg == AggKind::Mean  ? "mean"
                           : e.agg == AggKind::Min ? "min"
                           : e.agg == AggKind::Max ? "max"
                                                   : "count";
        out += name;
        out += '(';
        expr(*e.a);
        out += ')';
        break;
      }
    }
  }
};

bool expr_equal(const Expr& x, const Expr& y) {
  if (x.kind != y.kind) return false;
  switch (x.kind) {
    case ExprKind::Number:
      return x.number == y.number;
    case ExprKind::BareRho:
      return true;
    case ExprKind::RhoRef:
      return x.offset == y.offset && x.dt == y.dt;
    case ExprKind::IsPresent:
    case ExprKind::Negate:
    case ExprKind::Not:
      return expr_equal(*x.a, *y.a);
    case ExprKind::Arith:
      return x.arith == y.arith && expr_equal(*x.a, *y.a) && expr_equal(*x.b, *y.b);
    case ExprKind::Compare:
      return x.cmp == y.cmp && expr_equal(*x.a, *y.a) && expr_equal(*x.b, *y.b);
    case ExprKind::BoolConn:
      return x.conn == y.conn && expr_equal(*x.a, *y.a) && expr_equal(*x.b, *y.b);
    case ExprKind::Aggregate:
      return x.agg == y.agg && expr_equal(*x.a, *y.a);
  }
  return false;
}

}  // namespace

std::string pretty_print(const PredicateProgram& program) {
  Printer p{program.spatial_dims, {}};
  for (const auto& d : program.decls) {
    p.out += "quale ";
    p.out += d.quale_type;
    p.out += ": ";
    p.expr(*d.body);
    p.out += '\n';
  }
  return p.out;
}

bool equal(const PredicateProgram& lhs, const PredicateProgram& rhs) {
  if (lhs.decls.size() != rhs.decls.size()) return false;
  for (std::size_t i = 0; i < lhs.decls.size(); ++i) {
    if (lhs.decls[i].quale_type != rhs.decls[i].quale_type) return false;
    if (!expr_equal(*lhs.decls[i].body, *rhs.decls[i].body)) return false;
  }
  return true;
}

}  // namespace qualsim::dsl
