#include "ispace/parser.hpp"

#include <cctype>
#include <cstdlib>
#include <fstream>
#include <sstream>
#include <unordered_map>

namespace ispace {

std::string format_diagnostic(const Diagnostic& d) {
  std::ostringstream os;
  os << (d.severity == Severity::Error ? "error" : "warning");
  if (d.loc.line > 0) os << " at " << d.loc.line << ":" << d.loc.col;
  os << " [" << d.code << "] " << d.message;
  return os.str();
}

namespace {

enum class Tok {
  End,  // end of input
  Ident,
  Var,      // $name
  Str,      // "..."
  Int,
  Ellipsis,  // ...
  Arrow,     // ->
  LParen,
  RParen,
  Comma,
  Colon,
  Slash,
  Assign,  // =
  EqEq,
  NotEq,
  Lt,
  Le,
  Gt,
  Ge,
  OrOr,
  AndAnd,
  // keywords
  KwSet,
  KwSubsetof,
  KwChoice,
  KwEnum,
  KwInteger,
  KwCounter,
  KwValue,
  KwAntisymmetric,
  KwRequire,
  KwForall,
  KwIn,
  KwIs,
  KwNot,
  KwSum,
  KwProduct,
  KwWhen,
  KwQuotient,
  KwOf,
  KwTrigger,
  KwCall,
  KwEnd,
  Error,
};

struct Token {
  Tok kind = Tok::End;
  std::string text;
  std::int64_t ival = 0;
  SourceLoc loc;
};

const std::unordered_map<std::string, Tok>& keyword_map() {
  static const std::unordered_map<std::string, Tok> kw = {
      {"set", Tok::KwSet},           {"subsetof", Tok::KwSubsetof},
      {"choice", Tok::KwChoice},     {"enum", Tok::KwEnum},
      {"integer", Tok::KwInteger},   {"counter", Tok::KwCounter},
      {"value", Tok::KwValue},       {"antisymmetric", Tok::KwAntisymmetric},
      {"require", Tok::KwRequire},   {"forall", Tok::KwForall},
      {"in", Tok::KwIn},             {"is", Tok::KwIs},
      {"not", Tok::KwNot},           {"sum", Tok::KwSum},
      {"product", Tok::KwProduct},   {"when", Tok::KwWhen},
      {"quotient", Tok::KwQuotient}, {"of", Tok::KwOf},
      {"trigger", Tok::KwTrigger},   {"call", Tok::KwCall},
      {"end", Tok::KwEnd},
  };
  return kw;
}

class Lexer {
 public:
  explicit Lexer(std::string_view src) : src_(src) {}

  Token next() {
    skip_trivia();
    Token t;
    t.loc = loc();
    if (pos_ >= src_.size()) {
      t.kind = Tok::End;
      return t;
    }
    char c = src_[pos_];
    if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
      size_t start = pos_;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        advance();
      t.text = std::string(src_.substr(start, pos_ - start));
      auto it = keyword_map().find(t.text);
      t.kind = it != keyword_map().end() ? it->second : Tok::Ident;
      return t;
    }
    if (c == '$') {
      advance();
      size_t start = pos_;
      while (pos_ < src_.size() && (std::isalnum(static_cast<unsigned char>(src_[pos_])) || src_[pos_] == '_'))
        advance();
      t.kind = pos_ > start ? Tok::Var : Tok::Error;
      t.text = std::string(src_.substr(start, pos_ - start));
      return t;
    }
    if (std::isdigit(static_cast<unsigned char>(c))) {
      size_t start = pos_;
      while (pos_ < src_.size() && std::isdigit(static_cast<unsigned char>(src_[pos_]))) advance();
      t.kind = Tok::Int;
      t.text = std::string(src_.substr(start, pos_ - start));
      t.ival = std::strtoll(t.text.c_str(), nullptr, 10);
      return t;
    }
    if (c == '"') {
      advance();
      size_t start = pos_;
      while (pos_ < src_.size() && src_[pos_] != '"' && src_[pos_] != '\n') advance();
      t.text = std::string(src_.substr(start, pos_ - start));
      if (pos_ < src_.size() && src_[pos_] == '"') {
        advance();
        t.kind = Tok::Str;
      } else {
        t.kind = Tok::Error;
        t.text = "unterminated string";
      }
      return t;
    }
    auto two = [&](char a, char b) {
      return c == a && pos_ + 1 < src_.size() && src_[pos_ + 1] == b;
    };
    if (c == '.' && pos_ + 2 < src_.size() && src_[pos_ + 1] == '.' && src_[pos_ + 2] == '.') {
      advance(); advance(); advance();
      t.kind = Tok::Ellipsis;
      return t;
    }
    if (two('-', '>')) { advance(); advance(); t.kind = Tok::Arrow; return t; }
    if (two('=', '=')) { advance(); advance(); t.kind = Tok::EqEq; return t; }
    if (two('!', '=')) { advance(); advance(); t.kind = Tok::NotEq; return t; }
    if (two('<', '=')) { advance(); advance(); t.kind = Tok::Le; return t; }
    if (two('>', '=')) { advance(); advance(); t.kind = Tok::Ge; return t; }
    if (two('|', '|')) { advance(); advance(); t.kind = Tok::OrOr; return t; }
    if (two('&', '&')) { advance(); advance(); t.kind = Tok::AndAnd; return t; }
    advance();
    switch (c) {
      case '(': t.kind = Tok::LParen; return t;
      case ')': t.kind = Tok::RParen; return t;
      case ',': t.kind = Tok::Comma; return t;
      case ':': t.kind = Tok::Colon; return t;
      case '/': t.kind = Tok::Slash; return t;
      case '=': t.kind = Tok::Assign; return t;
      case '<': t.kind = Tok::Lt; return t;
      case '>': t.kind = Tok::Gt; return t;
      default:
        t.kind = Tok::Error;
        t.text = std::string(1, c);
        return t;
    }
  }

 private:
  SourceLoc loc() const { return SourceLoc{line_, col_}; }

  void advance() {
    if (pos_ < src_.size()) {
      if (src_[pos_] == '\n') {
        ++line_;
        col_ = 1;
      } else {
        ++col_;
      }
      ++pos_;
    }
  }

  void skip_trivia() {
    for (;;) {
      while (pos_ < src_.size() && std::isspace(static_cast<unsigned char>(src_[pos_]))) advance();
      if (pos_ + 1 < src_.size() && src_[pos_] == '/' && src_[pos_ + 1] == '/') {
        while (pos_ < src_.size() && src_[pos_] != '\n') advance();
        continue;
      }
      break;
    }
  }

  std::string_view src_;
  size_t pos_ = 0;
  int line_ = 1;
  int col_ = 1;
};

bool is_toplevel_kw(Tok k) {
  return k == Tok::KwSet || k == Tok::KwChoice || k == Tok::KwRequire ||
         k == Tok::KwQuotient || k == Tok::KwTrigger;
}

class Parser {
 public:
  explicit Parser(std::string_view src) : lex_(src) { bump(); }

  ParseResult run() {
    while (cur_.kind != Tok::End) {
      switch (cur_.kind) {
        case Tok::KwSet: parse_set(); break;
        case Tok::KwChoice: parse_choice(); break;
        case Tok::KwRequire: parse_require(); break;
        case Tok::KwQuotient: parse_quotient(); break;
        case Tok::KwTrigger: parse_trigger(); break;
        default:
          error("expected a declaration (set / choice / require / quotient / trigger)");
          recover();
          break;
      }
    }
    return std::move(result_);
  }

 private:
  using DeclRef = SpaceDefinition::DeclRef;

  void bump() { cur_ = lex_.next(); }

  bool accept(Tok k) {
    if (cur_.kind == k) {
      bump();
      return true;
    }
    return false;
  }

  bool expect(Tok k, const char* what) {
    if (accept(k)) return true;
    error(std::string("expected ") + what);
    return false;
  }

  void error(const std::string& msg) {
    result_.diagnostics.push_back({Severity::Error, diag::kSyntax, msg, cur_.loc});
  }

  // Skip until the next top-level declaration keyword.
  void recover() {
    while (cur_.kind != Tok::End && !is_toplevel_kw(cur_.kind)) bump();
  }

  // Body items end at `end` (consumed) or at the next top-level keyword / EOF.
  bool at_body_end() const {
    return cur_.kind == Tok::End || cur_.kind == Tok::KwEnd || is_toplevel_kw(cur_.kind);
  }
  void finish_body() { accept(Tok::KwEnd); }

  std::string take_ident(const char* what) {
    if (cur_.kind == Tok::Ident) {
      std::string s = cur_.text;
      bump();
      return s;
    }
    error(std::string("expected ") + what);
    return {};
  }

  std::string take_var(const char* what) {
    if (cur_.kind == Tok::Var) {
      std::string s = cur_.text;
      bump();
      return s;
    }
    error(std::string("expected ") + what);
    return {};
  }

  // --- declarations -------------------------------------------------------

  void parse_set() {
    bump();  // set
    SetDecl d;
    d.name = take_ident("set name");
    if (accept(Tok::LParen)) {
      d.param_var = take_var("parameter variable");
      accept(Tok::KwIn);
      d.param_set = take_ident("parameter set");
      expect(Tok::RParen, "')'");
    }
    if (accept(Tok::KwSubsetof)) d.superset = take_ident("superset name");
    expect(Tok::Colon, "':'");
    while (!at_body_end()) {
      if (accept(Tok::Ellipsis)) {
        d.elided = true;
        continue;
      }
      if (cur_.kind == Tok::Ident) {
        SetBinding b;
        b.key = cur_.text;
        bump();
        if (!expect(Tok::Assign, "'=' in set binding")) { recover(); break; }
        if (cur_.kind == Tok::Str) {
          b.value = cur_.text;
          bump();
        } else if (accept(Tok::Ellipsis)) {
          b.value = std::nullopt;
        } else {
          error("expected string or '...' as binding value");
          recover();
          break;
        }
        d.bindings.push_back(std::move(b));
        continue;
      }
      error("unexpected token in set body");
      recover();
      break;
    }
    finish_body();
    result_.def.decl_order.push_back({DeclRef::Kind::Set, result_.def.sets.size()});
    result_.def.sets.push_back(std::move(d));
  }

  std::vector<ChoiceParam> parse_choice_params() {
    std::vector<ChoiceParam> ps;
    expect(Tok::LParen, "'('");
    if (accept(Tok::RParen)) return ps;
    for (;;) {
      ChoiceParam p;
      p.var = take_var("parameter variable");
      accept(Tok::KwIn);
      p.set = take_ident("parameter set");
      ps.push_back(std::move(p));
      if (!accept(Tok::Comma)) break;
    }
    expect(Tok::RParen, "')'");
    return ps;
  }

  void parse_choice() {
    bump();  // choice
    ChoiceDecl d;
    if (accept(Tok::KwEnum)) d.kind = ChoiceKind::Enum;
    else if (accept(Tok::KwInteger)) d.kind = ChoiceKind::Integer;
    else if (accept(Tok::KwCounter)) d.kind = ChoiceKind::Counter;
    else error("expected enum, integer or counter");
    d.name = take_ident("choice name");
    d.params = parse_choice_params();
    expect(Tok::Colon, "':'");
    switch (d.kind) {
      case ChoiceKind::Enum: parse_enum_body(d); break;
      case ChoiceKind::Integer: parse_integer_body(d); break;
      case ChoiceKind::Counter: parse_counter_body(d); break;
    }
    finish_body();
    result_.def.decl_order.push_back({DeclRef::Kind::Choice, result_.def.choices.size()});
    result_.def.choices.push_back(std::move(d));
  }

  void parse_enum_body(ChoiceDecl& d) {
    while (!at_body_end()) {
      if (accept(Tok::Ellipsis)) {
        d.elided = true;
        continue;
      }
      if (accept(Tok::KwValue)) {
        std::string v = take_ident("value name");
        expect(Tok::Colon, "':' after value name");
        d.values.push_back(std::move(v));
        continue;
      }
      if (accept(Tok::KwAntisymmetric)) {
        expect(Tok::Colon, "':' after antisymmetric");
        while (cur_.kind == Tok::Ident) {
          AntisymPair p;
          p.from = take_ident("value name");
          if (!expect(Tok::Arrow, "'->'")) break;
          p.to = take_ident("value name");
          d.antisym.push_back(std::move(p));
        }
        continue;
      }
      error("unexpected token in enum body");
      recover();
      return;
    }
  }

  void parse_integer_body(ChoiceDecl& d) {
    if (cur_.kind == Tok::Str) {
      d.universe = cur_.text;
      bump();
    } else if (accept(Tok::Ellipsis)) {
      d.elided = true;
    } else {
      error("expected universe provider string in integer choice");
    }
    while (!at_body_end()) {
      if (accept(Tok::Ellipsis)) { d.elided = true; continue; }
      error("unexpected token in integer choice body");
      recover();
      return;
    }
  }

  void parse_counter_body(ChoiceDecl& d) {
    CounterBody& c = d.counter;
    while (cur_.kind == Tok::KwForall) parse_quantifiers(c.foralls);
    if (accept(Tok::KwSum)) c.op = CounterOp::Sum;
    else if (accept(Tok::KwProduct)) c.op = CounterOp::Product;
    else { error("expected sum or product"); recover(); return; }
    if (cur_.kind == Tok::Str) {
      c.term_kind = CounterBody::TermKind::Opaque;
      c.term_opaque = cur_.text;
      bump();
    } else if (cur_.kind == Tok::Int) {
      c.term_kind = CounterBody::TermKind::Int;
      c.term_int = cur_.ival;
      bump();
    } else if (cur_.kind == Tok::Ident) {
      c.term_kind = CounterBody::TermKind::App;
      c.term_app = parse_app();
    } else {
      error("expected counter term");
      recover();
      return;
    }
    if (accept(Tok::KwWhen)) {
      accept(Tok::Colon);  // `when:` and `when` both occur
      c.guard.push_back(parse_atom());
      while (accept(Tok::AndAnd)) c.guard.push_back(parse_atom());
    }
  }

  // `forall $a, $b in S, $c in T(x):` introduces one quantifier per variable;
  // a comma separated variable group shares its set.
  void parse_quantifiers(std::vector<Quantifier>& out) {
    expect(Tok::KwForall, "forall");
    for (;;) {
      std::vector<std::string> vars;
      vars.push_back(take_var("quantified variable"));
      while (accept(Tok::Comma)) {
        if (cur_.kind != Tok::Var) { error("expected variable after ','"); break; }
        vars.push_back(take_var("quantified variable"));
        if (cur_.kind == Tok::KwIn) break;
      }
      accept(Tok::KwIn);
      std::string set = take_ident("set name");
      std::string set_arg;
      if (accept(Tok::LParen)) {
        set_arg = take_var("set parameter variable");
        expect(Tok::RParen, "')'");
      }
      for (auto& v : vars) out.push_back(Quantifier{std::move(v), set, set_arg});
      if (!accept(Tok::Comma)) break;
    }
    expect(Tok::Colon, "':'");
  }

  ChoiceApp parse_app() {
    ChoiceApp a;
    a.choice = take_ident("choice name");
    expect(Tok::LParen, "'('");
    if (!accept(Tok::RParen)) {
      for (;;) {
        a.args.push_back(take_var("argument variable"));
        if (!accept(Tok::Comma)) break;
      }
      expect(Tok::RParen, "')'");
    }
    return a;
  }

  Atom parse_atom() {
    Atom a;
    if (cur_.kind == Tok::Str) {
      a.kind = Atom::Kind::Opaque;
      a.opaque = cur_.text;
      bump();
      return a;
    }
    a.app = parse_app();
    if (accept(Tok::KwIs)) {
      a.kind = Atom::Kind::Test;
      a.negated = accept(Tok::KwNot);
      a.value = take_ident("value name");
      return a;
    }
    auto cmp = [&](Tok t, CmpOp op) {
      if (cur_.kind != t) return false;
      bump();
      a.kind = Atom::Kind::Cmp;
      a.op = op;
      return true;
    };
    if (cmp(Tok::EqEq, CmpOp::Eq) || cmp(Tok::NotEq, CmpOp::Ne) || cmp(Tok::Lt, CmpOp::Lt) ||
        cmp(Tok::Le, CmpOp::Le) || cmp(Tok::Gt, CmpOp::Gt) || cmp(Tok::Ge, CmpOp::Ge)) {
      if (cur_.kind == Tok::Str) {
        a.rhs_kind = Atom::RhsKind::Opaque;
        a.rhs_opaque = cur_.text;
        bump();
      } else if (cur_.kind == Tok::Int) {
        a.rhs_kind = Atom::RhsKind::Int;
        a.rhs_int = cur_.ival;
        bump();
      } else {
        a.rhs_kind = Atom::RhsKind::App;
        a.rhs_app = parse_app();
      }
      return a;
    }
    // Bare application (accepted as printed; validate flags it unless the
    // choice is boolean-valued).
    a.kind = Atom::Kind::Test;
    return a;
  }

  void parse_require() {
    bump();  // require
    RequireDecl d;
    while (cur_.kind == Tok::KwForall) parse_quantifiers(d.foralls);
    d.disjuncts.push_back(parse_atom());
    while (accept(Tok::OrOr)) d.disjuncts.push_back(parse_atom());
    result_.def.decl_order.push_back({DeclRef::Kind::Require, result_.def.constraints.size()});
    result_.def.constraints.push_back(std::move(d));
  }

  void parse_quotient() {
    bump();  // quotient
    QuotientDecl d;
    d.name = take_ident("quotient set name");
    if (accept(Tok::LParen)) {
      d.has_param = true;
      d.param.var = take_var("parameter variable");
      accept(Tok::KwIn);
      d.param.set = take_ident("parameter set");
      expect(Tok::RParen, "')'");
    }
    expect(Tok::KwOf, "of");
    d.var = take_var("quotient variable");
    accept(Tok::KwIn);  // optional as printed
    d.base_set = take_ident("base set name");
    if (accept(Tok::LParen)) {
      d.base_set_arg = take_var("set parameter variable");
      expect(Tok::RParen, "')'");
    }
    expect(Tok::Colon, "':'");
    d.flag = take_ident("representative flag name");
    expect(Tok::Assign, "'='");
    d.membership = parse_atom();
    expect(Tok::Slash, "'/'");
    d.equiv_choice = take_ident("equivalence choice name");
    expect(Tok::KwIs, "is");
    d.equiv_value = take_ident("equivalence value");
    while (!at_body_end()) {
      if (accept(Tok::Ellipsis)) { d.elided = true; continue; }
      error("unexpected token in quotient body");
      recover();
      break;
    }
    finish_body();
    result_.def.decl_order.push_back({DeclRef::Kind::Quotient, result_.def.quotients.size()});
    result_.def.quotients.push_back(std::move(d));
  }

  TriggerCond parse_trigger_or() {
    TriggerCond c = parse_trigger_and();
    if (cur_.kind != Tok::OrOr) return c;
    TriggerCond res;
    res.kind = TriggerCond::Kind::Or;
    res.kids.push_back(std::move(c));
    while (accept(Tok::OrOr)) res.kids.push_back(parse_trigger_and());
    return res;
  }

  TriggerCond parse_trigger_and() {
    TriggerCond c = parse_trigger_prim();
    if (cur_.kind != Tok::AndAnd) return c;
    TriggerCond res;
    res.kind = TriggerCond::Kind::And;
    res.kids.push_back(std::move(c));
    while (accept(Tok::AndAnd)) res.kids.push_back(parse_trigger_prim());
    return res;
  }

  TriggerCond parse_trigger_prim() {
    if (accept(Tok::LParen)) {
      TriggerCond c = parse_trigger_or();
      expect(Tok::RParen, "')'");
      return c;
    }
    TriggerCond c;
    c.kind = TriggerCond::Kind::Atom;
    c.atom = parse_atom();
    return c;
  }

  void parse_trigger() {
    bump();  // trigger
    TriggerDecl d;
    while (cur_.kind == Tok::KwForall) parse_quantifiers(d.foralls);
    expect(Tok::KwWhen, "when");
    d.when = parse_trigger_or();
    expect(Tok::KwCall, "call");
    if (cur_.kind == Tok::Str) {
      d.callback = cur_.text;
      bump();
    } else {
      error("expected callback name string after call");
    }
    finish_body();
    result_.def.decl_order.push_back({DeclRef::Kind::Trigger, result_.def.triggers.size()});
    result_.def.triggers.push_back(std::move(d));
  }

  Lexer lex_;
  Token cur_;
  ParseResult result_;
};

}  // namespace

const SetDecl* SpaceDefinition::find_set(const std::string& n) const {
  for (const auto& s : sets)
    if (s.name == n) return &s;
  return nullptr;
}

const ChoiceDecl* SpaceDefinition::find_choice(const std::string& n) const {
  for (const auto& c : choices)
    if (c.name == n) return &c;
  return nullptr;
}

const QuotientDecl* SpaceDefinition::find_quotient_flag(const std::string& flag) const {
  for (const auto& q : quotients)
    if (q.flag == flag) return &q;
  return nullptr;
}

ParseResult parse_space(std::string_view source) { return Parser(source).run(); }

ParseResult parse_space_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    ParseResult r;
    r.diagnostics.push_back(
        {Severity::Error, diag::kSyntax, "cannot open file: " + path, SourceLoc{}});
    return r;
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  std::string text = ss.str();
  return parse_space(text);
}

}  // namespace ispace
