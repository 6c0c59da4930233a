#pragma once

// Parsed representation of a .space definition: finite object sets, choices
// (enum / integer / counter), universally quantified disjunction constraints,
// quotient sets and lowering triggers. The representation stays close to the
// surface syntax; semantic resolution happens in validate.cpp / compile.cpp.

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

namespace ispace {

// `set Name [($var in ParamSet)] [subsetof Super]:` + opaque host bindings.
struct SetBinding {
  std::string key;
  std::optional<std::string> value;  // nullopt: value elided with `...`
  bool operator==(const SetBinding&) const = default;
};

struct SetDecl {
  std::string name;
  std::string param_var;  // empty if not parametrized
  std::string param_set;
  std::string superset;   // empty if none
  std::vector<SetBinding> bindings;
  bool elided = false;
  bool operator==(const SetDecl&) const = default;
};

// A choice application `name($a, $b)`; args are quantified variable names.
struct ChoiceApp {
  std::string choice;
  std::vector<std::string> args;
  bool operator==(const ChoiceApp&) const = default;
};

enum class CmpOp { Eq, Ne, Lt, Le, Gt, Ge };

// One condition. Three shapes:
//   Test:   app `is` [not] VALUE    (VALUE may be absent: bare application)
//   Cmp:    app <op> (app | "opaque" | integer)
//   Opaque: "host-code boolean", resolved against the provider registry
struct Atom {
  enum class Kind { Test, Cmp, Opaque };
  enum class RhsKind { None, App, Opaque, Int };

  Kind kind = Kind::Test;
  ChoiceApp app;
  bool negated = false;     // Test: `is not`
  std::string value;        // Test: empty = bare application
  CmpOp op = CmpOp::Eq;     // Cmp
  RhsKind rhs_kind = RhsKind::None;
  ChoiceApp rhs_app;
  std::string rhs_opaque;
  std::int64_t rhs_int = 0;
  std::string opaque;       // Opaque
  bool operator==(const Atom&) const = default;
};

// `forall $var in Set:` — Set may be parametrized: `Set($other_var)`.
struct Quantifier {
  std::string var;
  std::string set;
  std::string set_arg;  // empty unless the set reference is parametrized
  bool operator==(const Quantifier&) const = default;
};

// `require forall ...: a1 || a2 || ...` — quantified variables are implicitly
// pairwise distinct.
struct RequireDecl {
  std::vector<Quantifier> foralls;
  std::vector<Atom> disjuncts;
  bool operator==(const RequireDecl&) const = default;
};

struct AntisymPair {
  std::string from, to;
  bool operator==(const AntisymPair&) const = default;
};

struct ChoiceParam {
  std::string var;
  std::string set;
  bool operator==(const ChoiceParam&) const = default;
};

enum class ChoiceKind { Enum, Integer, Counter };
enum class CounterOp { Sum, Product };

struct CounterBody {
  std::vector<Quantifier> foralls;
  CounterOp op = CounterOp::Sum;
  enum class TermKind { Opaque, Int, App };
  TermKind term_kind = TermKind::Int;
  std::string term_opaque;
  std::int64_t term_int = 1;
  ChoiceApp term_app;
  std::vector<Atom> guard;  // conjunction of atoms
  bool operator==(const CounterBody&) const = default;
};

struct ChoiceDecl {
  std::string name;
  ChoiceKind kind = ChoiceKind::Enum;
  std::vector<ChoiceParam> params;
  // Enum
  std::vector<std::string> values;
  std::vector<AntisymPair> antisym;
  // Integer: universe provider key, e.g. "$dim.possible_sizes()"
  std::string universe;
  // Counter
  CounterBody counter;
  bool elided = false;
  bool operator==(const ChoiceDecl&) const = default;
};

// `quotient Name [($p in PSet)] of $var in Base:` with one membership atom,
// an equivalence condition `/ choice is VALUE`, and an induced representative
// flag choice (TRUE for exactly one member per equivalence class).
struct QuotientDecl {
  std::string name;
  bool has_param = false;
  ChoiceParam param;
  std::string var;
  std::string base_set;
  std::string base_set_arg;  // empty unless the base set reference is parametrized
  std::string flag;
  Atom membership;
  std::string equiv_choice;
  std::string equiv_value;
  bool elided = false;
  bool operator==(const QuotientDecl&) const = default;
};

// Trigger firing conditions are And/Or formulas over atoms, each atom judged
// at entailment level (true in every remaining assignment).
struct TriggerCond {
  enum class Kind { Atom, And, Or };
  Kind kind = Kind::Atom;
  Atom atom;
  std::vector<TriggerCond> kids;
  bool operator==(const TriggerCond&) const = default;
};

struct TriggerDecl {
  std::vector<Quantifier> foralls;
  TriggerCond when;
  std::string callback;  // host callback key
  bool operator==(const TriggerDecl&) const = default;
};

struct SpaceDefinition {
  std::vector<SetDecl> sets;
  std::vector<ChoiceDecl> choices;
  std::vector<RequireDecl> constraints;
  std::vector<QuotientDecl> quotients;
  std::vector<TriggerDecl> triggers;

  // Source declaration order across all five kinds; indexes into the vectors
  // above. Instance layout and pretty-printing follow this order.
  struct DeclRef {
    enum class Kind { Set, Choice, Require, Quotient, Trigger };
    Kind kind;
    std::size_t index;
    bool operator==(const DeclRef&) const = default;
  };
  std::vector<DeclRef> decl_order;

  bool operator==(const SpaceDefinition&) const = default;

  const SetDecl* find_set(const std::string& n) const;
  const ChoiceDecl* find_choice(const std::string& n) const;
  const QuotientDecl* find_quotient_flag(const std::string& flag) const;
};

}  // namespace ispace
