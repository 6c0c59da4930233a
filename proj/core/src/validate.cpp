#include "ispace/validate.hpp"

#include <algorithm>
#include <map>
#include <set>
#include <string>

namespace ispace {

namespace {

// What a choice application can resolve to: a declared choice or the induced
// representative flag of a quotient (boolean, one parameter).
struct AppTarget {
  enum class Kind { Enum, Integer, Counter, Flag } kind;
  const ChoiceDecl* choice = nullptr;
  const QuotientDecl* quot = nullptr;
};

class Validator {
 public:
  explicit Validator(const SpaceDefinition& def) : def_(def) {}

  std::vector<Diagnostic> run() {
    index_decls();
    check_sets();
    for (const auto& c : def_.choices) check_choice(c);
    for (const auto& r : def_.constraints) check_require(r);
    for (const auto& q : def_.quotients) check_quotient(q);
    for (const auto& t : def_.triggers) check_trigger(t);
    return std::move(diags_);
  }

 private:
  using Scope = std::map<std::string, std::string>;  // var -> set name

  void err(const char* code, std::string msg) {
    diags_.push_back({Severity::Error, code, std::move(msg), SourceLoc{}});
  }
  void warn(const char* code, std::string msg) {
    diags_.push_back({Severity::Warning, code, std::move(msg), SourceLoc{}});
  }

  void index_decls() {
    for (const auto& s : def_.sets) {
      if (!sets_.emplace(s.name, &s).second)
        err(diag::kDuplicateDecl, "set '" + s.name + "' declared twice");
    }
    for (const auto& c : def_.choices) {
      if (!choices_.emplace(c.name, &c).second)
        err(diag::kDuplicateDecl, "choice '" + c.name + "' declared twice");
    }
    for (const auto& q : def_.quotients) {
      if (!quotients_.emplace(q.name, &q).second)
        err(diag::kDuplicateDecl, "quotient '" + q.name + "' declared twice");
      if (sets_.count(q.name))
        err(diag::kDuplicateDecl, "quotient '" + q.name + "' shadows a set");
      if (choices_.count(q.flag) || !flags_.emplace(q.flag, &q).second)
        err(diag::kDuplicateDecl, "flag '" + q.flag + "' collides with another name");
    }
  }

  // Walks the subsetof chain; true if `name` is `anc` or transitively below it.
  bool set_is_within(const std::string& name, const std::string& anc) const {
    std::string cur = name;
    for (int hops = 0; hops < 64; ++hops) {
      if (cur == anc) return true;
      auto it = sets_.find(cur);
      if (it == sets_.end() || it->second->superset.empty()) return false;
      cur = it->second->superset;
    }
    return false;
  }

  void check_sets() {
    for (const auto& s : def_.sets) {
      if (!s.superset.empty() && !sets_.count(s.superset))
        err(diag::kUnknownSet, "set '" + s.name + "': unknown superset '" + s.superset + "'");
      if (!s.param_var.empty() && !sets_.count(s.param_set))
        err(diag::kUnknownSet, "set '" + s.name + "': unknown parameter set '" + s.param_set + "'");
      // Cycle detection along the superset chain.
      std::set<std::string> seen{s.name};
      std::string cur = s.superset;
      while (!cur.empty()) {
        if (!seen.insert(cur).second) {
          err(diag::kSetCycle, "subsetof cycle through '" + s.name + "'");
          break;
        }
        auto it = sets_.find(cur);
        cur = it == sets_.end() ? std::string() : it->second->superset;
      }
    }
  }

  bool bind_quantifier(const Quantifier& q, Scope& scope) {
    if (quotients_.count(q.set)) {
      err(diag::kUnsupported, "quantification over quotient set '" + q.set + "'");
      return false;
    }
    auto it = sets_.find(q.set);
    if (it == sets_.end()) {
      err(diag::kUnknownSet, "unknown set '" + q.set + "' in forall");
      return false;
    }
    const SetDecl& s = *it->second;
    if (!s.param_var.empty()) {
      if (q.set_arg.empty()) {
        err(diag::kArityMismatch, "set '" + q.set + "' needs a parameter");
      } else {
        auto v = scope.find(q.set_arg);
        if (v == scope.end())
          err(diag::kUnknownVar, "unbound variable '$" + q.set_arg + "'");
        else if (!set_is_within(v->second, s.param_set))
          err(diag::kTypeMismatch, "'$" + q.set_arg + "' ranges over '" + v->second +
                                       "', set '" + q.set + "' expects '" + s.param_set + "'");
      }
    } else if (!q.set_arg.empty()) {
      err(diag::kArityMismatch, "set '" + q.set + "' takes no parameter");
    }
    scope[q.var] = q.set;
    return true;
  }

  bool resolve_app(const ChoiceApp& a, const Scope& scope, AppTarget& out) {
    if (auto it = choices_.find(a.choice); it != choices_.end()) {
      const ChoiceDecl& c = *it->second;
      out.choice = &c;
      out.kind = c.kind == ChoiceKind::Enum      ? AppTarget::Kind::Enum
                 : c.kind == ChoiceKind::Integer ? AppTarget::Kind::Integer
                                                 : AppTarget::Kind::Counter;
      if (a.args.size() != c.params.size()) {
        err(diag::kArityMismatch, "'" + a.choice + "' takes " + std::to_string(c.params.size()) +
                                      " arguments, got " + std::to_string(a.args.size()));
        return false;
      }
      for (size_t i = 0; i < a.args.size(); ++i) check_arg(a.choice, a.args[i], c.params[i].set, scope);
      return true;
    }
    if (auto it = flags_.find(a.choice); it != flags_.end()) {
      const QuotientDecl& q = *it->second;
      out.kind = AppTarget::Kind::Flag;
      out.quot = &q;
      size_t want = q.has_param ? 2 : 1;
      if (a.args.size() != want) {
        err(diag::kArityMismatch, "flag '" + a.choice + "' takes " + std::to_string(want) +
                                      " arguments, got " + std::to_string(a.args.size()));
        return false;
      }
      // Flag argument order: element first, then the quotient parameter.
      check_arg(a.choice, a.args[0], flag_elem_set(q), scope);
      if (q.has_param) check_arg(a.choice, a.args[1], q.param.set, scope);
      return true;
    }
    err(diag::kUnknownChoice, "unknown choice '" + a.choice + "'");
    return false;
  }

  // The element type of a quotient's base set (parametrized sets resolve to
  // their declared element superset by falling back to the set name itself).
  std::string flag_elem_set(const QuotientDecl& q) const { return q.base_set; }

  void check_arg(const std::string& who, const std::string& var, const std::string& want,
                 const Scope& scope) {
    auto it = scope.find(var);
    if (it == scope.end()) {
      err(diag::kUnknownVar, "unbound variable '$" + var + "' in '" + who + "(...)'");
      return;
    }
    if (want.empty() || !sets_.count(want)) return;  // parametrized target: checked elsewhere
    if (!set_is_within(it->second, want))
      err(diag::kTypeMismatch, "'$" + var + "' ranges over '" + it->second + "', '" + who +
                                   "' expects '" + want + "'");
  }

  void check_atom(const Atom& a, const Scope& scope) {
    if (a.kind == Atom::Kind::Opaque) return;
    AppTarget t{};
    if (!resolve_app(a.app, scope, t)) return;
    if (a.kind == Atom::Kind::Test) {
      if (a.value.empty()) {
        warn(diag::kBareAtom, "bare application '" + a.app.choice + "(...)' used as a condition");
        return;
      }
      switch (t.kind) {
        case AppTarget::Kind::Enum:
          if (!t.choice->elided && std::find(t.choice->values.begin(), t.choice->values.end(),
                                             a.value) == t.choice->values.end())
            err(diag::kUnknownValue, "'" + a.value + "' is not a value of '" + a.app.choice + "'");
          break;
        case AppTarget::Kind::Flag:
          if (a.value != "TRUE" && a.value != "FALSE")
            err(diag::kUnknownValue, "flag '" + a.app.choice + "' is TRUE or FALSE");
          break;
        case AppTarget::Kind::Integer:
        case AppTarget::Kind::Counter:
          err(diag::kTypeMismatch, "'is' test on non-enum choice '" + a.app.choice + "'");
          break;
      }
      return;
    }
    // Comparison: both applications must be numeric.
    if (t.kind == AppTarget::Kind::Enum || t.kind == AppTarget::Kind::Flag)
      err(diag::kTypeMismatch, "comparison on non-numeric choice '" + a.app.choice + "'");
    if (a.rhs_kind == Atom::RhsKind::App) {
      AppTarget rt{};
      if (resolve_app(a.rhs_app, scope, rt) &&
          (rt.kind == AppTarget::Kind::Enum || rt.kind == AppTarget::Kind::Flag))
        err(diag::kTypeMismatch, "comparison on non-numeric choice '" + a.rhs_app.choice + "'");
    }
  }

  void check_choice(const ChoiceDecl& c) {
    Scope scope;
    for (const auto& p : c.params) {
      if (!sets_.count(p.set))
        err(diag::kUnknownSet, "choice '" + c.name + "': unknown set '" + p.set + "'");
      scope[p.var] = p.set;
    }
    switch (c.kind) {
      case ChoiceKind::Enum: {
        std::set<std::string> vals(c.values.begin(), c.values.end());
        if (vals.size() != c.values.size())
          err(diag::kDuplicateDecl, "choice '" + c.name + "' has duplicate values");
        std::map<std::string, std::string> fwd;
        for (const auto& p : c.antisym) {
          if (!vals.count(p.from) || !vals.count(p.to)) {
            err(diag::kBadAntisym, "choice '" + c.name + "': antisymmetric pair uses unknown value");
            continue;
          }
          if (!fwd.emplace(p.from, p.to).second)
            err(diag::kBadAntisym, "choice '" + c.name + "': '" + p.from + "' mapped twice");
        }
        // The swap closure must be an involution: fwd plus implied reverses.
        for (const auto& [from, to] : fwd) {
          auto rev = fwd.find(to);
          if (rev != fwd.end() && rev->second != from)
            err(diag::kBadAntisym,
                "choice '" + c.name + "': '" + from + " -> " + to + "' is not an involution");
        }
        if (!c.antisym.empty() && c.params.size() != 2)
          err(diag::kBadAntisym, "antisymmetric choice '" + c.name + "' must be binary");
        if (!c.antisym.empty() && c.params.size() == 2 && c.params[0].set != c.params[1].set)
          err(diag::kBadAntisym,
              "antisymmetric choice '" + c.name + "' needs both parameters over one set");
        break;
      }
      case ChoiceKind::Integer:
        if (c.universe.empty() && !c.elided)
          err(diag::kUnknownValue, "integer choice '" + c.name + "' has no universe provider");
        break;
      case ChoiceKind::Counter: {
        Scope body = scope;
        for (const auto& q : c.counter.foralls) bind_quantifier(q, body);
        if (c.counter.term_kind == CounterBody::TermKind::App) {
          AppTarget t{};
          if (resolve_app(c.counter.term_app, body, t) && t.kind != AppTarget::Kind::Integer)
            err(diag::kBadCounter,
                "counter '" + c.name + "' term must be an integer choice application");
        }
        for (const auto& a : c.counter.guard) {
          if (a.kind == Atom::Kind::Opaque)
            err(diag::kBadCounter, "counter '" + c.name + "' guard cannot be opaque");
          else
            check_atom(a, body);
        }
        break;
      }
    }
  }

  void check_require(const RequireDecl& r) {
    Scope scope;
    for (const auto& q : r.foralls) bind_quantifier(q, scope);
    for (const auto& a : r.disjuncts) check_atom(a, scope);
  }

  void check_quotient(const QuotientDecl& q) {
    Scope scope;
    if (q.has_param) {
      if (!sets_.count(q.param.set))
        err(diag::kUnknownSet, "quotient '" + q.name + "': unknown set '" + q.param.set + "'");
      scope[q.param.var] = q.param.set;
    }
    Quantifier base{q.var, q.base_set, q.base_set_arg};
    bind_quantifier(base, scope);
    if (q.membership.kind != Atom::Kind::Test)
      err(diag::kBadQuotient, "quotient '" + q.name + "' membership must be an 'is' test");
    else
      check_atom(q.membership, scope);  // value-less tests fall out as kBareAtom
    auto it = choices_.find(q.equiv_choice);
    if (it == choices_.end()) {
      err(diag::kUnknownChoice, "quotient '" + q.name + "': unknown choice '" + q.equiv_choice + "'");
    } else {
      const ChoiceDecl& c = *it->second;
      if (c.kind != ChoiceKind::Enum || c.params.size() != 2)
        err(diag::kBadQuotient,
            "quotient '" + q.name + "': equivalence must be a binary enum choice");
      else if (!c.elided &&
               std::find(c.values.begin(), c.values.end(), q.equiv_value) == c.values.end())
        err(diag::kUnknownValue,
            "'" + q.equiv_value + "' is not a value of '" + q.equiv_choice + "'");
    }
  }

  void check_trigger_cond(const TriggerCond& c, const Scope& scope) {
    if (c.kind == TriggerCond::Kind::Atom) {
      check_atom(c.atom, scope);
      return;
    }
    for (const auto& k : c.kids) check_trigger_cond(k, scope);
  }

  void check_trigger(const TriggerDecl& t) {
    Scope scope;
    for (const auto& q : t.foralls) bind_quantifier(q, scope);
    check_trigger_cond(t.when, scope);
    if (t.callback.empty()) err(diag::kUnknownValue, "trigger has no callback name");
  }

  const SpaceDefinition& def_;
  std::vector<Diagnostic> diags_;
  std::map<std::string, const SetDecl*> sets_;
  std::map<std::string, const ChoiceDecl*> choices_;
  std::map<std::string, const QuotientDecl*> quotients_;
  std::map<std::string, const QuotientDecl*> flags_;
};

}  // namespace

std::vector<Diagnostic> validate(const SpaceDefinition& def) { return Validator(def).run(); }

}  // namespace ispace
