#include "ispace/printer.hpp"

#include <sstream>

namespace ispace {

namespace {

using nlohmann::ordered_json;

const char* cmp_str(CmpOp op) {
  switch (op) {
    case CmpOp::Eq: return "==";
    case CmpOp::Ne: return "!=";
    case CmpOp::Lt: return "<";
    case CmpOp::Le: return "<=";
    case CmpOp::Gt: return ">";
    case CmpOp::Ge: return ">=";
  }
  return "?";
}

void print_app(std::ostream& os, const ChoiceApp& a) {
  os << a.choice << "(";
  for (size_t i = 0; i < a.args.size(); ++i) {
    if (i) os << ", ";
    os << "$" << a.args[i];
  }
  os << ")";
}

void print_atom(std::ostream& os, const Atom& a) {
  if (a.kind == Atom::Kind::Opaque) {
    os << "\"" << a.opaque << "\"";
    return;
  }
  print_app(os, a.app);
  if (a.kind == Atom::Kind::Test) {
    if (a.value.empty()) return;  // bare application, kept as written
    os << (a.negated ? " is not " : " is ") << a.value;
    return;
  }
  os << " " << cmp_str(a.op) << " ";
  switch (a.rhs_kind) {
    case Atom::RhsKind::App: print_app(os, a.rhs_app); break;
    case Atom::RhsKind::Opaque: os << "\"" << a.rhs_opaque << "\""; break;
    case Atom::RhsKind::Int: os << a.rhs_int; break;
    case Atom::RhsKind::None: os << "?"; break;
  }
}

void print_quantifier(std::ostream& os, const Quantifier& q) {
  os << "forall $" << q.var << " in " << q.set;
  if (!q.set_arg.empty()) os << "($" << q.set_arg << ")";
  os << ":";
}

void print_set(std::ostream& os, const SetDecl& d) {
  os << "set " << d.name;
  if (!d.param_var.empty()) os << "($" << d.param_var << " in " << d.param_set << ")";
  if (!d.superset.empty()) os << " subsetof " << d.superset;
  os << ":";
  if (d.bindings.empty() && d.elided) {
    os << " ...\n";
    return;
  }
  os << "\n";
  for (const auto& b : d.bindings) {
    os << "  " << b.key << " = ";
    if (b.value) os << "\"" << *b.value << "\"";
    else os << "...";
    os << "\n";
  }
  if (d.elided && !d.bindings.empty()) os << "  ...\n";
  os << "end\n";
}

void print_choice(std::ostream& os, const ChoiceDecl& d) {
  os << "choice ";
  switch (d.kind) {
    case ChoiceKind::Enum: os << "enum "; break;
    case ChoiceKind::Integer: os << "integer "; break;
    case ChoiceKind::Counter: os << "counter "; break;
  }
  os << d.name << "(";
  for (size_t i = 0; i < d.params.size(); ++i) {
    if (i) os << ", ";
    os << "$" << d.params[i].var << " in " << d.params[i].set;
  }
  os << "):\n";
  switch (d.kind) {
    case ChoiceKind::Enum:
      for (const auto& v : d.values) os << "  value " << v << ":\n";
      if (!d.antisym.empty()) {
        os << "  antisymmetric:\n";
        for (const auto& p : d.antisym) os << "    " << p.from << " -> " << p.to << "\n";
      }
      if (d.elided) os << "  ...\n";
      break;
    case ChoiceKind::Integer:
      if (!d.universe.empty()) os << "  \"" << d.universe << "\"\n";
      if (d.elided) os << "  ...\n";
      break;
    case ChoiceKind::Counter: {
      const CounterBody& c = d.counter;
      for (const auto& q : c.foralls) {
        os << "  ";
        print_quantifier(os, q);
        os << "\n";
      }
      os << "  " << (c.op == CounterOp::Sum ? "sum " : "product ");
      switch (c.term_kind) {
        case CounterBody::TermKind::Opaque: os << "\"" << c.term_opaque << "\""; break;
        case CounterBody::TermKind::Int: os << c.term_int; break;
        case CounterBody::TermKind::App: print_app(os, c.term_app); break;
      }
      if (!c.guard.empty()) {
        os << " when ";
        for (size_t i = 0; i < c.guard.size(); ++i) {
          if (i) os << " && ";
          print_atom(os, c.guard[i]);
        }
      }
      os << "\n";
      break;
    }
  }
  os << "end\n";
}

void print_require(std::ostream& os, const RequireDecl& d) {
  os << "require ";
  for (const auto& q : d.foralls) {
    print_quantifier(os, q);
    os << " ";
  }
  if (!d.foralls.empty()) {
    os << "\n  ";
  }
  for (size_t i = 0; i < d.disjuncts.size(); ++i) {
    if (i) os << " || ";
    print_atom(os, d.disjuncts[i]);
  }
  os << "\n";
}

void print_quotient(std::ostream& os, const QuotientDecl& d) {
  os << "quotient " << d.name;
  if (d.has_param) os << "($" << d.param.var << " in " << d.param.set << ")";
  os << " of $" << d.var << " in " << d.base_set;
  if (!d.base_set_arg.empty()) os << "($" << d.base_set_arg << ")";
  os << ":\n";
  os << "  " << d.flag << " = ";
  print_atom(os, d.membership);
  os << " / " << d.equiv_choice << " is " << d.equiv_value << "\n";
  if (d.elided) os << "  ...\n";
  os << "end\n";
}

void print_trigger_cond(std::ostream& os, const TriggerCond& c, bool parens) {
  switch (c.kind) {
    case TriggerCond::Kind::Atom:
      print_atom(os, c.atom);
      break;
    case TriggerCond::Kind::And:
      if (parens) os << "(";
      for (size_t i = 0; i < c.kids.size(); ++i) {
        if (i) os << " && ";
        print_trigger_cond(os, c.kids[i], true);
      }
      if (parens) os << ")";
      break;
    case TriggerCond::Kind::Or:
      if (parens) os << "(";
      for (size_t i = 0; i < c.kids.size(); ++i) {
        if (i) os << " || ";
        print_trigger_cond(os, c.kids[i], c.kids[i].kind != TriggerCond::Kind::Atom);
      }
      if (parens) os << ")";
      break;
  }
}

void print_trigger(std::ostream& os, const TriggerDecl& d) {
  os << "trigger ";
  for (const auto& q : d.foralls) {
    print_quantifier(os, q);
    os << " ";
  }
  os << "\n  when ";
  print_trigger_cond(os, d.when, false);
  os << "\n  call \"" << d.callback << "\"\n";
  os << "end\n";
}

// --- JSON dump -------------------------------------------------------------

ordered_json app_json(const ChoiceApp& a) {
  ordered_json j;
  j["choice"] = a.choice;
  j["args"] = a.args;
  return j;
}

ordered_json atom_json(const Atom& a) {
  ordered_json j;
  switch (a.kind) {
    case Atom::Kind::Opaque:
      j["kind"] = "opaque";
      j["text"] = a.opaque;
      return j;
    case Atom::Kind::Test:
      j["kind"] = "test";
      j["app"] = app_json(a.app);
      j["negated"] = a.negated;
      j["value"] = a.value;
      return j;
    case Atom::Kind::Cmp:
      j["kind"] = "cmp";
      j["app"] = app_json(a.app);
      j["op"] = cmp_str(a.op);
      switch (a.rhs_kind) {
        case Atom::RhsKind::App: j["rhs"] = app_json(a.rhs_app); break;
        case Atom::RhsKind::Opaque: j["rhs"] = a.rhs_opaque; break;
        case Atom::RhsKind::Int: j["rhs"] = a.rhs_int; break;
        case Atom::RhsKind::None: j["rhs"] = nullptr; break;
      }
      return j;
  }
  return j;
}

ordered_json quantifier_json(const Quantifier& q) {
  ordered_json j;
  j["var"] = q.var;
  j["set"] = q.set;
  if (!q.set_arg.empty()) j["set_arg"] = q.set_arg;
  return j;
}

ordered_json trigger_cond_json(const TriggerCond& c) {
  ordered_json j;
  switch (c.kind) {
    case TriggerCond::Kind::Atom:
      j["atom"] = atom_json(c.atom);
      return j;
    case TriggerCond::Kind::And: j["and"] = ordered_json::array(); break;
    case TriggerCond::Kind::Or: j["or"] = ordered_json::array(); break;
  }
  auto& arr = c.kind == TriggerCond::Kind::And ? j["and"] : j["or"];
  for (const auto& k : c.kids) arr.push_back(trigger_cond_json(k));
  return j;
}

}  // namespace

std::string pretty_print(const SpaceDefinition& def) {
  std::ostringstream os;
  bool first = true;
  for (const auto& ref : def.decl_order) {
    if (!first) os << "\n";
    first = false;
    switch (ref.kind) {
      case SpaceDefinition::DeclRef::Kind::Set: print_set(os, def.sets[ref.index]); break;
      case SpaceDefinition::DeclRef::Kind::Choice: print_choice(os, def.choices[ref.index]); break;
      case SpaceDefinition::DeclRef::Kind::Require: print_require(os, def.constraints[ref.index]); break;
      case SpaceDefinition::DeclRef::Kind::Quotient: print_quotient(os, def.quotients[ref.index]); break;
      case SpaceDefinition::DeclRef::Kind::Trigger: print_trigger(os, def.triggers[ref.index]); break;
    }
  }
  return os.str();
}

nlohmann::ordered_json to_json(const SpaceDefinition& def) {
  ordered_json root;
  root["sets"] = ordered_json::array();
  for (const auto& s : def.sets) {
    ordered_json j;
    j["name"] = s.name;
    if (!s.param_var.empty()) {
      j["param_var"] = s.param_var;
      j["param_set"] = s.param_set;
    }
    if (!s.superset.empty()) j["subsetof"] = s.superset;
    j["bindings"] = ordered_json::array();
    for (const auto& b : s.bindings) {
      ordered_json bj;
      bj["key"] = b.key;
      if (b.value) bj["value"] = *b.value;
      else bj["value"] = nullptr;
      j["bindings"].push_back(bj);
    }
    j["elided"] = s.elided;
    root["sets"].push_back(j);
  }
  root["choices"] = ordered_json::array();
  for (const auto& c : def.choices) {
    ordered_json j;
    j["name"] = c.name;
    j["kind"] = c.kind == ChoiceKind::Enum ? "enum"
                : c.kind == ChoiceKind::Integer ? "integer"
                                                : "counter";
    j["params"] = ordered_json::array();
    for (const auto& p : c.params) {
      ordered_json pj;
      pj["var"] = p.var;
      pj["set"] = p.set;
      j["params"].push_back(pj);
    }
    switch (c.kind) {
      case ChoiceKind::Enum: {
        j["values"] = c.values;
        j["antisymmetric"] = ordered_json::array();
        for (const auto& p : c.antisym) {
          ordered_json pj;
          pj["from"] = p.from;
          pj["to"] = p.to;
          j["antisymmetric"].push_back(pj);
        }
        break;
      }
      case ChoiceKind::Integer:
        j["universe"] = c.universe;
        break;
      case ChoiceKind::Counter: {
        ordered_json cj;
        cj["foralls"] = ordered_json::array();
        for (const auto& q : c.counter.foralls) cj["foralls"].push_back(quantifier_json(q));
        cj["op"] = c.counter.op == CounterOp::Sum ? "sum" : "product";
        switch (c.counter.term_kind) {
          case CounterBody::TermKind::Opaque: cj["term"] = c.counter.term_opaque; break;
          case CounterBody::TermKind::Int: cj["term"] = c.counter.term_int; break;
          case CounterBody::TermKind::App: cj["term"] = app_json(c.counter.term_app); break;
        }
        cj["guard"] = ordered_json::array();
        for (const auto& a : c.counter.guard) cj["guard"].push_back(atom_json(a));
        j["counter"] = cj;
        break;
      }
    }
    j["elided"] = c.elided;
    root["choices"].push_back(j);
  }
  root["requires"] = ordered_json::array();
  for (const auto& r : def.constraints) {
    ordered_json j;
    j["foralls"] = ordered_json::array();
    for (const auto& q : r.foralls) j["foralls"].push_back(quantifier_json(q));
    j["disjuncts"] = ordered_json::array();
    for (const auto& a : r.disjuncts) j["disjuncts"].push_back(atom_json(a));
    root["requires"].push_back(j);
  }
  root["quotients"] = ordered_json::array();
  for (const auto& q : def.quotients) {
    ordered_json j;
    j["name"] = q.name;
    if (q.has_param) {
      j["param_var"] = q.param.var;
      j["param_set"] = q.param.set;
    }
    j["var"] = q.var;
    j["base_set"] = q.base_set;
    if (!q.base_set_arg.empty()) j["base_set_arg"] = q.base_set_arg;
    j["flag"] = q.flag;
    j["membership"] = atom_json(q.membership);
    j["equiv_choice"] = q.equiv_choice;
    j["equiv_value"] = q.equiv_value;
    j["elided"] = q.elided;
    root["quotients"].push_back(j);
  }
  root["triggers"] = ordered_json::array();
  for (const auto& t : def.triggers) {
    ordered_json j;
    j["foralls"] = ordered_json::array();
    for (const auto& q : t.foralls) j["foralls"].push_back(quantifier_json(q));
    j["when"] = trigger_cond_json(t.when);
    j["call"] = t.callback;
    root["triggers"].push_back(j);
  }
  return root;
}

}  // namespace ispace
