#include "ispace/compile.hpp"

#include <algorithm>
#include <cctype>
#include <map>
#include <string>

namespace ispace {

std::vector<std::string> opaque_vars(const std::string& fragment) {
  std::vector<std::string> out;
  for (std::size_t i = 0; i < fragment.size(); ++i) {
    if (fragment[i] != '$') continue;
    std::size_t j = i + 1;
    while (j < fragment.size() &&
           (std::isalnum(static_cast<unsigned char>(fragment[j])) || fragment[j] == '_'))
      ++j;
    if (j > i + 1) {
      std::string v = fragment.substr(i + 1, j - i - 1);
      if (std::find(out.begin(), out.end(), v) == out.end()) out.push_back(std::move(v));
    }
    i = j - 1;
  }
  return out;
}

namespace {

struct Binding {
  std::vector<std::pair<std::string, ObjId>> vars;
  std::uint64_t need = 0;

  ObjId get(const std::string& v) const {
    for (const auto& [name, obj] : vars)
      if (name == v) return obj;
    return kNoObj;
  }
  bool bound(ObjId o) const {
    for (const auto& [name, obj] : vars)
      if (obj == o) return true;
    return false;
  }
};

// One resolved condition of a quantified binding.
struct ResolvedAtom {
  enum class Kind { ConstTrue, ConstFalse, Lit, Rel, CounterCmp } kind = Kind::ConstFalse;
  std::uint32_t slot = kNoInstance;  // Lit / CounterCmp (the counter instance)
  Mask mask = 0;                     // Lit, in stored orientation
  std::uint32_t slot_b = kNoInstance;  // Rel
  CmpOp op = CmpOp::Eq;                // Rel / CounterCmp
  std::int64_t rhs = 0;                // CounterCmp
};

bool cmp_eval(std::int64_t a, CmpOp op, std::int64_t b) {
  switch (op) {
    case CmpOp::Eq: return a == b;
    case CmpOp::Ne: return a != b;
    case CmpOp::Lt: return a < b;
    case CmpOp::Le: return a <= b;
    case CmpOp::Gt: return a > b;
    case CmpOp::Ge: return a >= b;
  }
  return false;
}

class Compiler {
 public:
  Compiler(const SpaceDefinition& def, const Backbone& bb, const Providers& prov,
           InstanceTable& t, std::vector<Diagnostic>& diags)
      : def_(def), bb_(bb), prov_(prov), t_(t), diags_(diags) {}

  CompiledSpace run() {
    compile_counters();
    compile_quotients();
    compile_triggers();
    for (const auto& r : def_.constraints) compile_require(r);
    materialize_tables();
    build_watchers();
    return std::move(cs_);
  }

 private:
  void err(const char* code, std::string msg) {
    diags_.push_back({Severity::Error, code, std::move(msg), SourceLoc{}});
  }

  std::vector<ObjId> sorted_members(const std::string& set, ObjId key = kNoObj) {
    std::vector<ObjId> v = key == kNoObj ? bb_.members(set) : bb_.members(set, key);
    std::sort(v.begin(), v.end());
    return v;
  }

  // Enumerates all bindings of a forall chain on top of `base`; quantified
  // objects are pairwise distinct, including against the base bindings.
  template <typename Fn>
  void enumerate(const std::vector<Quantifier>& qs, Binding base, const Fn& fn) {
    if (qs.empty()) {
      fn(base);
      return;
    }
    enumerate_at(qs, 0, base, fn);
  }

  template <typename Fn>
  void enumerate_at(const std::vector<Quantifier>& qs, std::size_t i, Binding& b, const Fn& fn) {
    if (i == qs.size()) {
      fn(b);
      return;
    }
    const Quantifier& q = qs[i];
    ObjId key = kNoObj;
    if (!q.set_arg.empty()) {
      key = b.get(q.set_arg);
      if (key == kNoObj) return;
    }
    for (ObjId o : sorted_members(q.set, key)) {
      if (b.bound(o)) continue;
      std::uint32_t l = bb_.obj(o).lowering;
      std::uint64_t extra = l == kNoLowering ? 0 : (std::uint64_t{1} << l);
      b.vars.emplace_back(q.var, o);
      b.need |= extra;
      enumerate_at(qs, i + 1, b, fn);
      b.vars.pop_back();
      // need bits are sticky within a branch; recompute instead of clearing.
      b.need = 0;
      for (const auto& [name, obj] : b.vars) {
        std::uint32_t lo = bb_.obj(obj).lowering;
        if (lo != kNoLowering) b.need |= std::uint64_t{1} << lo;
      }
    }
  }

  std::vector<ObjId> opaque_args(const std::string& key, const Binding& b, bool* ok) {
    std::vector<ObjId> args;
    for (const auto& v : opaque_vars(key)) {
      ObjId o = b.get(v);
      if (o == kNoObj) {
        err(diag::kUnknownVar, "quoted fragment uses unbound '$" + v + "'");
        *ok = false;
      }
      args.push_back(o);
    }
    return args;
  }

  InstanceRef resolve_app(const ChoiceApp& app, const Binding& b, std::uint32_t* choice_out) {
    std::uint32_t ci = t_.find_choice(app.choice);
    *choice_out = ci;
    if (ci == ~std::uint32_t{0}) {
      err(diag::kUnknownChoice, "unknown choice '" + app.choice + "'");
      return {};
    }
    if (app.args.size() > 2) {
      err(diag::kArityMismatch, "'" + app.choice + "' applied to more than two objects");
      return {};
    }
    ObjId args[2] = {kNoObj, kNoObj};
    for (std::size_t i = 0; i < app.args.size(); ++i) {
      args[i] = b.get(app.args[i]);
      if (args[i] == kNoObj) {
        err(diag::kUnknownVar, "unbound '$" + app.args[i] + "' in '" + app.choice + "(...)'");
        return {};
      }
    }
    InstanceRef ref = t_.resolve(ci, args, app.args.size());
    if (ref.inst == kNoInstance)
      err(diag::kUnknownValue, "'" + app.choice + "' has no instance for these objects");
    return ref;
  }

  ResolvedAtom resolve_atom(const Atom& a, const Binding& b) {
    ResolvedAtom out;
    if (a.kind == Atom::Kind::Opaque) {
      bool ok = true;
      auto args = opaque_args(a.opaque, b, &ok);
      if (!ok) return out;
      if (!prov_.pred) {
        err(diag::kUnknownValue, "no predicate provider for \"" + a.opaque + "\"");
        return out;
      }
      out.kind = prov_.pred(a.opaque, args) ? ResolvedAtom::Kind::ConstTrue
                                            : ResolvedAtom::Kind::ConstFalse;
      return out;
    }
    std::uint32_t ci = 0;
    InstanceRef ref = resolve_app(a.app, b, &ci);
    if (ref.inst == kNoInstance) return out;
    const ChoiceInfo& info = t_.choices[ci];
    const Instance& inst = t_.instances[ref.inst];
    if (a.kind == Atom::Kind::Test) {
      if (a.value.empty()) {
        err(diag::kBareAtom, "bare application '" + a.app.choice + "(...)' cannot be compiled");
        return out;
      }
      int idx = t_.value_index(ci, a.value);
      if (idx < 0) {
        err(diag::kUnknownValue, "'" + a.value + "' is not a value of '" + a.app.choice + "'");
        return out;
      }
      Mask m = bit(idx);
      if (a.negated) m = full_mask(inst.nvals) & ~m;
      out.kind = ResolvedAtom::Kind::Lit;
      out.slot = ref.inst;
      out.mask = t_.to_stored(ci, m, ref.swapped);
      return out;
    }
    // Comparison.
    if (info.kind == InstKind::Counter) {
      std::int64_t rhs = 0;
      if (a.rhs_kind == Atom::RhsKind::Int) {
        rhs = a.rhs_int;
      } else if (a.rhs_kind == Atom::RhsKind::Opaque) {
        bool ok = true;
        auto args = opaque_args(a.rhs_opaque, b, &ok);
        if (!ok || !prov_.num) {
          err(diag::kUnknownValue, "no numeric provider for \"" + a.rhs_opaque + "\"");
          return out;
        }
        rhs = prov_.num(a.rhs_opaque, args);
      } else {
        err(diag::kUnsupported, "counter '" + a.app.choice + "' compared against a choice");
        return out;
      }
      out.kind = ResolvedAtom::Kind::CounterCmp;
      out.slot = ref.inst;
      out.op = a.op;
      out.rhs = rhs;
      return out;
    }
    if (info.kind != InstKind::Integer) {
      err(diag::kTypeMismatch, "comparison on non-numeric '" + a.app.choice + "'");
      return out;
    }
    if (a.rhs_kind == Atom::RhsKind::App) {
      std::uint32_t cb = 0;
      InstanceRef rb = resolve_app(a.rhs_app, b, &cb);
      if (rb.inst == kNoInstance) return out;
      if (t_.choices[cb].kind != InstKind::Integer) {
        err(diag::kTypeMismatch, "comparison on non-numeric '" + a.rhs_app.choice + "'");
        return out;
      }
      out.kind = ResolvedAtom::Kind::Rel;
      out.slot = ref.inst;
      out.slot_b = rb.inst;
      out.op = a.op;
      return out;
    }
    std::int64_t rhs = 0;
    if (a.rhs_kind == Atom::RhsKind::Int) {
      rhs = a.rhs_int;
    } else {
      bool ok = true;
      auto args = opaque_args(a.rhs_opaque, b, &ok);
      if (!ok || !prov_.num) {
        err(diag::kUnknownValue, "no numeric provider for \"" + a.rhs_opaque + "\"");
        return out;
      }
      rhs = prov_.num(a.rhs_opaque, args);
    }
    const auto& u = t_.universe_of(ref.inst);
    Mask m = 0;
    for (std::size_t v = 0; v < u.size(); ++v)
      if (cmp_eval(u[v], a.op, rhs)) m |= bit(static_cast<int>(v));
    out.kind = ResolvedAtom::Kind::Lit;
    out.slot = ref.inst;
    out.mask = m;
    return out;
  }

  // --- counters ------------------------------------------------------------

  void compile_counters() {
    cs_.counters.resize(t_.num_counter_slots);
    for (std::uint32_t inst_id = 0; inst_id < t_.instances.size(); ++inst_id) {
      const Instance& inst = t_.instances[inst_id];
      if (inst.counter_slot == ~std::uint32_t{0}) continue;
      const ChoiceInfo& info = t_.choices[inst.choice];
      const ChoiceDecl* decl = def_.find_choice(info.name);
      CompiledCounter cc;
      cc.counter_inst = inst_id;
      cc.op = decl->counter.op;
      Binding base;
      for (std::size_t i = 0; i < decl->params.size(); ++i)
        base.vars.emplace_back(decl->params[i].var, inst.args[i]);
      base.need = inst.need;
      enumerate(decl->counter.foralls, base, [&](const Binding& b) {
        CounterTerm term;
        term.need = b.need;
        bool dead = false;
        for (const auto& g : decl->counter.guard) {
          ResolvedAtom ra = resolve_atom(g, b);
          switch (ra.kind) {
            case ResolvedAtom::Kind::ConstTrue: break;
            case ResolvedAtom::Kind::ConstFalse: dead = true; break;
            case ResolvedAtom::Kind::Lit:
              term.guard.push_back({ra.slot, ra.mask});
              break;
            default:
              err(diag::kBadCounter, "unsupported guard in counter '" + info.name + "'");
              dead = true;
          }
        }
        if (dead) return;
        switch (decl->counter.term_kind) {
          case CounterBody::TermKind::Int:
            term.const_val = decl->counter.term_int;
            break;
          case CounterBody::TermKind::Opaque: {
            bool ok = true;
            auto args = opaque_args(decl->counter.term_opaque, b, &ok);
            if (!ok || !prov_.num) {
              err(diag::kUnknownValue,
                  "no numeric provider for \"" + decl->counter.term_opaque + "\"");
              return;
            }
            term.const_val = prov_.num(decl->counter.term_opaque, args);
            break;
          }
          case CounterBody::TermKind::App: {
            std::uint32_t ci = 0;
            InstanceRef ref = resolve_app(decl->counter.term_app, b, &ci);
            if (ref.inst == kNoInstance) return;
            term.int_slot = ref.inst;
            break;
          }
        }
        cc.terms.push_back(std::move(term));
      });
      cs_.counters[inst.counter_slot] = std::move(cc);
    }
  }

  // --- quotients -------------------------------------------------------------

  void compile_quotients() {
    for (std::size_t qi = 0; qi < def_.quotients.size(); ++qi) {
      const QuotientDecl& q = def_.quotients[qi];
      std::uint32_t fc = t_.find_choice(q.flag);
      std::uint32_t eqc = t_.find_choice(q.equiv_choice);
      int eq_idx = t_.value_index(eqc, q.equiv_value);
      const ChoiceInfo& eq_info = t_.choices[eqc];
      if (!eq_info.swap.empty() && eq_info.swap[eq_idx] != eq_idx) {
        err(diag::kBadQuotient,
            "equivalence value '" + q.equiv_value + "' is not symmetric under swapping");
        continue;
      }
      std::vector<ObjId> params = q.has_param ? sorted_members(q.param.set)
                                              : std::vector<ObjId>{kNoObj};
      for (ObjId p : params) {
        std::vector<ObjId> elems = q.base_set_arg.empty() ? sorted_members(q.base_set)
                                                          : sorted_members(q.base_set, p);
        std::vector<std::uint32_t> member_slots(elems.size(), kNoInstance);
        std::vector<Mask> member_masks(elems.size(), 0);
        for (std::size_t k = 0; k < elems.size(); ++k) {
          ObjId d = elems[k];
          if (d == p) {
            continue;
          }
          Binding b;
          b.vars.emplace_back(q.var, d);
          if (q.has_param) b.vars.emplace_back(q.param.var, p);
          ResolvedAtom m = resolve_atom(q.membership, b);
          if (m.kind != ResolvedAtom::Kind::Lit) {
            err(diag::kBadQuotient, "membership of '" + q.name + "' must test one choice");
            continue;
          }
          member_slots[k] = m.slot;
          member_masks[k] = m.mask;
          QuotientElem e;
          e.flag_inst = q.has_param ? t_.find(fc, d, p) : t_.find(fc, d);
          e.member_slot = m.slot;
          e.member_mask = m.mask;
          e.need = t_.instances[e.flag_inst].need;
          for (std::size_t j = 0; j < k; ++j) {
            if (member_slots[j] == kNoInstance) continue;
            ObjId d2 = elems[j];
            QuotientPeer peer;
            ObjId pair[2] = {d, d2};
            InstanceRef er = t_.resolve(eqc, pair, 2);
            if (er.inst == kNoInstance) {
              err(diag::kBadQuotient, "no equivalence instance in '" + q.name + "'");
              continue;
            }
            peer.equiv_slot = er.inst;
            peer.equiv_mask = t_.to_stored(eqc, bit(eq_idx), er.swapped);
            peer.member_slot = member_slots[j];
            peer.member_mask = member_masks[j];
            peer.need = e.need | t_.instances[er.inst].need;
            e.earlier.push_back(peer);
          }
          cs_.quot_elems.push_back(std::move(e));
        }
      }
    }
  }

  // --- triggers --------------------------------------------------------------

  TrigNode compile_cond(const TriggerCond& c, const Binding& b) {
    TrigNode n;
    if (c.kind == TriggerCond::Kind::Atom) {
      ResolvedAtom ra = resolve_atom(c.atom, b);
      n.kind = TrigNode::Kind::Atom;
      switch (ra.kind) {
        case ResolvedAtom::Kind::ConstTrue:
          n.slot = kNoInstance;
          n.mask = 1;
          break;
        case ResolvedAtom::Kind::ConstFalse:
          n.slot = kNoInstance;
          n.mask = 0;
          break;
        case ResolvedAtom::Kind::Lit:
          n.slot = ra.slot;
          n.mask = ra.mask;
          break;
        default:
          err(diag::kUnsupported, "trigger conditions must be tests or predicates");
          n.slot = kNoInstance;
          n.mask = 0;
      }
      return n;
    }
    n.kind = c.kind == TriggerCond::Kind::And ? TrigNode::Kind::And : TrigNode::Kind::Or;
    for (const auto& k : c.kids) n.kids.push_back(compile_cond(k, b));
    return n;
  }

  void compile_triggers() {
    for (const auto& tr : def_.triggers) {
      enumerate(tr.foralls, Binding{}, [&](const Binding& b) {
        if (!prov_.lowering) return;
        std::vector<ObjId> args;
        for (const auto& [name, obj] : b.vars) args.push_back(obj);
        std::uint32_t l = prov_.lowering(tr.callback, args);
        if (l == kNoLowering) return;
        CompiledTrigger ct;
        ct.when = compile_cond(tr.when, b);
        ct.lowering = l;
        ct.need = b.need;
        cs_.triggers.push_back(std::move(ct));
      });
    }
  }

  // --- requires --------------------------------------------------------------

  using ScopeKey = std::pair<std::vector<std::uint32_t>, std::uint64_t>;

  void compile_require(const RequireDecl& r) {
    enumerate(r.foralls, Binding{}, [&](const Binding& b) {
      std::vector<ResolvedAtom> lits, rels, ccs;
      for (const auto& a : r.disjuncts) {
        ResolvedAtom ra = resolve_atom(a, b);
        switch (ra.kind) {
          case ResolvedAtom::Kind::ConstTrue: return;  // binding satisfied
          case ResolvedAtom::Kind::ConstFalse: break;
          case ResolvedAtom::Kind::Lit: lits.push_back(ra); break;
          case ResolvedAtom::Kind::Rel: rels.push_back(ra); break;
          case ResolvedAtom::Kind::CounterCmp: ccs.push_back(ra); break;
        }
      }
      if (!ccs.empty()) {
        if (!lits.empty() || !rels.empty() || ccs.size() > 1) {
          err(diag::kUnsupported, "counter bounds cannot mix with other conditions");
          return;
        }
        const ResolvedAtom& ra = ccs[0];
        std::uint32_t slot = t_.instances[ra.slot].counter_slot;
        if (ra.op == CmpOp::Ne) {
          err(diag::kUnsupported, "counter != bound is not supported");
          return;
        }
        if (ra.op == CmpOp::Eq) {
          cs_.counters[slot].bounds.push_back({CmpOp::Le, ra.rhs, b.need});
          cs_.counters[slot].bounds.push_back({CmpOp::Ge, ra.rhs, b.need});
        } else {
          cs_.counters[slot].bounds.push_back({ra.op, ra.rhs, b.need});
        }
        return;
      }
      // Scope: the distinct instances touched.
      std::vector<std::uint32_t> scope;
      for (const auto& l : lits) scope.push_back(l.slot);
      for (const auto& rl : rels) {
        scope.push_back(rl.slot);
        scope.push_back(rl.slot_b);
      }
      std::sort(scope.begin(), scope.end());
      scope.erase(std::unique(scope.begin(), scope.end()), scope.end());
      if (scope.empty()) {
        err(diag::kUnsupported, "a constraint instance is identically false");
        return;
      }
      if (scope.size() > 3) {
        err(diag::kUnsupported, "constraint touches more than three instances");
        return;
      }
      if (scope.size() == 1 && rels.empty()) {
        Mask m = 0;
        for (const auto& l : lits) m |= l.mask;
        Instance& inst = t_.instances[scope[0]];
        if (m == full_mask(inst.nvals)) return;
        if ((b.need & ~inst.need) == 0) {
          inst.initial &= m;
          if (inst.initial == 0)
            err(diag::kUnknownValue,
                "no value of '" + t_.choices[inst.choice].name + "' satisfies the constraints");
          return;
        }
        // Active only under extra lowerings: keep as a one-slot table.
      }
      intersect_scope(scope, b.need, lits, rels);
    });
  }

  std::size_t tuple_space(const std::vector<std::uint32_t>& scope) const {
    std::size_t n = 1;
    for (std::uint32_t s : scope) n *= t_.instances[s].nvals;
    return n;
  }

  void intersect_scope(const std::vector<std::uint32_t>& scope, std::uint64_t need,
                       const std::vector<ResolvedAtom>& lits,
                       const std::vector<ResolvedAtom>& rels) {
    // Allowed-set under this binding, cached by content: bindings of one rule
    // over a uniform set all produce the same table.
    std::string key;
    key.reserve(64);
    for (std::uint32_t s : scope) {
      key += 'n';
      key += static_cast<char>('0' + t_.instances[s].nvals);
      key += 'u';
      key += std::to_string(t_.instances[s].universe_id);
    }
    auto pos_of = [&](std::uint32_t s) {
      return static_cast<int>(std::find(scope.begin(), scope.end(), s) - scope.begin());
    };
    for (const auto& l : lits)
      key += "L" + std::to_string(pos_of(l.slot)) + ":" + std::to_string(l.mask);
    for (const auto& rl : rels)
      key += "R" + std::to_string(pos_of(rl.slot)) + "," + std::to_string(pos_of(rl.slot_b)) +
             ":" + std::to_string(static_cast<int>(rl.op));
    auto cached = binding_cache_.find(key);
    if (cached == binding_cache_.end()) {
      std::size_t n = tuple_space(scope);
      std::vector<std::uint64_t> bits((n + 63) / 64, 0);
      std::vector<int> nv(scope.size());
      for (std::size_t i = 0; i < scope.size(); ++i) nv[i] = t_.instances[scope[i]].nvals;
      std::vector<int> coord(scope.size(), 0);
      for (std::size_t idx = 0; idx < n; ++idx) {
        std::size_t rest = idx;
        for (std::size_t i = scope.size(); i-- > 0;) {
          coord[i] = static_cast<int>(rest % nv[i]);
          rest /= nv[i];
        }
        bool ok = false;
        for (const auto& l : lits)
          if (mask_has(l.mask, coord[pos_of(l.slot)])) {
            ok = true;
            break;
          }
        if (!ok)
          for (const auto& rl : rels) {
            std::int64_t va = t_.universe_of(rl.slot)[coord[pos_of(rl.slot)]];
            std::int64_t vb = t_.universe_of(rl.slot_b)[coord[pos_of(rl.slot_b)]];
            if (cmp_eval(va, rl.op, vb)) {
              ok = true;
              break;
            }
          }
        if (ok) bits[idx / 64] |= std::uint64_t{1} << (idx % 64);
      }
      cached = binding_cache_.emplace(std::move(key), std::move(bits)).first;
    }
    ScopeKey sk{scope, need};
    auto it = pending_.find(sk);
    if (it == pending_.end()) {
      std::size_t n = tuple_space(scope);
      std::vector<std::uint64_t> full((n + 63) / 64, ~std::uint64_t{0});
      if (n % 64) full.back() = (std::uint64_t{1} << (n % 64)) - 1;
      it = pending_.emplace(std::move(sk), std::move(full)).first;
    }
    for (std::size_t w = 0; w < it->second.size(); ++w) it->second[w] &= cached->second[w];
  }

  void materialize_tables() {
    std::map<std::string, std::uint32_t> shape_ids;
    for (auto& [sk, bits] : pending_) {
      const auto& scope = sk.first;
      std::size_t n = tuple_space(scope);
      bool full = true;
      for (std::size_t idx = 0; idx < n && full; ++idx)
        if (!((bits[idx / 64] >> (idx % 64)) & 1)) full = false;
      if (full) continue;
      // Fold fully forbidden one-slot tables straight into the domain when the
      // activation condition allows it (checked earlier; need may differ here).
      std::string key = std::to_string(scope.size());
      for (std::uint32_t s : scope) key += "," + std::to_string(t_.instances[s].nvals);
      for (std::uint64_t w : bits) key += ":" + std::to_string(w);
      auto [it, inserted] = shape_ids.emplace(key, static_cast<std::uint32_t>(cs_.shapes.size()));
      if (inserted) {
        TableShape sh;
        sh.arity = static_cast<std::uint8_t>(scope.size());
        int nv[3] = {1, 1, 1};
        for (std::size_t i = 0; i < scope.size(); ++i) {
          nv[i] = t_.instances[scope[i]].nvals;
          sh.nvals[i] = static_cast<std::uint8_t>(nv[i]);
        }
        auto get = [&](std::size_t idx) {
          return ((bits[idx / 64] >> (idx % 64)) & 1) != 0;
        };
        for (int s = 0; s < static_cast<int>(scope.size()); ++s) {
          int other = 1;
          for (int o = 0; o < static_cast<int>(scope.size()); ++o)
            if (o != s) other *= nv[o];
          sh.rows[s].assign(nv[s], std::vector<std::uint64_t>((other + 63) / 64, 0));
        }
        for (std::size_t idx = 0; idx < n; ++idx) {
          if (!get(idx)) continue;
          int c[3] = {0, 0, 0};
          std::size_t rest = idx;
          for (int i = static_cast<int>(scope.size()); i-- > 0;) {
            c[i] = static_cast<int>(rest % nv[i]);
            rest /= nv[i];
          }
          for (int s = 0; s < static_cast<int>(scope.size()); ++s) {
            std::size_t r = 0;
            for (int o = 0; o < static_cast<int>(scope.size()); ++o)
              if (o != s) r = r * nv[o] + c[o];
            sh.rows[s][c[s]][r / 64] |= std::uint64_t{1} << (r % 64);
          }
        }
        cs_.shapes.push_back(std::move(sh));
      }
      TableCons tc;
      tc.shape = it->second;
      tc.arity = static_cast<std::uint8_t>(scope.size());
      for (std::size_t i = 0; i < scope.size(); ++i) tc.slot[i] = scope[i];
      tc.need = sk.second;
      for (std::uint32_t s : scope) tc.need |= t_.instances[s].need;
      cs_.tables.push_back(tc);
    }
  }

  // --- watchers ---------------------------------------------------------------

  void add_watch(std::uint32_t inst, Watch w) {
    if (inst == kNoInstance) return;
    cs_.watchers[inst].push_back(w);
  }

  void collect_trig_slots(const TrigNode& n, std::vector<std::uint32_t>& out) {
    if (n.kind == TrigNode::Kind::Atom) {
      if (n.slot != kNoInstance) out.push_back(n.slot);
      return;
    }
    for (const auto& k : n.kids) collect_trig_slots(k, out);
  }

  void build_watchers() {
    cs_.watchers.assign(t_.instances.size(), {});
    for (std::uint32_t i = 0; i < cs_.tables.size(); ++i) {
      const TableCons& tc = cs_.tables[i];
      for (int s = 0; s < tc.arity; ++s) add_watch(tc.slot[s], {Watch::Kind::Table, i});
    }
    cs_.triggers_of_lowering.assign(bb_.lowerings.size(), {});
    for (std::uint32_t i = 0; i < cs_.triggers.size(); ++i) {
      std::vector<std::uint32_t> slots;
      collect_trig_slots(cs_.triggers[i].when, slots);
      for (std::uint32_t s : slots) add_watch(s, {Watch::Kind::Trigger, i});
      if (cs_.triggers[i].lowering != kNoLowering)
        cs_.triggers_of_lowering[cs_.triggers[i].lowering].push_back(i);
    }
    for (std::uint32_t k = 0; k < cs_.counters.size(); ++k) {
      const CompiledCounter& cc = cs_.counters[k];
      std::uint64_t dormant_needs = 0;
      for (const auto& term : cc.terms) {
        if (term.int_slot != kNoInstance) add_watch(term.int_slot, {Watch::Kind::Counter, k});
        for (const auto& g : term.guard) add_watch(g.slot, {Watch::Kind::Counter, k});
        dormant_needs |= term.need;
      }
      // Terms behind a lowering track the firing chances through the triggers.
      for (std::uint32_t l = 0; l < bb_.lowerings.size(); ++l) {
        if (!((dormant_needs >> l) & 1)) continue;
        for (std::uint32_t ti : cs_.triggers_of_lowering[l]) {
          std::vector<std::uint32_t> slots;
          collect_trig_slots(cs_.triggers[ti].when, slots);
          for (std::uint32_t s : slots) add_watch(s, {Watch::Kind::Counter, k});
        }
      }
    }
    for (std::uint32_t e = 0; e < cs_.quot_elems.size(); ++e) {
      const QuotientElem& qe = cs_.quot_elems[e];
      add_watch(qe.flag_inst, {Watch::Kind::Quotient, e});
      add_watch(qe.member_slot, {Watch::Kind::Quotient, e});
      for (const auto& p : qe.earlier) {
        add_watch(p.equiv_slot, {Watch::Kind::Quotient, e});
        add_watch(p.member_slot, {Watch::Kind::Quotient, e});
      }
    }
    for (auto& ws : cs_.watchers) {
      std::sort(ws.begin(), ws.end(), [](const Watch& a, const Watch& b) {
        return a.kind != b.kind ? a.kind < b.kind : a.index < b.index;
      });
      ws.erase(std::unique(ws.begin(), ws.end(),
                           [](const Watch& a, const Watch& b) {
                             return a.kind == b.kind && a.index == b.index;
                           }),
               ws.end());
    }
    cs_.lowering_insts.assign(bb_.lowerings.size(), {});
    for (std::uint32_t i = 0; i < t_.instances.size(); ++i) {
      std::uint64_t need = t_.instances[i].need;
      for (std::uint32_t l = 0; l < bb_.lowerings.size(); ++l)
        if ((need >> l) & 1) cs_.lowering_insts[l].push_back(i);
    }
  }

  const SpaceDefinition& def_;
  const Backbone& bb_;
  const Providers& prov_;
  InstanceTable& t_;
  std::vector<Diagnostic>& diags_;
  CompiledSpace cs_;
  std::map<ScopeKey, std::vector<std::uint64_t>> pending_;
  std::map<std::string, std::vector<std::uint64_t>> binding_cache_;
};

}  // namespace

CompiledSpace compile_space(const SpaceDefinition& def, const Backbone& bb,
                            const Providers& providers, InstanceTable& table,
                            std::vector<Diagnostic>& diags) {
  return Compiler(def, bb, providers, table, diags).run();
}

}  // namespace ispace
