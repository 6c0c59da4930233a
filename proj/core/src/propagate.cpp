#include <algorithm>

#include "ispace/candidate.hpp"

namespace ispace {

namespace {

// Bounded-size FIFO fixpoint loop. Domains only shrink, so every propagator
// runs a finite number of times; watcher lists are precompiled.
class Engine {
 public:
  Engine(const SpaceContext& ctx, Candidate& c) : ctx_(ctx), c_(c) {
    in_queue_.assign(ctx_.table.instances.size(), 0);
  }

  void mark_dirty(std::uint32_t inst) {
    if (in_queue_[inst]) return;
    in_queue_[inst] = 1;
    queue_.push_back(inst);
  }

  void mark_all_counters() { all_counters_ = true; }

  PropStatus run() {
    if (all_counters_) {
      all_counters_ = false;
      for (std::uint32_t k = 0; k < ctx_.comp.counters.size(); ++k)
        if (run_counter(k) == PropStatus::DeadEnd) return PropStatus::DeadEnd;
    }
    while (qhead_ < queue_.size()) {
      std::uint32_t inst = queue_[qhead_++];
      in_queue_[inst] = 0;
      for (const Watch& w : ctx_.comp.watchers[inst]) {
        PropStatus st = PropStatus::Ok;
        switch (w.kind) {
          case Watch::Kind::Table: st = run_table(ctx_.comp.tables[w.index]); break;
          case Watch::Kind::Counter: st = run_counter(w.index); break;
          case Watch::Kind::Quotient: st = run_quotient(ctx_.comp.quot_elems[w.index]); break;
          case Watch::Kind::Trigger: st = run_trigger(w.index); break;
        }
        if (st == PropStatus::DeadEnd) return PropStatus::DeadEnd;
      }
    }
    return PropStatus::Ok;
  }

  PropStatus narrow(std::uint32_t inst, Mask keep) {
    Mask nd = c_.dom[inst] & keep;
    if (nd == c_.dom[inst]) return PropStatus::Ok;
    c_.dom[inst] = nd;
    if (nd == 0) return PropStatus::DeadEnd;
    mark_dirty(inst);
    return PropStatus::Ok;
  }

 private:
  bool live(std::uint32_t inst) const { return instance_live(ctx_, c_, inst); }

  // --- tables ---------------------------------------------------------------

  static void or_at(std::vector<std::uint64_t>& w, Mask m, unsigned off) {
    unsigned s = off % 64;
    std::size_t k = off / 64;
    w[k] |= std::uint64_t{m} << s;
    std::uint64_t hi = s ? (std::uint64_t{m} >> (64 - s)) : 0;
    if (hi) w[k + 1] |= hi;
  }

  static bool intersects(const std::vector<std::uint64_t>& row,
                         const std::vector<std::uint64_t>& prod) {
    for (std::size_t i = 0; i < row.size(); ++i)
      if (row[i] & prod[i]) return true;
    return false;
  }

  PropStatus run_table(const TableCons& tc) {
    if ((tc.need & ~c_.fired) != 0) return PropStatus::Ok;
    const TableShape& sh = ctx_.comp.shapes[tc.shape];
    if (tc.arity == 1) {
      Mask allowed = 0;
      for (int v = 0; v < sh.nvals[0]; ++v)
        if (sh.rows[0][v][0] & 1) allowed |= bit(v);
      return narrow(tc.slot[0], allowed);
    }
    if (tc.arity == 2) {
      Mask m0 = c_.dom[tc.slot[0]], m1 = c_.dom[tc.slot[1]];
      Mask n0 = 0, n1 = 0;
      for (int x = 0; x < sh.nvals[0]; ++x)
        if (mask_has(m0, x) && (sh.rows[0][x][0] & m1)) n0 |= bit(x);
      for (int y = 0; y < sh.nvals[1]; ++y)
        if (mask_has(m1, y) && (sh.rows[1][y][0] & m0)) n1 |= bit(y);
      if (narrow(tc.slot[0], n0) == PropStatus::DeadEnd) return PropStatus::DeadEnd;
      return narrow(tc.slot[1], n1);
    }
    Mask m[3] = {c_.dom[tc.slot[0]], c_.dom[tc.slot[1]], c_.dom[tc.slot[2]]};
    int nv[3] = {sh.nvals[0], sh.nvals[1], sh.nvals[2]};
    // Support products in the row-major layout of each slot's rows: the two
    // other slots in increasing slot order.
    auto product = [&](int i, int j) {
      std::vector<std::uint64_t> w((static_cast<std::size_t>(nv[i]) * nv[j] + 63) / 64 + 1, 0);
      for (int x = 0; x < nv[i]; ++x)
        if (mask_has(m[i], x)) or_at(w, m[j], static_cast<unsigned>(x) * nv[j]);
      return w;
    };
    std::vector<std::uint64_t> p12 = product(1, 2), p02 = product(0, 2), p01 = product(0, 1);
    Mask out[3] = {0, 0, 0};
    const std::vector<std::uint64_t>* prods[3] = {&p12, &p02, &p01};
    for (int s = 0; s < 3; ++s) {
      for (int v = 0; v < nv[s]; ++v)
        if (mask_has(m[s], v) && intersects(sh.rows[s][v], *prods[s])) out[s] |= bit(v);
    }
    for (int s = 0; s < 3; ++s)
      if (narrow(tc.slot[s], out[s]) == PropStatus::DeadEnd) return PropStatus::DeadEnd;
    return PropStatus::Ok;
  }

  // --- trigger state --------------------------------------------------------

  bool atom_entailed(const TrigNode& n) const {
    if (n.slot == kNoInstance) return n.mask != 0;
    return (c_.dom[n.slot] & ~n.mask) == 0;
  }
  bool atom_refuted(const TrigNode& n) const {
    if (n.slot == kNoInstance) return n.mask == 0;
    return (c_.dom[n.slot] & n.mask) == 0;
  }

  bool formula_holds(const TrigNode& n) const {
    switch (n.kind) {
      case TrigNode::Kind::Atom: return atom_entailed(n);
      case TrigNode::Kind::And:
        for (const auto& k : n.kids)
          if (!formula_holds(k)) return false;
        return true;
      case TrigNode::Kind::Or:
        for (const auto& k : n.kids)
          if (formula_holds(k)) return true;
        return false;
    }
    return false;
  }

  bool formula_refuted(const TrigNode& n) const {
    switch (n.kind) {
      case TrigNode::Kind::Atom: return atom_refuted(n);
      case TrigNode::Kind::And:
        for (const auto& k : n.kids)
          if (formula_refuted(k)) return true;
        return false;
      case TrigNode::Kind::Or:
        for (const auto& k : n.kids)
          if (!formula_refuted(k)) return false;
        return true;
    }
    return false;
  }

  bool lowering_may_fire(std::uint32_t l) const {
    if ((c_.fired >> l) & 1) return true;
    for (std::uint32_t ti : ctx_.comp.triggers_of_lowering[l]) {
      const CompiledTrigger& tr = ctx_.comp.triggers[ti];
      if ((tr.need & ~c_.fired) != 0) return true;  // dormant trigger, undecided
      if (!formula_refuted(tr.when)) return true;
    }
    return false;
  }

  bool lowerings_may_fire(std::uint64_t need) const {
    for (std::uint32_t l = 0; l < ctx_.bb.lowerings.size(); ++l)
      if (((need >> l) & 1) && !((c_.fired >> l) & 1) && !lowering_may_fire(l)) return false;
    return true;
  }

  PropStatus run_trigger(std::uint32_t ti) {
    const CompiledTrigger& tr = ctx_.comp.triggers[ti];
    if ((tr.need & ~c_.fired) != 0) return PropStatus::Ok;
    if (tr.lowering == kNoLowering || ((c_.fired >> tr.lowering) & 1)) return PropStatus::Ok;
    if (!formula_holds(tr.when)) return PropStatus::Ok;
    c_.fired |= std::uint64_t{1} << tr.lowering;
    for (std::uint32_t inst : ctx_.comp.lowering_insts[tr.lowering])
      if (live(inst)) mark_dirty(inst);
    return PropStatus::Ok;
  }

  // --- counters ---------------------------------------------------------------

  struct TermState {
    enum { Off, Entailed, Open, Maybe } status = Off;  // Maybe: behind an unfired lowering
    std::int64_t tmin = 0, tmax = 0;
  };

  void term_range(const CounterTerm& t, std::int64_t& tmin, std::int64_t& tmax) const {
    if (t.int_slot == kNoInstance) {
      tmin = tmax = t.const_val;
      return;
    }
    const auto& u = ctx_.table.universe_of(t.int_slot);
    Mask d = c_.dom[t.int_slot];
    tmin = kSatMax;
    tmax = 0;
    for (std::size_t v = 0; v < u.size(); ++v)
      if (mask_has(d, static_cast<int>(v))) {
        tmin = std::min(tmin, u[v]);
        tmax = std::max(tmax, u[v]);
      }
  }

  PropStatus run_counter(std::uint32_t k) {
    const CompiledCounter& cc = ctx_.comp.counters[k];
    bool sum = cc.op == CounterOp::Sum;
    std::vector<TermState> ts(cc.terms.size());
    std::int64_t lo = sum ? 0 : 1, hi = sum ? 0 : 1;
    for (std::size_t i = 0; i < cc.terms.size(); ++i) {
      const CounterTerm& t = cc.terms[i];
      TermState& s = ts[i];
      if ((t.need & ~c_.fired) != 0) {
        if (!lowerings_may_fire(t.need)) continue;  // never counts
        term_range(t, s.tmin, s.tmax);
        s.status = TermState::Maybe;
      } else {
        bool refuted = false, entailed = true;
        for (const auto& g : t.guard) {
          Mask d = c_.dom[g.slot];
          if ((d & g.mask) == 0) refuted = true;
          if ((d & ~g.mask) != 0) entailed = false;
        }
        if (refuted) continue;
        term_range(t, s.tmin, s.tmax);
        s.status = entailed ? TermState::Entailed : TermState::Open;
      }
      if (s.status == TermState::Entailed) {
        lo = sum ? sat_add(lo, s.tmin) : sat_mul(lo, s.tmin);
        hi = sum ? sat_add(hi, s.tmax) : sat_mul(hi, s.tmax);
      } else {
        // May be excluded: identity for the lower bound.
        if (sum) hi = sat_add(hi, std::max<std::int64_t>(s.tmax, 0));
        else hi = sat_mul(hi, std::max<std::int64_t>(s.tmax, 1));
      }
    }
    std::int64_t blo = lo, bhi = hi;
    for (const auto& b : cc.bounds) {
      if ((b.need & ~c_.fired) != 0) continue;
      switch (b.op) {
        case CmpOp::Le: bhi = std::min(bhi, b.rhs); break;
        case CmpOp::Lt: bhi = std::min(bhi, b.rhs - 1); break;
        case CmpOp::Ge: blo = std::max(blo, b.rhs); break;
        case CmpOp::Gt: blo = std::max(blo, b.rhs + 1); break;
        default: break;
      }
    }
    if (blo > bhi) return PropStatus::DeadEnd;
    c_.cnt[ctx_.table.instances[cc.counter_inst].counter_slot] = {blo, bhi};

    // Bound-driven pruning. L: the tightest upper bound; G: the tightest
    // lower bound. Both act through the aggregation's monotonicity.
    std::int64_t L = bhi, G = blo;
    if (hi > L) {
      for (std::size_t i = 0; i < cc.terms.size(); ++i) {
        const CounterTerm& t = cc.terms[i];
        const TermState& s = ts[i];
        if (s.status == TermState::Off) continue;
        if (s.status == TermState::Entailed && t.int_slot != kNoInstance &&
            lo != kSatMax && s.tmin > 0) {
          std::int64_t lo_wo = sum ? lo - s.tmin : lo / s.tmin;
          const auto& u = ctx_.table.universe_of(t.int_slot);
          Mask keep = 0;
          for (std::size_t v = 0; v < u.size(); ++v) {
            std::int64_t with = sum ? sat_add(lo_wo, u[v]) : sat_mul(lo_wo, u[v]);
            if (with <= L) keep |= bit(static_cast<int>(v));
          }
          if (narrow(t.int_slot, keep) == PropStatus::DeadEnd) return PropStatus::DeadEnd;
        }
        if (s.status == TermState::Open) {
          std::int64_t with = sum ? sat_add(lo, s.tmin) : sat_mul(lo, std::max<std::int64_t>(s.tmin, 1));
          if (with > L) {
            // The term cannot be included; negate its guard if one literal is open.
            const GuardLit* open_lit = nullptr;
            int open_count = 0;
            for (const auto& g : t.guard)
              if ((c_.dom[g.slot] & ~g.mask) != 0) {
                ++open_count;
                open_lit = &g;
              }
            if (open_count == 1) {
              if (narrow(open_lit->slot, ~open_lit->mask) == PropStatus::DeadEnd)
                return PropStatus::DeadEnd;
            } else if (open_count == 0) {
              return PropStatus::DeadEnd;
            }
          }
        }
      }
    }
    if (lo < G) {
      for (std::size_t i = 0; i < cc.terms.size(); ++i) {
        const CounterTerm& t = cc.terms[i];
        const TermState& s = ts[i];
        if (s.status == TermState::Off) continue;
        std::int64_t contrib = s.status == TermState::Entailed
                                   ? s.tmax
                                   : (sum ? std::max<std::int64_t>(s.tmax, 0)
                                          : std::max<std::int64_t>(s.tmax, 1));
        if (hi == kSatMax || contrib <= 0) continue;
        std::int64_t hi_wo = sum ? hi - contrib : hi / contrib;
        if (s.status == TermState::Entailed && t.int_slot != kNoInstance) {
          const auto& u = ctx_.table.universe_of(t.int_slot);
          Mask keep = 0;
          for (std::size_t v = 0; v < u.size(); ++v) {
            std::int64_t with = sum ? sat_add(hi_wo, u[v]) : sat_mul(hi_wo, u[v]);
            if (with >= G) keep |= bit(static_cast<int>(v));
          }
          if (narrow(t.int_slot, keep) == PropStatus::DeadEnd) return PropStatus::DeadEnd;
        }
        if (s.status == TermState::Open) {
          std::int64_t without = sum ? hi - contrib : hi / contrib;
          if (without < G) {
            // The term must be included: every guard literal holds.
            for (const auto& g : t.guard)
              if (narrow(g.slot, g.mask) == PropStatus::DeadEnd) return PropStatus::DeadEnd;
          }
        }
      }
    }
    return PropStatus::Ok;
  }

  // --- quotients ----------------------------------------------------------------

  PropStatus run_quotient(const QuotientElem& e) {
    if ((e.need & ~c_.fired) != 0) return PropStatus::Ok;
    constexpr Mask kFalse = bit(0), kTrue = bit(1);
    Mask member_dom = c_.dom[e.member_slot];
    bool member_entailed = (member_dom & ~e.member_mask) == 0;
    bool member_refuted = (member_dom & e.member_mask) == 0;

    struct PeerState {
      bool usable = false;   // live with both parts still possible
      bool dormant = false;  // behind a lowering that may still fire
      bool entailed = false;
    };
    std::vector<PeerState> ps(e.earlier.size());
    for (std::size_t i = 0; i < e.earlier.size(); ++i) {
      const QuotientPeer& p = e.earlier[i];
      if ((p.need & ~c_.fired) != 0) {
        if (lowerings_may_fire(p.need)) ps[i].dormant = true;
        continue;
      }
      Mask ed = c_.dom[p.equiv_slot], md = c_.dom[p.member_slot];
      bool eq_ref = (ed & p.equiv_mask) == 0, mem_ref = (md & p.member_mask) == 0;
      if (eq_ref || mem_ref) continue;
      ps[i].usable = true;
      ps[i].entailed = (ed & ~p.equiv_mask) == 0 && (md & ~p.member_mask) == 0;
    }

    if (member_refuted) {
      if (narrow(e.flag_inst, kFalse) == PropStatus::DeadEnd) return PropStatus::DeadEnd;
    }
    bool any_partner_entailed = false, any_partner_possible = false;
    for (const auto& s : ps) {
      any_partner_entailed |= s.entailed;
      any_partner_possible |= s.usable || s.dormant;
    }
    if (any_partner_entailed) {
      if (narrow(e.flag_inst, kFalse) == PropStatus::DeadEnd) return PropStatus::DeadEnd;
    }
    if (member_entailed && !any_partner_possible) {
      if (narrow(e.flag_inst, kTrue) == PropStatus::DeadEnd) return PropStatus::DeadEnd;
    }

    Mask flag = c_.dom[e.flag_inst];
    if (flag == kTrue) {
      if (narrow(e.member_slot, e.member_mask) == PropStatus::DeadEnd) return PropStatus::DeadEnd;
      for (std::size_t i = 0; i < e.earlier.size(); ++i) {
        if (!ps[i].usable) continue;
        const QuotientPeer& p = e.earlier[i];
        bool pm_ent = (c_.dom[p.member_slot] & ~p.member_mask) == 0;
        bool eq_ent = (c_.dom[p.equiv_slot] & ~p.equiv_mask) == 0;
        if (pm_ent) {
          if (narrow(p.equiv_slot, ~p.equiv_mask) == PropStatus::DeadEnd)
            return PropStatus::DeadEnd;
        }
        if (eq_ent) {
          if (narrow(p.member_slot, ~p.member_mask) == PropStatus::DeadEnd)
            return PropStatus::DeadEnd;
        }
      }
    } else if (flag == kFalse) {
      int possible = 0;
      const QuotientPeer* only = nullptr;
      bool only_live = false;
      for (std::size_t i = 0; i < e.earlier.size(); ++i) {
        if (ps[i].usable || ps[i].dormant) {
          ++possible;
          only = &e.earlier[i];
          only_live = ps[i].usable;
        }
      }
      if (member_entailed) {
        if (possible == 0) return PropStatus::DeadEnd;
        if (possible == 1 && only_live) {
          if (narrow(only->equiv_slot, only->equiv_mask) == PropStatus::DeadEnd)
            return PropStatus::DeadEnd;
          if (narrow(only->member_slot, only->member_mask) == PropStatus::DeadEnd)
            return PropStatus::DeadEnd;
        }
      } else if (!member_refuted && possible == 0) {
        if (narrow(e.member_slot, ~e.member_mask) == PropStatus::DeadEnd)
          return PropStatus::DeadEnd;
      }
    }
    return PropStatus::Ok;
  }

  const SpaceContext& ctx_;
  Candidate& c_;
  std::vector<std::uint32_t> queue_;
  std::vector<std::uint8_t> in_queue_;
  std::size_t qhead_ = 0;
  bool all_counters_ = false;
};

}  // namespace

PropStatus propagate(const SpaceContext& ctx, Candidate& c, std::vector<std::uint32_t> dirty) {
  Engine e(ctx, c);
  for (std::uint32_t i : dirty) e.mark_dirty(i);
  return e.run();
}

PropStatus make_root(const SpaceContext& ctx, Candidate& out) {
  out.dom.assign(ctx.table.instances.size(), 0);
  for (std::uint32_t i = 0; i < ctx.table.instances.size(); ++i)
    out.dom[i] = ctx.table.instances[i].initial;
  out.cnt.assign(ctx.table.num_counter_slots, Interval{0, kSatMax});
  out.fired = 0;
  out.generation = 0;
  Engine e(ctx, out);
  e.mark_all_counters();
  for (std::uint32_t i = 0; i < ctx.table.instances.size(); ++i)
    if (instance_live(ctx, out, i)) e.mark_dirty(i);
  return e.run();
}

PropStatus apply_decision(const SpaceContext& ctx, const Candidate& parent, std::uint32_t inst,
                          int value, Candidate& out) {
  return apply_restriction(ctx, parent, inst, bit(value), out);
}

PropStatus apply_restriction(const SpaceContext& ctx, const Candidate& parent, std::uint32_t inst,
                             Mask keep, Candidate& out) {
  out = parent;
  out.generation = parent.generation + 1;
  if (!instance_live(ctx, out, inst)) return PropStatus::DeadEnd;
  Engine e(ctx, out);
  if (e.narrow(inst, keep) == PropStatus::DeadEnd) return PropStatus::DeadEnd;
  return e.run();
}

PropStatus restrict_only(const SpaceContext& ctx, Candidate& c, std::uint32_t inst, Mask keep) {
  (void)ctx;
  Mask nd = c.dom[inst] & keep;
  c.dom[inst] = nd;
  return nd == 0 ? PropStatus::DeadEnd : PropStatus::Ok;
}

}  // namespace ispace
