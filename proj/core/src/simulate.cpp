#include "ispace/simulate.hpp"

#include <algorithm>
#include <functional>
#include <map>

namespace ispace {

namespace {

struct Simulator {
  const Kernel& k;
  const LoopNest& l;
  const MachineParams& mp;
  CostReport rep;
  std::map<ObjId, const NestNode*> node_of;
  std::vector<const NestNode*> stack;

  Simulator(const Kernel& kernel, const LoopNest& nest, const MachineParams& machine)
      : k(kernel), l(nest), mp(machine) {
    std::function<void(const NestNode&)> index = [&](const NestNode& n) {
      if (n.kind == NestNode::Kind::Dim)
        for (ObjId m : n.dims) node_of[m] = &n;
      for (const NestNode& ch : n.children) index(ch);
    };
    for (const NestNode& r : l.roots) index(r);
  }

  // Step between consecutive values of a loop variable inside one address.
  // Merged dimensions reach the same node through several terms; their
  // contributions add up.
  std::int64_t stride_of(const NestNode* node, const InductionVar& iv) const {
    std::int64_t s = 0;
    for (const AddrTerm& term : iv.terms) {
      if (node_of.at(term.dim) != node) continue;
      std::int64_t mult = term.base;
      for (ObjId sd : term.size_dims) mult = sat_mul(mult, l.sizes.at(sd));
      s = sat_add(s, mult);
    }
    return s;
  }

  // Neighbouring lanes of the finest parallel level decide the access
  // pattern; without threads the innermost sequential dimension present in
  // the address does.
  bool coalesced(const InstInfo& ii) const {
    if (ii.ivar == kNoIndex) return true;
    const InductionVar& iv = k.ivars[ii.ivar];
    for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
      if ((*it)->dim_kind != NestDimKind::Thread) continue;
      return stride_of(*it, iv) <= 1;
    }
    for (auto it = stack.rbegin(); it != stack.rend(); ++it) {
      if ((*it)->dim_kind == NestDimKind::Thread || (*it)->dim_kind == NestDimKind::Block)
        continue;
      std::int64_t s = stride_of(*it, iv);
      if (s != 0) return s == 1;
    }
    return true;
  }

  // Lanes of a vector access scatter unless the vector dimension walks the
  // address with unit stride (or broadcasts).
  std::int64_t vector_factor(const InstInfo& ii) const {
    if (ii.ivar == kNoIndex) return 1;
    const InductionVar& iv = k.ivars[ii.ivar];
    std::int64_t f = 1;
    for (const NestNode* n : stack) {
      if (n->dim_kind != NestDimKind::Vector) continue;
      std::int64_t s = stride_of(n, iv);
      if (s > 1) f = sat_mul(f, n->size);
    }
    return f;
  }

  void visit(const NestNode& n, std::int64_t seq) {
    switch (n.kind) {
      case NestNode::Kind::Barrier:
        rep.sync = sat_add(rep.sync, sat_mul(seq, mp.barrier_cost));
        return;
      case NestNode::Kind::Inst: {
        const InstInfo& ii = k.insts.at(n.inst);
        if (ii.op == Op::Load || ii.op == Op::Store) {
          const MemCost& e = cost_entry(mp, l.mem_space.at(ii.region), l.cache.at(n.inst));
          AccessCost ac;
          ac.inst = n.inst;
          ac.coalesced = coalesced(ii);
          ac.per_access = ac.coalesced ? e.coalesced : e.scattered;
          ac.trips = sat_mul(seq, vector_factor(ii));
          rep.memory = sat_add(rep.memory, sat_mul(ac.trips, ac.per_access));
          rep.accesses.push_back(ac);
        } else {
          rep.compute = sat_add(rep.compute, sat_mul(seq, mp.op_cost));
        }
        return;
      }
      case NestNode::Kind::Dim: break;
    }
    std::int64_t inner = seq;
    switch (n.dim_kind) {
      case NestDimKind::Loop:
        rep.compute = sat_add(rep.compute, sat_mul(sat_mul(seq, n.size), mp.loop_overhead));
        inner = sat_mul(seq, n.size);
        break;
      case NestDimKind::Unroll:
        inner = sat_mul(seq, n.size);
        break;
      case NestDimKind::Block:
      case NestDimKind::Thread:
      case NestDimKind::Vector:
        break;
    }
    stack.push_back(&n);
    for (const NestNode& ch : n.children) visit(ch, inner);
    stack.pop_back();
  }

  CostReport run() {
    for (const NestNode& r : l.roots) visit(r, 1);
    std::int64_t blocks = 1;
    for (std::int64_t b : l.block_shape) blocks = sat_mul(blocks, b);
    std::int64_t cap = std::max<std::int64_t>(1, mp.parallel_blocks);
    rep.block_serial = std::max<std::int64_t>(1, (blocks + cap - 1) / cap);
    rep.total = sat_mul(sat_add(std::max(rep.compute, rep.memory), rep.sync), rep.block_serial);
    return rep;
  }
};

}  // namespace

CostReport evaluate(const Kernel& k, const LoopNest& l, const MachineParams& mp) {
  return Simulator(k, l, mp).run();
}

}  // namespace ispace
