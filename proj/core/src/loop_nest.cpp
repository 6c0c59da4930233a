#include "ispace/loop_nest.hpp"

#include <algorithm>
#include <functional>
#include <numeric>
#include <set>
#include <sstream>
#include <stdexcept>

namespace ispace {

const char* nest_dim_name(NestDimKind k) {
  switch (k) {
    case NestDimKind::Loop: return "loop";
    case NestDimKind::Block: return "block";
    case NestDimKind::Thread: return "thread";
    case NestDimKind::Unroll: return "unroll";
    case NestDimKind::Vector: return "vector";
  }
  return "?";
}

namespace {

struct UnionFind {
  std::vector<std::uint32_t> p;
  explicit UnionFind(std::size_t n) : p(n) { std::iota(p.begin(), p.end(), 0u); }
  std::uint32_t find(std::uint32_t x) {
    while (p[x] != x) x = p[x] = p[p[x]];
    return x;
  }
  void unite(std::uint32_t a, std::uint32_t b) { p[find(a)] = find(b); }
};

// Reads decided values out of a candidate by choice name. Everything the
// reconstruction needs is a singleton by precondition.
struct Decided {
  const SpaceContext& ctx;
  const Candidate& c;

  std::uint32_t choice(const std::string& name) const {
    std::uint32_t ch = ctx.table.find_choice(name);
    if (ch == ~std::uint32_t{0}) throw std::logic_error("space lacks choice " + name);
    return ch;
  }

  int value(std::uint32_t ch, const ObjId* args, std::size_t n) const {
    InstanceRef r = ctx.table.resolve(ch, args, n);
    if (r.inst == kNoInstance) throw std::logic_error("missing choice instance");
    Mask m = ctx.table.oriented(ch, c.dom[r.inst], r.swapped);
    if (!mask_single(m)) throw std::invalid_argument("candidate is not fully specified");
    return mask_first(m);
  }

  const std::string& name(std::uint32_t ch, const ObjId* args, std::size_t n) const {
    return ctx.table.choices[ch].values[value(ch, args, n)];
  }

  std::int64_t integer(std::uint32_t ch, ObjId arg) const {
    InstanceRef r = ctx.table.resolve(ch, &arg, 1);
    if (r.inst == kNoInstance) throw std::logic_error("missing choice instance");
    Mask m = c.dom[r.inst];
    if (!mask_single(m)) throw std::invalid_argument("candidate is not fully specified");
    return ctx.table.universe_of(r.inst)[mask_first(m)];
  }
};

int value_index(const InstanceTable& t, std::uint32_t ch, const std::string& name) {
  const auto& vals = t.choices[ch].values;
  for (std::size_t i = 0; i < vals.size(); ++i)
    if (vals[i] == name) return static_cast<int>(i);
  throw std::logic_error("choice has no value " + name);
}

// A statement of the tree under construction: one fused dimension class or
// one instruction. Relations are read through the class representative.
struct Item {
  bool is_dim = false;
  ObjId obj = kNoObj;               // representative
  std::vector<ObjId> members;       // dims of the fusion class
};

bool subtree_has_thread(const NestNode& n) {
  if (n.kind == NestNode::Kind::Dim && n.dim_kind == NestDimKind::Thread) return true;
  for (const NestNode& ch : n.children)
    if (subtree_has_thread(ch)) return true;
  return false;
}

// A barrier goes in front of every thread nest that runs after another one:
// fused into one kernel, the second nest must not start before the first
// finished.
void insert_barriers(std::vector<NestNode>& children) {
  for (NestNode& ch : children) insert_barriers(ch.children);
  bool seen = false;
  for (std::size_t i = 0; i < children.size(); ++i) {
    if (children[i].kind == NestNode::Kind::Barrier) continue;
    if (!subtree_has_thread(children[i])) continue;
    if (seen) {
      NestNode b;
      b.kind = NestNode::Kind::Barrier;
      children.insert(children.begin() + static_cast<std::ptrdiff_t>(i), std::move(b));
      ++i;
    }
    seen = true;
  }
}

}  // namespace

LoopNest reconstruct(const Kernel& k, const SpaceContext& ctx, const Candidate& c) {
  if (!fully_specified(ctx, c))
    throw std::invalid_argument("reconstruct needs a fully specified candidate");

  Decided d{ctx, c};
  const InstanceTable& t = ctx.table;
  std::uint32_t order_c = d.choice("order");
  std::uint32_t kind_c = d.choice("dim_kind");
  std::uint32_t size_c = d.choice("size");
  std::uint32_t level_c = d.choice("thread_level");
  std::uint32_t space_c = d.choice("mem_space");
  std::uint32_t cache_c = d.choice("cache");

  const int vBefore = value_index(t, order_c, "BEFORE");
  const int vInner = value_index(t, order_c, "INNER");
  const int vOuter = value_index(t, order_c, "OUTER");
  const int vMerged = value_index(t, order_c, "MERGED");
  const int vMapped = value_index(t, level_c, "MAPPED");
  const int vLvlOuter = value_index(t, level_c, "OUTER");

  auto rel = [&](ObjId a, ObjId b) {
    ObjId args[2] = {a, b};
    return d.value(order_c, args, 2);
  };
  auto live = [&](ObjId o) {
    std::uint32_t lw = ctx.bb.obj(o).lowering;
    return lw == kNoLowering || ((c.fired >> lw) & 1u);
  };

  std::vector<ObjId> dims, insts;
  for (const auto& [id, info] : k.dims) {
    (void)info;
    dims.push_back(id);
  }
  for (const auto& [id, info] : k.insts) {
    (void)info;
    if (live(id)) insts.push_back(id);
  }

  LoopNest out;
  for (ObjId dim : dims)
    if (k.dims.at(dim).is_static) out.sizes[dim] = d.integer(size_c, dim);
  for (ObjId dim : dims)
    if (!k.dims.at(dim).is_static) out.sizes[dim] = dim_extent(k, dim, out.sizes);
  for (const auto& [r, info] : k.regions) {
    (void)info;
    if (!live(r)) continue;
    out.mem_space[r] =
        d.name(space_c, &r, 1) == "SHARED" ? MemSpaceKind::Shared : MemSpaceKind::Global;
  }
  for (ObjId i : insts) {
    Op op = k.insts.at(i).op;
    if (op != Op::Load && op != Op::Store) continue;
    const std::string& cn = d.name(cache_c, &i, 1);
    out.cache[i] = cn == "L1"          ? CacheKind::L1
                   : cn == "L2"        ? CacheKind::L2
                   : cn == "READ_ONLY" ? CacheKind::ReadOnly
                                       : CacheKind::None;
  }

  // fusion classes
  UnionFind uf(dims.size());
  for (std::size_t i = 0; i < dims.size(); ++i)
    for (std::size_t j = i + 1; j < dims.size(); ++j)
      if (rel(dims[i], dims[j]) == vMerged) uf.unite(static_cast<std::uint32_t>(i),
                                                     static_cast<std::uint32_t>(j));
  std::map<std::uint32_t, std::vector<ObjId>> classes;
  for (std::size_t i = 0; i < dims.size(); ++i)
    classes[uf.find(static_cast<std::uint32_t>(i))].push_back(dims[i]);

  std::vector<Item> items;
  for (const auto& [root, members] : classes) {
    (void)root;
    Item it;
    it.is_dim = true;
    it.obj = members.front();
    it.members = members;
    items.push_back(std::move(it));
  }
  for (ObjId i : insts) {
    Item it;
    it.obj = i;
    items.push_back(std::move(it));
  }

  // fused dims must agree on how they relate to everything else
  for (const Item& it : items) {
    if (!it.is_dim || it.members.size() < 2) continue;
    for (const Item& other : items) {
      if (other.obj == it.obj) continue;
      int r0 = rel(it.members.front(), other.obj);
      for (std::size_t m = 1; m < it.members.size(); ++m)
        if (rel(it.members[m], other.obj) != r0)
          throw std::logic_error("fused dimensions disagree on an order");
    }
  }

  // parent: the innermost enclosing class
  std::map<ObjId, ObjId> parent;  // item -> item, kNoObj at top level
  for (const Item& it : items) {
    std::vector<const Item*> enclosing;
    for (const Item& other : items) {
      if (other.obj == it.obj || !other.is_dim) continue;
      if (rel(it.obj, other.obj) == vInner) enclosing.push_back(&other);
    }
    for (std::size_t a = 0; a < enclosing.size(); ++a)
      for (std::size_t b = a + 1; b < enclosing.size(); ++b) {
        int r = rel(enclosing[a]->obj, enclosing[b]->obj);
        if (r != vInner && r != vOuter)
          throw std::logic_error("enclosing dimensions of one statement do not nest");
      }
    if (enclosing.empty()) {
      parent[it.obj] = kNoObj;
      continue;
    }
    const Item* inner = nullptr;
    for (const Item* cand : enclosing) {
      bool all = true;
      for (const Item* other : enclosing)
        if (other != cand && rel(cand->obj, other->obj) != vInner) all = false;
      if (all) {
        inner = cand;
        break;
      }
    }
    if (!inner) throw std::logic_error("no innermost enclosing dimension");
    parent[it.obj] = inner->obj;
  }

  // program order among siblings
  std::map<ObjId, std::vector<const Item*>> siblings;
  for (const Item& it : items) siblings[parent.at(it.obj)].push_back(&it);
  for (auto& [p, sibs] : siblings) {
    (void)p;
    for (std::size_t a = 0; a < sibs.size(); ++a)
      for (std::size_t b = a + 1; b < sibs.size(); ++b) {
        int r = rel(sibs[a]->obj, sibs[b]->obj);
        if (r == vInner || r == vOuter || r == vMerged)
          throw std::logic_error("siblings are not sequentially ordered");
      }
    std::sort(sibs.begin(), sibs.end(),
              [&](const Item* a, const Item* b) { return rel(a->obj, b->obj) == vBefore; });
  }

  std::function<NestNode(const Item&)> build = [&](const Item& it) {
    NestNode n;
    if (it.is_dim) {
      n.kind = NestNode::Kind::Dim;
      n.dims = it.members;
      n.size = out.sizes.at(it.obj);
      const std::string& kn = d.name(kind_c, &it.obj, 1);
      n.dim_kind = kn == "LOOP"     ? NestDimKind::Loop
                   : kn == "BLOCK"  ? NestDimKind::Block
                   : kn == "THREAD" ? NestDimKind::Thread
                   : kn == "UNROLL" ? NestDimKind::Unroll
                                    : NestDimKind::Vector;
    } else {
      n.kind = NestNode::Kind::Inst;
      n.inst = it.obj;
    }
    auto ch = siblings.find(it.obj);
    if (ch != siblings.end())
      for (const Item* sub : ch->second) n.children.push_back(build(*sub));
    return n;
  };
  for (const Item* top : siblings[kNoObj]) out.roots.push_back(build(*top));
  insert_barriers(out.roots);

  // hardware thread levels: MAPPED classes ordered outermost first
  std::vector<ObjId> treps;
  for (const Item& it : items)
    if (it.is_dim && d.name(kind_c, &it.obj, 1) == "THREAD") treps.push_back(it.obj);
  auto lvl = [&](ObjId a, ObjId b) {
    ObjId args[2] = {a, b};
    return d.value(level_c, args, 2);
  };
  UnionFind tuf(treps.size());
  for (std::size_t i = 0; i < treps.size(); ++i)
    for (std::size_t j = i + 1; j < treps.size(); ++j)
      if (lvl(treps[i], treps[j]) == vMapped)
        tuf.unite(static_cast<std::uint32_t>(i), static_cast<std::uint32_t>(j));
  std::map<std::uint32_t, std::vector<ObjId>> tlevels;
  for (std::size_t i = 0; i < treps.size(); ++i)
    tlevels[tuf.find(static_cast<std::uint32_t>(i))].push_back(treps[i]);
  std::vector<std::vector<ObjId>> levels;
  for (auto& [root, members] : tlevels) {
    (void)root;
    levels.push_back(members);
  }
  std::sort(levels.begin(), levels.end(), [&](const auto& a, const auto& b) {
    return lvl(a.front(), b.front()) == vLvlOuter;
  });
  std::map<ObjId, int> level_of;
  for (std::size_t i = 0; i < levels.size(); ++i) {
    out.thread_shape.push_back(out.sizes.at(levels[i].front()));
    for (ObjId r : levels[i]) level_of[r] = static_cast<int>(i);
  }

  // grid levels: block classes are totally nested
  std::vector<ObjId> breps;
  for (const Item& it : items)
    if (it.is_dim && d.name(kind_c, &it.obj, 1) == "BLOCK") breps.push_back(it.obj);
  std::sort(breps.begin(), breps.end(),
            [&](ObjId a, ObjId b) { return rel(a, b) == vOuter; });
  std::map<ObjId, int> block_of;
  for (std::size_t i = 0; i < breps.size(); ++i) {
    out.block_shape.push_back(out.sizes.at(breps[i]));
    block_of[breps[i]] = static_cast<int>(i);
  }

  std::function<void(NestNode&)> annotate = [&](NestNode& n) {
    if (n.kind == NestNode::Kind::Dim) {
      auto tl = level_of.find(n.dims.front());
      if (tl != level_of.end()) n.thread_level = tl->second;
      auto bl = block_of.find(n.dims.front());
      if (bl != block_of.end()) n.block_level = bl->second;
    }
    for (NestNode& ch : n.children) annotate(ch);
  };
  for (NestNode& r : out.roots) annotate(r);
  return out;
}

namespace {

struct TreePos {
  std::vector<int> path;
  const NestNode* node = nullptr;
};

void collect_positions(const std::vector<NestNode>& children, std::vector<int>& path,
                       std::map<ObjId, TreePos>& pos) {
  for (std::size_t i = 0; i < children.size(); ++i) {
    const NestNode& ch = children[i];
    if (ch.kind == NestNode::Kind::Barrier) continue;
    path.push_back(static_cast<int>(i));
    if (ch.kind == NestNode::Kind::Dim) {
      for (ObjId m : ch.dims) pos[m] = TreePos{path, &ch};
    } else {
      pos[ch.inst] = TreePos{path, &ch};
    }
    collect_positions(ch.children, path, pos);
    path.pop_back();
  }
}

}  // namespace

std::map<std::pair<ObjId, ObjId>, std::string> derive_orders(const LoopNest& l) {
  std::map<ObjId, TreePos> pos;
  std::vector<int> path;
  collect_positions(l.roots, path, pos);

  std::map<std::pair<ObjId, ObjId>, std::string> out;
  for (auto a = pos.begin(); a != pos.end(); ++a) {
    for (auto b = std::next(a); b != pos.end(); ++b) {
      const TreePos& pa = a->second;
      const TreePos& pb = b->second;
      std::string v;
      if (pa.node == pb.node) {
        v = "MERGED";
      } else {
        std::size_t n = std::min(pa.path.size(), pb.path.size());
        std::size_t i = 0;
        while (i < n && pa.path[i] == pb.path[i]) ++i;
        if (i == n)
          v = pa.path.size() < pb.path.size() ? "OUTER" : "INNER";
        else
          v = pa.path[i] < pb.path[i] ? "BEFORE" : "AFTER";
      }
      out[{a->first, b->first}] = std::move(v);
    }
  }
  return out;
}

namespace {

struct Emitter {
  const Kernel& k;
  const LoopNest& l;
  std::ostringstream os;
  std::map<const NestNode*, std::string> var;      // loop variable per dim node
  std::map<const NestNode*, std::int64_t> unrolled;  // constant index per replica
  std::map<ObjId, const NestNode*> node_of;        // dim -> owning node
  std::map<std::uint32_t, bool> comm_fired;
  int next_loop = 0;
  int next_unroll = 0;
  int next_vec = 0;

  static constexpr std::int64_t kReplicateLimit = 8;

  explicit Emitter(const Kernel& kernel, const LoopNest& nest) : k(kernel), l(nest) {
    // Names are fixed up front so replicated unroll bodies reuse them.
    std::set<ObjId> present;
    std::function<void(const NestNode&)> index = [&](const NestNode& n) {
      if (n.kind == NestNode::Kind::Inst) present.insert(n.inst);
      if (n.kind == NestNode::Kind::Dim) {
        for (ObjId m : n.dims) node_of[m] = &n;
        switch (n.dim_kind) {
          case NestDimKind::Block: var[&n] = "b" + std::to_string(n.block_level); break;
          case NestDimKind::Thread: var[&n] = "t" + std::to_string(n.thread_level); break;
          case NestDimKind::Loop: var[&n] = "i" + std::to_string(next_loop++); break;
          case NestDimKind::Vector: var[&n] = "v" + std::to_string(next_vec++); break;
          case NestDimKind::Unroll:
            if (n.size > kReplicateLimit) var[&n] = "u" + std::to_string(next_unroll++);
            break;
        }
      }
      for (const NestNode& ch : n.children) index(ch);
    };
    for (const NestNode& r : l.roots) index(r);
    for (std::size_t ci = 0; ci < k.comms.size(); ++ci)
      comm_fired[static_cast<std::uint32_t>(ci)] = present.count(k.comms[ci].store) != 0;
  }

  std::string obj_name(ObjId o) const { return k.bb.obj(o).name; }

  std::string members_text(const NestNode& n) const {
    std::string s;
    for (std::size_t i = 0; i < n.dims.size(); ++i) {
      if (i) s += " + ";
      s += obj_name(n.dims[i]);
    }
    return s;
  }

  // The register an instruction defines. Reductions accumulate in place, so
  // they write the register their initializer handed over.
  std::string reg(ObjId inst) const {
    const InstInfo& ii = k.insts.at(inst);
    for (const Operand& o : ii.operands) {
      if (o.kind != Operand::Kind::Reduce) continue;
      ObjId src = o.init;
      if (o.comm != kNoIndex && comm_fired.at(o.comm)) src = k.comms[o.comm].load;
      return reg(src);
    }
    return "r_" + obj_name(inst);
  }

  std::string operand_text(const Operand& o, ObjId self) const {
    switch (o.kind) {
      case Operand::Kind::Const: return std::to_string(o.value);
      case Operand::Kind::Input: return o.input;
      case Operand::Kind::IndVar: return "(" + addr_text(k.ivars[o.ivar]) + ")";
      case Operand::Kind::Produced: return reg(o.producer);
      case Operand::Kind::Mapped:
        if (o.comm != kNoIndex && comm_fired.at(o.comm)) return reg(k.comms[o.comm].load);
        return reg(o.producer);
      case Operand::Kind::Reduce: return reg(self);
    }
    return "?";
  }

  std::string addr_text(const InductionVar& iv) const {
    std::string parts;
    std::int64_t constant = iv.offset;
    for (const AddrTerm& term : iv.terms) {
      std::int64_t mult = term.base;
      for (ObjId sd : term.size_dims) mult *= l.sizes.at(sd);
      const NestNode* n = node_of.at(term.dim);
      auto uc = unrolled.find(n);
      if (uc != unrolled.end()) {
        constant += uc->second * mult;
        continue;
      }
      std::string part = var.at(n);
      if (mult != 1) part += "*" + std::to_string(mult);
      if (!parts.empty()) parts += " + ";
      parts += part;
    }
    if (parts.empty()) return std::to_string(constant);
    if (constant != 0) parts += " + " + std::to_string(constant);
    return parts;
  }

  std::string vec_suffix(std::int64_t width) const {
    return width > 1 ? ".v" + std::to_string(width) : "";
  }

  std::string access_note(ObjId inst) const {
    const InstInfo& ii = k.insts.at(inst);
    if (l.mem_space.at(ii.region) == MemSpaceKind::Shared) return "shared";
    switch (l.cache.at(inst)) {
      case CacheKind::L1: return "global via L1";
      case CacheKind::L2: return "global via L2";
      case CacheKind::ReadOnly: return "global via read-only path";
      case CacheKind::None: return "global uncached";
    }
    return "global";
  }

  void line(int depth, const std::string& text) {
    for (int i = 0; i < depth; ++i) os << "  ";
    os << text << "\n";
  }

  void emit_inst(const NestNode& n, int depth, std::int64_t vec_width) {
    const InstInfo& ii = k.insts.at(n.inst);
    std::string sfx = vec_suffix(vec_width);
    switch (ii.op) {
      case Op::Load:
        line(depth, reg(n.inst) + " = load" + sfx + " " + obj_name(ii.region) + "[" +
                        addr_text(k.ivars[ii.ivar]) + "]  // " + access_note(n.inst));
        break;
      case Op::Store:
        line(depth, "store" + sfx + " " + obj_name(ii.region) + "[" +
                        addr_text(k.ivars[ii.ivar]) + "], " +
                        operand_text(ii.operands.front(), n.inst) + "  // " +
                        access_note(n.inst));
        break;
      case Op::Cast:
        line(depth, reg(n.inst) + " = " + operand_text(ii.operands.front(), n.inst));
        break;
      default: {
        std::string args;
        for (std::size_t i = 0; i < ii.operands.size(); ++i) {
          if (i) args += ", ";
          args += operand_text(ii.operands[i], n.inst);
        }
        line(depth, reg(n.inst) + " = " + std::string(op_name(ii.op)) + sfx + "(" + args + ")");
        break;
      }
    }
  }

  void emit_node(const NestNode& n, int depth, std::int64_t vec_width) {
    switch (n.kind) {
      case NestNode::Kind::Barrier:
        line(depth, "barrier");
        return;
      case NestNode::Kind::Inst:
        emit_inst(n, depth, vec_width);
        return;
      case NestNode::Kind::Dim: break;
    }
    std::string range = "0.." + std::to_string(n.size);
    switch (n.dim_kind) {
      case NestDimKind::Block: {
        line(depth, "par " + var.at(&n) + " in " + range + ":  // block level " +
                        std::to_string(n.block_level) + ": " + members_text(n));
        emit_children(n, depth + 1, vec_width);
        return;
      }
      case NestDimKind::Thread: {
        line(depth, "par " + var.at(&n) + " in " + range + ":  // thread level " +
                        std::to_string(n.thread_level) + ": " + members_text(n));
        emit_children(n, depth + 1, vec_width);
        return;
      }
      case NestDimKind::Loop: {
        line(depth, "for " + var.at(&n) + " in " + range + ":  // " + members_text(n));
        emit_children(n, depth + 1, vec_width);
        return;
      }
      case NestDimKind::Vector: {
        line(depth, "vec " + var.at(&n) + " in " + range + ":  // " + members_text(n));
        emit_children(n, depth + 1, vec_width * n.size);
        return;
      }
      case NestDimKind::Unroll: {
        if (n.size <= kReplicateLimit) {
          line(depth, "// unroll " + members_text(n) + " x" + std::to_string(n.size));
          for (std::int64_t i = 0; i < n.size; ++i) {
            unrolled[&n] = i;
            line(depth, "// lane " + std::to_string(i));
            emit_children(n, depth + 1, vec_width);
          }
          unrolled.erase(&n);
        } else {
          line(depth, "unroll " + var.at(&n) + " in " + range + ":  // " + members_text(n));
          emit_children(n, depth + 1, vec_width);
        }
        return;
      }
    }
  }

  void emit_children(const NestNode& n, int depth, std::int64_t vec_width) {
    for (const NestNode& ch : n.children) emit_node(ch, depth, vec_width);
  }

  std::string run() {
    os << "kernel " << k.name << "\n";
    os << "// grid: blocks=[";
    for (std::size_t i = 0; i < l.block_shape.size(); ++i)
      os << (i ? ", " : "") << l.block_shape[i];
    os << "] threads=[";
    for (std::size_t i = 0; i < l.thread_shape.size(); ++i)
      os << (i ? ", " : "") << l.thread_shape[i];
    os << "]\n";
    for (const NestNode& r : l.roots) emit_node(r, 0, 1);
    return os.str();
  }
};

}  // namespace

std::string emit_source(const Kernel& k, const LoopNest& l) { return Emitter(k, l).run(); }

}  // namespace ispace
