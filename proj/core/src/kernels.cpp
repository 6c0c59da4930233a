#include "ispace/kernels.hpp"

#include <algorithm>
#include <stdexcept>

namespace ispace {

const char* op_name(Op op) {
  switch (op) {
    case Op::Add: return "add";
    case Op::Mul: return "mul";
    case Op::Mad: return "mad";
    case Op::Cast: return "cast";
    case Op::Load: return "load";
    case Op::Store: return "store";
  }
  return "?";
}

std::int64_t dim_extent(const Kernel& k, ObjId dim,
                        const std::map<ObjId, std::int64_t>& sizes) {
  const DimInfo& d = k.dims.at(dim);
  if (d.is_static) return sizes.at(dim);
  const LogicalInfo& l = k.logicals.at(d.logical);
  std::int64_t e = l.extent;
  for (ObjId t : l.tiles) e /= sizes.at(t);
  return e;
}

std::int64_t eval_addr(const Kernel& k, const InductionVar& iv,
                       const std::map<ObjId, std::int64_t>& indices,
                       const std::map<ObjId, std::int64_t>& sizes) {
  (void)k;
  std::int64_t a = iv.offset;
  for (const AddrTerm& t : iv.terms) {
    std::int64_t stride = t.base;
    for (ObjId d : t.size_dims) stride *= sizes.at(d);
    a += indices.at(t.dim) * stride;
  }
  return a;
}

namespace {

struct NestAxis {
  ObjId logical = kNoObj;
  std::vector<ObjId> levels;  // stride-descending: remainder first, then tiles
};

class KernelBuilder {
 public:
  explicit KernelBuilder(std::string name) { k_.name = std::move(name); }

  NestAxis axis(const std::string& label, std::int64_t extent,
                const std::vector<std::vector<std::int64_t>>& universes) {
    if (extent <= 0) throw std::invalid_argument("axis extent must be positive");
    check_divisibility(label, extent, universes);

    NestAxis ax;
    ax.logical = k_.bb.add_object(label);
    LogicalInfo li;
    li.extent = extent;

    // The remainder covers whatever the tiles leave. When every universe
    // combination consumes the extent exactly there is nothing left to cover.
    if (!universes.empty() && products_equal(extent, universes)) {
      // fully tiled, no remainder dim
    } else {
      ObjId rem = k_.bb.add_object(label + "_r");
      DimInfo di;
      di.logical = ax.logical;
      k_.dims[rem] = di;
      li.tiled = rem;
      ax.levels.push_back(rem);
    }
    for (std::size_t j = 0; j < universes.size(); ++j) {
      ObjId t = k_.bb.add_object(label + std::to_string(j));
      DimInfo di;
      di.logical = ax.logical;
      di.is_static = true;
      di.sizes = universes[j];
      k_.dims[t] = di;
      li.tiles.push_back(t);
      ax.levels.push_back(t);
    }
    k_.logicals[ax.logical] = li;
    return ax;
  }

  ObjId region(const std::string& name, std::int64_t elems, bool input) {
    if (elems <= 0) throw std::invalid_argument("region must hold elements");
    ObjId r = k_.bb.add_object(name);
    RegionInfo ri;
    ri.elems = elems;
    ri.input = input;
    k_.regions[r] = ri;
    return r;
  }

  ObjId inst(const std::string& name, Op op, std::vector<ObjId> dims,
             std::vector<Operand> operands = {}, ObjId region = kNoObj,
             std::uint32_t ivar = kNoIndex) {
    ObjId i = k_.bb.add_object(name);
    InstInfo ii;
    ii.op = op;
    ii.dims = std::move(dims);
    ii.operands = std::move(operands);
    ii.region = region;
    ii.ivar = ivar;
    k_.insts[i] = std::move(ii);
    return i;
  }

  std::uint32_t ivar(InductionVar iv) {
    k_.ivars.push_back(std::move(iv));
    return static_cast<std::uint32_t>(k_.ivars.size() - 1);
  }

  // Appends the terms addressing one axis: base counts elements per unit of
  // the innermost tile; each enclosing level multiplies the sizes inside it.
  void addr_axis(InductionVar& iv, const NestAxis& ax, std::int64_t base) {
    const LogicalInfo& li = k_.logicals.at(ax.logical);
    for (ObjId lvl : ax.levels) {
      AddrTerm t;
      t.dim = lvl;
      t.base = base;
      if (lvl == li.tiled) {
        t.size_dims = li.tiles;
      } else {
        auto it = std::find(li.tiles.begin(), li.tiles.end(), lvl);
        t.size_dims.assign(it + 1, li.tiles.end());
      }
      iv.terms.push_back(t);
    }
  }

  static Operand mapped(ObjId producer, const std::vector<NestAxis>& src,
                        const std::vector<NestAxis>& dst) {
    Operand o;
    o.kind = Operand::Kind::Mapped;
    o.producer = producer;
    o.pairs = zip(src, dst);
    return o;
  }

  static Operand reduce(ObjId init, const std::vector<NestAxis>& src,
                        const std::vector<NestAxis>& dst,
                        const NestAxis& reduce_axis) {
    Operand o;
    o.kind = Operand::Kind::Reduce;
    o.init = init;
    o.pairs = zip(src, dst);
    o.reduce_dims = reduce_axis.levels;
    return o;
  }

  static Operand produced(ObjId p) {
    Operand o;
    o.kind = Operand::Kind::Produced;
    o.producer = p;
    return o;
  }

  static Operand constant(std::int64_t v) {
    Operand o;
    o.value = v;
    return o;
  }

  static Operand input(std::string name) {
    Operand o;
    o.kind = Operand::Kind::Input;
    o.input = std::move(name);
    return o;
  }

  Kernel finish() {
    synth_comms();
    fill_sets();
    return std::move(k_);
  }

 private:
  Kernel k_;

  static bool products_equal(std::int64_t extent,
                             const std::vector<std::vector<std::int64_t>>& universes) {
    bool all = true;
    each_pick(universes, [&](std::int64_t p) { all = all && p == extent; });
    return all;
  }

  static void check_divisibility(const std::string& label, std::int64_t extent,
                                 const std::vector<std::vector<std::int64_t>>& universes) {
    for (const auto& u : universes) {
      if (u.empty()) throw std::invalid_argument("empty size universe");
      for (std::int64_t s : u)
        if (s < 1) throw std::invalid_argument("tile factors must be positive");
    }
    bool ok = true;
    each_pick(universes, [&](std::int64_t p) { ok = ok && extent % p == 0; });
    if (!ok) throw std::invalid_argument("factor combination does not divide " + label);
  }

  // visits the size product of every universe combination
  template <class F>
  static void each_pick(const std::vector<std::vector<std::int64_t>>& universes, F&& f) {
    std::vector<std::size_t> pick(universes.size(), 0);
    for (;;) {
      std::int64_t p = 1;
      for (std::size_t j = 0; j < universes.size(); ++j) p *= universes[j][pick[j]];
      f(p);
      std::size_t j = 0;
      while (j < universes.size() && ++pick[j] == universes[j].size()) pick[j++] = 0;
      if (j == universes.size()) return;
    }
  }

  static std::vector<std::pair<ObjId, ObjId>> zip(const std::vector<NestAxis>& src,
                                                  const std::vector<NestAxis>& dst) {
    std::vector<std::pair<ObjId, ObjId>> pairs;
    for (std::size_t a = 0; a < src.size(); ++a)
      for (std::size_t l = 0; l < src[a].levels.size(); ++l)
        pairs.emplace_back(src[a].levels[l], dst[a].levels[l]);
    return pairs;
  }

  // One communication per Mapped or Reduce operand. The temporary region
  // spans the full extent of the paired axes so its footprint stays
  // independent of tiling decisions; the copy-out iterates the producer side
  // and the copy-in the consumer side of every pair.
  void synth_comms() {
    std::vector<ObjId> inst_ids;
    for (auto& [id, ii] : k_.insts) inst_ids.push_back(id), (void)ii;
    for (ObjId c : inst_ids) {
      for (std::size_t oi = 0; oi < k_.insts[c].operands.size(); ++oi) {
        Operand& o = k_.insts[c].operands[oi];
        bool is_map = o.kind == Operand::Kind::Mapped;
        bool is_red = o.kind == Operand::Kind::Reduce;
        if ((!is_map && !is_red) || o.pairs.empty()) continue;

        Comm cm;
        cm.producer = is_map ? o.producer : o.init;
        cm.consumer = c;
        cm.pairs = o.pairs;
        std::uint32_t ci = static_cast<std::uint32_t>(k_.comms.size());
        std::string tag = "p2p" + std::to_string(ci);
        cm.lowering = k_.bb.add_lowering("lower_p2p", tag);

        for (std::size_t j = 0; j < cm.pairs.size(); ++j)
          cm.pair_objs.push_back(
              k_.bb.add_object(tag + "_" + std::to_string(j)));

        // axis groups in pair order, row-major layout over full extents
        std::vector<ObjId> axis_logical;
        std::vector<std::int64_t> axis_extent;
        for (auto& [src, dst] : cm.pairs) {
          (void)dst;
          ObjId l = k_.dims.at(src).logical;
          if (axis_logical.empty() || axis_logical.back() != l) {
            axis_logical.push_back(l);
            axis_extent.push_back(k_.logicals.at(l).extent);
          }
        }
        std::int64_t elems = 1;
        for (std::int64_t e : axis_extent) elems *= e;

        cm.region = k_.bb.add_object("tmp" + std::to_string(ci), cm.lowering);
        RegionInfo ri;
        ri.elems = elems;
        k_.regions[cm.region] = ri;

        InductionVar siv, liv;
        std::int64_t base = elems;
        std::size_t p0 = 0;
        for (std::size_t a = 0; a < axis_logical.size(); ++a) {
          base /= axis_extent[a];
          NestAxis sax, dax;
          sax.logical = axis_logical[a];
          dax.logical = k_.dims.at(cm.pairs[p0].second).logical;
          while (p0 < cm.pairs.size() &&
                 k_.dims.at(cm.pairs[p0].first).logical == axis_logical[a]) {
            sax.levels.push_back(cm.pairs[p0].first);
            dax.levels.push_back(cm.pairs[p0].second);
            ++p0;
          }
          addr_axis(siv, sax, base);
          addr_axis(liv, dax, base);
        }

        std::vector<ObjId> sdims, ldims;
        for (auto& [s, d] : cm.pairs) sdims.push_back(s), ldims.push_back(d);

        cm.store = k_.bb.add_object(tag + "_store", cm.lowering);
        InstInfo si;
        si.op = Op::Store;
        si.dims = sdims;
        si.operands = {produced(cm.producer)};
        si.region = cm.region;
        si.ivar = ivar(std::move(siv));
        k_.insts[cm.store] = std::move(si);

        cm.load = k_.bb.add_object(tag + "_load", cm.lowering);
        InstInfo li;
        li.op = Op::Load;
        li.dims = ldims;
        li.region = cm.region;
        li.ivar = ivar(std::move(liv));
        k_.insts[cm.load] = std::move(li);

        o.comm = ci;
        k_.comms.push_back(std::move(cm));
      }
    }
  }

  void fill_sets() {
    Backbone& b = k_.bb;
    for (auto& [d, di] : k_.dims) {
      b.add_to_set("Statements", d);
      b.add_to_set("Dimensions", d);
      b.add_to_set(di.is_static ? "StaticDims" : "DynDims", d);
    }
    for (auto& [l, li] : k_.logicals) {
      b.add_to_set("LogicalDims", l);
      for (ObjId t : li.tiles) b.add_to_param_set("TilingDims", l, t);
      if (li.tiled != kNoObj) b.add_to_param_set("TiledDim", l, li.tiled);
    }
    for (auto& [r, ri] : k_.regions) {
      b.add_to_set("MemRegions", r);
      if (ri.input) b.add_to_set("InputRegions", r);
    }
    for (auto& [i, ii] : k_.insts) {
      b.add_to_set("Statements", i);
      b.add_to_set("Insts", i);
      for (ObjId d : ii.dims) b.add_to_param_set("IterDims", i, d);
      if (ii.op == Op::Load || ii.op == Op::Store) {
        b.add_to_set("MemInsts", i);
        if (ii.op == Op::Store) b.add_to_set("StoreInsts", i);
        b.add_to_param_set("AccessedRegions", i, ii.region);
      }
      for (const Operand& o : ii.operands) {
        if (o.kind == Operand::Kind::Produced) b.add_to_param_set("DepUses", o.producer, i);
      }
    }
    for (const Comm& cm : k_.comms) {
      b.add_to_param_set("DepUses", cm.producer, cm.consumer);
      b.add_to_param_set("DepUses", cm.store, cm.load);
      b.add_to_param_set("DepUses", cm.load, cm.consumer);
      // the copy-out store already lists the producer through its operand
      for (std::size_t j = 0; j < cm.pairs.size(); ++j) {
        ObjId p = cm.pair_objs[j];
        bool st = k_.dims.at(cm.pairs[j].first).is_static;
        b.add_to_set(st ? "StaticPairs" : "DynPairs", p);
        b.add_to_param_set(st ? "PairSrcS" : "PairSrcD", p, cm.pairs[j].first);
        b.add_to_param_set(st ? "PairDstS" : "PairDstD", p, cm.pairs[j].second);
      }
    }
    for (auto& [i, ii] : k_.insts) {
      for (const Operand& o : ii.operands) {
        if (o.kind != Operand::Kind::Reduce) continue;
        b.add_to_param_set("ReduceInits", i, o.init);
        if (o.comm != kNoIndex)
          b.add_to_param_set("ReduceInits", i, k_.comms[o.comm].load);
        for (ObjId d : o.reduce_dims) b.add_to_param_set("ReduceDims", i, d);
      }
    }
  }
};

}  // namespace

Kernel make_axpy(std::int64_t n, const std::vector<std::vector<std::int64_t>>& factors) {
  KernelBuilder kb("axpy");
  ObjId rx = kb.region("x", n, true);
  ObjId ry = kb.region("y", n, true);
  ObjId rz = kb.region("z", n, true);

  auto nest = [&](const std::string& tag) {
    return std::vector<NestAxis>{kb.axis(tag + "_n", n, factors)};
  };
  auto dims_of = [](const std::vector<NestAxis>& axes) {
    std::vector<ObjId> d;
    for (const NestAxis& a : axes) d.insert(d.end(), a.levels.begin(), a.levels.end());
    return d;
  };
  auto linear = [&](const std::vector<NestAxis>& axes) {
    InductionVar iv;
    kb.addr_axis(iv, axes[0], 1);
    return kb.ivar(std::move(iv));
  };

  auto ax_lx = nest("load_x");
  ObjId load_x = kb.inst("load_x", Op::Load, dims_of(ax_lx), {}, rx, linear(ax_lx));
  auto ax_ly = nest("load_y");
  ObjId load_y = kb.inst("load_y", Op::Load, dims_of(ax_ly), {}, ry, linear(ax_ly));
  auto ax_mul = nest("mul");
  ObjId mul = kb.inst("mul", Op::Mul, dims_of(ax_mul),
                      {KernelBuilder::input("alpha"), KernelBuilder::mapped(load_x, ax_lx, ax_mul)});
  auto ax_add = nest("add");
  ObjId add = kb.inst("add", Op::Add, dims_of(ax_add),
                      {KernelBuilder::mapped(mul, ax_mul, ax_add),
                       KernelBuilder::mapped(load_y, ax_ly, ax_add)});
  auto ax_st = nest("store_z");
  kb.inst("store_z", Op::Store, dims_of(ax_st),
          {KernelBuilder::mapped(add, ax_add, ax_st)}, rz, linear(ax_st));
  return kb.finish();
}

Kernel make_outer_product(std::int64_t m, std::int64_t n) {
  KernelBuilder kb("outer_product");
  ObjId ra = kb.region("a", m, true);
  ObjId rb = kb.region("b", n, true);
  ObjId rc = kb.region("c", m * n, true);

  NestAxis dm = kb.axis("d_m", m, {});
  NestAxis dn = kb.axis("d_n", n, {});
  ObjId d_m = dm.levels[0], d_n = dn.levels[0];

  InductionVar iva, ivb, ivc;
  kb.addr_axis(iva, dm, 1);
  kb.addr_axis(ivb, dn, 1);
  kb.addr_axis(ivc, dm, n);
  kb.addr_axis(ivc, dn, 1);

  ObjId load_a = kb.inst("load_a", Op::Load, {d_m}, {}, ra, kb.ivar(std::move(iva)));
  ObjId load_b = kb.inst("load_b", Op::Load, {d_n}, {}, rb, kb.ivar(std::move(ivb)));
  ObjId mul = kb.inst("mul", Op::Mul, {d_m, d_n},
                      {KernelBuilder::produced(load_a), KernelBuilder::produced(load_b)});
  kb.inst("store_c", Op::Store, {d_m, d_n}, {KernelBuilder::produced(mul)}, rc,
          kb.ivar(std::move(ivc)));
  return kb.finish();
}

Kernel make_matmul(std::int64_t m, std::int64_t n, std::int64_t k,
                   const std::vector<std::vector<std::int64_t>>& factors,
                   std::int64_t a_stride) {
  if (a_stride <= 0) throw std::invalid_argument("a_stride must be positive");
  KernelBuilder kb(a_stride == 1 ? "matmul" : "strided_matmul");
  ObjId ra = kb.region("a", m * k * a_stride, true);
  ObjId rb = kb.region("b", k * n, true);
  ObjId rc = kb.region("c", m * n, true);

  auto dims_of = [](std::initializer_list<const NestAxis*> axes) {
    std::vector<ObjId> d;
    for (const NestAxis* a : axes) d.insert(d.end(), a->levels.begin(), a->levels.end());
    return d;
  };

  // load a: column major with an element stride on the m axis
  NestAxis am = kb.axis("load_a_m", m, factors);
  NestAxis ak = kb.axis("load_a_k", k, {});
  InductionVar iva;
  kb.addr_axis(iva, am, a_stride);
  kb.addr_axis(iva, ak, m * a_stride);
  ObjId load_a = kb.inst("load_a", Op::Load, dims_of({&am, &ak}), {}, ra,
                         kb.ivar(std::move(iva)));

  NestAxis bk = kb.axis("load_b_k", k, {});
  NestAxis bn = kb.axis("load_b_n", n, factors);
  InductionVar ivb;
  kb.addr_axis(ivb, bk, 1);
  kb.addr_axis(ivb, bn, k);
  ObjId load_b = kb.inst("load_b", Op::Load, dims_of({&bk, &bn}), {}, rb,
                         kb.ivar(std::move(ivb)));

  NestAxis im = kb.axis("init_c_m", m, factors);
  NestAxis in_ = kb.axis("init_c_n", n, factors);
  ObjId init_c = kb.inst("init_c", Op::Cast, dims_of({&im, &in_}),
                         {KernelBuilder::constant(0)});

  NestAxis dm = kb.axis("mad_m", m, factors);
  NestAxis dn = kb.axis("mad_n", n, factors);
  NestAxis dk = kb.axis("mad_k", k, {});
  ObjId mad = kb.inst("mad", Op::Mad, dims_of({&dm, &dn, &dk}),
                      {KernelBuilder::mapped(load_a, {am, ak}, {dm, dk}),
                       KernelBuilder::mapped(load_b, {bk, bn}, {dk, dn}),
                       KernelBuilder::reduce(init_c, {im, in_}, {dm, dn}, dk)});

  NestAxis em = kb.axis("store_c_m", m, factors);
  NestAxis en = kb.axis("store_c_n", n, factors);
  InductionVar ivc;
  kb.addr_axis(ivc, em, 1);
  kb.addr_axis(ivc, en, m);
  kb.inst("store_c", Op::Store, dims_of({&em, &en}),
          {KernelBuilder::mapped(mad, {dm, dn}, {em, en})}, rc, kb.ivar(std::move(ivc)));
  return kb.finish();
}

void strip_mine(Kernel& k, ObjId logical, const std::vector<std::int64_t>& universe) {
  LogicalInfo& li = k.logicals.at(logical);
  if (universe.empty()) throw std::invalid_argument("empty size universe");
  for (std::int64_t s : universe)
    if (s < 1) throw std::invalid_argument("tile factors must be positive");

  // every combination of the existing universes and the new one must divide
  std::vector<std::vector<std::int64_t>> all;
  for (ObjId t : li.tiles) all.push_back(k.dims.at(t).sizes);
  all.push_back(universe);
  std::vector<std::size_t> pick(all.size(), 0);
  for (;;) {
    std::int64_t p = 1;
    for (std::size_t j = 0; j < all.size(); ++j) p *= all[j][pick[j]];
    if (li.extent % p != 0)
      throw std::invalid_argument("factor combination does not divide the axis");
    std::size_t j = 0;
    while (j < all.size() && ++pick[j] == all[j].size()) pick[j++] = 0;
    if (j == all.size()) break;
  }

  for (const Comm& cm : k.comms)
    for (auto& [s, d] : cm.pairs)
      if (k.dims.at(s).logical == logical || k.dims.at(d).logical == logical)
        throw std::invalid_argument("axis already participates in a communication");

  const std::string& base_name = k.bb.obj(logical).name;
  ObjId t = k.bb.add_object(base_name + std::to_string(li.tiles.size()));
  DimInfo di;
  di.logical = logical;
  di.is_static = true;
  di.sizes = universe;
  k.dims[t] = di;

  k.bb.add_to_set("Statements", t);
  k.bb.add_to_set("Dimensions", t);
  k.bb.add_to_set("StaticDims", t);
  k.bb.add_to_param_set("TilingDims", logical, t);

  // The new tile is the innermost level: enclosing terms pick up its size,
  // and its own stride is the axis base.
  for (InductionVar& iv : k.ivars) {
    std::int64_t axis_base = 0;
    bool axis_present = false;
    for (AddrTerm& term : iv.terms) {
      if (k.dims.at(term.dim).logical != logical) continue;
      axis_base = term.base;
      axis_present = true;
      term.size_dims.push_back(t);
    }
    if (axis_present) {
      AddrTerm nt;
      nt.dim = t;
      nt.base = axis_base;
      iv.terms.push_back(nt);
    }
  }

  for (auto& [i, ii] : k.insts) {
    bool iterates = false;
    for (ObjId d : ii.dims) iterates = iterates || k.dims.at(d).logical == logical;
    if (iterates) {
      ii.dims.push_back(t);
      k.bb.add_to_param_set("IterDims", i, t);
    }
  }
  li.tiles.push_back(t);
}

Kernel build_kernel(const KernelSpec& spec) {
  if (spec.kind == "axpy") return make_axpy(spec.n, spec.factors);
  if (spec.kind == "outer_product") return make_outer_product(spec.m, spec.n);
  if (spec.kind == "matmul")
    return make_matmul(spec.m, spec.n, spec.k, spec.factors, spec.a_stride);
  throw std::invalid_argument("unknown kernel kind: " + spec.kind);
}

}  // namespace ispace
