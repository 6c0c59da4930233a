#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "ispace/candidate.hpp"
#include "ispace/gpu_space.hpp"
#include "ispace/kernels.hpp"
#include "ispace/loop_nest.hpp"
#include "ispace/machine.hpp"
#include "ispace/simulate.hpp"

using namespace ispace;

namespace {

std::string read_golden(const std::string& name) {
  std::ifstream in(std::string(ISPACE_TEST_DATA_DIR) + "/golden/" + name);
  REQUIRE(in.good());
  std::ostringstream out;
  out << in.rdbuf();
  return out.str();
}

std::shared_ptr<const SpaceContext> build_ok(const Kernel& k, const MachineParams& mp) {
  BuildResult r = build_gpu_space(k, mp);
  for (const auto& d : r.diagnostics) MESSAGE(format_diagnostic(d));
  REQUIRE(r.ctx != nullptr);
  return r.ctx;
}

// Applies one named decision, following the stored orientation of
// antisymmetric pairs.
void decide(const SpaceContext& ctx, Candidate& c, const std::string& choice,
            const std::vector<std::string>& args, const std::string& value) {
  std::uint32_t ch = ctx.table.find_choice(choice);
  REQUIRE(ch != kNoInstance);
  std::vector<ObjId> ids;
  for (const auto& a : args) {
    ObjId o = ctx.bb.find(a);
    REQUIRE(o != kNoObj);
    ids.push_back(o);
  }
  InstanceRef ref = ctx.table.resolve(ch, ids.data(), ids.size());
  REQUIRE(ref.inst != kNoInstance);
  int v = ctx.table.value_index(ch, value);
  REQUIRE(v >= 0);
  if (ref.swapped) v = ctx.table.choices[ch].swap[static_cast<std::size_t>(v)];
  Candidate child;
  REQUIRE(apply_decision(ctx, c, ref.inst, static_cast<int>(v), child) == PropStatus::Ok);
  c = std::move(child);
}

bool first_leaf(const SpaceContext& ctx, const Candidate& root, Candidate& out, int* budget) {
  std::vector<std::uint32_t> open = open_choices(ctx, root);
  if (open.empty()) {
    out = root;
    return true;
  }
  std::uint32_t inst = open.front();
  Mask m = root.dom[inst];
  for (int v = 0; v < kMaxDomainBits; ++v) {
    if (!mask_has(m, v)) continue;
    if (--*budget <= 0) return false;
    Candidate child;
    if (apply_decision(ctx, root, inst, v, child) != PropStatus::Ok) continue;
    if (first_leaf(ctx, child, out, budget)) return true;
  }
  return false;
}

void all_leaves(const SpaceContext& ctx, const Candidate& c, std::vector<Candidate>& out) {
  std::vector<std::uint32_t> open = open_choices(ctx, c);
  if (open.empty()) {
    out.push_back(c);
    return;
  }
  std::uint32_t inst = open.front();
  Mask m = c.dom[inst];
  for (int v = 0; v < kMaxDomainBits; ++v) {
    if (!mask_has(m, v)) continue;
    Candidate child;
    if (apply_decision(ctx, c, inst, v, child) != PropStatus::Ok) continue;
    all_leaves(ctx, child, out);
  }
}

ObjId obj(const SpaceContext& ctx, const std::string& name) {
  ObjId o = ctx.bb.find(name);
  REQUIRE(o != kNoObj);
  return o;
}

const NestNode& only_child_dim(const NestNode& n, std::size_t at) {
  REQUIRE(n.children.size() > at);
  return n.children[at];
}

}  // namespace

TEST_CASE("trip count formulas on hand built nests") {
  Kernel k;
  k.name = "micro";
  ObjId d = k.bb.add_object("d");
  ObjId f = k.bb.add_object("f");
  k.insts[f] = InstInfo{};  // Op::Add, no operands

  NestNode loop;
  loop.kind = NestNode::Kind::Dim;
  loop.dims = {d};
  loop.dim_kind = NestDimKind::Loop;
  loop.size = 8;
  NestNode body;
  body.kind = NestNode::Kind::Inst;
  body.inst = f;
  loop.children.push_back(body);

  LoopNest l;
  l.sizes[d] = 8;
  l.roots.push_back(loop);

  MachineParams mp;
  CostReport seq = evaluate(k, l, mp);
  CHECK(seq.compute == 24);  // 8 ops + 8 trips of loop overhead 2
  CHECK(seq.memory == 0);
  CHECK(seq.total == 24);

  l.roots[0].dim_kind = NestDimKind::Unroll;
  CostReport unr = evaluate(k, l, mp);
  CHECK(unr.compute == 8);  // unrolling drops the overhead term
  CHECK(unr.total == 8);

  l.roots[0].dim_kind = NestDimKind::Thread;
  l.thread_shape = {8};
  CostReport thr = evaluate(k, l, mp);
  CHECK(thr.compute == 1);  // work divides across the level
  CHECK(thr.total == 1);
}

TEST_CASE("a sequential outer product schedule reconstructs and prices") {
  Kernel k = make_outer_product(4, 3);
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  Candidate c;
  REQUIRE(make_root(*ctx, c) == PropStatus::Ok);
  decide(*ctx, c, "dim_kind", {"d_m_r"}, "LOOP");
  decide(*ctx, c, "dim_kind", {"d_n_r"}, "LOOP");
  decide(*ctx, c, "order", {"d_m_r", "d_n_r"}, "OUTER");
  decide(*ctx, c, "order", {"load_a", "d_n_r"}, "BEFORE");
  decide(*ctx, c, "order", {"d_m_r", "load_b"}, "OUTER");
  decide(*ctx, c, "cache", {"load_a"}, "L1");
  decide(*ctx, c, "cache", {"load_b"}, "L1");
  decide(*ctx, c, "cache", {"store_c"}, "L1");
  REQUIRE(fully_specified(*ctx, c));

  LoopNest l = reconstruct(k, *ctx, c);
  REQUIRE(l.roots.size() == 1);
  const NestNode& m_loop = l.roots[0];
  CHECK(m_loop.kind == NestNode::Kind::Dim);
  CHECK(m_loop.dims == std::vector<ObjId>{obj(*ctx, "d_m_r")});
  CHECK(m_loop.dim_kind == NestDimKind::Loop);
  CHECK(m_loop.size == 4);
  REQUIRE(m_loop.children.size() == 2);
  CHECK(m_loop.children[0].inst == obj(*ctx, "load_a"));
  const NestNode& n_loop = only_child_dim(m_loop, 1);
  CHECK(n_loop.size == 3);
  REQUIRE(n_loop.children.size() == 3);
  CHECK(n_loop.children[0].inst == obj(*ctx, "load_b"));
  CHECK(n_loop.children[1].inst == obj(*ctx, "mul"));
  CHECK(n_loop.children[2].inst == obj(*ctx, "store_c"));
  CHECK(l.thread_shape.empty());
  CHECK(l.block_shape.empty());

  CostReport r = evaluate(k, l, mp);
  // loads stride 1, store walks c row-major with the inner loop: coalesced
  CHECK(r.compute == 44);   // 12 muls + (4 + 12) loop trips * 2
  CHECK(r.memory == 112);   // (4 + 12 + 12) coalesced global accesses * 4
  CHECK(r.sync == 0);
  CHECK(r.block_serial == 1);
  CHECK(r.total == 112);

  SUBCASE("swapping the loops scatters the store") {
    Candidate s;
    REQUIRE(make_root(*ctx, s) == PropStatus::Ok);
    decide(*ctx, s, "dim_kind", {"d_m_r"}, "LOOP");
    decide(*ctx, s, "dim_kind", {"d_n_r"}, "LOOP");
    decide(*ctx, s, "order", {"d_n_r", "d_m_r"}, "OUTER");
    decide(*ctx, s, "order", {"load_b", "d_m_r"}, "BEFORE");
    decide(*ctx, s, "order", {"d_n_r", "load_a"}, "OUTER");
    decide(*ctx, s, "cache", {"load_a"}, "L1");
    decide(*ctx, s, "cache", {"load_b"}, "L1");
    decide(*ctx, s, "cache", {"store_c"}, "L1");
    REQUIRE(fully_specified(*ctx, s));
    CostReport rs = evaluate(k, reconstruct(k, *ctx, s), mp);
    // store now steps by the row length inside the inner loop
    CHECK(rs.memory == 3 * 4 + 12 * 4 + 12 * 32);
    CHECK(rs.total == rs.memory);
    CHECK(rs.total > r.total);
  }
}

TEST_CASE("block mapping divides the work across the grid") {
  Kernel k = make_outer_product(4, 3);
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  Candidate c;
  REQUIRE(make_root(*ctx, c) == PropStatus::Ok);
  decide(*ctx, c, "dim_kind", {"d_m_r"}, "BLOCK");
  decide(*ctx, c, "dim_kind", {"d_n_r"}, "LOOP");
  decide(*ctx, c, "order", {"load_a", "d_n_r"}, "BEFORE");
  decide(*ctx, c, "cache", {"load_a"}, "L1");
  decide(*ctx, c, "cache", {"load_b"}, "L1");
  decide(*ctx, c, "cache", {"store_c"}, "L1");
  REQUIRE(fully_specified(*ctx, c));

  LoopNest l = reconstruct(k, *ctx, c);
  REQUIRE(l.roots.size() == 1);
  CHECK(l.roots[0].dim_kind == NestDimKind::Block);
  CHECK(l.roots[0].block_level == 0);
  CHECK(l.block_shape == std::vector<std::int64_t>{4});

  CostReport r = evaluate(k, l, mp);
  CHECK(r.compute == 9);   // 3 muls + 3 inner trips * 2
  CHECK(r.memory == 28);   // 1 + 3 + 3 coalesced accesses * 4
  CHECK(r.block_serial == 1);
  CHECK(r.total == 28);
}

TEST_CASE("merged dimensions fuse into one loop node") {
  Kernel k = make_axpy(4, {});
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  Candidate c;
  REQUIRE(make_root(*ctx, c) == PropStatus::Ok);
  decide(*ctx, c, "order", {"load_x_n_r", "load_y_n_r"}, "MERGED");
  decide(*ctx, c, "order", {"load_x_n_r", "mul_n_r"}, "MERGED");
  decide(*ctx, c, "order", {"load_x_n_r", "add_n_r"}, "MERGED");
  decide(*ctx, c, "order", {"load_x_n_r", "store_z_n_r"}, "MERGED");
  decide(*ctx, c, "dim_kind", {"load_x_n_r"}, "LOOP");
  int budget = 100000;
  Candidate full;
  REQUIRE(first_leaf(*ctx, c, full, &budget));
  CHECK(full.fired == 0);  // every hand-off stays in registers

  LoopNest l = reconstruct(k, *ctx, full);
  REQUIRE(l.roots.size() == 1);
  const NestNode& fused = l.roots[0];
  CHECK(fused.dims.size() == 5);
  CHECK(fused.size == 4);
  REQUIRE(fused.children.size() == 5);
  for (const NestNode& ch : fused.children) CHECK(ch.kind == NestNode::Kind::Inst);

  auto orders = derive_orders(l);
  CHECK(orders.at({std::min(obj(*ctx, "load_x_n_r"), obj(*ctx, "mul_n_r")),
                   std::max(obj(*ctx, "load_x_n_r"), obj(*ctx, "mul_n_r"))}) == "MERGED");

  CostReport r = evaluate(k, l, mp);
  CHECK(r.compute == 16);  // 4 muls + 4 adds + 4 trips * 2
  CHECK(r.memory == 48);   // 12 coalesced global accesses * 4
  CHECK(r.total == 48);
}

TEST_CASE("a fired communication stages the value through a region") {
  Kernel k = make_axpy(2, {});
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  Candidate c;
  REQUIRE(make_root(*ctx, c) == PropStatus::Ok);
  decide(*ctx, c, "order", {"load_x_n_r", "mul_n_r"}, "BEFORE");
  decide(*ctx, c, "order", {"load_y_n_r", "mul_n_r"}, "MERGED");
  decide(*ctx, c, "order", {"mul_n_r", "add_n_r"}, "MERGED");
  decide(*ctx, c, "order", {"add_n_r", "store_z_n_r"}, "MERGED");
  decide(*ctx, c, "mem_space", {"tmp0"}, "SHARED");
  decide(*ctx, c, "dim_kind", {"load_x_n_r"}, "LOOP");
  decide(*ctx, c, "dim_kind", {"mul_n_r"}, "LOOP");
  CHECK(c.fired != 0);
  int budget = 100000;
  Candidate full;
  REQUIRE(first_leaf(*ctx, c, full, &budget));

  LoopNest l = reconstruct(k, *ctx, full);
  REQUIRE(l.roots.size() == 2);
  CHECK(l.roots[0].dims == std::vector<ObjId>{obj(*ctx, "load_x_n_r")});
  REQUIRE(l.roots[0].children.size() == 2);
  CHECK(l.roots[0].children[0].inst == obj(*ctx, "load_x"));
  CHECK(l.roots[0].children[1].inst == obj(*ctx, "p2p0_store"));
  CHECK(l.roots[1].dims.size() == 4);
  CHECK(l.mem_space.at(obj(*ctx, "tmp0")) == MemSpaceKind::Shared);

  // copy-in lands before the consumer
  auto orders = derive_orders(l);
  ObjId ld = obj(*ctx, "p2p0_load"), mu = obj(*ctx, "mul");
  CHECK(orders.at({std::min(ld, mu), std::max(ld, mu)}) == (ld < mu ? "BEFORE" : "AFTER"));

  CostReport r = evaluate(k, l, mp);
  CHECK(r.compute == 12);  // mul 2 + add 2 + two loops of 2 trips * 2
  CHECK(r.memory == 32);   // 3 global pairs of 2 * 4 + staged store/load 2 * 2 each
  CHECK(r.total == 32);

  MESSAGE(emit_source(k, l));
}

TEST_CASE("order decisions round trip through the schedule tree") {
  Kernel k = make_outer_product(2, 2);
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  Candidate root;
  REQUIRE(make_root(*ctx, root) == PropStatus::Ok);
  std::vector<Candidate> leaves;
  all_leaves(*ctx, root, leaves);
  REQUIRE(leaves.size() == 768);

  std::uint32_t order_c = ctx->table.find_choice("order");
  for (const Candidate& leaf : leaves) {
    LoopNest l = reconstruct(k, *ctx, leaf);
    auto orders = derive_orders(l);
    CHECK(orders.size() == 15);  // 6 live statements
    for (const auto& [pair, name] : orders) {
      ObjId ids[2] = {pair.first, pair.second};
      InstanceRef ref = ctx->table.resolve(order_c, ids, 2);
      REQUIRE(ref.inst != kNoInstance);
      Mask m = ctx->table.oriented(order_c, leaf.dom[ref.inst], ref.swapped);
      REQUIRE(mask_single(m));
      CHECK(ctx->table.choices[order_c].values[mask_first(m)] == name);
    }
  }
}

TEST_CASE("a fused matmul maps blocks, threads and unrolled lanes") {
  Kernel k = make_matmul(4, 4, 4, {{2}});
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  Candidate c;
  REQUIRE(make_root(*ctx, c) == PropStatus::Ok);
  const char* merges[][2] = {
      {"load_a_m0", "mad_m0"},   {"load_a_m_r", "mad_m_r"}, {"load_a_k_r", "mad_k_r"},
      {"load_b_k_r", "mad_k_r"}, {"load_b_n0", "mad_n0"},   {"load_b_n_r", "mad_n_r"},
      {"init_c_m0", "mad_m0"},   {"init_c_m_r", "mad_m_r"}, {"init_c_n0", "mad_n0"},
      {"init_c_n_r", "mad_n_r"}, {"mad_m0", "store_c_m0"},  {"mad_m_r", "store_c_m_r"},
      {"mad_n0", "store_c_n0"},  {"mad_n_r", "store_c_n_r"},
  };
  for (const auto& m : merges) decide(*ctx, c, "order", {m[0], m[1]}, "MERGED");
  decide(*ctx, c, "dim_kind", {"mad_m_r"}, "BLOCK");
  decide(*ctx, c, "dim_kind", {"mad_n_r"}, "BLOCK");
  decide(*ctx, c, "dim_kind", {"mad_n0"}, "THREAD");
  decide(*ctx, c, "dim_kind", {"mad_m0"}, "UNROLL");
  decide(*ctx, c, "order", {"mad_m_r", "mad_n_r"}, "OUTER");
  decide(*ctx, c, "order", {"mad_n0", "mad_m0"}, "OUTER");
  decide(*ctx, c, "order", {"mad_m0", "mad_k_r"}, "OUTER");
  decide(*ctx, c, "order", {"init_c", "mad_k_r"}, "BEFORE");
  decide(*ctx, c, "order", {"store_c", "mad_k_r"}, "AFTER");
  decide(*ctx, c, "cache", {"load_a"}, "L1");
  decide(*ctx, c, "cache", {"load_b"}, "READ_ONLY");
  decide(*ctx, c, "cache", {"store_c"}, "L2");
  int budget = 100000;
  Candidate full;
  REQUIRE(first_leaf(*ctx, c, full, &budget));
  CHECK(full.fired == 0);  // every hand-off stays in registers

  LoopNest l = reconstruct(k, *ctx, full);
  CHECK(l.block_shape == std::vector<std::int64_t>{2, 2});
  CHECK(l.thread_shape == std::vector<std::int64_t>{2});

  CostReport r = evaluate(k, l, mp);
  CHECK(r.compute == 26);   // 2 init + 8 mad + 8 loop trips * 2
  CHECK(r.memory == 384);   // a broadcast-coalesced, b and c thread-scattered
  CHECK(r.sync == 0);
  CHECK(r.block_serial == 1);
  CHECK(r.total == 384);
  for (const AccessCost& ac : r.accesses) {
    if (ac.inst == obj(*ctx, "load_a")) CHECK(ac.coalesced);
    if (ac.inst == obj(*ctx, "load_b")) CHECK_FALSE(ac.coalesced);
    if (ac.inst == obj(*ctx, "store_c")) CHECK_FALSE(ac.coalesced);
  }
  CHECK(emit_source(k, l) == read_golden("matmul_fused.txt"));
}

TEST_CASE("a staged matmul synchronizes its two thread nests") {
  Kernel k = make_matmul(4, 4, 4, {{2}});
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  Candidate c;
  REQUIRE(make_root(*ctx, c) == PropStatus::Ok);
  const char* merges[][2] = {
      {"load_b_k_r", "mad_k_r"}, {"load_b_n0", "mad_n0"},   {"load_b_n_r", "mad_n_r"},
      {"init_c_m0", "mad_m0"},   {"init_c_m_r", "mad_m_r"}, {"init_c_n0", "mad_n0"},
      {"init_c_n_r", "mad_n_r"}, {"mad_m0", "store_c_m0"},  {"mad_m_r", "store_c_m_r"},
      {"mad_n0", "store_c_n0"},  {"mad_n_r", "store_c_n_r"},
  };
  for (const auto& m : merges) decide(*ctx, c, "order", {m[0], m[1]}, "MERGED");
  // the producer tile runs in its own nest; its copy crosses shared memory
  decide(*ctx, c, "order", {"load_a_m_r", "mad_m_r"}, "BEFORE");
  decide(*ctx, c, "order", {"load_a_m0", "mad_m0"}, "BEFORE");
  decide(*ctx, c, "order", {"load_a_k_r", "mad_k_r"}, "BEFORE");
  decide(*ctx, c, "dim_kind", {"load_a_m0"}, "THREAD");
  decide(*ctx, c, "dim_kind", {"mad_m0"}, "THREAD");
  decide(*ctx, c, "thread_level", {"load_a_m0", "mad_m0"}, "MAPPED");
  decide(*ctx, c, "dim_kind", {"load_a_m_r"}, "LOOP");
  decide(*ctx, c, "dim_kind", {"load_a_k_r"}, "LOOP");
  decide(*ctx, c, "order", {"load_a_m_r", "load_a_m0"}, "OUTER");
  decide(*ctx, c, "order", {"load_a_m0", "load_a_k_r"}, "OUTER");
  decide(*ctx, c, "dim_kind", {"mad_n0"}, "THREAD");
  decide(*ctx, c, "thread_level", {"mad_m0", "mad_n0"}, "OUTER");
  decide(*ctx, c, "dim_kind", {"mad_m_r"}, "LOOP");
  decide(*ctx, c, "dim_kind", {"mad_n_r"}, "LOOP");
  decide(*ctx, c, "order", {"mad_m0", "mad_n0"}, "OUTER");
  decide(*ctx, c, "order", {"mad_n0", "mad_m_r"}, "OUTER");
  decide(*ctx, c, "order", {"mad_m_r", "mad_n_r"}, "OUTER");
  decide(*ctx, c, "order", {"mad_n_r", "mad_k_r"}, "OUTER");
  decide(*ctx, c, "order", {"init_c", "mad_k_r"}, "BEFORE");
  decide(*ctx, c, "order", {"store_c", "mad_k_r"}, "AFTER");
  decide(*ctx, c, "order", {"p2p0_load", "mad_n0"}, "INNER");
  decide(*ctx, c, "order", {"p2p0_load", "mad_n_r"}, "INNER");
  decide(*ctx, c, "mem_space", {"tmp0"}, "SHARED");
  decide(*ctx, c, "cache", {"load_a"}, "L1");
  decide(*ctx, c, "cache", {"load_b"}, "READ_ONLY");
  decide(*ctx, c, "cache", {"store_c"}, "L2");
  CHECK(c.fired == 1);
  int budget = 100000;
  Candidate full;
  REQUIRE(first_leaf(*ctx, c, full, &budget));

  LoopNest l = reconstruct(k, *ctx, full);
  REQUIRE(l.roots.size() == 3);
  CHECK(l.roots[1].kind == NestNode::Kind::Barrier);
  CHECK(l.thread_shape == std::vector<std::int64_t>{2, 2});
  CHECK(l.block_shape.empty());
  CHECK(l.mem_space.at(obj(*ctx, "tmp0")) == MemSpaceKind::Shared);

  CostReport r = evaluate(k, l, mp);
  CHECK(r.compute == 84);
  CHECK(r.memory == 800);  // dominated by the thread-scattered b loads
  CHECK(r.sync == 16);
  CHECK(r.total == 816);
  CHECK(emit_source(k, l) == read_golden("matmul_staged.txt"));
}

TEST_CASE("vector lanes ride the innermost static tile") {
  Kernel k = make_axpy(8, {{4}});
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  Candidate c;
  REQUIRE(make_root(*ctx, c) == PropStatus::Ok);
  const char* merges[][2] = {
      {"load_x_n0", "mul_n0"},   {"load_x_n_r", "mul_n_r"}, {"mul_n0", "add_n0"},
      {"mul_n_r", "add_n_r"},    {"load_y_n0", "add_n0"},   {"load_y_n_r", "add_n_r"},
      {"add_n0", "store_z_n0"},  {"add_n_r", "store_z_n_r"},
  };
  for (const auto& m : merges) decide(*ctx, c, "order", {m[0], m[1]}, "MERGED");
  decide(*ctx, c, "dim_kind", {"load_x_n0"}, "VECTOR");
  decide(*ctx, c, "dim_kind", {"load_x_n_r"}, "LOOP");
  decide(*ctx, c, "order", {"load_x_n_r", "load_x_n0"}, "OUTER");
  int budget = 100000;
  Candidate full;
  REQUIRE(first_leaf(*ctx, c, full, &budget));
  CHECK(full.fired == 0);

  LoopNest l = reconstruct(k, *ctx, full);
  REQUIRE(l.roots.size() == 1);
  CHECK(l.roots[0].dims.size() == 5);
  REQUIRE(l.roots[0].children.size() == 1);
  const NestNode& vec = l.roots[0].children[0];
  CHECK(vec.dim_kind == NestDimKind::Vector);
  CHECK(vec.size == 4);
  CHECK(vec.children.size() == 5);

  CostReport r = evaluate(k, l, mp);
  CHECK(r.compute == 8);   // 2 muls + 2 adds + 2 trips * 2
  CHECK(r.memory == 24);   // three wide unit-stride accesses per trip
  CHECK(r.total == 24);
  CHECK(emit_source(k, l) == read_golden("axpy_vector.txt"));
}
