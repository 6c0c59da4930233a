#include <doctest.h>

#include <functional>
#include <string>
#include <vector>

#include "ispace/candidate.hpp"
#include "ispace/gpu_space.hpp"
#include "ispace/kernels.hpp"
#include "ispace/machine.hpp"
#include "ispace/parser.hpp"
#include "oracle.hpp"

using namespace ispace;

namespace {

std::shared_ptr<const SpaceContext> build_ok(const Kernel& k, const MachineParams& mp) {
  BuildResult r = build_gpu_space(k, mp);
  for (const auto& d : r.diagnostics) MESSAGE(format_diagnostic(d));
  REQUIRE(r.ctx != nullptr);
  return r.ctx;
}

std::uint32_t inst_of(const SpaceContext& ctx, const std::string& choice,
                      const std::vector<std::string>& args) {
  std::uint32_t c = ctx.table.find_choice(choice);
  REQUIRE(c != kNoInstance);
  std::vector<ObjId> ids;
  for (const auto& a : args) {
    ObjId o = ctx.bb.find(a);
    REQUIRE(o != kNoObj);
    ids.push_back(o);
  }
  InstanceRef ref = ctx.table.resolve(c, ids.data(), static_cast<int>(ids.size()));
  REQUIRE(ref.inst != kNoInstance);
  REQUIRE_FALSE(ref.swapped);  // tests pass stored orientation
  return ref.inst;
}

int value_of(const SpaceContext& ctx, const std::string& choice, const std::string& value) {
  std::uint32_t c = ctx.table.find_choice(choice);
  int v = ctx.table.value_index(c, value);
  REQUIRE(v >= 0);
  return v;
}

Mask read_domain(const SpaceContext& ctx, const Candidate& c, const std::string& choice,
                 const std::vector<std::string>& args) {
  std::uint32_t ci = ctx.table.find_choice(choice);
  std::vector<ObjId> ids;
  for (const auto& a : args) ids.push_back(ctx.bb.find(a));
  InstanceRef ref = ctx.table.resolve(ci, ids.data(), static_cast<int>(ids.size()));
  REQUIRE(ref.inst != kNoInstance);
  return ctx.table.oriented(ci, c.dom[ref.inst], ref.swapped);
}

Interval counter_of(const SpaceContext& ctx, const Candidate& c, const std::string& name) {
  std::uint32_t i = inst_of(ctx, name, {});
  return c.cnt[ctx.table.instances[i].counter_slot];
}

// First full implementation reachable by first-open/first-value descent with
// backtracking. Bounded so a propagation regression fails instead of hanging.
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

}  // namespace

TEST_CASE("the shipped space parses and validates cleanly") {
  ParseResult r = parse_space(gpu_space_text());
  for (const auto& d : r.diagnostics) MESSAGE(format_diagnostic(d));
  REQUIRE(r.ok());
  CHECK(r.diagnostics.empty());  // no warnings either
  CHECK(r.def.choices.size() >= 6);
  CHECK(r.def.quotients.size() == 3);
  CHECK(r.def.triggers.size() == 2);
}

TEST_CASE("outer product backbone propagates structural facts at the root") {
  Kernel k = make_outer_product(4, 3);
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  Candidate root;
  REQUIRE(make_root(*ctx, root) == PropStatus::Ok);
  CHECK_FALSE(fully_specified(*ctx, root));
  CHECK(root.fired == 0);

  const Mask kGlobal = bit(value_of(*ctx, "mem_space", "GLOBAL"));
  CHECK(read_domain(*ctx, root, "mem_space", {"a"}) == kGlobal);
  CHECK(read_domain(*ctx, root, "mem_space", {"b"}) == kGlobal);
  CHECK(read_domain(*ctx, root, "mem_space", {"c"}) == kGlobal);

  // stores never go through the read-only path
  Mask st = read_domain(*ctx, root, "cache", {"store_c"});
  CHECK_FALSE(mask_has(st, value_of(*ctx, "cache", "READ_ONLY")));
  CHECK(mask_count(read_domain(*ctx, root, "cache", {"load_a"})) == 4);

  // instructions sit inside their iteration dims, dependences run forward
  const Mask kOuter = bit(value_of(*ctx, "order", "OUTER"));
  const Mask kBefore = bit(value_of(*ctx, "order", "BEFORE"));
  CHECK(read_domain(*ctx, root, "order", {"d_m_r", "mul"}) == kOuter);
  CHECK(read_domain(*ctx, root, "order", {"d_n_r", "store_c"}) == kOuter);
  CHECK(read_domain(*ctx, root, "order", {"load_a", "mul"}) == kBefore);
  CHECK(read_domain(*ctx, root, "order", {"mul", "store_c"}) == kBefore);

  // dynamically sized dims cannot be unrolled, vectorized or thread-mapped
  Mask dk = read_domain(*ctx, root, "dim_kind", {"d_m_r"});
  CHECK(mask_has(dk, value_of(*ctx, "dim_kind", "LOOP")));
  CHECK(mask_has(dk, value_of(*ctx, "dim_kind", "BLOCK")));
  CHECK_FALSE(mask_has(dk, value_of(*ctx, "dim_kind", "THREAD")));
  CHECK_FALSE(mask_has(dk, value_of(*ctx, "dim_kind", "UNROLL")));
  CHECK_FALSE(mask_has(dk, value_of(*ctx, "dim_kind", "VECTOR")));

  // co-iterating dims of one instruction never merge
  Mask mm = read_domain(*ctx, root, "order", {"d_m_r", "d_n_r"});
  CHECK_FALSE(mask_has(mm, value_of(*ctx, "order", "MERGED")));

  // no static dims: thread product collapses, block levels stay open
  CHECK(counter_of(*ctx, root, "num_threads") == Interval{1, 1});
  CHECK(counter_of(*ctx, root, "num_thread_levels") == Interval{0, 0});
  CHECK(counter_of(*ctx, root, "shared_mem_bytes") == Interval{0, 0});
  Interval bl = counter_of(*ctx, root, "num_block_levels");
  CHECK(bl.lo == 0);
  CHECK(bl.hi == 2);
}

TEST_CASE("outer product solutions match the independent oracle") {
  Kernel k = make_outer_product(2, 2);
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  auto engine = testutil::engine_solutions(*ctx);
  auto oracle = testutil::oracle_solutions(ctx->def, ctx->bb, gpu_providers(k, mp));
  CHECK(engine.size() == oracle.size());
  REQUIRE_FALSE(engine.empty());
  CHECK(engine == oracle);

  // spot-check a handful against the one-shot reference interpreter
  int n = 0;
  for (const auto& a : engine) {
    if (++n > 5) break;
    std::string why;
    bool ok = testutil::oracle_check(ctx->def, ctx->bb, gpu_providers(k, mp), a, &why);
    if (!ok) MESSAGE(why << " in " << a.to_string());
    CHECK(ok);
  }
}

TEST_CASE("communication lowerings fire exactly when a hand-off is not merged away") {
  Kernel k = make_axpy(2, {});
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  Candidate root;
  REQUIRE(make_root(*ctx, root) == PropStatus::Ok);
  CHECK(root.fired == 0);

  // copy machinery stays dormant while the pair could still merge, yet its
  // staging buffers keep the shared budget honest: 4 comms times 8 bytes
  std::uint32_t store_cache = inst_of(*ctx, "cache", {"p2p0_store"});
  CHECK_FALSE(instance_live(*ctx, root, store_cache));
  CHECK(counter_of(*ctx, root, "shared_mem_bytes") == Interval{0, 32});

  std::uint32_t pair01 = inst_of(*ctx, "order", {"load_x_n_r", "mul_n_r"});

  SUBCASE("merging the pair keeps the lowering dormant") {
    Candidate c;
    REQUIRE(apply_decision(*ctx, root, pair01, value_of(*ctx, "order", "MERGED"), c) ==
            PropStatus::Ok);
    CHECK(c.fired == 0);
    CHECK_FALSE(instance_live(*ctx, c, store_cache));
    // merged dims agree on their kind; the shared axis still runs as a loop
    Mask dk = read_domain(*ctx, c, "dim_kind", {"load_x_n_r"});
    CHECK(mask_has(dk, value_of(*ctx, "dim_kind", "LOOP")));
    // this comm can never stage through memory now, so its buffer drops out
    CHECK(counter_of(*ctx, c, "shared_mem_bytes") == Interval{0, 24});
  }

  SUBCASE("separating the pair fires the lowering and wakes its objects") {
    Candidate c;
    REQUIRE(apply_decision(*ctx, root, pair01, value_of(*ctx, "order", "BEFORE"), c) ==
            PropStatus::Ok);
    CHECK(c.fired == 1);
    CHECK(instance_live(*ctx, c, store_cache));
    // the staging buffer may now sit in shared memory
    Mask ms = read_domain(*ctx, c, "mem_space", {"tmp0"});
    CHECK(mask_has(ms, value_of(*ctx, "mem_space", "SHARED")));
    // the other three hand-offs may still separate, so the budget holds all 4
    CHECK(counter_of(*ctx, c, "shared_mem_bytes") == Interval{0, 32});
    // committing the live buffer to shared memory raises the floor
    Candidate c2;
    REQUIRE(apply_decision(*ctx, c, inst_of(*ctx, "mem_space", {"tmp0"}),
                           value_of(*ctx, "mem_space", "SHARED"), c2) == PropStatus::Ok);
    CHECK(counter_of(*ctx, c2, "shared_mem_bytes").lo == 8);
  }
}

TEST_CASE("a full matmul implementation survives the independent audit") {
  Kernel k = make_matmul(4, 4, 4, {{2}});
  MachineParams mp;
  auto ctx = build_ok(k, mp);

  Candidate root;
  REQUIRE(make_root(*ctx, root) == PropStatus::Ok);

  // tile sizes come pinned by a one-value universe
  CHECK(read_domain(*ctx, root, "size", {"load_a_m0"}) == Mask{1});
  CHECK(counter_of(*ctx, root, "num_threads").lo == 1);

  int budget = 200000;
  Candidate leaf;
  REQUIRE(first_leaf(*ctx, root, leaf, &budget));
  REQUIRE(fully_specified(*ctx, leaf));

  std::string why;
  bool ok = check_implementation(*ctx, leaf, &why);
  if (!ok) MESSAGE(why);
  CHECK(ok);

  testutil::FullAssign a = testutil::to_full_assign(*ctx, leaf);
  bool ook = testutil::oracle_check(ctx->def, ctx->bb, gpu_providers(k, mp), a, &why);
  if (!ook) MESSAGE(why);
  CHECK(ook);

  // the same descent lands on the bit-identical candidate
  int budget2 = 200000;
  Candidate leaf2;
  REQUIRE(first_leaf(*ctx, root, leaf2, &budget2));
  CHECK(digest(*ctx, leaf) == digest(*ctx, leaf2));
  CHECK(budget == budget2);
}
