#include "ispace/candidate.hpp"

#include <algorithm>
#include <bit>
#include <cstdio>
#include <map>

#include <nlohmann/json.hpp>

#include "ispace/validate.hpp"

namespace ispace {

namespace {

std::vector<ObjId> sorted_members(const Backbone& bb, const std::string& set) {
  std::vector<ObjId> v = bb.members(set);
  std::sort(v.begin(), v.end());
  return v;
}

std::vector<ObjId> sorted_members(const Backbone& bb, const std::string& set, ObjId key) {
  std::vector<ObjId> v = bb.members(set, key);
  std::sort(v.begin(), v.end());
  return v;
}

std::uint64_t need_of(const Backbone& bb, const ObjId* args, std::size_t n) {
  std::uint64_t need = 0;
  for (std::size_t i = 0; i < n; ++i) {
    std::uint32_t l = bb.obj(args[i]).lowering;
    if (l != kNoLowering) need |= std::uint64_t{1} << l;
  }
  return need;
}

struct TableBuilder {
  const SpaceDefinition& def;
  const Backbone& bb;
  const Providers& providers;
  std::vector<Diagnostic>& diags;
  InstanceTable t;
  std::map<std::vector<std::int64_t>, std::uint32_t> universe_pool;

  void err(const char* code, std::string msg) {
    diags.push_back({Severity::Error, code, std::move(msg), SourceLoc{}});
  }

  std::uint32_t intern_universe(std::vector<std::int64_t> u) {
    auto it = universe_pool.find(u);
    if (it != universe_pool.end()) return it->second;
    std::uint32_t id = static_cast<std::uint32_t>(t.universes.size());
    t.universes.push_back(u);
    universe_pool.emplace(std::move(u), id);
    return id;
  }

  void add_instance(std::uint32_t choice, const ObjId* args, std::size_t n) {
    const ChoiceInfo& ci = t.choices[choice];
    Instance inst;
    inst.choice = choice;
    inst.nargs = static_cast<std::uint8_t>(n);
    for (std::size_t i = 0; i < n; ++i) inst.args[i] = args[i];
    inst.need = need_of(bb, args, n);
    switch (ci.kind) {
      case InstKind::Enum:
        inst.nvals = static_cast<std::uint8_t>(ci.values.size());
        break;
      case InstKind::Integer: {
        const ChoiceDecl* cd = def.find_choice(ci.name);
        std::vector<ObjId> key_args;
        for (const auto& var : opaque_vars(cd->universe)) {
          bool found = false;
          for (std::size_t i = 0; i < cd->params.size(); ++i)
            if (cd->params[i].var == var) {
              key_args.push_back(args[i]);
              found = true;
            }
          if (!found) {
            err(diag::kUnknownVar, "universe of '" + ci.name + "' uses unbound '$" + var + "'");
            return;
          }
        }
        if (!providers.universe) {
          err(diag::kUnknownValue, "no universe provider registered");
          return;
        }
        std::vector<std::int64_t> u = providers.universe(cd->universe, key_args);
        std::sort(u.begin(), u.end());
        u.erase(std::unique(u.begin(), u.end()), u.end());
        if (u.empty() || u.size() > kMaxDomainBits) {
          err(diag::kUnknownValue, "universe of '" + ci.name + "' has " +
                                       std::to_string(u.size()) + " values");
          return;
        }
        inst.nvals = static_cast<std::uint8_t>(u.size());
        inst.universe_id = intern_universe(std::move(u));
        break;
      }
      case InstKind::Counter:
        inst.nvals = 0;
        inst.counter_slot = t.num_counter_slots++;
        break;
    }
    inst.initial = ci.kind == InstKind::Counter ? 0 : full_mask(inst.nvals);
    std::uint32_t id = static_cast<std::uint32_t>(t.instances.size());
    t.instances.push_back(inst);
    Lookup_set(choice, args, n, id);
  }

  void Lookup_set(std::uint32_t choice, const ObjId* args, std::size_t n, std::uint32_t id) {
    InstanceTable::Lookup& lu = t.lookups[choice];
    if (n == 0) {
      lu.nullary = id;
    } else if (n == 1) {
      if (lu.unary.empty()) lu.unary.assign(t.num_objects, kNoInstance);
      lu.unary[args[0]] = id;
    } else {
      if (lu.binary.empty()) lu.binary.assign(std::size_t{t.num_objects} * t.num_objects, kNoInstance);
      lu.binary[std::size_t{args[0]} * t.num_objects + args[1]] = id;
    }
  }

  void build_choice_infos() {
    for (const auto& c : def.choices) {
      ChoiceInfo ci;
      ci.name = c.name;
      ci.kind = c.kind == ChoiceKind::Enum      ? InstKind::Enum
                : c.kind == ChoiceKind::Integer ? InstKind::Integer
                                                : InstKind::Counter;
      ci.values = c.values;
      for (const auto& p : c.params) ci.param_sets.push_back(p.set);
      if (!c.antisym.empty()) {
        ci.swap.resize(c.values.size());
        for (std::size_t i = 0; i < c.values.size(); ++i)
          ci.swap[i] = static_cast<std::uint8_t>(i);
        for (const auto& p : c.antisym) {
          int f = -1, to = -1;
          for (std::size_t i = 0; i < c.values.size(); ++i) {
            if (c.values[i] == p.from) f = static_cast<int>(i);
            if (c.values[i] == p.to) to = static_cast<int>(i);
          }
          ci.swap[f] = static_cast<std::uint8_t>(to);
          ci.swap[to] = static_cast<std::uint8_t>(f);
        }
      }
      t.choices.push_back(std::move(ci));
    }
    for (std::size_t qi = 0; qi < def.quotients.size(); ++qi) {
      const QuotientDecl& q = def.quotients[qi];
      ChoiceInfo ci;
      ci.name = q.flag;
      ci.kind = InstKind::Enum;
      ci.values = {"FALSE", "TRUE"};
      ci.param_sets.push_back(q.base_set);
      if (q.has_param) ci.param_sets.push_back(q.param.set);
      ci.from_quotient = true;
      ci.quotient_index = static_cast<std::uint32_t>(qi);
      t.choices.push_back(std::move(ci));
    }
  }

  void build_instances() {
    t.lookups.resize(t.choices.size());
    for (std::uint32_t ci = 0; ci < t.choices.size(); ++ci) {
      const ChoiceInfo& info = t.choices[ci];
      if (info.from_quotient) {
        const QuotientDecl& q = def.quotients[info.quotient_index];
        if (q.has_param) {
          for (ObjId p : sorted_members(bb, q.param.set)) {
            auto elems = q.base_set_arg.empty() ? sorted_members(bb, q.base_set)
                                                : sorted_members(bb, q.base_set, p);
            for (ObjId d : elems) {
              if (d == p) continue;
              ObjId args[2] = {d, p};
              add_instance(ci, args, 2);
            }
          }
        } else {
          for (ObjId d : sorted_members(bb, q.base_set)) add_instance(ci, &d, 1);
        }
        continue;
      }
      switch (info.param_sets.size()) {
        case 0:
          add_instance(ci, nullptr, 0);
          break;
        case 1:
          for (ObjId a : sorted_members(bb, info.param_sets[0])) add_instance(ci, &a, 1);
          break;
        case 2: {
          auto as = sorted_members(bb, info.param_sets[0]);
          if (!info.swap.empty()) {
            for (std::size_t i = 0; i < as.size(); ++i)
              for (std::size_t j = i + 1; j < as.size(); ++j) {
                ObjId args[2] = {as[i], as[j]};
                add_instance(ci, args, 2);
              }
          } else {
            auto bs = sorted_members(bb, info.param_sets[1]);
            for (ObjId a : as)
              for (ObjId b : bs) {
                if (a == b) continue;
                ObjId args[2] = {a, b};
                add_instance(ci, args, 2);
              }
          }
          break;
        }
        default:
          err(diag::kUnsupported, "choice '" + info.name + "' has more than two parameters");
      }
    }
  }

  void apply_pre(const std::vector<PreRestriction>& pre) {
    for (const auto& pr : pre) {
      std::uint32_t ci = t.find_choice(pr.choice);
      if (ci == ~std::uint32_t{0}) {
        err(diag::kUnknownChoice, "pre-restriction on unknown choice '" + pr.choice + "'");
        continue;
      }
      if (t.choices[ci].kind != InstKind::Enum) {
        err(diag::kUnsupported, "pre-restriction on non-enum choice '" + pr.choice + "'");
        continue;
      }
      std::vector<ObjId> args;
      bool ok = true;
      for (const auto& name : pr.args) {
        ObjId o = bb.find(name);
        if (o == kNoObj) {
          err(diag::kUnknownValue, "pre-restriction names unknown object '" + name + "'");
          ok = false;
        }
        args.push_back(o);
      }
      if (!ok) continue;
      InstanceRef ref = t.resolve(ci, args.data(), args.size());
      if (ref.inst == kNoInstance) {
        err(diag::kUnknownValue, "pre-restriction on '" + pr.choice + "' misses its instance");
        continue;
      }
      Mask m = 0;
      for (const auto& v : pr.values) {
        int idx = t.value_index(ci, v);
        if (idx < 0) {
          err(diag::kUnknownValue, "'" + v + "' is not a value of '" + pr.choice + "'");
          ok = false;
        } else {
          m |= bit(idx);
        }
      }
      if (!ok) continue;
      Instance& inst = t.instances[ref.inst];
      inst.initial &= t.to_stored(ci, m, ref.swapped);
      if (inst.initial == 0)
        err(diag::kUnknownValue, "pre-restrictions empty '" + pr.choice + "' instance");
    }
  }

  void build_canonical_order() {
    std::vector<std::uint32_t> order(t.instances.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) order[i] = i;
    auto key = [&](std::uint32_t i) {
      const Instance& in = t.instances[i];
      std::string k = t.choices[in.choice].name;
      for (int a = 0; a < in.nargs; ++a) k += "\x1f" + bb.obj(in.args[a]).name;
      return k;
    };
    std::vector<std::string> keys(order.size());
    for (std::uint32_t i = 0; i < order.size(); ++i) keys[i] = key(i);
    std::sort(order.begin(), order.end(),
              [&](std::uint32_t a, std::uint32_t b) { return keys[a] < keys[b]; });
    t.canonical_order = std::move(order);
  }

  InstanceTable run(const std::vector<PreRestriction>& pre) {
    t.num_objects = static_cast<std::uint32_t>(bb.objects.size());
    build_choice_infos();
    build_instances();
    apply_pre(pre);
    build_canonical_order();
    return std::move(t);
  }
};

constexpr std::uint64_t kFnvOffset = 1469598103934665603ull;
constexpr std::uint64_t kFnvPrime = 1099511628211ull;

struct Fnv {
  std::uint64_t h = kFnvOffset;
  void eat(const void* p, std::size_t n) {
    const auto* b = static_cast<const unsigned char*>(p);
    for (std::size_t i = 0; i < n; ++i) {
      h ^= b[i];
      h *= kFnvPrime;
    }
  }
  void eat_u32(std::uint32_t v) {
    unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                          static_cast<unsigned char>(v >> 16), static_cast<unsigned char>(v >> 24)};
    eat(b, 4);
  }
  void eat_u64(std::uint64_t v) {
    eat_u32(static_cast<std::uint32_t>(v));
    eat_u32(static_cast<std::uint32_t>(v >> 32));
  }
  void eat_str(const std::string& s) {
    eat_u64(s.size());
    eat(s.data(), s.size());
  }
};

// Serialization layout: base instances (no lowering dependency) in table
// order, then one block per fired lowering in ascending id order, each block
// holding the instances whose highest dependency is that lowering.
std::vector<std::uint32_t> layout_order(const SpaceContext& ctx, const Candidate& c) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < ctx.table.instances.size(); ++i)
    if (ctx.table.instances[i].need == 0) out.push_back(i);
  for (std::uint32_t l = 0; l < ctx.bb.lowerings.size(); ++l) {
    if (!((c.fired >> l) & 1)) continue;
    for (std::uint32_t i = 0; i < ctx.table.instances.size(); ++i) {
      std::uint64_t need = ctx.table.instances[i].need;
      if (need == 0 || (need & ~c.fired) != 0) continue;
      if (static_cast<std::uint32_t>(63 - std::countl_zero(need)) == l) out.push_back(i);
    }
  }
  return out;
}

}  // namespace

std::uint32_t InstanceTable::find_choice(const std::string& name) const {
  for (std::uint32_t i = 0; i < choices.size(); ++i)
    if (choices[i].name == name) return i;
  return ~std::uint32_t{0};
}

std::uint32_t InstanceTable::find(std::uint32_t choice, ObjId a, ObjId b) const {
  const Lookup& lu = lookups[choice];
  if (a == kNoObj) return lu.nullary;
  if (b == kNoObj) return lu.unary.empty() ? kNoInstance : lu.unary[a];
  if (lu.binary.empty()) return kNoInstance;
  return lu.binary[std::size_t{a} * num_objects + b];
}

InstanceRef InstanceTable::resolve(std::uint32_t choice, const ObjId* args, std::size_t n) const {
  if (n == 2 && choices[choice].antisymmetric() && args[0] > args[1])
    return {find(choice, args[1], args[0]), true};
  if (n == 0) return {find(choice), false};
  if (n == 1) return {find(choice, args[0]), false};
  return {find(choice, args[0], args[1]), false};
}

int InstanceTable::value_index(std::uint32_t choice, const std::string& value) const {
  const auto& vs = choices[choice].values;
  for (std::size_t i = 0; i < vs.size(); ++i)
    if (vs[i] == value) return static_cast<int>(i);
  return -1;
}

Mask InstanceTable::oriented(std::uint32_t choice, Mask stored, bool swapped) const {
  if (!swapped || choices[choice].swap.empty()) return stored;
  const auto& sw = choices[choice].swap;
  Mask out = 0;
  for (std::size_t v = 0; v < sw.size(); ++v)
    if (mask_has(stored, static_cast<int>(v))) out |= bit(sw[v]);
  return out;
}

BuildResult build_space(BuildInput in) {
  BuildResult res;
  res.diagnostics = validate(in.def);
  if (has_errors(res.diagnostics)) return res;

  auto ctx = std::make_shared<SpaceContext>();
  ctx->def = std::move(in.def);
  ctx->bb = std::move(in.bb);

  TableBuilder tb{ctx->def, ctx->bb, in.providers, res.diagnostics, {}, {}};
  ctx->table = tb.run(in.pre);
  if (has_errors(res.diagnostics)) return res;

  ctx->comp = compile_space(ctx->def, ctx->bb, in.providers, ctx->table, res.diagnostics);
  if (has_errors(res.diagnostics)) return res;

  res.ctx = std::move(ctx);
  return res;
}

bool fully_specified(const SpaceContext& ctx, const Candidate& c) {
  for (std::uint32_t i = 0; i < ctx.table.instances.size(); ++i) {
    const Instance& in = ctx.table.instances[i];
    if (in.counter_slot != ~std::uint32_t{0}) continue;
    if (!instance_live(ctx, c, i)) continue;
    if (!mask_single(c.dom[i])) return false;
  }
  return true;
}

std::vector<std::uint32_t> open_choices(const SpaceContext& ctx, const Candidate& c) {
  std::vector<std::uint32_t> out;
  for (std::uint32_t i = 0; i < ctx.table.instances.size(); ++i) {
    const Instance& in = ctx.table.instances[i];
    if (in.counter_slot != ~std::uint32_t{0}) continue;
    if (!instance_live(ctx, c, i)) continue;
    if (!mask_single(c.dom[i])) out.push_back(i);
  }
  return out;
}

std::uint64_t digest(const SpaceContext& ctx, const Candidate& c) {
  Fnv f;
  for (std::uint32_t i : ctx.table.canonical_order) {
    const Instance& in = ctx.table.instances[i];
    const ChoiceInfo& ci = ctx.table.choices[in.choice];
    f.eat_str(ci.name);
    for (int a = 0; a < in.nargs; ++a) f.eat_str(ctx.bb.obj(in.args[a]).name);
    switch (ci.kind) {
      case InstKind::Enum:
        for (int v = 0; v < in.nvals; ++v)
          if (mask_has(c.dom[i], v)) f.eat_str(ci.values[v]);
        break;
      case InstKind::Integer: {
        const auto& u = ctx.table.universe_of(i);
        for (int v = 0; v < in.nvals; ++v)
          if (mask_has(c.dom[i], v)) f.eat_u64(static_cast<std::uint64_t>(u[v]));
        break;
      }
      case InstKind::Counter:
        f.eat_u64(static_cast<std::uint64_t>(c.cnt[in.counter_slot].lo));
        f.eat_u64(static_cast<std::uint64_t>(c.cnt[in.counter_slot].hi));
        break;
    }
  }
  std::vector<std::string> tags;
  for (std::uint32_t l = 0; l < ctx.bb.lowerings.size(); ++l)
    if ((c.fired >> l) & 1) tags.push_back(ctx.bb.lowerings[l].tag);
  std::sort(tags.begin(), tags.end());
  for (const auto& tag : tags) f.eat_str(tag);
  return f.h;
}

std::string serialize_text(const SpaceContext& ctx, const Candidate& c) {
  nlohmann::ordered_json j;
  char hex[17];
  std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(digest(ctx, c)));
  j["digest"] = hex;
  j["generation"] = c.generation;
  j["fired"] = nlohmann::ordered_json::array();
  for (std::uint32_t l = 0; l < ctx.bb.lowerings.size(); ++l)
    if ((c.fired >> l) & 1) j["fired"].push_back(ctx.bb.lowerings[l].tag);
  j["choices"] = nlohmann::ordered_json::array();
  j["counters"] = nlohmann::ordered_json::array();
  for (std::uint32_t i : layout_order(ctx, c)) {
    const Instance& in = ctx.table.instances[i];
    const ChoiceInfo& ci = ctx.table.choices[in.choice];
    nlohmann::ordered_json e;
    e["choice"] = ci.name;
    e["args"] = nlohmann::ordered_json::array();
    for (int a = 0; a < in.nargs; ++a) e["args"].push_back(ctx.bb.obj(in.args[a]).name);
    switch (ci.kind) {
      case InstKind::Enum: {
        e["values"] = nlohmann::ordered_json::array();
        for (int v = 0; v < in.nvals; ++v)
          if (mask_has(c.dom[i], v)) e["values"].push_back(ci.values[v]);
        j["choices"].push_back(std::move(e));
        break;
      }
      case InstKind::Integer: {
        const auto& u = ctx.table.universe_of(i);
        e["values"] = nlohmann::ordered_json::array();
        for (int v = 0; v < in.nvals; ++v)
          if (mask_has(c.dom[i], v)) e["values"].push_back(u[v]);
        j["choices"].push_back(std::move(e));
        break;
      }
      case InstKind::Counter:
        e["lo"] = c.cnt[in.counter_slot].lo;
        e["hi"] = c.cnt[in.counter_slot].hi;
        j["counters"].push_back(std::move(e));
        break;
    }
  }
  return j.dump(2);
}

bool deserialize_text(const SpaceContext& ctx, const std::string& text, Candidate& out,
                      std::string* err) {
  auto fail = [&](const std::string& m) {
    if (err) *err = m;
    return false;
  };
  nlohmann::json j = nlohmann::json::parse(text, nullptr, false);
  if (j.is_discarded()) return fail("not valid JSON");
  out.dom.assign(ctx.table.instances.size(), 0);
  for (std::uint32_t i = 0; i < ctx.table.instances.size(); ++i)
    out.dom[i] = ctx.table.instances[i].initial;
  out.cnt.assign(ctx.table.num_counter_slots, Interval{0, kSatMax});
  out.fired = 0;
  out.generation = j.value("generation", std::uint64_t{0});
  for (const auto& tag : j.value("fired", nlohmann::json::array())) {
    bool found = false;
    for (std::uint32_t l = 0; l < ctx.bb.lowerings.size(); ++l)
      if (ctx.bb.lowerings[l].tag == tag) {
        out.fired |= std::uint64_t{1} << l;
        found = true;
      }
    if (!found) return fail("unknown lowering tag '" + tag.get<std::string>() + "'");
  }
  for (const auto& e : j.value("choices", nlohmann::json::array())) {
    std::uint32_t ci = ctx.table.find_choice(e.value("choice", ""));
    if (ci == ~std::uint32_t{0}) return fail("unknown choice '" + e.value("choice", "") + "'");
    std::vector<ObjId> args;
    for (const auto& a : e.value("args", nlohmann::json::array())) {
      ObjId o = ctx.bb.find(a.get<std::string>());
      if (o == kNoObj) return fail("unknown object '" + a.get<std::string>() + "'");
      args.push_back(o);
    }
    InstanceRef ref = ctx.table.resolve(ci, args.data(), args.size());
    if (ref.inst == kNoInstance) return fail("no instance for '" + e.value("choice", "") + "'");
    Mask m = 0;
    const ChoiceInfo& info = ctx.table.choices[ci];
    for (const auto& v : e.value("values", nlohmann::json::array())) {
      if (info.kind == InstKind::Enum) {
        int idx = ctx.table.value_index(ci, v.get<std::string>());
        if (idx < 0) return fail("unknown value in '" + info.name + "'");
        m |= bit(idx);
      } else {
        const auto& u = ctx.table.universe_of(ref.inst);
        auto it = std::find(u.begin(), u.end(), v.get<std::int64_t>());
        if (it == u.end()) return fail("value outside universe of '" + info.name + "'");
        m |= bit(static_cast<int>(it - u.begin()));
      }
    }
    out.dom[ref.inst] &= ctx.table.to_stored(ci, m, ref.swapped);
    if (out.dom[ref.inst] == 0) return fail("empty domain for '" + info.name + "'");
  }
  for (const auto& e : j.value("counters", nlohmann::json::array())) {
    std::uint32_t ci = ctx.table.find_choice(e.value("choice", ""));
    if (ci == ~std::uint32_t{0}) return fail("unknown counter '" + e.value("choice", "") + "'");
    std::uint32_t inst = ctx.table.find(ci);
    if (inst == kNoInstance) return fail("no instance for counter");
    out.cnt[ctx.table.instances[inst].counter_slot] = {e.value("lo", std::int64_t{0}),
                                                       e.value("hi", kSatMax)};
  }
  if (j.contains("digest")) {
    char hex[17];
    std::snprintf(hex, sizeof hex, "%016llx", static_cast<unsigned long long>(digest(ctx, out)));
    if (j["digest"] != hex) return fail("digest mismatch");
  }
  return true;
}

std::vector<std::uint8_t> serialize_binary(const SpaceContext& ctx, const Candidate& c) {
  std::vector<std::uint8_t> out;
  auto put_u32 = [&](std::uint32_t v) {
    for (int i = 0; i < 4; ++i) out.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  };
  auto put_u64 = [&](std::uint64_t v) {
    put_u32(static_cast<std::uint32_t>(v));
    put_u32(static_cast<std::uint32_t>(v >> 32));
  };
  put_u32(0x43505349u);  // "ISPC"
  put_u32(1);            // version
  put_u64(digest(ctx, c));
  put_u64(c.fired);
  put_u64(c.generation);
  auto order = layout_order(ctx, c);
  put_u32(static_cast<std::uint32_t>(order.size()));
  for (std::uint32_t i : order) {
    put_u32(i);
    const Instance& in = ctx.table.instances[i];
    if (in.counter_slot != ~std::uint32_t{0}) {
      put_u64(static_cast<std::uint64_t>(c.cnt[in.counter_slot].lo));
      put_u64(static_cast<std::uint64_t>(c.cnt[in.counter_slot].hi));
    } else {
      put_u32(c.dom[i]);
    }
  }
  return out;
}

bool deserialize_binary(const SpaceContext& ctx, const std::vector<std::uint8_t>& bytes,
                        Candidate& out, std::string* err) {
  auto fail = [&](const std::string& m) {
    if (err) *err = m;
    return false;
  };
  std::size_t pos = 0;
  auto get_u32 = [&](std::uint32_t& v) {
    if (pos + 4 > bytes.size()) return false;
    v = 0;
    for (int i = 0; i < 4; ++i) v |= std::uint32_t{bytes[pos++]} << (8 * i);
    return true;
  };
  auto get_u64 = [&](std::uint64_t& v) {
    std::uint32_t lo, hi;
    if (!get_u32(lo) || !get_u32(hi)) return false;
    v = lo | (std::uint64_t{hi} << 32);
    return true;
  };
  std::uint32_t magic = 0, version = 0;
  std::uint64_t want_digest = 0;
  if (!get_u32(magic) || magic != 0x43505349u) return fail("bad magic");
  if (!get_u32(version) || version != 1) return fail("unsupported version");
  if (!get_u64(want_digest)) return fail("truncated");
  out.dom.assign(ctx.table.instances.size(), 0);
  for (std::uint32_t i = 0; i < ctx.table.instances.size(); ++i)
    out.dom[i] = ctx.table.instances[i].initial;
  out.cnt.assign(ctx.table.num_counter_slots, Interval{0, kSatMax});
  if (!get_u64(out.fired) || !get_u64(out.generation)) return fail("truncated");
  std::uint32_t n = 0;
  if (!get_u32(n)) return fail("truncated");
  for (std::uint32_t k = 0; k < n; ++k) {
    std::uint32_t i = 0;
    if (!get_u32(i) || i >= ctx.table.instances.size()) return fail("bad instance id");
    const Instance& in = ctx.table.instances[i];
    if (in.counter_slot != ~std::uint32_t{0}) {
      std::uint64_t lo, hi;
      if (!get_u64(lo) || !get_u64(hi)) return fail("truncated");
      out.cnt[in.counter_slot] = {static_cast<std::int64_t>(lo), static_cast<std::int64_t>(hi)};
    } else {
      std::uint32_t m = 0;
      if (!get_u32(m)) return fail("truncated");
      if ((m & ~std::uint32_t{full_mask(in.nvals)}) != 0) return fail("domain out of range");
      out.dom[i] = m;
      if (m == 0) return fail("empty domain");
    }
  }
  if (digest(ctx, out) != want_digest) return fail("digest mismatch");
  return true;
}

namespace {

std::string describe_instance(const SpaceContext& ctx, std::uint32_t i) {
  const Instance& in = ctx.table.instances[i];
  std::string s = ctx.table.choices[in.choice].name + "(";
  for (int a = 0; a < in.nargs; ++a) {
    if (a) s += ", ";
    s += ctx.bb.obj(in.args[a]).name;
  }
  return s + ")";
}

bool tuple_allowed(const TableShape& sh, const int* coord) {
  // Membership via the slot-0 support rows.
  if (sh.arity == 1) return (sh.rows[0][coord[0]][0] & 1) != 0;
  std::size_t rest = 0;
  if (sh.arity == 2) rest = static_cast<std::size_t>(coord[1]);
  else rest = static_cast<std::size_t>(coord[1]) * sh.nvals[2] + coord[2];
  return (sh.rows[0][coord[0]][rest / 64] >> (rest % 64)) & 1;
}

}  // namespace

bool check_implementation(const SpaceContext& ctx, const Candidate& c, std::string* why) {
  auto fail = [&](const std::string& m) {
    if (why) *why = m;
    return false;
  };
  if (!fully_specified(ctx, c)) return fail("not fully specified");

  for (const auto& tc : ctx.comp.tables) {
    if ((tc.need & ~c.fired) != 0) continue;
    int coord[3] = {0, 0, 0};
    for (int s = 0; s < tc.arity; ++s) coord[s] = mask_first(c.dom[tc.slot[s]]);
    if (!tuple_allowed(ctx.comp.shapes[tc.shape], coord))
      return fail("constraint violated over " + describe_instance(ctx, tc.slot[0]));
  }

  for (const auto& cc : ctx.comp.counters) {
    std::int64_t value = cc.op == CounterOp::Sum ? 0 : 1;
    for (const auto& t : cc.terms) {
      if ((t.need & ~c.fired) != 0) continue;
      bool on = true;
      for (const auto& g : t.guard)
        if (!(c.dom[g.slot] & g.mask)) on = false;
      if (!on) continue;
      std::int64_t v = t.const_val;
      if (t.int_slot != kNoInstance)
        v = ctx.table.universe_of(t.int_slot)[mask_first(c.dom[t.int_slot])];
      value = cc.op == CounterOp::Sum ? sat_add(value, v) : sat_mul(value, v);
    }
    const Interval& iv = c.cnt[ctx.table.instances[cc.counter_inst].counter_slot];
    if (value < iv.lo || value > iv.hi)
      return fail(describe_instance(ctx, cc.counter_inst) + " outside its interval");
    for (const auto& b : cc.bounds) {
      if ((b.need & ~c.fired) != 0) continue;
      bool ok = true;
      switch (b.op) {
        case CmpOp::Le: ok = value <= b.rhs; break;
        case CmpOp::Lt: ok = value < b.rhs; break;
        case CmpOp::Ge: ok = value >= b.rhs; break;
        case CmpOp::Gt: ok = value > b.rhs; break;
        case CmpOp::Eq: ok = value == b.rhs; break;
        case CmpOp::Ne: ok = value != b.rhs; break;
      }
      if (!ok) return fail(describe_instance(ctx, cc.counter_inst) + " bound violated");
    }
  }

  for (const auto& qe : ctx.comp.quot_elems) {
    if ((qe.need & ~c.fired) != 0) continue;
    bool member = (c.dom[qe.member_slot] & qe.member_mask) != 0;
    bool rep = member;
    if (member) {
      for (const auto& p : qe.earlier) {
        if ((p.need & ~c.fired) != 0) continue;
        bool peer_member = (c.dom[p.member_slot] & p.member_mask) != 0;
        bool equiv = (c.dom[p.equiv_slot] & p.equiv_mask) != 0;
        if (peer_member && equiv) rep = false;
      }
    }
    bool flag = mask_has(c.dom[qe.flag_inst], 1);
    if (flag != rep) return fail("flag " + describe_instance(ctx, qe.flag_inst) + " inconsistent");
  }

  for (const auto& tr : ctx.comp.triggers) {
    if ((tr.need & ~c.fired) != 0) continue;
    if (tr.lowering == kNoLowering) continue;
    if ((c.fired >> tr.lowering) & 1) continue;
    // Decided candidate: the formula either holds or it does not.
    struct Eval {
      const Candidate& c;
      bool holds(const TrigNode& n) const {
        switch (n.kind) {
          case TrigNode::Kind::Atom:
            if (n.slot == kNoInstance) return n.mask != 0;
            return (c.dom[n.slot] & ~n.mask) == 0;
          case TrigNode::Kind::And:
            for (const auto& k : n.kids)
              if (!holds(k)) return false;
            return true;
          case TrigNode::Kind::Or:
            for (const auto& k : n.kids)
              if (holds(k)) return true;
            return false;
        }
        return false;
      }
    } ev{c};
    if (ev.holds(tr.when))
      return fail("unfired lowering '" + ctx.bb.lowerings[tr.lowering].tag + "' with met condition");
  }
  return true;
}

}  // namespace ispace
