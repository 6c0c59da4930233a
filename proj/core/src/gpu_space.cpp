#include "ispace/gpu_space.hpp"

#include <map>
#include <stdexcept>

#include "ispace/gpu_space_text.hpp"
#include "ispace/parser.hpp"

namespace ispace {

const char* gpu_space_text() { return gpu::kGpuSpaceText; }

namespace {

// Dynamic dims may only merge when every size assignment gives them the same
// trip count. Communication pairs tie the sizes of their axes level by level,
// so axes linked through pairs (transitively) qualify; nothing else does.
struct MergeClasses {
  std::map<ObjId, ObjId> parent;  // logical axis -> representative

  ObjId find(ObjId x) {
    auto it = parent.find(x);
    if (it == parent.end() || it->second == x) return x;
    return it->second = find(it->second);
  }
  void unite(ObjId a, ObjId b) { parent[find(a)] = find(b); }
};

struct HostData {
  std::map<ObjId, std::vector<std::int64_t>> universes;  // static dim -> sizes
  std::map<ObjId, std::int64_t> byte_sizes;              // region -> bytes
  std::map<ObjId, std::uint32_t> pair_lowering;          // pair object -> lowering
  struct DimShape {
    bool is_static = false;
    ObjId cls = kNoObj;          // merge class of the logical axis
    std::int64_t extent = 0;     // logical extent
  };
  std::map<ObjId, DimShape> dims;
};

HostData host_data(const Kernel& k) {
  HostData h;
  for (const auto& [d, di] : k.dims)
    if (di.is_static) h.universes[d] = di.sizes;
  for (const auto& [r, ri] : k.regions) h.byte_sizes[r] = ri.elems * ri.elem_bytes;

  MergeClasses mc;
  for (const Comm& cm : k.comms) {
    for (std::size_t j = 0; j < cm.pairs.size(); ++j) {
      h.pair_lowering[cm.pair_objs[j]] = cm.lowering;
      mc.unite(k.dims.at(cm.pairs[j].first).logical, k.dims.at(cm.pairs[j].second).logical);
    }
  }
  for (const auto& [d, di] : k.dims) {
    HostData::DimShape s;
    s.is_static = di.is_static;
    s.cls = mc.find(di.logical);
    s.extent = k.logicals.at(di.logical).extent;
    h.dims[d] = s;
  }
  return h;
}

}  // namespace

Providers gpu_providers(const Kernel& k, const MachineParams& mp) {
  auto h = std::make_shared<HostData>(host_data(k));

  Providers p;
  p.universe = [h](const std::string& key, const std::vector<ObjId>& args) {
    if (key != "$dim.possible_sizes()" || args.size() != 1)
      throw std::invalid_argument("unknown universe fragment \"" + key + "\"");
    return h->universes.at(args[0]);
  };
  p.num = [h, mp](const std::string& key, const std::vector<ObjId>& args) -> std::int64_t {
    if (key == "$r.byte_size()" && args.size() == 1) return h->byte_sizes.at(args[0]);
    if (args.empty()) {
      if (key == "machine.max_threads") return mp.max_threads;
      if (key == "machine.max_thread_levels") return mp.max_thread_levels;
      if (key == "machine.max_block_levels") return mp.max_block_levels;
      if (key == "machine.shared_capacity") return mp.shared_capacity;
      if (key == "machine.vector_width") return mp.vector_width;
    }
    throw std::invalid_argument("unknown numeric fragment \"" + key + "\"");
  };
  p.pred = [h](const std::string& key, const std::vector<ObjId>& args) {
    if (key != "$a.mergeable($b)" || args.size() != 2)
      throw std::invalid_argument("unknown predicate fragment \"" + key + "\"");
    const auto& a = h->dims.at(args[0]);
    const auto& b = h->dims.at(args[1]);
    if (a.is_static != b.is_static) return false;
    if (a.is_static) return true;  // equal sizes are enforced as a constraint
    return a.cls == b.cls && a.extent == b.extent;
  };
  p.lowering = [h](const std::string& callback, const std::vector<ObjId>& args) {
    if (callback != "lower_p2p" || args.empty())
      throw std::invalid_argument("unknown trigger callback \"" + callback + "\"");
    auto it = h->pair_lowering.find(args[0]);
    return it == h->pair_lowering.end() ? kNoLowering : it->second;
  };
  return p;
}

BuildResult build_gpu_space(const Kernel& k, const MachineParams& mp) {
  ParseResult pr = parse_space(gpu_space_text());
  if (!pr.ok()) return {nullptr, std::move(pr.diagnostics)};

  BuildInput in;
  in.def = std::move(pr.def);
  in.bb = k.bb;
  in.providers = gpu_providers(k, mp);
  return build_space(std::move(in));
}

}  // namespace ispace
