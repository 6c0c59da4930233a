#pragma once

#include <cstdint>
#include <vector>

#include "ispace/loop_nest.hpp"
#include "ispace/machine.hpp"

namespace ispace {

// Cost of one memory instruction under the schedule: how many times one
// thread issues it, what one access costs, and whether neighbouring lanes
// fall on neighbouring addresses.
struct AccessCost {
  ObjId inst = kNoObj;
  std::int64_t trips = 0;
  std::int64_t per_access = 0;
  bool coalesced = false;
};

// Deterministic analytic cost of a reconstructed schedule. Compute and
// memory describe one thread of one block and overlap; synchronization does
// not. Blocks beyond the machine's capacity serialize.
struct CostReport {
  std::int64_t compute = 0;
  std::int64_t memory = 0;
  std::int64_t sync = 0;
  std::int64_t block_serial = 1;
  std::int64_t total = 0;  // (max(compute, memory) + sync) * block_serial
  std::vector<AccessCost> accesses;
};

CostReport evaluate(const Kernel& k, const LoopNest& l, const MachineParams& mp);

// Price table row for one (placement, cache path) combination. Shared memory
// ignores the cache path; it is never cached.
inline const MemCost& cost_entry(const MachineParams& mp, MemSpaceKind space, CacheKind cache) {
  if (space == MemSpaceKind::Shared) return mp.shared;
  switch (cache) {
    case CacheKind::L1: return mp.global_l1;
    case CacheKind::L2: return mp.global_l2;
    case CacheKind::ReadOnly: return mp.global_ro;
    case CacheKind::None: break;
  }
  return mp.global_none;
}

}  // namespace ispace
