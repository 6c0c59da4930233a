#pragma once

#include <cstdint>
#include <string>

namespace ispace {

// Cost in cycles of one element access, by whether neighbouring lanes hit
// neighbouring addresses.
struct MemCost {
  std::int64_t coalesced = 1;
  std::int64_t scattered = 1;
};

// The simulated target. Capacity limits feed the decision space as hard
// constraints; the cost block feeds the performance model only.
struct MachineParams {
  std::int64_t max_threads = 1024;       // per block
  std::int64_t max_thread_levels = 3;
  std::int64_t max_block_levels = 3;
  std::int64_t shared_capacity = 49152;  // bytes per block
  std::int64_t vector_width = 4;         // elements
  std::int64_t parallel_blocks = 64;     // blocks in flight at once

  std::int64_t op_cost = 1;       // arithmetic, per executed operation
  std::int64_t loop_overhead = 2; // per executed trip of a sequential loop
  std::int64_t barrier_cost = 16; // per executed synchronization

  MemCost shared{2, 4};
  MemCost global_l1{4, 32};
  MemCost global_l2{6, 48};
  MemCost global_ro{4, 32};
  MemCost global_none{8, 64};
};

// Partial overrides on top of the defaults; unknown keys are an error.
MachineParams machine_from_json(const std::string& text);
std::string machine_to_json(const MachineParams& mp);

}  // namespace ispace
