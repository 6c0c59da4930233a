#include "ispace/machine.hpp"

#include <nlohmann/json.hpp>
#include <stdexcept>

namespace ispace {

namespace {

using nlohmann::json;

void read_int(const json& j, const char* key, std::int64_t& out, bool positive) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_number_integer()) throw std::invalid_argument(std::string(key) + " must be an integer");
  out = v.get<std::int64_t>();
  if (positive && out <= 0) throw std::invalid_argument(std::string(key) + " must be positive");
}

void read_mem(const json& j, const char* key, MemCost& out) {
  if (!j.contains(key)) return;
  const json& v = j.at(key);
  if (!v.is_array() || v.size() != 2)
    throw std::invalid_argument(std::string(key) + " must be [coalesced, scattered]");
  out.coalesced = v[0].get<std::int64_t>();
  out.scattered = v[1].get<std::int64_t>();
  if (out.coalesced <= 0 || out.scattered <= 0)
    throw std::invalid_argument(std::string(key) + " costs must be positive");
}

}  // namespace

MachineParams machine_from_json(const std::string& text) {
  json j = json::parse(text);
  if (!j.is_object()) throw std::invalid_argument("machine config must be an object");
  static const char* known[] = {
      "max_threads",  "max_thread_levels", "max_block_levels", "shared_capacity",
      "vector_width", "parallel_blocks",   "op_cost",          "loop_overhead",
      "barrier_cost", "shared",            "global_l1",        "global_l2",
      "global_ro",    "global_none",
  };
  for (const auto& [key, val] : j.items()) {
    (void)val;
    bool ok = false;
    for (const char* k : known) ok = ok || key == k;
    if (!ok) throw std::invalid_argument("unknown machine key '" + key + "'");
  }
  MachineParams mp;
  read_int(j, "max_threads", mp.max_threads, true);
  read_int(j, "max_thread_levels", mp.max_thread_levels, true);
  read_int(j, "max_block_levels", mp.max_block_levels, true);
  read_int(j, "shared_capacity", mp.shared_capacity, true);
  read_int(j, "vector_width", mp.vector_width, true);
  read_int(j, "parallel_blocks", mp.parallel_blocks, true);
  read_int(j, "op_cost", mp.op_cost, true);
  read_int(j, "loop_overhead", mp.loop_overhead, false);
  read_int(j, "barrier_cost", mp.barrier_cost, false);
  read_mem(j, "shared", mp.shared);
  read_mem(j, "global_l1", mp.global_l1);
  read_mem(j, "global_l2", mp.global_l2);
  read_mem(j, "global_ro", mp.global_ro);
  read_mem(j, "global_none", mp.global_none);
  return mp;
}

std::string machine_to_json(const MachineParams& mp) {
  nlohmann::ordered_json j;
  j["max_threads"] = mp.max_threads;
  j["max_thread_levels"] = mp.max_thread_levels;
  j["max_block_levels"] = mp.max_block_levels;
  j["shared_capacity"] = mp.shared_capacity;
  j["vector_width"] = mp.vector_width;
  j["parallel_blocks"] = mp.parallel_blocks;
  j["op_cost"] = mp.op_cost;
  j["loop_overhead"] = mp.loop_overhead;
  j["barrier_cost"] = mp.barrier_cost;
  j["shared"] = {mp.shared.coalesced, mp.shared.scattered};
  j["global_l1"] = {mp.global_l1.coalesced, mp.global_l1.scattered};
  j["global_l2"] = {mp.global_l2.coalesced, mp.global_l2.scattered};
  j["global_ro"] = {mp.global_ro.coalesced, mp.global_ro.scattered};
  j["global_none"] = {mp.global_none.coalesced, mp.global_none.scattered};
  return j.dump(2);
}

}  // namespace ispace
