#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <vector>

#include "ispace/backbone.hpp"
#include "ispace/domain.hpp"

namespace ispace {

constexpr std::uint32_t kNoInstance = ~std::uint32_t{0};

enum class InstKind : std::uint8_t { Enum, Integer, Counter };

// One choice family: a declared choice, or the representative flag induced by
// a quotient (boolean, FALSE=0 / TRUE=1).
struct ChoiceInfo {
  std::string name;
  InstKind kind = InstKind::Enum;
  std::vector<std::string> values;     // enum value names, {} for integer/counter
  std::vector<std::uint8_t> swap;      // antisymmetric involution, {} if none
  std::vector<std::string> param_sets;
  bool from_quotient = false;
  std::uint32_t quotient_index = ~std::uint32_t{0};

  bool antisymmetric() const { return !swap.empty(); }
};

// One choice instance: a choice applied to concrete objects. Antisymmetric
// binary instances exist once per unordered pair, stored with args[0] < args[1];
// queries in the other orientation read through the value involution.
struct Instance {
  std::uint32_t choice = 0;
  std::array<ObjId, 2> args{kNoObj, kNoObj};
  std::uint8_t nargs = 0;
  std::uint8_t nvals = 0;
  std::uint64_t need = 0;        // lowerings that must have fired for liveness
  Mask initial = 0;              // full domain intersected with pre-restrictions
  std::uint32_t universe_id = ~std::uint32_t{0};  // integer instances
  std::uint32_t counter_slot = ~std::uint32_t{0}; // counter instances
};

struct InstanceRef {
  std::uint32_t inst = kNoInstance;
  bool swapped = false;
};

struct InstanceTable {
  std::vector<ChoiceInfo> choices;
  std::vector<Instance> instances;                  // grouped by choice, args ascending
  std::vector<std::vector<std::int64_t>> universes; // deduplicated sorted value lists
  std::uint32_t num_counter_slots = 0;
  std::uint32_t num_objects = 0;

  struct Lookup {
    std::uint32_t nullary = kNoInstance;
    std::vector<std::uint32_t> unary;   // [obj]
    std::vector<std::uint32_t> binary;  // [a * num_objects + b]
  };
  std::vector<Lookup> lookups;

  // Instance ids sorted by (choice name, argument object names); digests walk
  // this order so they do not depend on table layout.
  std::vector<std::uint32_t> canonical_order;

  std::uint32_t find_choice(const std::string& name) const;  // ~0u if absent

  // Raw lookup in stored orientation.
  std::uint32_t find(std::uint32_t choice, ObjId a = kNoObj, ObjId b = kNoObj) const;

  // Lookup with antisymmetric canonicalization.
  InstanceRef resolve(std::uint32_t choice, const ObjId* args, std::size_t n) const;

  int value_index(std::uint32_t choice, const std::string& value) const;  // -1 if absent

  // Domain of an instance as seen from the query orientation.
  Mask oriented(std::uint32_t choice, Mask stored, bool swapped) const;
  // Converts a restriction given in query orientation back to stored form.
  // The involution is its own inverse, so this is the same permutation.
  Mask to_stored(std::uint32_t choice, Mask m, bool swapped) const { return oriented(choice, m, swapped); }

  const std::vector<std::int64_t>& universe_of(std::uint32_t inst) const {
    return universes[instances[inst].universe_id];
  }
};

}  // namespace ispace
