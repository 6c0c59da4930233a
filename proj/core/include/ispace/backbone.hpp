#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

namespace ispace {

using ObjId = std::uint32_t;
constexpr ObjId kNoObj = ~ObjId{0};

constexpr std::uint32_t kNoLowering = ~std::uint32_t{0};

// One semantic object (instruction, dimension, memory region, ...). The
// attribute bags feed host providers; the engine itself never interprets
// them. Objects born from a lowering carry its id and stay inert until the
// lowering fires.
struct BackboneObject {
  std::string name;
  std::uint32_t lowering = kNoLowering;
  std::map<std::string, std::int64_t> iattr;
  std::map<std::string, std::string> sattr;
  std::map<std::string, std::vector<std::int64_t>> vattr;
};

// All objects a kernel can ever contain, base and lowered alike, with their
// set memberships. The table is complete from the start: firing a lowering
// never adds objects, it only makes existing ones live. That keeps instance
// ids, digests and serialization layouts independent of firing order.
struct Backbone {
  struct Lowering {
    std::string callback;  // host callback key that fires it
    std::string tag;       // unique, names the lowering in logs and layouts
    std::vector<ObjId> objects;
  };

  std::vector<BackboneObject> objects;
  std::map<std::string, std::vector<ObjId>> sets;
  std::map<std::string, std::map<ObjId, std::vector<ObjId>>> param_sets;
  std::vector<Lowering> lowerings;

  ObjId add_object(std::string name, std::uint32_t lowering = kNoLowering);
  std::uint32_t add_lowering(std::string callback, std::string tag);

  void add_to_set(const std::string& set, ObjId o);
  void add_to_param_set(const std::string& set, ObjId key, ObjId member);

  ObjId find(const std::string& name) const;  // kNoObj if absent
  const BackboneObject& obj(ObjId id) const { return objects[id]; }
  BackboneObject& obj(ObjId id) { return objects[id]; }

  const std::vector<ObjId>& members(const std::string& set) const;
  const std::vector<ObjId>& members(const std::string& set, ObjId key) const;

  std::int64_t iattr_or(ObjId id, const std::string& key, std::int64_t dflt) const;
};

}  // namespace ispace
