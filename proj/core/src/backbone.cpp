#include "ispace/backbone.hpp"

#include <stdexcept>

namespace ispace {

ObjId Backbone::add_object(std::string name, std::uint32_t lowering) {
  if (find(name) != kNoObj) throw std::invalid_argument("duplicate object name: " + name);
  if (lowering != kNoLowering && lowering >= lowerings.size())
    throw std::out_of_range("object references an unknown lowering");
  BackboneObject o;
  o.name = std::move(name);
  o.lowering = lowering;
  objects.push_back(std::move(o));
  ObjId id = static_cast<ObjId>(objects.size() - 1);
  if (lowering != kNoLowering) lowerings[lowering].objects.push_back(id);
  return id;
}

std::uint32_t Backbone::add_lowering(std::string callback, std::string tag) {
  for (const auto& l : lowerings)
    if (l.tag == tag) throw std::invalid_argument("duplicate lowering tag: " + tag);
  lowerings.push_back({std::move(callback), std::move(tag), {}});
  if (lowerings.size() > 64) throw std::length_error("more than 64 lowerings");
  return static_cast<std::uint32_t>(lowerings.size() - 1);
}

void Backbone::add_to_set(const std::string& set, ObjId o) { sets[set].push_back(o); }

void Backbone::add_to_param_set(const std::string& set, ObjId key, ObjId member) {
  param_sets[set][key].push_back(member);
}

ObjId Backbone::find(const std::string& name) const {
  for (ObjId i = 0; i < objects.size(); ++i)
    if (objects[i].name == name) return i;
  return kNoObj;
}

const std::vector<ObjId>& Backbone::members(const std::string& set) const {
  static const std::vector<ObjId> empty;
  auto it = sets.find(set);
  return it == sets.end() ? empty : it->second;
}

const std::vector<ObjId>& Backbone::members(const std::string& set, ObjId key) const {
  static const std::vector<ObjId> empty;
  auto it = param_sets.find(set);
  if (it == param_sets.end()) return empty;
  auto jt = it->second.find(key);
  return jt == it->second.end() ? empty : jt->second;
}

std::int64_t Backbone::iattr_or(ObjId id, const std::string& key, std::int64_t dflt) const {
  const auto& m = objects[id].iattr;
  auto it = m.find(key);
  return it == m.end() ? dflt : it->second;
}

}  // namespace ispace
