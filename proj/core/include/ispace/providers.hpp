#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "ispace/backbone.hpp"

namespace ispace {

// Host hooks behind the quoted fragments of a space definition. Every hook is
// decision independent, so the engine resolves all of them while building the
// instance table and the compiled constraints; propagation never calls back.
//
// The `args` of a call are the objects bound to the fragment's $variables, in
// order of first occurrence inside the quoted string ("$a.overlaps($b)" gets
// {a, b}).
struct Providers {
  // Value universe of an integer choice instance.
  std::function<std::vector<std::int64_t>(const std::string& key, const std::vector<ObjId>& args)>
      universe;

  // Boolean predicate used as a constraint disjunct.
  std::function<bool(const std::string& key, const std::vector<ObjId>& args)> pred;

  // Integer quantity: counter terms and comparison right-hand sides.
  std::function<std::int64_t(const std::string& key, const std::vector<ObjId>& args)> num;

  // Maps a trigger callback plus operands to the lowering it fires, or
  // kNoLowering when the operands need none. Many operand tuples may share
  // one lowering; firing an already fired lowering is a no-op.
  std::function<std::uint32_t(const std::string& callback, const std::vector<ObjId>& args)>
      lowering;
};

// Pulls the $variables out of a quoted fragment in order of first occurrence.
std::vector<std::string> opaque_vars(const std::string& fragment);

}  // namespace ispace
