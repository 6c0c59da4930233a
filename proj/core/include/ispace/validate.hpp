#pragma once

#include <vector>

#include "ispace/diag.hpp"
#include "ispace/space_def.hpp"

namespace ispace {

// Name resolution and shape checks on a parsed definition. Elided bodies
// ("...") suppress the checks that would need the missing parts. Returns all
// findings; callers reject the definition if any has Severity::Error.
std::vector<Diagnostic> validate(const SpaceDefinition& def);

inline bool has_errors(const std::vector<Diagnostic>& ds) {
  for (const auto& d : ds)
    if (d.severity == Severity::Error) return true;
  return false;
}

}  // namespace ispace
