#pragma once

// Independent semantics oracle for small spaces. Enumerates the raw product
// of decision universes and filters it with a direct interpretation of the
// definition (no compiled tables, no propagation). Used to cross-check the
// solution set reached by the engine's search on toy spaces.

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "ispace/backbone.hpp"
#include "ispace/candidate.hpp"
#include "ispace/providers.hpp"
#include "ispace/space_def.hpp"

namespace ispace::testutil {

// One fully specified implementation in surface terms. Keys look like
// "choice|objA|objB"; antisymmetric pairs are keyed in ascending object id
// order. Counter values are derived, not stored.
struct FullAssign {
  std::map<std::string, std::string> enums;
  std::map<std::string, std::int64_t> ints;
  std::set<std::string> fired;  // lowering tags

  std::string to_string() const;
  bool operator<(const FullAssign& o) const;
  bool operator==(const FullAssign& o) const;
};

// Enumerate every assignment over the raw universes (respecting optional
// pre-restrictions) and keep those the direct checker accepts.
std::set<FullAssign> oracle_solutions(const SpaceDefinition& def, const Backbone& bb,
                                      const Providers& prov,
                                      const std::vector<PreRestriction>& pre = {});

// Direct interpretation of the definition on one full assignment.
bool oracle_check(const SpaceDefinition& def, const Backbone& bb, const Providers& prov,
                  const FullAssign& a, std::string* why = nullptr);

// Drive the engine: depth-first over open choices with apply_decision,
// collecting every reachable fully specified candidate.
std::set<FullAssign> engine_solutions(const SpaceContext& ctx);

// Convert an engine candidate (fully specified) to surface terms.
FullAssign to_full_assign(const SpaceContext& ctx, const Candidate& c);

}  // namespace ispace::testutil
