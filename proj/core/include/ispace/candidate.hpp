#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <vector>

#include "ispace/backbone.hpp"
#include "ispace/compile.hpp"
#include "ispace/diag.hpp"
#include "ispace/domain.hpp"
#include "ispace/providers.hpp"
#include "ispace/space_def.hpp"
#include "ispace/table.hpp"

namespace ispace {

// Everything immutable about one optimization space: definition, objects,
// instance table, compiled propagators. Candidates carry only their domains,
// so they copy cheaply and share one context.
struct SpaceContext {
  SpaceDefinition def;
  Backbone bb;
  InstanceTable table;
  CompiledSpace comp;
};

// Initial narrowing of one enum instance, by names. Kernels use these to
// encode backbone facts (an instruction sits inside its own iteration dims,
// reduction dims stay sequential, inputs live in global memory, ...).
struct PreRestriction {
  std::string choice;
  std::vector<std::string> args;    // object names
  std::vector<std::string> values;  // allowed values
};

struct BuildInput {
  SpaceDefinition def;
  Backbone bb;
  Providers providers;
  std::vector<PreRestriction> pre;
};

struct BuildResult {
  std::shared_ptr<const SpaceContext> ctx;  // null when diagnostics carry errors
  std::vector<Diagnostic> diagnostics;
};

BuildResult build_space(BuildInput in);

// A partially specified implementation: one domain per choice instance, one
// interval per counter, plus the set of fired lowerings. Value semantics;
// refining operations take a parent and produce a child.
struct Candidate {
  std::vector<Mask> dom;
  std::vector<Interval> cnt;
  std::uint64_t fired = 0;
  std::uint64_t generation = 0;
};

enum class PropStatus { Ok, DeadEnd };

// An instance participates once every lowering it depends on has fired.
inline bool instance_live(const SpaceContext& ctx, const Candidate& c, std::uint32_t inst) {
  return (ctx.table.instances[inst].need & ~c.fired) == 0;
}

// Root candidate: initial domains, then propagation to fixpoint.
PropStatus make_root(const SpaceContext& ctx, Candidate& out);

// Runs propagation to fixpoint over the queued-dirty instances. Exposed for
// the root and for deserialized candidates; decision application uses the
// wrappers below.
PropStatus propagate(const SpaceContext& ctx, Candidate& c, std::vector<std::uint32_t> dirty);

// Child of `parent` with `inst` pinned to `value` (a value index), propagated.
PropStatus apply_decision(const SpaceContext& ctx, const Candidate& parent, std::uint32_t inst,
                          int value, Candidate& out);

// Child with dom(inst) intersected by `keep`, propagated.
PropStatus apply_restriction(const SpaceContext& ctx, const Candidate& parent, std::uint32_t inst,
                             Mask keep, Candidate& out);

// In-place narrowing without propagation; DeadEnd when the domain empties.
// Used for cheap what-if bounds where full consistency is not needed.
PropStatus restrict_only(const SpaceContext& ctx, Candidate& c, std::uint32_t inst, Mask keep);

bool fully_specified(const SpaceContext& ctx, const Candidate& c);
std::vector<std::uint32_t> open_choices(const SpaceContext& ctx, const Candidate& c);

// Decided value index of a live instance; -1 while open.
inline int decided_value(const Candidate& c, std::uint32_t inst) {
  Mask m = c.dom[inst];
  return mask_single(m) ? mask_first(m) : -1;
}

// Content digest, independent of instance table layout: folds (choice name,
// argument object names, domain) in a canonical order, plus fired lowering
// tags. Stable across processes and table rebuilds.
std::uint64_t digest(const SpaceContext& ctx, const Candidate& c);

// Text form: JSON with named choices and values, fired lowerings first, base
// instances before lowered blocks. Binary form: compact fixed layout in the
// same order.
std::string serialize_text(const SpaceContext& ctx, const Candidate& c);
bool deserialize_text(const SpaceContext& ctx, const std::string& text, Candidate& out,
                      std::string* err);
std::vector<std::uint8_t> serialize_binary(const SpaceContext& ctx, const Candidate& c);
bool deserialize_binary(const SpaceContext& ctx, const std::vector<std::uint8_t>& bytes,
                        Candidate& out, std::string* err);

// Full validity audit of a completely specified candidate, by direct
// evaluation of every compiled constraint (no propagation involved).
bool check_implementation(const SpaceContext& ctx, const Candidate& c, std::string* why);

}  // namespace ispace
