#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "ispace/diag.hpp"
#include "ispace/domain.hpp"
#include "ispace/providers.hpp"
#include "ispace/space_def.hpp"
#include "ispace/table.hpp"

namespace ispace {

// Constraints over finite-domain instances compile to shared tuple tables.
// Every quantified binding of a require statement lands in the table of its
// scope (the sorted distinct instances it touches); bindings with the same
// scope intersect. Identical tables are deduplicated, so the uniform rules of
// a space (notably the relation composition triangles) share one shape.
//
// rows[i][v] holds the supported combinations of the other slots (row-major,
// increasing slot order) as a bit set; arc consistency is a handful of word
// operations per slot.
struct TableShape {
  std::uint8_t arity = 0;
  std::array<std::uint8_t, 3> nvals{};
  std::array<std::vector<std::vector<std::uint64_t>>, 3> rows;

  bool operator==(const TableShape&) const = default;
};

struct TableCons {
  std::uint32_t shape = 0;
  std::uint8_t arity = 0;
  std::array<std::uint32_t, 3> slot{kNoInstance, kNoInstance, kNoInstance};
  std::uint64_t need = 0;
};

// One aggregation term of a counter: a constant or an integer instance,
// included when its guard conjunction holds. Terms born from a lowering count
// toward the upper bound while the lowering can still fire and toward the
// lower bound only once it has.
struct GuardLit {
  std::uint32_t slot = kNoInstance;
  Mask mask = 0;
};

struct CounterTerm {
  std::int64_t const_val = 1;
  std::uint32_t int_slot = kNoInstance;  // kNoInstance: constant term
  std::vector<GuardLit> guard;
  std::uint64_t need = 0;
};

struct CounterBound {
  CmpOp op = CmpOp::Le;
  std::int64_t rhs = 0;
  std::uint64_t need = 0;
};

struct CompiledCounter {
  std::uint32_t counter_inst = kNoInstance;
  CounterOp op = CounterOp::Sum;
  std::vector<CounterTerm> terms;
  std::vector<CounterBound> bounds;
};

// One element of a quotient: its representative flag plus, for every earlier
// element of the base set, the instances deciding equivalence. The first
// possible member of each equivalence class carries the TRUE flag.
struct QuotientPeer {
  std::uint32_t equiv_slot = kNoInstance;
  Mask equiv_mask = 0;
  std::uint32_t member_slot = kNoInstance;  // the peer's own membership atom
  Mask member_mask = 0;
  std::uint64_t need = 0;
};

struct QuotientElem {
  std::uint32_t flag_inst = kNoInstance;
  std::uint32_t member_slot = kNoInstance;
  Mask member_mask = 0;
  std::vector<QuotientPeer> earlier;
  std::uint64_t need = 0;
};

// Triggers fire when their formula holds judged atom by atom: an atom holds
// once every remaining value of its slot satisfies it. Firing activates a
// lowering; refiring is a no-op.
struct TrigNode {
  enum class Kind : std::uint8_t { Atom, And, Or };
  Kind kind = Kind::Atom;
  std::uint32_t slot = kNoInstance;  // Atom; kNoInstance with mask!=0: constant true
  Mask mask = 0;
  std::vector<TrigNode> kids;
};

struct CompiledTrigger {
  TrigNode when;
  std::uint32_t lowering = kNoLowering;
  std::uint64_t need = 0;
};

struct Watch {
  enum class Kind : std::uint8_t { Table, Counter, Quotient, Trigger };
  Kind kind;
  std::uint32_t index;
};

struct CompiledSpace {
  std::vector<TableShape> shapes;
  std::vector<TableCons> tables;
  std::vector<CompiledCounter> counters;  // indexed by counter_slot
  std::vector<QuotientElem> quot_elems;
  std::vector<CompiledTrigger> triggers;
  std::vector<std::vector<Watch>> watchers;           // per instance
  std::vector<std::vector<std::uint32_t>> lowering_insts;  // instances made live by firing
  std::vector<std::vector<std::uint32_t>> triggers_of_lowering;
};

// Lowers the validated definition against the instance table. Single-slot
// constraint bindings fold into Instance::initial instead of becoming
// propagators; opaque fragments and comparison right-hand sides resolve
// through the providers here, once.
CompiledSpace compile_space(const SpaceDefinition& def, const Backbone& bb,
                            const Providers& providers, InstanceTable& table,
                            std::vector<Diagnostic>& diags);

}  // namespace ispace
