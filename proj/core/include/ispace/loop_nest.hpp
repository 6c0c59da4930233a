#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <utility>
#include <vector>

#include "ispace/candidate.hpp"
#include "ispace/kernels.hpp"

namespace ispace {

enum class NestDimKind : std::uint8_t { Loop, Block, Thread, Unroll, Vector };

const char* nest_dim_name(NestDimKind k);

enum class MemSpaceKind : std::uint8_t { Global, Shared };
enum class CacheKind : std::uint8_t { L1, L2, ReadOnly, None };

// One node of a reconstructed schedule tree. A Dim node owns a whole fusion
// class: every dimension merged into the same loop, smallest object id
// first. Instructions are always leaves. Barrier nodes separate sibling
// subtrees that both map work onto hardware threads.
struct NestNode {
  enum class Kind : std::uint8_t { Dim, Inst, Barrier };
  Kind kind = Kind::Inst;
  std::vector<ObjId> dims;
  NestDimKind dim_kind = NestDimKind::Loop;
  std::int64_t size = 1;
  int thread_level = -1;  // Thread dims: 0 = outermost hardware level
  int block_level = -1;   // Block dims: 0 = outermost grid level
  ObjId inst = kNoObj;
  std::vector<NestNode> children;
};

struct LoopNest {
  std::vector<NestNode> roots;                // program order
  std::vector<std::int64_t> thread_shape;     // per hardware level, outermost first
  std::vector<std::int64_t> block_shape;      // per grid level, outermost first
  std::map<ObjId, std::int64_t> sizes;        // concrete extent of every dimension
  std::map<ObjId, MemSpaceKind> mem_space;    // per live region
  std::map<ObjId, CacheKind> cache;           // per live memory instruction
};

// Rebuilds the schedule of a fully specified candidate. Merged dimensions
// collapse into one node, INNER/OUTER decisions become parent links,
// BEFORE/AFTER orders siblings. Throws std::invalid_argument on open
// choices and std::logic_error when the decisions do not describe a forest;
// the engine only hands over realizable candidates, so the latter flags a
// missing constraint rather than bad user input.
LoopNest reconstruct(const Kernel& k, const SpaceContext& ctx, const Candidate& c);

// Pairwise schedule relation read back off the tree, keyed by object pair
// with first < second. Values name order entries (BEFORE, AFTER, INNER,
// OUTER, MERGED) from the perspective of the first object.
std::map<std::pair<ObjId, ObjId>, std::string> derive_orders(const LoopNest& l);

// Readable pseudo source. Parallel dimensions become `par` headers carrying
// their hardware mapping, unrolled bodies are replicated up to a factor of
// 8, vector operations carry a width suffix, barriers print as bare lines.
std::string emit_source(const Kernel& k, const LoopNest& l);

}  // namespace ispace
