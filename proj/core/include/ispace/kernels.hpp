#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include "ispace/backbone.hpp"

namespace ispace {

constexpr std::uint32_t kNoIndex = ~std::uint32_t{0};

enum class Op : std::uint8_t { Add, Mul, Mad, Cast, Load, Store };

const char* op_name(Op op);

// One term of an affine address: index(dim) * base * prod(size(d) for d in
// size_dims). Keeping the tile sizes symbolic lets one induction variable
// serve every size assignment.
struct AddrTerm {
  ObjId dim = kNoObj;
  std::int64_t base = 1;
  std::vector<ObjId> size_dims;
};

struct InductionVar {
  std::vector<AddrTerm> terms;
  std::int64_t offset = 0;
};

struct Operand {
  enum class Kind : std::uint8_t { Const, Input, IndVar, Produced, Reduce, Mapped };
  Kind kind = Kind::Const;
  std::int64_t value = 0;      // Const
  std::string input;           // Input
  std::uint32_t ivar = kNoIndex;
  ObjId producer = kNoObj;     // Produced / Reduce / Mapped
  ObjId init = kNoObj;         // Reduce
  std::vector<ObjId> reduce_dims;
  std::vector<std::pair<ObjId, ObjId>> pairs;  // (producer dim, consumer dim)
  std::uint32_t comm = kNoIndex;  // Mapped / Reduce: index into Kernel::comms
};

// Point-to-point value flow between two instruction nests. The paired dims
// communicate iteration-wise. The lowered objects (temporary region, copy-out
// store, copy-in load) pre-exist in the backbone and wake up when `lowering`
// fires.
struct Comm {
  ObjId producer = kNoObj;
  ObjId consumer = kNoObj;
  std::vector<std::pair<ObjId, ObjId>> pairs;  // (producer dim, consumer dim)
  std::vector<ObjId> pair_objs;                // one backbone object per pair
  std::uint32_t lowering = kNoLowering;
  ObjId region = kNoObj;
  ObjId store = kNoObj;
  ObjId load = kNoObj;
};

struct InstInfo {
  Op op = Op::Add;
  std::vector<Operand> operands;
  std::vector<ObjId> dims;     // iteration dims, outermost logical order
  ObjId region = kNoObj;       // Load / Store
  std::uint32_t ivar = kNoIndex;
};

struct DimInfo {
  ObjId logical = kNoObj;
  bool is_static = false;
  std::vector<std::int64_t> sizes;  // size universe when static
};

struct LogicalInfo {
  std::int64_t extent = 1;
  std::vector<ObjId> tiles;  // static dims, outermost first
  ObjId tiled = kNoObj;      // dynamic remainder, kNoObj when fully tiled
};

struct RegionInfo {
  std::int64_t elem_bytes = 4;
  std::int64_t elems = 0;
  bool input = false;  // backed by a kernel argument, never relocated
};

struct Kernel {
  std::string name;
  Backbone bb;
  std::map<ObjId, InstInfo> insts;
  std::map<ObjId, DimInfo> dims;
  std::map<ObjId, LogicalInfo> logicals;
  std::map<ObjId, RegionInfo> regions;
  std::vector<InductionVar> ivars;
  std::vector<Comm> comms;
};

// Extent of a dimension under a full size assignment. Static dims read their
// chosen size; dynamic dims divide the logical extent by their siblings.
std::int64_t dim_extent(const Kernel& k, ObjId dim,
                        const std::map<ObjId, std::int64_t>& sizes);

// Address of one iteration point (indices keyed by dim) under a size
// assignment.
std::int64_t eval_addr(const Kernel& k, const InductionVar& iv,
                       const std::map<ObjId, std::int64_t>& indices,
                       const std::map<ObjId, std::int64_t>& sizes);

// z = alpha * x + y over vectors of length n. Each instruction sits in its
// own nest; n is strip-mined once per universe in `factors`.
Kernel make_axpy(std::int64_t n, const std::vector<std::vector<std::int64_t>>& factors);

// C[i,j] = A[i] * B[j]. Two shared dimensions, no communication pairs.
Kernel make_outer_product(std::int64_t m, std::int64_t n);

// C = A * B, column major, A of size m x k with an optional element stride.
// m and n are strip-mined once per universe in `factors`; k stays whole.
Kernel make_matmul(std::int64_t m, std::int64_t n, std::int64_t k,
                   const std::vector<std::vector<std::int64_t>>& factors,
                   std::int64_t a_stride = 1);

// Parsed form of the kernel stanza of a config file.
struct KernelSpec {
  std::string kind;  // "axpy" | "outer_product" | "matmul"
  std::int64_t m = 0, n = 0, k = 0;
  std::vector<std::vector<std::int64_t>> factors;
  std::int64_t a_stride = 1;
};

Kernel build_kernel(const KernelSpec& spec);

// Appends one static tiling level (innermost) to a logical axis, updating
// dimension sets, instruction nests and induction variables. Rejects axes
// that already feed a communication: the pair lists would go stale.
void strip_mine(Kernel& k, ObjId logical, const std::vector<std::int64_t>& universe);

}  // namespace ispace
