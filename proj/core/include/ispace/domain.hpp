#pragma once

#include <bit>
#include <cstdint>
#include <limits>
#include <string>
#include <vector>

namespace ispace {

// A domain is the set of still-possible values of one choice instance, kept
// as a bit mask over value indices. Enum indices follow declaration order;
// integer indices follow the instance's sorted universe list. 32 values per
// instance is enough for every space this engine targets.
using Mask = std::uint32_t;

constexpr int kMaxDomainBits = 32;

constexpr Mask full_mask(int n) {
  return n >= kMaxDomainBits ? ~Mask{0} : ((Mask{1} << n) - 1);
}
constexpr Mask bit(int i) { return Mask{1} << i; }

inline int mask_count(Mask m) { return std::popcount(m); }
inline bool mask_single(Mask m) { return std::has_single_bit(m); }
inline int mask_first(Mask m) { return std::countr_zero(m); }  // m != 0
inline bool mask_has(Mask m, int i) { return (m >> i) & 1u; }

// Counter instances keep an inclusive integer interval instead of a mask;
// propagation only ever narrows it.
struct Interval {
  std::int64_t lo = 0;
  std::int64_t hi = std::numeric_limits<std::int64_t>::max();
  bool operator==(const Interval&) const = default;
  bool empty() const { return lo > hi; }
};

// Counter aggregation works on nonnegative quantities that can get close to
// the int64 range (byte counts over 2^26-element tensors), so saturate
// instead of wrapping.
constexpr std::int64_t kSatMax = std::numeric_limits<std::int64_t>::max();

inline std::int64_t sat_add(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_add_overflow(a, b, &r)) return kSatMax;
  return r;
}

inline std::int64_t sat_mul(std::int64_t a, std::int64_t b) {
  std::int64_t r;
  if (__builtin_mul_overflow(a, b, &r)) return kSatMax;
  return r;
}

// Debug rendering: "{A,B}" given the instance's value names.
std::string mask_to_string(Mask m, const std::vector<std::string>& value_names);

}  // namespace ispace
