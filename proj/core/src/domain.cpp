#include "ispace/domain.hpp"

namespace ispace {

std::string mask_to_string(Mask m, const std::vector<std::string>& value_names) {
  std::string out = "{";
  bool first = true;
  for (int i = 0; i < kMaxDomainBits; ++i) {
    if (!mask_has(m, i)) continue;
    if (!first) out += ",";
    first = false;
    if (i < static_cast<int>(value_names.size())) out += value_names[i];
    else out += "#" + std::to_string(i);
  }
  out += "}";
  return out;
}

}  // namespace ispace
