#pragma once

#include <string>
#include <string_view>

#include "ispace/diag.hpp"
#include "ispace/space_def.hpp"

namespace ispace {

struct ParseResult {
  SpaceDefinition def;
  std::vector<Diagnostic> diagnostics;
  bool ok() const {
    for (const auto& d : diagnostics)
      if (d.severity == Severity::Error) return false;
    return true;
  }
};

// Parses .space source text. Diagnostics cover syntax only; name resolution
// and arity checks live in validate().
ParseResult parse_space(std::string_view source);
ParseResult parse_space_file(const std::string& path);

}  // namespace ispace
