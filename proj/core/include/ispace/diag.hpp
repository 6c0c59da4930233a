#pragma once

#include <string>
#include <vector>

namespace ispace {

struct SourceLoc {
  int line = 0;  // 1-based, 0 = unknown
  int col = 0;
  bool operator==(const SourceLoc&) const = default;
};

enum class Severity { Error, Warning };

// Stable diagnostic codes; tests match on these, not on message text.
namespace diag {
inline constexpr const char* kSyntax = "SYNTAX";
inline constexpr const char* kUnknownSet = "UNKNOWN_SET";
inline constexpr const char* kUnknownChoice = "UNKNOWN_CHOICE";
inline constexpr const char* kUnknownValue = "UNKNOWN_VALUE";
inline constexpr const char* kDuplicateDecl = "DUPLICATE_DECL";
inline constexpr const char* kSetCycle = "SET_CYCLE";
inline constexpr const char* kArityMismatch = "ARITY_MISMATCH";
inline constexpr const char* kBadAntisym = "BAD_ANTISYM";
inline constexpr const char* kBadCounter = "BAD_COUNTER";
inline constexpr const char* kBadQuotient = "BAD_QUOTIENT";
inline constexpr const char* kBareAtom = "BARE_ATOM";
inline constexpr const char* kUnknownVar = "UNKNOWN_VAR";
inline constexpr const char* kTypeMismatch = "TYPE_MISMATCH";
inline constexpr const char* kUnsupported = "UNSUPPORTED";
}  // namespace diag

struct Diagnostic {
  Severity severity = Severity::Error;
  std::string code;
  std::string message;
  SourceLoc loc;
};

std::string format_diagnostic(const Diagnostic& d);

}  // namespace ispace
