#include <doctest.h>

#include <string>

#include "ispace/parser.hpp"
#include "ispace/validate.hpp"

namespace {

std::vector<ispace::Diagnostic> check(const std::string& src) {
  auto r = ispace::parse_space(src);
  REQUIRE(r.ok());
  return ispace::validate(r.def);
}

bool has_code(const std::vector<ispace::Diagnostic>& ds, const char* code) {
  for (const auto& d : ds)
    if (d.code == code) return true;
  return false;
}

const char kOrderSpace[] = R"(
set Instructions: ...
choice enum order($lhs in Instructions,
                  $rhs in Instructions):
  value BEFORE:
  value AFTER:
  antisymmetric:
    BEFORE -> AFTER
end
)";

}  // namespace

TEST_CASE("well formed order space validates cleanly") {
  auto ds = check(kOrderSpace);
  CHECK(ds.empty());
}

TEST_CASE("transitivity over the order choice validates cleanly") {
  std::string src = std::string(kOrderSpace) + R"(
require forall $a in Instructions:
  forall $b in Instructions:
    forall $c in Instructions:
      order($a, $c) is AFTER
      || order($a, $b) is not AFTER
      || order($b, $c) is not AFTER
)";
  CHECK(check(src).empty());
}

TEST_CASE("unknown choice in a constraint") {
  std::string src = std::string(kOrderSpace) +
                    "require forall $a in Instructions: foo($a) is BEFORE\n";
  auto ds = check(src);
  CHECK(has_code(ds, ispace::diag::kUnknownChoice));
}

TEST_CASE("subset cycle") {
  auto ds = check("set A subsetof B: ...\nset B subsetof A: ...\n");
  CHECK(has_code(ds, ispace::diag::kSetCycle));
}

TEST_CASE("unknown set in a choice parameter") {
  auto ds = check("choice enum c($x in Nope):\n  value V:\nend\n");
  CHECK(has_code(ds, ispace::diag::kUnknownSet));
}

TEST_CASE("unknown enum value in a test") {
  std::string src = std::string(kOrderSpace) +
                    "require forall $a in Instructions, $b in Instructions: "
                    "order($a, $b) is SIDEWAYS\n";
  CHECK(has_code(check(src), ispace::diag::kUnknownValue));
}

TEST_CASE("arity mismatch") {
  std::string src =
      std::string(kOrderSpace) + "require forall $a in Instructions: order($a) is BEFORE\n";
  CHECK(has_code(check(src), ispace::diag::kArityMismatch));
}

TEST_CASE("duplicate declarations") {
  CHECK(has_code(check("set A: ...\nset A: ...\n"), ispace::diag::kDuplicateDecl));
  CHECK(has_code(check("set S: ...\nchoice enum c($x in S):\n  value V:\nend\n"
                       "choice enum c($x in S):\n  value W:\nend\n"),
                 ispace::diag::kDuplicateDecl));
}

TEST_CASE("antisymmetric map must be an involution over declared values") {
  auto ds = check(
      "set S: ...\n"
      "choice enum o($a in S, $b in S):\n"
      "  value X:\n  value Y:\n  value Z:\n"
      "  antisymmetric:\n    X -> Y\n    Y -> Z\n"
      "end\n");
  CHECK(has_code(ds, ispace::diag::kBadAntisym));

  auto ds2 = check(
      "set S: ...\n"
      "choice enum o($a in S, $b in S):\n"
      "  value X:\n"
      "  antisymmetric:\n    X -> W\n"
      "end\n");
  CHECK(has_code(ds2, ispace::diag::kBadAntisym));
}

TEST_CASE("antisymmetric choices must relate two objects of one set") {
  auto ds = check(
      "set S: ...\nset T: ...\n"
      "choice enum o($a in S, $b in T):\n"
      "  value X:\n  value Y:\n"
      "  antisymmetric:\n    X -> Y\n"
      "end\n");
  CHECK(has_code(ds, ispace::diag::kBadAntisym));
}

TEST_CASE("unbound variable in a constraint atom") {
  std::string src =
      std::string(kOrderSpace) + "require forall $a in Instructions: order($a, $zz) is BEFORE\n";
  CHECK(has_code(check(src), ispace::diag::kUnknownVar));
}

TEST_CASE("counter term must be an integer choice") {
  auto ds = check(
      "set S: ...\n"
      "choice enum kind($d in S):\n  value K:\nend\n"
      "choice counter total():\n"
      "  forall $d in S:\n"
      "    sum kind($d) when:\n      kind($d) is K\n"
      "end\n");
  CHECK(has_code(ds, ispace::diag::kBadCounter));
}

TEST_CASE("quotient equivalence must name a binary enum choice value") {
  auto ds = check(
      "set S: ...\n"
      "choice enum kind($d in S):\n  value K:\n  value L:\nend\n"
      "quotient Q of $d in S:\n"
      "  is_q = kind($d) is K\n"
      "    / kind is L\n"
      "end\n");
  CHECK(has_code(ds, ispace::diag::kBadQuotient));
}

TEST_CASE("membership test without a value is flagged, not fatal") {
  auto ds = check(
      "set S: ...\n"
      "choice enum kind($d in S):\n  value K:\nend\n"
      "choice enum same($a in S, $b in S):\n  value TRUE:\n  value FALSE:\nend\n"
      "quotient Q of $d in S:\n"
      "  is_q = kind($d)\n"
      "    / same is TRUE\n"
      "end\n");
  CHECK(has_code(ds, ispace::diag::kBareAtom));
  CHECK_FALSE(ispace::has_errors(ds));
}

TEST_CASE("comparisons need numeric operands") {
  auto ds = check(
      "set S: ...\n"
      "choice enum kind($d in S):\n  value K:\nend\n"
      "require forall $d in S: kind($d) <= 3\n");
  CHECK(has_code(ds, ispace::diag::kTypeMismatch));
}

TEST_CASE("type compatible arguments follow the subset chain") {
  auto ds = check(
      "set Big: ...\n"
      "set Small subsetof Big: ...\n"
      "choice enum c($x in Big):\n  value V:\nend\n"
      "require forall $s in Small: c($s) is V\n");
  CHECK(ds.empty());

  auto ds2 = check(
      "set Big: ...\n"
      "set Small subsetof Big: ...\n"
      "choice enum c($x in Small):\n  value V:\nend\n"
      "require forall $b in Big: c($b) is V\n");
  CHECK(has_code(ds2, ispace::diag::kTypeMismatch));
}
