#include <doctest.h>

#include <fstream>
#include <sstream>
#include <string>

#include "ispace/parser.hpp"
#include "ispace/printer.hpp"

namespace {

std::string read_file(const std::string& rel) {
  std::ifstream in(std::string(ISPACE_TEST_DATA_DIR) + "/" + rel);
  REQUIRE(in.good());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

ispace::ParseResult parse_fixture(const std::string& rel) {
  return ispace::parse_space(read_file(rel));
}

const char* kDslListings[] = {
    "listings/listing01.space", "listings/listing02.space", "listings/listing03.space",
    "listings/listing04.space", "listings/listing05.space", "listings/listing06.space",
    "listings/listing07.space", "listings/listing09.space", "listings/listing10.space",
    "listings/listing11.space", "listings/listing13.space",
};

}  // namespace

TEST_CASE("parses an empty definition") {
  auto r = ispace::parse_space("// nothing here\n");
  CHECK(r.ok());
  CHECK(r.def.sets.empty());
  CHECK(ispace::pretty_print(r.def).empty());
}

TEST_CASE("every published definition fragment parses without diagnostics") {
  for (const char* rel : kDslListings) {
    CAPTURE(rel);
    auto r = parse_fixture(rel);
    for (const auto& d : r.diagnostics) MESSAGE(ispace::format_diagnostic(d));
    CHECK(r.diagnostics.empty());
  }
}

TEST_CASE("set declarations: bindings, subsets, parameters, elision") {
  auto r = parse_fixture("listings/listing01.space");
  REQUIRE(r.ok());
  REQUIRE(r.def.sets.size() == 3);

  const auto& insts = r.def.sets[0];
  CHECK(insts.name == "Instructions");
  CHECK(insts.param_var.empty());
  CHECK(insts.superset.empty());
  REQUIRE(insts.bindings.size() == 3);
  CHECK(insts.bindings[0].key == "type");
  CHECK(insts.bindings[0].value == "Instruction");
  CHECK(insts.bindings[1].key == "iterator");
  CHECK_FALSE(insts.bindings[1].value.has_value());
  CHECK(insts.elided);

  const auto& mem = r.def.sets[1];
  CHECK(mem.name == "MemAccesses");
  CHECK(mem.superset == "Instructions");

  const auto& acc = r.def.sets[2];
  CHECK(acc.name == "AccessedRegions");
  CHECK(acc.param_var == "inst");
  CHECK(acc.param_set == "MemAccess");
}

TEST_CASE("enum choice: values and comments") {
  auto r = parse_fixture("listings/listing02.space");
  REQUIRE(r.ok());
  REQUIRE(r.def.choices.size() == 1);
  const auto& c = r.def.choices[0];
  CHECK(c.name == "cache");
  CHECK(c.kind == ispace::ChoiceKind::Enum);
  REQUIRE(c.params.size() == 1);
  CHECK(c.params[0].set == "MemAccesses");
  REQUIRE(c.values.size() == 4);
  CHECK(c.values[0] == "L1");
  CHECK(c.values[3] == "NONE");
  CHECK(c.antisym.empty());
}

TEST_CASE("enum choice: antisymmetric pairs") {
  auto r = parse_fixture("listings/listing03.space");
  REQUIRE(r.ok());
  const auto& c = r.def.choices[0];
  CHECK(c.name == "order");
  REQUIRE(c.params.size() == 2);
  REQUIRE(c.antisym.size() == 1);
  CHECK(c.antisym[0].from == "BEFORE");
  CHECK(c.antisym[0].to == "AFTER");
}

TEST_CASE("require: quantifier prefix and disjunction") {
  auto r = parse_fixture("listings/listing04.space");
  REQUIRE(r.ok());
  REQUIRE(r.def.constraints.size() == 1);
  const auto& q = r.def.constraints[0];
  REQUIRE(q.foralls.size() == 3);
  CHECK(q.foralls[0].var == "a");
  CHECK(q.foralls[2].var == "c");
  REQUIRE(q.disjuncts.size() == 3);
  CHECK(q.disjuncts[0].kind == ispace::Atom::Kind::Test);
  CHECK_FALSE(q.disjuncts[0].negated);
  CHECK(q.disjuncts[0].value == "AFTER");
  CHECK(q.disjuncts[1].negated);
  CHECK(q.disjuncts[1].app.choice == "order");
  REQUIRE(q.disjuncts[1].app.args.size() == 2);
  CHECK(q.disjuncts[1].app.args[0] == "a");
  CHECK(q.disjuncts[1].app.args[1] == "b");
}

TEST_CASE("counter choice: guarded sum and opaque bound") {
  auto r = parse_fixture("listings/listing05.space");
  REQUIRE(r.ok());
  const auto& c = r.def.choices[0];
  CHECK(c.kind == ispace::ChoiceKind::Counter);
  CHECK(c.params.empty());
  CHECK(c.counter.op == ispace::CounterOp::Sum);
  REQUIRE(c.counter.foralls.size() == 1);
  CHECK(c.counter.foralls[0].set == "MemBlocks");
  CHECK(c.counter.term_kind == ispace::CounterBody::TermKind::Opaque);
  CHECK(c.counter.term_opaque == "$mem_block.size()");
  REQUIRE(c.counter.guard.size() == 1);
  CHECK(c.counter.guard[0].app.choice == "mem_space");

  REQUIRE(r.def.constraints.size() == 1);
  const auto& bound = r.def.constraints[0];
  CHECK(bound.foralls.empty());
  REQUIRE(bound.disjuncts.size() == 1);
  CHECK(bound.disjuncts[0].kind == ispace::Atom::Kind::Cmp);
  CHECK(bound.disjuncts[0].op == ispace::CmpOp::Lt);
  CHECK(bound.disjuncts[0].rhs_kind == ispace::Atom::RhsKind::Opaque);
  CHECK(bound.disjuncts[0].rhs_opaque == "gpu.local_mem_size");
}

TEST_CASE("quotient: membership, equivalence, guarded counter with colon") {
  auto r = parse_fixture("listings/listing06.space");
  REQUIRE(r.ok());
  REQUIRE(r.def.quotients.size() == 1);
  const auto& q = r.def.quotients[0];
  CHECK(q.name == "ThreadDims");
  CHECK_FALSE(q.has_param);
  CHECK(q.var == "dim");
  CHECK(q.base_set == "Dimensions");
  CHECK(q.flag == "is_thread_dim");
  CHECK(q.membership.app.choice == "dim_kind");
  CHECK(q.membership.value == "THREAD");
  CHECK(q.equiv_choice == "fused");
  CHECK(q.equiv_value == "TRUE");
  CHECK(q.elided);

  const auto& counter = r.def.choices[1];
  CHECK(counter.name == "num_threads");
  CHECK(counter.counter.term_kind == ispace::CounterBody::TermKind::App);
  CHECK(counter.counter.term_app.choice == "size");
}

TEST_CASE("control flow fragment: five order values, quotient without in") {
  auto r = parse_fixture("listings/listing07.space");
  REQUIRE(r.ok());
  CHECK(r.def.sets.size() == 3);
  CHECK(r.def.sets[0].elided);
  const auto& order = r.def.choices[0];
  REQUIRE(order.values.size() == 5);
  CHECK(order.values[4] == "MERGED");
  REQUIRE(order.antisym.size() == 2);
  CHECK(order.antisym[1].from == "INNER");
  CHECK(order.antisym[1].to == "OUTER");
  const auto& q = r.def.quotients[0];
  CHECK(q.has_param);
  CHECK(q.param.var == "inst");
  CHECK(q.param.set == "Insts");
  CHECK(q.var == "dim");
  CHECK(q.base_set == "Dimensions");
  CHECK(q.equiv_choice == "order");
  CHECK(q.equiv_value == "MERGED");
}

TEST_CASE("integer choice with opaque universe") {
  auto r = parse_fixture("listings/listing10.space");
  REQUIRE(r.ok());
  const auto& c = r.def.choices[0];
  CHECK(c.kind == ispace::ChoiceKind::Integer);
  CHECK(c.universe == "$dim.possible_sizes()");
  CHECK(r.def.sets.size() == 4);
  CHECK(r.def.sets[1].name == "LogicalDims");
  CHECK(r.def.sets[2].param_var == "logical");
  CHECK(r.def.sets[2].superset == "StaticDims");
}

TEST_CASE("one line elided choice terminates at end of input") {
  auto r = parse_fixture("listings/listing11.space");
  REQUIRE(r.ok());
  REQUIRE(r.def.choices.size() == 2);
  CHECK(r.def.choices[1].name == "cache");
  CHECK(r.def.choices[1].elided);
  CHECK(r.def.choices[1].values.empty());
}

TEST_CASE("membership test without a value parses as a bare application") {
  auto r = parse_fixture("listings/listing13.space");
  REQUIRE(r.ok());
  const auto& q = r.def.quotients[0];
  CHECK(q.name == "HwThreadDims");
  CHECK(q.membership.app.choice == "dim_kind");
  CHECK(q.membership.value.empty());
  const auto& tl = r.def.choices[0];
  REQUIRE(tl.values.size() == 4);
  CHECK(tl.values[3] == "NOT_THREADS");
  REQUIRE(tl.antisym.size() == 1);
}

TEST_CASE("pretty printed output reparses to the same definition") {
  for (const char* rel : kDslListings) {
    CAPTURE(rel);
    auto first = parse_fixture(rel);
    REQUIRE(first.ok());
    std::string printed = ispace::pretty_print(first.def);
    auto second = ispace::parse_space(printed);
    for (const auto& d : second.diagnostics) MESSAGE(ispace::format_diagnostic(d));
    REQUIRE(second.ok());
    CHECK(first.def == second.def);
    // Printing is a normal form: printing again must be a fixed point.
    CHECK(ispace::pretty_print(second.def) == printed);
  }
}

TEST_CASE("structural dump of the concatenated fragments matches the golden file") {
  std::string all;
  for (int i : {1, 2, 3, 4, 5, 6}) {
    char name[64];
    std::snprintf(name, sizeof name, "listings/listing%02d.space", i);
    all += read_file(name);
    all += "\n";
  }
  auto r = ispace::parse_space(all);
  for (const auto& d : r.diagnostics) MESSAGE(ispace::format_diagnostic(d));
  REQUIRE(r.ok());
  std::string dump = ispace::to_json(r.def).dump(2) + "\n";
  std::string golden = read_file("golden/listings_1_to_6.json");
  CHECK(dump == golden);
}

TEST_CASE("syntax errors carry positions and do not cascade") {
  auto r = ispace::parse_space("choice enum cache($inst in A):\n  value L1:\n  junk\nend\n");
  CHECK_FALSE(r.ok());
  REQUIRE_FALSE(r.diagnostics.empty());
  CHECK(r.diagnostics[0].loc.line == 3);

  auto r2 = ispace::parse_space("set A:\nend\nset B incomplete\nset C: ...\n");
  CHECK_FALSE(r2.ok());
  // The parser recovers at the next top level keyword: C still parses.
  bool has_c = false;
  for (const auto& s : r2.def.sets) has_c |= s.name == "C";
  CHECK(has_c);
}

TEST_CASE("strings keep embedded variables and punctuation") {
  auto r = ispace::parse_space(
      "require forall $m in Mems: size($m) <= \"$m.max_size\"\n");
  REQUIRE(r.ok());
  const auto& a = r.def.constraints[0].disjuncts[0];
  CHECK(a.op == ispace::CmpOp::Le);
  CHECK(a.rhs_opaque == "$m.max_size");
}

TEST_CASE("opaque predicate disjunct") {
  auto r = ispace::parse_space(
      "require forall $i in Insts: \"$i.is_vectorizable\" || cache($i) is not L1\n");
  REQUIRE(r.ok());
  const auto& d = r.def.constraints[0].disjuncts;
  REQUIRE(d.size() == 2);
  CHECK(d[0].kind == ispace::Atom::Kind::Opaque);
  CHECK(d[0].opaque == "$i.is_vectorizable");
  CHECK(d[1].negated);
}
