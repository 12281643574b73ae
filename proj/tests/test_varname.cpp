#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <string>
#include <vector>

#include "ppl/errors.hpp"
#include "ppl/rng.hpp"
#include "ppl/varname.hpp"

using ppl::IndexAtom;
using ppl::IndexGroup;
using ppl::subsumes;
using ppl::VarName;
using ppl::varname_parse;
using ppl::varname_to_string;

TEST_CASE("canonical printing") {
  CHECK(varname_to_string(VarName("w")) == "w");
  CHECK(varname_to_string(VarName::indexed("x", {1, 2})) == "x[1,2]");
  VarName v("x");
  v.path.push_back({IndexAtom{1}});
  v.path.push_back({IndexAtom{3}});
  CHECK(varname_to_string(v) == "x[1][3]");
  VarName all("m");
  all.path.push_back({IndexAtom{IndexAtom::kAll}, IndexAtom{2}});
  CHECK(varname_to_string(all) == "m[:,2]");
}

TEST_CASE("parsing") {
  CHECK(varname_parse("s") == VarName("s"));
  CHECK(varname_parse("y[10]") == VarName::indexed("y", {10}));
  CHECK(varname_parse("_a1[2,3][4]").path.size() == 2);
  CHECK_THROWS_AS(varname_parse("y[0]"), ppl::ParseError);
  CHECK_THROWS_AS(varname_parse("3x"), ppl::ParseError);
  CHECK_THROWS_AS(varname_parse("x["), ppl::ParseError);
  CHECK_THROWS_AS(varname_parse("x[1"), ppl::ParseError);
  CHECK_THROWS_AS(varname_parse("x[1]]"), ppl::ParseError);
  CHECK_THROWS_AS(varname_parse("x[1.5]"), ppl::ParseError);
  CHECK_THROWS_AS(varname_parse(""), ppl::ParseError);
}

namespace {

VarName random_varname(ppl::Rng& rng, bool with_all) {
  static const char* symbols[] = {"w", "x", "_tmp", "a1", "lambda"};
  VarName v(symbols[rng.next_u64() % 5]);
  const std::size_t ngroups = rng.next_u64() % 3;
  for (std::size_t g = 0; g < ngroups; ++g) {
    IndexGroup group;
    const std::size_t atoms = 1 + rng.next_u64() % 3;
    for (std::size_t a = 0; a < atoms; ++a) {
      if (with_all && rng.uniform() < 0.25)
        group.push_back(IndexAtom{IndexAtom::kAll});
      else
        group.push_back(IndexAtom{1 + static_cast<std::int64_t>(rng.next_u64() % 9)});
    }
    v.path.push_back(std::move(group));
  }
  return v;
}

}  // namespace

TEST_CASE("round-trip property") {
  ppl::Rng rng(42);
  for (int i = 0; i < 2000; ++i) {
    VarName v = random_varname(rng, true);
    CHECK(varname_parse(varname_to_string(v)) == v);
  }
}

TEST_CASE("subsumption examples") {
  CHECK(subsumes(varname_parse("w"), varname_parse("w[3]")));
  CHECK_FALSE(subsumes(varname_parse("x[1]"), varname_parse("x[1,2]")));
  CHECK_FALSE(subsumes(varname_parse("x[2]"), varname_parse("y[2]")));
  CHECK(subsumes(varname_parse("x[:]"), varname_parse("x[7]")));
  CHECK_FALSE(subsumes(varname_parse("x[7]"), varname_parse("x[:]")));
  CHECK(subsumes(varname_parse("x[1,2]"), varname_parse("x[1,2][5]")));
}

TEST_CASE("subsumption is reflexive, transitive and antisymmetric") {
  ppl::Rng rng(4242);
  for (int i = 0; i < 1000; ++i) {
    VarName a = random_varname(rng, true);
    CHECK(subsumes(a, a));

    // build b by extending a with concrete groups, c by extending b
    VarName b = a;
    for (auto& g : b.path)
      for (auto& atom : g)
        if (atom.is_all()) atom.value = 1 + static_cast<std::int64_t>(rng.next_u64() % 9);
    b.path.push_back({IndexAtom{2}});
    VarName c = b;
    c.path.push_back({IndexAtom{1}, IndexAtom{4}});
    CHECK(subsumes(a, b));
    CHECK(subsumes(b, c));
    CHECK(subsumes(a, c));

    if (subsumes(a, b) && subsumes(b, a)) CHECK(a == b);
  }
}
