#pragma once

// Run-time addresses of random variables: a symbol plus an optional
// index path. "w", "x[1,2]", "x[1][3]". The canonical string form is
// the wire format used in chain CSV headers and query strings.

#include <cstdint>
#include <string>
#include <vector>

namespace ppl {

struct IndexAtom {
  // value >= 1 means a concrete 1-based index; kAll matches any atom
  // in subsumption and prints as ":".
  static constexpr std::int64_t kAll = 0;
  std::int64_t value = kAll;

  bool is_all() const { return value == kAll; }
  friend bool operator==(IndexAtom a, IndexAtom b) = default;
};

using IndexGroup = std::vector<IndexAtom>;

struct VarName {
  std::string symbol;
  std::vector<IndexGroup> path;

  VarName() = default;
  explicit VarName(std::string sym) : symbol(std::move(sym)) {}
  VarName(std::string sym, std::vector<IndexGroup> p)
      : symbol(std::move(sym)), path(std::move(p)) {}

  // Convenience: one group of concrete indices.
  static VarName indexed(std::string sym, std::initializer_list<std::int64_t> idx);

  friend bool operator==(const VarName& a, const VarName& b) = default;
};

std::string varname_to_string(const VarName& v);

// Inverse of varname_to_string on canonical strings. Throws ParseError
// with the offending position on malformed input.
VarName varname_parse(const std::string& s);

// True iff a.symbol == b.symbol and a.path is a group-wise prefix of
// b.path; a group matches when arities agree and every atom matches
// (kAll matches anything).
bool subsumes(const VarName& a, const VarName& b);

bool is_valid_identifier(const std::string& s);

}  // namespace ppl
