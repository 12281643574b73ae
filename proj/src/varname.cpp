#include "ppl/varname.hpp"

#include <cctype>

#include "ppl/errors.hpp"

namespace ppl {

VarName VarName::indexed(std::string sym,
                         std::initializer_list<std::int64_t> idx) {
  VarName v(std::move(sym));
  IndexGroup g;
  for (auto i : idx) g.push_back(IndexAtom{i});
  v.path.push_back(std::move(g));
  return v;
}

bool is_valid_identifier(const std::string& s) {
  if (s.empty()) return false;
  if (!(std::isalpha(static_cast<unsigned char>(s[0])) || s[0] == '_'))
    return false;
  for (char c : s)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '_'))
      return false;
  return true;
}

std::string varname_to_string(const VarName& v) {
  std::string out = v.symbol;
  for (const IndexGroup& g : v.path) {
    out += '[';
    for (std::size_t i = 0; i < g.size(); ++i) {
      if (i > 0) out += ',';
      if (g[i].is_all())
        out += ':';
      else
        out += std::to_string(g[i].value);
    }
    out += ']';
  }
  return out;
}

namespace {

[[noreturn]] void fail(const std::string& msg, std::size_t col) {
  throw ParseError(msg, SourcePos{1, static_cast<int>(col) + 1});
}

}  // namespace

VarName varname_parse(const std::string& s) {
  std::size_t i = 0;
  const std::size_t n = s.size();
  if (i >= n || !(std::isalpha(static_cast<unsigned char>(s[i])) || s[i] == '_'))
    fail("expected identifier", i);
  std::size_t start = i;
  while (i < n &&
         (std::isalnum(static_cast<unsigned char>(s[i])) || s[i] == '_'))
    ++i;
  VarName v(s.substr(start, i - start));

  while (i < n) {
    if (s[i] != '[') fail("expected '['", i);
    ++i;
    IndexGroup group;
    while (true) {
      if (i < n && s[i] == ':') {
        group.push_back(IndexAtom{IndexAtom::kAll});
        ++i;
      } else {
        if (i >= n || !std::isdigit(static_cast<unsigned char>(s[i])))
          fail("expected index", i);
        std::int64_t val = 0;
        while (i < n && std::isdigit(static_cast<unsigned char>(s[i]))) {
          val = val * 10 + (s[i] - '0');
          ++i;
        }
        if (val < 1) fail("indices are 1-based", i);
        group.push_back(IndexAtom{val});
      }
      if (i < n && s[i] == ',') {
        ++i;
        continue;
      }
      break;
    }
    if (i >= n || s[i] != ']') fail("expected ']'", i);
    ++i;
    v.path.push_back(std::move(group));
  }
  return v;
}

bool subsumes(const VarName& a, const VarName& b) {
  if (a.symbol != b.symbol) return false;
  if (a.path.size() > b.path.size()) return false;
  for (std::size_t g = 0; g < a.path.size(); ++g) {
    const IndexGroup& ga = a.path[g];
    const IndexGroup& gb = b.path[g];
    if (ga.size() != gb.size()) return false;
    for (std::size_t k = 0; k < ga.size(); ++k)
      if (!ga[k].is_all() && ga[k] != gb[k]) return false;
  }
  return true;
}

}  // namespace ppl
