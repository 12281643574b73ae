#pragma once

// The probability-query language: `lhs | rhs` strings with
// `name = literal` bindings, classified as prior / likelihood / joint /
// posterior-predictive and evaluated to a log probability.
//
//   X = [1.0, 2.0]', y = [2.0] | w = [0.5, 0.0], s = 1.0, model = linreg
//   w = [1.0, 1.0]', s = 1.0 | model = linreg
//   X = [1.0, 1.0]', y = [2.0] | chain = "posterior.csv"

#include <map>
#include <memory>
#include <string>
#include <vector>

#include "ppl/ast.hpp"
#include "ppl/chain.hpp"
#include "ppl/value.hpp"

namespace ppl {

struct QueryBinding {
  std::string name;
  Value value;
};

struct QueryExpr {
  std::vector<QueryBinding> lhs;
  std::vector<QueryBinding> rhs;  // excluding the reserved keys
  std::string model;              // model = <identifier>
  std::string chain_ref;          // chain = <handle> or quoted path
  bool has_model = false;
  bool has_chain = false;
  bool chain_is_path = false;  // quoted string = CSV path
};

// Grammar: bindings "|" bindings; binding := IDENT "=" literal;
// literal := number | missing | "[" number ("," number)* "]" ["'"] |
// quoted string (chain paths). Whitespace-insensitive. Exactly one of
// model/chain must be present on the right.
QueryExpr parse_query(const std::string& s);

enum class QueryKind { Prior, Likelihood, Joint, PosteriorPredictive };
const char* query_kind_name(QueryKind k);

QueryKind classify(const QueryExpr& q, const ModelDecl& decl);

using ModelRegistry = std::map<std::string, std::shared_ptr<const ModelDecl>>;

struct QueryEnv {
  const ModelRegistry* models = nullptr;
  // resolves a bare `chain = handle` binding
  const Chain* chain = nullptr;
  // extra data arguments not bound inside the query (e.g. from a data
  // file); prior queries over models whose dimensions come from data
  // need these
  const std::map<std::string, Value>* data = nullptr;
};

struct QueryResult {
  QueryKind kind;
  double logp;
};

QueryResult evaluate_query(const QueryExpr& q, const QueryEnv& env);
QueryResult evaluate_query(const std::string& q, const QueryEnv& env);

}  // namespace ppl
