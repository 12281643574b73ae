#pragma once

#include <string>
#include <vector>

#include "ppl/ast.hpp"

namespace ppl {

// file := model+ ; model names must be unique. Throws ParseError (with
// position) on syntax errors and on semantic ones: unknown call names,
// wrong call arity, a tilde right-hand side that is not a distribution
// call.
std::vector<ModelDecl> parse_file(const std::string& source);

// Convenience for sources holding exactly one model.
ModelDecl parse_model(const std::string& source);

}  // namespace ppl
