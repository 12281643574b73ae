#pragma once

// AST for the tilde-notation model language.
//
//   model linreg(X, y) {
//     d = size(X, 2)
//     w ~ MvNormal(zeros(d), 1)
//     s ~ Gamma(1, 1)
//     y .~ Normal.(X * w, s)
//   }

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "ppl/errors.hpp"

namespace ppl {

struct Expr;
using ExprPtr = std::unique_ptr<Expr>;

enum class BinOp { Add, Sub, Mul, Div, Pow, Lt, Gt, Le, Ge, Eq };

struct NumberLit {
  double rval = 0.0;
  std::int64_t ival = 0;
  bool is_int = false;
};
struct IdentExpr {
  std::string name;
};
struct MissingLit {};
struct IndexExpr {
  ExprPtr base;
  std::vector<ExprPtr> indices;
};
struct TransposeExpr {
  ExprPtr base;
};
struct NegExpr {
  ExprPtr operand;
};
struct BinaryExpr {
  BinOp op;
  ExprPtr lhs, rhs;
};
struct CallExpr {
  std::string name;
  std::vector<ExprPtr> args;
};
struct BroadcastCallExpr {
  std::string name;
  std::vector<ExprPtr> args;
};
struct VectorLit {
  std::vector<ExprPtr> elems;
};

struct Expr {
  SourcePos pos;
  std::variant<NumberLit, IdentExpr, MissingLit, IndexExpr, TransposeExpr,
               NegExpr, BinaryExpr, CallExpr, BroadcastCallExpr, VectorLit>
      node;
};

struct LValue {
  std::string symbol;
  std::vector<ExprPtr> indices;  // empty for a bare identifier
  SourcePos pos;
};

struct Stmt;

struct AssignStmt {
  std::string target;
  ExprPtr value;
};
struct TildeStmt {
  LValue lhs;
  ExprPtr dist;
};
struct DotTildeStmt {
  LValue lhs;
  ExprPtr dist;
};
struct IfStmt {
  ExprPtr cond;
  std::vector<Stmt> body;
};
struct RejectStmt {};

struct Stmt {
  SourcePos pos;
  std::variant<AssignStmt, TildeStmt, DotTildeStmt, IfStmt, RejectStmt> node;
};

struct ModelDecl {
  std::string name;
  std::vector<std::string> params;
  std::vector<Stmt> body;
  SourcePos pos;
};

// Reserved call names.
bool is_distribution_name(const std::string& name);
bool is_builtin_name(const std::string& name);
// Expected argument count, or -1 if the name is unknown.
int call_arity(const std::string& name);

// Canonical source text; parsing it back yields a structurally equal
// tree.
std::string pretty_print(const ModelDecl& m);
std::string pretty_print(const Expr& e);

// Structural equality (positions ignored).
bool ast_equal(const Expr& a, const Expr& b);
bool ast_equal(const Stmt& a, const Stmt& b);
bool ast_equal(const ModelDecl& a, const ModelDecl& b);

}  // namespace ppl
