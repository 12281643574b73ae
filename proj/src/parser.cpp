#include "ppl/parser.hpp"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <set>

#include "ppl/lexer.hpp"

namespace ppl {

// ------------------------------------------------------ reserved names

bool is_distribution_name(const std::string& name) {
  return name == "Normal" || name == "MvNormal" || name == "Gamma" ||
         name == "Beta" || name == "Bernoulli" || name == "Poisson" ||
         name == "Categorical" || name == "Dirichlet";
}

bool is_builtin_name(const std::string& name) {
  return name == "logistic" || name == "exp" || name == "log" ||
         name == "sqrt" || name == "size" || name == "zeros" ||
         name == "ones" || name == "sum";
}

int call_arity(const std::string& name) {
  if (name == "Normal" || name == "MvNormal" || name == "Gamma" ||
      name == "Beta" || name == "size")
    return 2;
  if (name == "Bernoulli" || name == "Poisson" || name == "Categorical" ||
      name == "Dirichlet" || name == "logistic" || name == "exp" ||
      name == "log" || name == "sqrt" || name == "zeros" || name == "ones" ||
      name == "sum")
    return 1;
  return -1;
}

// --------------------------------------------------------------- parse

namespace {

class Parser {
 public:
  explicit Parser(std::vector<Token> toks) : toks_(std::move(toks)) {}

  std::vector<ModelDecl> file() {
    std::vector<ModelDecl> models;
    std::set<std::string> names;
    do {
      ModelDecl m = model();
      if (!names.insert(m.name).second)
        throw ParseError("duplicate model name '" + m.name + "'", m.pos);
      models.push_back(std::move(m));
    } while (peek().kind != Tok::Eof);
    return models;
  }

 private:
  const Token& peek(std::size_t k = 0) const {
    const std::size_t i = std::min(pos_ + k, toks_.size() - 1);
    return toks_[i];
  }
  Token advance() { return toks_[std::min(pos_++, toks_.size() - 1)]; }
  bool check(Tok t) const { return peek().kind == t; }
  bool match(Tok t) {
    if (!check(t)) return false;
    ++pos_;
    return true;
  }
  Token expect(Tok t, const char* what) {
    if (!check(t))
      throw ParseError(std::string("expected ") + token_name(t) + " (" + what +
                           "), found " + token_name(peek().kind),
                       peek().pos);
    return advance();
  }

  ModelDecl model() {
    ModelDecl m;
    m.pos = peek().pos;
    expect(Tok::KwModel, "model declaration");
    m.name = expect(Tok::Ident, "model name").text;
    expect(Tok::LParen, "parameter list");
    if (!check(Tok::RParen)) {
      do {
        m.params.push_back(expect(Tok::Ident, "parameter name").text);
      } while (match(Tok::Comma));
    }
    expect(Tok::RParen, "parameter list");
    std::set<std::string> seen(m.params.begin(), m.params.end());
    if (seen.size() != m.params.size())
      throw ParseError("duplicate parameter name in model '" + m.name + "'",
                       m.pos);
    m.body = block();
    return m;
  }

  std::vector<Stmt> block() {
    expect(Tok::LBrace, "block");
    std::vector<Stmt> body;
    while (!check(Tok::RBrace)) {
      if (check(Tok::Eof))
        throw ParseError("unterminated block", peek().pos);
      body.push_back(stmt());
    }
    expect(Tok::RBrace, "block");
    return body;
  }

  Stmt stmt() {
    Stmt s;
    s.pos = peek().pos;
    if (match(Tok::KwReject)) {
      s.node = RejectStmt{};
      return s;
    }
    if (match(Tok::KwIf)) {
      IfStmt node;
      node.cond = expr_ptr();
      node.body = block();
      s.node = std::move(node);
      return s;
    }
    const Token ident = expect(Tok::Ident, "statement");
    if (check(Tok::Assign)) {
      advance();
      AssignStmt node;
      node.target = ident.text;
      node.value = expr_ptr();
      s.node = std::move(node);
      return s;
    }
    LValue lv;
    lv.symbol = ident.text;
    lv.pos = ident.pos;
    if (match(Tok::LBracket)) {
      do {
        lv.indices.push_back(expr_ptr());
      } while (match(Tok::Comma));
      expect(Tok::RBracket, "index list");
    }
    if (match(Tok::Tilde)) {
      TildeStmt node;
      node.lhs = std::move(lv);
      node.dist = expr_ptr();
      check_dist_rhs(*node.dist, /*allow_broadcast=*/false);
      s.node = std::move(node);
      return s;
    }
    if (match(Tok::DotTilde)) {
      DotTildeStmt node;
      node.lhs = std::move(lv);
      node.dist = expr_ptr();
      check_dist_rhs(*node.dist, /*allow_broadcast=*/true);
      s.node = std::move(node);
      return s;
    }
    throw ParseError("expected '=', '~' or '.~' after identifier", peek().pos);
  }

  void check_dist_rhs(const Expr& e, bool allow_broadcast) {
    if (const auto* call = std::get_if<CallExpr>(&e.node)) {
      if (is_distribution_name(call->name)) return;
    }
    if (allow_broadcast) {
      if (const auto* bc = std::get_if<BroadcastCallExpr>(&e.node)) {
        if (is_distribution_name(bc->name)) return;
      }
      throw ParseError(
          "broadcast tilde right-hand side must be a distribution call",
          e.pos);
    }
    throw ParseError("tilde right-hand side must be a distribution call",
                     e.pos);
  }

  ExprPtr expr_ptr() { return std::make_unique<Expr>(cmp()); }

  Expr cmp() {
    Expr lhs = add();
    BinOp op;
    switch (peek().kind) {
      case Tok::Lt: op = BinOp::Lt; break;
      case Tok::Gt: op = BinOp::Gt; break;
      case Tok::Le: op = BinOp::Le; break;
      case Tok::Ge: op = BinOp::Ge; break;
      case Tok::EqEq: op = BinOp::Eq; break;
      default: return lhs;
    }
    const SourcePos p = advance().pos;
    Expr rhs = add();
    Expr out;
    out.pos = p;
    out.node = BinaryExpr{op, std::make_unique<Expr>(std::move(lhs)),
                          std::make_unique<Expr>(std::move(rhs))};
    return out;
  }

  Expr add() {
    Expr lhs = mul();
    while (check(Tok::Plus) || check(Tok::Minus)) {
      const BinOp op = check(Tok::Plus) ? BinOp::Add : BinOp::Sub;
      const SourcePos p = advance().pos;
      Expr rhs = mul();
      Expr out;
      out.pos = p;
      out.node = BinaryExpr{op, std::make_unique<Expr>(std::move(lhs)),
                            std::make_unique<Expr>(std::move(rhs))};
      lhs = std::move(out);
    }
    return lhs;
  }

  Expr mul() {
    Expr lhs = unary();
    while (check(Tok::Star) || check(Tok::Slash)) {
      const BinOp op = check(Tok::Star) ? BinOp::Mul : BinOp::Div;
      const SourcePos p = advance().pos;
      Expr rhs = unary();
      Expr out;
      out.pos = p;
      out.node = BinaryExpr{op, std::make_unique<Expr>(std::move(lhs)),
                            std::make_unique<Expr>(std::move(rhs))};
      lhs = std::move(out);
    }
    return lhs;
  }

  Expr unary() {
    if (check(Tok::Minus)) {
      const SourcePos p = advance().pos;
      Expr operand = unary();
      Expr out;
      out.pos = p;
      out.node = NegExpr{std::make_unique<Expr>(std::move(operand))};
      return out;
    }
    return power();
  }

  Expr power() {
    Expr base = postfix();
    if (check(Tok::Caret)) {
      const SourcePos p = advance().pos;
      Expr exponent = unary();  // right-associative
      Expr out;
      out.pos = p;
      out.node = BinaryExpr{BinOp::Pow, std::make_unique<Expr>(std::move(base)),
                            std::make_unique<Expr>(std::move(exponent))};
      return out;
    }
    return base;
  }

  Expr postfix() {
    Expr e = primary();
    while (true) {
      if (check(Tok::Quote)) {
        const SourcePos p = advance().pos;
        Expr out;
        out.pos = p;
        out.node = TransposeExpr{std::make_unique<Expr>(std::move(e))};
        e = std::move(out);
      } else if (check(Tok::LBracket)) {
        const SourcePos p = advance().pos;
        IndexExpr node;
        node.base = std::make_unique<Expr>(std::move(e));
        do {
          node.indices.push_back(expr_ptr());
        } while (match(Tok::Comma));
        expect(Tok::RBracket, "index list");
        Expr out;
        out.pos = p;
        out.node = std::move(node);
        e = std::move(out);
      } else {
        return e;
      }
    }
  }

  Expr primary() {
    Expr e;
    e.pos = peek().pos;
    if (check(Tok::Number)) {
      const Token t = advance();
      e.node = NumberLit{t.num_r, t.num_i, t.num_is_int};
      return e;
    }
    if (match(Tok::KwMissing)) {
      e.node = MissingLit{};
      return e;
    }
    if (check(Tok::Ident)) {
      const Token t = advance();
      if (check(Tok::LParen) || (check(Tok::Dot) && peek(1).kind == Tok::LParen)) {
        const bool broadcast = match(Tok::Dot);
        expect(Tok::LParen, "call arguments");
        std::vector<ExprPtr> args;
        if (!check(Tok::RParen)) {
          do {
            args.push_back(expr_ptr());
          } while (match(Tok::Comma));
        }
        expect(Tok::RParen, "call arguments");
        const int arity = call_arity(t.text);
        if (arity < 0)
          throw ParseError("unknown function or distribution '" + t.text + "'",
                           t.pos);
        if (static_cast<int>(args.size()) != arity)
          throw ParseError("'" + t.text + "' expects " +
                               std::to_string(arity) + " argument(s), got " +
                               std::to_string(args.size()),
                           t.pos);
        if (broadcast)
          e.node = BroadcastCallExpr{t.text, std::move(args)};
        else
          e.node = CallExpr{t.text, std::move(args)};
        return e;
      }
      if (check(Tok::Dot))
        throw ParseError("expected '(' after '.'", peek().pos);
      e.node = IdentExpr{t.text};
      return e;
    }
    if (match(Tok::LParen)) {
      Expr inner = cmp();
      expect(Tok::RParen, "parenthesized expression");
      return inner;
    }
    if (check(Tok::LBracket)) {
      advance();
      VectorLit node;
      do {
        node.elems.push_back(expr_ptr());
      } while (match(Tok::Comma));
      expect(Tok::RBracket, "vector literal");
      e.node = std::move(node);
      return e;
    }
    throw ParseError(std::string("expected an expression, found ") +
                         token_name(peek().kind),
                     peek().pos);
  }

  std::vector<Token> toks_;
  std::size_t pos_ = 0;
};

}  // namespace

std::vector<ModelDecl> parse_file(const std::string& source) {
  return Parser(lex(source)).file();
}

ModelDecl parse_model(const std::string& source) {
  auto models = parse_file(source);
  if (models.size() != 1)
    throw ParseError("expected exactly one model", SourcePos{1, 1});
  return std::move(models[0]);
}

// ------------------------------------------------------- pretty print

namespace {

std::string format_real(double v) {
  char buf[64];
  for (int prec = 15; prec <= 17; ++prec) {
    std::snprintf(buf, sizeof buf, "%.*g", prec, v);
    if (std::strtod(buf, nullptr) == v) break;
  }
  std::string s(buf);
  if (s.find_first_of(".eE") == std::string::npos) s += ".0";
  return s;
}

const char* op_text(BinOp op) {
  switch (op) {
    case BinOp::Add: return "+";
    case BinOp::Sub: return "-";
    case BinOp::Mul: return "*";
    case BinOp::Div: return "/";
    case BinOp::Pow: return "^";
    case BinOp::Lt: return "<";
    case BinOp::Gt: return ">";
    case BinOp::Le: return "<=";
    case BinOp::Ge: return ">=";
    case BinOp::Eq: return "==";
  }
  return "?";
}

// grammar levels: cmp=1 < add=2 < mul=3 < unary=4 < pow=5 < postfix=6
int node_prec(const Expr& e) {
  struct V {
    int operator()(const NumberLit&) const { return 7; }
    int operator()(const IdentExpr&) const { return 7; }
    int operator()(const MissingLit&) const { return 7; }
    int operator()(const CallExpr&) const { return 7; }
    int operator()(const BroadcastCallExpr&) const { return 7; }
    int operator()(const VectorLit&) const { return 7; }
    int operator()(const IndexExpr&) const { return 6; }
    int operator()(const TransposeExpr&) const { return 6; }
    int operator()(const NegExpr&) const { return 4; }
    int operator()(const BinaryExpr& b) const {
      switch (b.op) {
        case BinOp::Pow: return 5;
        case BinOp::Mul:
        case BinOp::Div: return 3;
        case BinOp::Add:
        case BinOp::Sub: return 2;
        default: return 1;
      }
    }
  };
  return std::visit(V{}, e.node);
}

void print_expr(const Expr& e, int min_prec, std::string& out);

void print_at(const Expr& e, int min_prec, std::string& out) {
  if (node_prec(e) < min_prec) {
    out += '(';
    print_expr(e, 1, out);
    out += ')';
  } else {
    print_expr(e, 1, out);
  }
}

void print_args(const std::vector<ExprPtr>& args, std::string& out) {
  for (std::size_t i = 0; i < args.size(); ++i) {
    if (i > 0) out += ", ";
    print_expr(*args[i], 1, out);
  }
}

void print_expr(const Expr& e, int /*min_prec*/, std::string& out) {
  struct V {
    std::string& out;
    void operator()(const NumberLit& n) const {
      out += n.is_int ? std::to_string(n.ival) : format_real(n.rval);
    }
    void operator()(const IdentExpr& i) const { out += i.name; }
    void operator()(const MissingLit&) const { out += "missing"; }
    void operator()(const IndexExpr& ix) const {
      print_at(*ix.base, 6, out);
      out += '[';
      print_args(ix.indices, out);
      out += ']';
    }
    void operator()(const TransposeExpr& t) const {
      print_at(*t.base, 6, out);
      out += '\'';
    }
    void operator()(const NegExpr& n) const {
      out += '-';
      print_at(*n.operand, 4, out);
    }
    void operator()(const BinaryExpr& b) const {
      int prec;
      int lhs_min, rhs_min;
      switch (b.op) {
        case BinOp::Pow: prec = 5, lhs_min = 6, rhs_min = 4; break;
        case BinOp::Mul:
        case BinOp::Div: prec = 3, lhs_min = 3, rhs_min = 4; break;
        case BinOp::Add:
        case BinOp::Sub: prec = 2, lhs_min = 2, rhs_min = 3; break;
        default: prec = 1, lhs_min = 2, rhs_min = 2; break;
      }
      (void)prec;
      print_at(*b.lhs, lhs_min, out);
      out += ' ';
      out += op_text(b.op);
      out += ' ';
      print_at(*b.rhs, rhs_min, out);
    }
    void operator()(const CallExpr& c) const {
      out += c.name;
      out += '(';
      print_args(c.args, out);
      out += ')';
    }
    void operator()(const BroadcastCallExpr& c) const {
      out += c.name;
      out += ".(";
      print_args(c.args, out);
      out += ')';
    }
    void operator()(const VectorLit& v) const {
      out += '[';
      print_args(v.elems, out);
      out += ']';
    }
  };
  std::visit(V{out}, e.node);
}

void print_lvalue(const LValue& lv, std::string& out) {
  out += lv.symbol;
  if (!lv.indices.empty()) {
    out += '[';
    print_args(lv.indices, out);
    out += ']';
  }
}

void print_stmt(const Stmt& s, int indent, std::string& out) {
  const std::string pad(static_cast<std::size_t>(indent) * 2, ' ');
  struct V {
    int indent;
    const std::string& pad;
    std::string& out;
    void operator()(const AssignStmt& a) const {
      out += pad + a.target + " = ";
      print_expr(*a.value, 1, out);
      out += '\n';
    }
    void operator()(const TildeStmt& t) const {
      out += pad;
      print_lvalue(t.lhs, out);
      out += " ~ ";
      print_expr(*t.dist, 1, out);
      out += '\n';
    }
    void operator()(const DotTildeStmt& t) const {
      out += pad;
      print_lvalue(t.lhs, out);
      out += " .~ ";
      print_expr(*t.dist, 1, out);
      out += '\n';
    }
    void operator()(const IfStmt& i) const {
      out += pad + "if ";
      print_expr(*i.cond, 1, out);
      out += " {\n";
      for (const Stmt& inner : i.body) print_stmt(inner, indent + 1, out);
      out += pad + "}\n";
    }
    void operator()(const RejectStmt&) const { out += pad + "reject\n"; }
  };
  std::visit(V{indent, pad, out}, s.node);
}

}  // namespace

std::string pretty_print(const Expr& e) {
  std::string out;
  print_expr(e, 1, out);
  return out;
}

std::string pretty_print(const ModelDecl& m) {
  std::string out = "model " + m.name + "(";
  for (std::size_t i = 0; i < m.params.size(); ++i) {
    if (i > 0) out += ", ";
    out += m.params[i];
  }
  out += ") {\n";
  for (const Stmt& s : m.body) print_stmt(s, 1, out);
  out += "}\n";
  return out;
}

// ----------------------------------------------------------- equality

namespace {

bool bits_equal(double a, double b) {
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

bool args_equal(const std::vector<ExprPtr>& a, const std::vector<ExprPtr>& b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i)
    if (!ast_equal(*a[i], *b[i])) return false;
  return true;
}

bool lvalue_equal(const LValue& a, const LValue& b) {
  return a.symbol == b.symbol && args_equal(a.indices, b.indices);
}

}  // namespace

bool ast_equal(const Expr& a, const Expr& b) {
  if (a.node.index() != b.node.index()) return false;
  struct V {
    const Expr& b;
    bool operator()(const NumberLit& n) const {
      const auto& m = std::get<NumberLit>(b.node);
      if (n.is_int != m.is_int) return false;
      return n.is_int ? n.ival == m.ival : bits_equal(n.rval, m.rval);
    }
    bool operator()(const IdentExpr& i) const {
      return i.name == std::get<IdentExpr>(b.node).name;
    }
    bool operator()(const MissingLit&) const { return true; }
    bool operator()(const IndexExpr& ix) const {
      const auto& o = std::get<IndexExpr>(b.node);
      return ast_equal(*ix.base, *o.base) && args_equal(ix.indices, o.indices);
    }
    bool operator()(const TransposeExpr& t) const {
      return ast_equal(*t.base, *std::get<TransposeExpr>(b.node).base);
    }
    bool operator()(const NegExpr& n) const {
      return ast_equal(*n.operand, *std::get<NegExpr>(b.node).operand);
    }
    bool operator()(const BinaryExpr& x) const {
      const auto& o = std::get<BinaryExpr>(b.node);
      return x.op == o.op && ast_equal(*x.lhs, *o.lhs) &&
             ast_equal(*x.rhs, *o.rhs);
    }
    bool operator()(const CallExpr& c) const {
      const auto& o = std::get<CallExpr>(b.node);
      return c.name == o.name && args_equal(c.args, o.args);
    }
    bool operator()(const BroadcastCallExpr& c) const {
      const auto& o = std::get<BroadcastCallExpr>(b.node);
      return c.name == o.name && args_equal(c.args, o.args);
    }
    bool operator()(const VectorLit& v) const {
      return args_equal(v.elems, std::get<VectorLit>(b.node).elems);
    }
  };
  return std::visit(V{b}, a.node);
}

bool ast_equal(const Stmt& a, const Stmt& b) {
  if (a.node.index() != b.node.index()) return false;
  struct V {
    const Stmt& b;
    bool operator()(const AssignStmt& s) const {
      const auto& o = std::get<AssignStmt>(b.node);
      return s.target == o.target && ast_equal(*s.value, *o.value);
    }
    bool operator()(const TildeStmt& s) const {
      const auto& o = std::get<TildeStmt>(b.node);
      return lvalue_equal(s.lhs, o.lhs) && ast_equal(*s.dist, *o.dist);
    }
    bool operator()(const DotTildeStmt& s) const {
      const auto& o = std::get<DotTildeStmt>(b.node);
      return lvalue_equal(s.lhs, o.lhs) && ast_equal(*s.dist, *o.dist);
    }
    bool operator()(const IfStmt& s) const {
      const auto& o = std::get<IfStmt>(b.node);
      if (!ast_equal(*s.cond, *o.cond) || s.body.size() != o.body.size())
        return false;
      for (std::size_t i = 0; i < s.body.size(); ++i)
        if (!ast_equal(s.body[i], o.body[i])) return false;
      return true;
    }
    bool operator()(const RejectStmt&) const { return true; }
  };
  return std::visit(V{b}, a.node);
}

bool ast_equal(const ModelDecl& a, const ModelDecl& b) {
  if (a.name != b.name || a.params != b.params ||
      a.body.size() != b.body.size())
    return false;
  for (std::size_t i = 0; i < a.body.size(); ++i)
    if (!ast_equal(a.body[i], b.body[i])) return false;
  return true;
}

}  // namespace ppl
