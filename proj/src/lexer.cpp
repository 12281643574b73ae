#include "ppl/lexer.hpp"

#include <cctype>
#include <charconv>
#include <cstdlib>

namespace ppl {

const char* token_name(Tok t) {
  switch (t) {
    case Tok::Ident: return "identifier";
    case Tok::Number: return "number";
    case Tok::KwModel: return "'model'";
    case Tok::KwIf: return "'if'";
    case Tok::KwReject: return "'reject'";
    case Tok::KwMissing: return "'missing'";
    case Tok::Tilde: return "'~'";
    case Tok::DotTilde: return "'.~'";
    case Tok::Assign: return "'='";
    case Tok::Plus: return "'+'";
    case Tok::Minus: return "'-'";
    case Tok::Star: return "'*'";
    case Tok::Slash: return "'/'";
    case Tok::Caret: return "'^'";
    case Tok::Quote: return "'''";
    case Tok::Dot: return "'.'";
    case Tok::LParen: return "'('";
    case Tok::RParen: return "')'";
    case Tok::LBracket: return "'['";
    case Tok::RBracket: return "']'";
    case Tok::LBrace: return "'{'";
    case Tok::RBrace: return "'}'";
    case Tok::Comma: return "','";
    case Tok::Lt: return "'<'";
    case Tok::Gt: return "'>'";
    case Tok::Le: return "'<='";
    case Tok::Ge: return "'>='";
    case Tok::EqEq: return "'=='";
    case Tok::Eof: return "end of input";
  }
  return "?";
}

namespace {

class Lexer {
 public:
  explicit Lexer(const std::string& src) : src_(src) {}

  std::vector<Token> run() {
    std::vector<Token> out;
    while (true) {
      skip_trivia();
      Token t;
      t.pos = pos();
      if (eof()) {
        t.kind = Tok::Eof;
        out.push_back(t);
        return out;
      }
      const char c = peek();
      if (std::isalpha(static_cast<unsigned char>(c)) || c == '_') {
        lex_ident(t);
      } else if (std::isdigit(static_cast<unsigned char>(c))) {
        lex_number(t);
      } else {
        lex_symbol(t);
      }
      out.push_back(std::move(t));
    }
  }

 private:
  bool eof() const { return i_ >= src_.size(); }
  char peek(std::size_t k = 0) const {
    return i_ + k < src_.size() ? src_[i_ + k] : '\0';
  }
  SourcePos pos() const { return SourcePos{line_, col_}; }

  char advance() {
    const char c = src_[i_++];
    if (c == '\n') {
      ++line_;
      col_ = 1;
    } else {
      ++col_;
    }
    return c;
  }

  void skip_trivia() {
    while (!eof()) {
      const char c = peek();
      if (c == ' ' || c == '\t' || c == '\r' || c == '\n') {
        advance();
      } else if (c == '#') {
        while (!eof() && peek() != '\n') advance();
      } else {
        break;
      }
    }
  }

  void lex_ident(Token& t) {
    std::string s;
    while (!eof() && (std::isalnum(static_cast<unsigned char>(peek())) ||
                      peek() == '_'))
      s.push_back(advance());
    if (s == "model")
      t.kind = Tok::KwModel;
    else if (s == "if")
      t.kind = Tok::KwIf;
    else if (s == "reject")
      t.kind = Tok::KwReject;
    else if (s == "missing")
      t.kind = Tok::KwMissing;
    else
      t.kind = Tok::Ident;
    t.text = std::move(s);
  }

  void lex_number(Token& t) {
    std::string s;
    while (!eof() && std::isdigit(static_cast<unsigned char>(peek())))
      s.push_back(advance());
    bool is_real = false;
    if (peek() == '.' && std::isdigit(static_cast<unsigned char>(peek(1)))) {
      is_real = true;
      s.push_back(advance());
      while (!eof() && std::isdigit(static_cast<unsigned char>(peek())))
        s.push_back(advance());
    }
    if (peek() == 'e' || peek() == 'E') {
      const char sign = peek(1);
      const char first =
          (sign == '+' || sign == '-') ? peek(2) : sign;
      if (std::isdigit(static_cast<unsigned char>(first))) {
        is_real = true;
        s.push_back(advance());
        if (peek() == '+' || peek() == '-') s.push_back(advance());
        while (!eof() && std::isdigit(static_cast<unsigned char>(peek())))
          s.push_back(advance());
      }
    }
    t.kind = Tok::Number;
    t.text = s;
    if (is_real) {
      t.num_is_int = false;
      t.num_r = std::strtod(s.c_str(), nullptr);
    } else {
      t.num_is_int = true;
      auto res = std::from_chars(s.data(), s.data() + s.size(), t.num_i);
      if (res.ec != std::errc{})
        throw LexError("integer literal out of range", t.pos);
      t.num_r = static_cast<double>(t.num_i);
    }
  }

  void lex_symbol(Token& t) {
    const std::size_t start = i_;
    const char c = advance();
    struct TextGuard {
      const std::string& src;
      std::size_t start;
      const std::size_t& end;
      Token& t;
      ~TextGuard() { t.text = src.substr(start, end - start); }
    } guard{src_, start, i_, t};
    (void)guard;
    switch (c) {
      case '~': t.kind = Tok::Tilde; return;
      case '+': t.kind = Tok::Plus; return;
      case '-': t.kind = Tok::Minus; return;
      case '*': t.kind = Tok::Star; return;
      case '/': t.kind = Tok::Slash; return;
      case '^': t.kind = Tok::Caret; return;
      case '\'': t.kind = Tok::Quote; return;
      case '(': t.kind = Tok::LParen; return;
      case ')': t.kind = Tok::RParen; return;
      case '[': t.kind = Tok::LBracket; return;
      case ']': t.kind = Tok::RBracket; return;
      case '{': t.kind = Tok::LBrace; return;
      case '}': t.kind = Tok::RBrace; return;
      case ',': t.kind = Tok::Comma; return;
      case '.':
        if (peek() == '~') {
          advance();
          t.kind = Tok::DotTilde;
        } else {
          t.kind = Tok::Dot;
        }
        return;
      case '=':
        if (peek() == '=') {
          advance();
          t.kind = Tok::EqEq;
        } else {
          t.kind = Tok::Assign;
        }
        return;
      case '<':
        if (peek() == '=') {
          advance();
          t.kind = Tok::Le;
        } else {
          t.kind = Tok::Lt;
        }
        return;
      case '>':
        if (peek() == '=') {
          advance();
          t.kind = Tok::Ge;
        } else {
          t.kind = Tok::Gt;
        }
        return;
      default:
        throw LexError(std::string("illegal character '") + c + "'", t.pos);
    }
  }

  const std::string& src_;
  std::size_t i_ = 0;
  int line_ = 1;
  int col_ = 1;
};

}  // namespace

std::vector<Token> lex(const std::string& source) { return Lexer(source).run(); }

}  // namespace ppl
