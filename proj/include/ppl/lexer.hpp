#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "ppl/errors.hpp"

namespace ppl {

enum class Tok {
  Ident,
  Number,
  KwModel,
  KwIf,
  KwReject,
  KwMissing,
  Tilde,     // ~
  DotTilde,  // .~  (lexed as one token, longest match)
  Assign,    // =
  Plus,
  Minus,
  Star,
  Slash,
  Caret,
  Quote,  // ' transpose
  Dot,
  LParen,
  RParen,
  LBracket,
  RBracket,
  LBrace,
  RBrace,
  Comma,
  Lt,
  Gt,
  Le,
  Ge,
  EqEq,
  Eof,
};

struct Token {
  Tok kind = Tok::Eof;
  std::string text;
  double num_r = 0.0;
  std::int64_t num_i = 0;
  bool num_is_int = false;
  SourcePos pos;
};

const char* token_name(Tok t);

// Full tokenization including the trailing Eof. '#' starts a line
// comment. Throws LexError on illegal characters.
std::vector<Token> lex(const std::string& source);

}  // namespace ppl
