#pragma once

#include <stdexcept>
#include <string>

namespace ppl {

struct SourcePos {
  int line = 0;
  int column = 0;
};

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

// Lexing/parsing failures carry the offending position.
class ParseError : public Error {
 public:
  ParseError(const std::string& msg, SourcePos pos)
      : Error(msg + " at " + std::to_string(pos.line) + ":" +
              std::to_string(pos.column)),
        pos_(pos) {}
  SourcePos pos() const { return pos_; }

 private:
  SourcePos pos_;
};

class LexError : public ParseError {
 public:
  using ParseError::ParseError;
};

// Statement-level evaluation failure (unbound identifier, shape
// mismatch, non-bool condition, ...).
class EvalError : public Error {
 public:
  using Error::Error;
};

// Invalid distribution parameters or a math-domain violation computed
// at model run time. Samplers convert this into a rejection.
class ModelDomainError : public Error {
 public:
  using Error::Error;
};

class NotDifferentiableError : public Error {
 public:
  using Error::Error;
};

class NotFoundError : public Error {
 public:
  using Error::Error;
};

// Illegal trace state transition (double link/invlink).
class StateError : public Error {
 public:
  using Error::Error;
};

class SpecializationError : public Error {
 public:
  explicit SpecializationError(const std::string& symbol)
      : Error("mixed element types under symbol '" + symbol + "'"),
        symbol_(symbol) {}
  const std::string& symbol() const { return symbol_; }

 private:
  std::string symbol_;
};

class ClassifyError : public Error {
 public:
  using Error::Error;
};

}  // namespace ppl
