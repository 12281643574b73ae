#pragma once

// Dynamically-typed values flowing through model evaluation: scalars,
// vectors, row-major matrices and the `missing` marker. RealSpan is a
// borrowed view into typed-trace storage; it is only valid for the
// duration of one model evaluation and must be copied before being
// stored anywhere longer-lived.

#include <cstdint>
#include <memory>
#include <string>
#include <variant>
#include <vector>

#include "ppl/errors.hpp"

namespace ppl {

struct MissingValue {
  friend bool operator==(MissingValue, MissingValue) { return true; }
};

struct RealSpan {
  const double* data = nullptr;
  std::size_t n = 0;
};

// Row-major matrix over shared immutable storage; copies and
// transposes are cheap views.
struct Matrix {
  std::size_t prows = 0, pcols = 0;
  std::shared_ptr<const std::vector<double>> data;
  bool trans = false;

  Matrix() = default;
  Matrix(std::size_t r, std::size_t c, std::vector<double> d)
      : prows(r),
        pcols(c),
        data(std::make_shared<const std::vector<double>>(std::move(d))) {}

  std::size_t rows() const { return trans ? pcols : prows; }
  std::size_t cols() const { return trans ? prows : pcols; }
  const double* raw() const { return data->data(); }
  double at(std::size_t i, std::size_t j) const {
    return trans ? (*data)[j * pcols + i] : (*data)[i * pcols + j];
  }
  Matrix transposed() const {
    Matrix m = *this;
    m.trans = !m.trans;
    return m;
  }
};

class Value {
 public:
  enum class Kind { Missing, Real, Int, Bool, RealVec, IntVec, Span, Mat };

  Value() : v_(MissingValue{}) {}
  Value(MissingValue) : v_(MissingValue{}) {}
  Value(double x) : v_(x) {}
  Value(std::int64_t x) : v_(x) {}
  Value(int x) : v_(static_cast<std::int64_t>(x)) {}
  Value(bool b) : v_(b) {}
  Value(std::vector<double> x) : v_(std::move(x)) {}
  Value(std::vector<std::int64_t> x) : v_(std::move(x)) {}
  Value(RealSpan s) : v_(s) {}
  Value(Matrix m) : v_(std::move(m)) {}

  Kind kind() const { return static_cast<Kind>(v_.index()); }
  bool is_missing() const { return kind() == Kind::Missing; }
  bool is_real() const { return kind() == Kind::Real; }
  bool is_int() const { return kind() == Kind::Int; }
  bool is_bool() const { return kind() == Kind::Bool; }
  bool is_matrix() const { return kind() == Kind::Mat; }
  bool is_numeric_scalar() const {
    return kind() == Kind::Real || kind() == Kind::Int;
  }
  bool is_vector() const {
    Kind k = kind();
    return k == Kind::RealVec || k == Kind::IntVec || k == Kind::Span;
  }

  double as_real() const {
    switch (kind()) {
      case Kind::Real: return std::get<double>(v_);
      case Kind::Int: return static_cast<double>(std::get<std::int64_t>(v_));
      default: throw EvalError("expected a scalar, got " + kind_name());
    }
  }

  std::int64_t as_int() const {
    if (kind() != Kind::Int)
      throw EvalError("expected an integer, got " + kind_name());
    return std::get<std::int64_t>(v_);
  }

  bool as_bool() const {
    if (kind() != Kind::Bool)
      throw EvalError("expected a boolean, got " + kind_name());
    return std::get<bool>(v_);
  }

  std::size_t vec_len() const {
    switch (kind()) {
      case Kind::RealVec: return std::get<std::vector<double>>(v_).size();
      case Kind::IntVec: return std::get<std::vector<std::int64_t>>(v_).size();
      case Kind::Span: return std::get<RealSpan>(v_).n;
      default: throw EvalError("expected a vector, got " + kind_name());
    }
  }

  double vec_at(std::size_t i) const {
    switch (kind()) {
      case Kind::RealVec: return std::get<std::vector<double>>(v_)[i];
      case Kind::IntVec:
        return static_cast<double>(std::get<std::vector<std::int64_t>>(v_)[i]);
      case Kind::Span: return std::get<RealSpan>(v_).data[i];
      default: throw EvalError("expected a vector, got " + kind_name());
    }
  }

  // Contiguous real view; null for IntVec (caller materializes).
  const double* real_data() const {
    switch (kind()) {
      case Kind::RealVec: return std::get<std::vector<double>>(v_).data();
      case Kind::Span: return std::get<RealSpan>(v_).data;
      default: return nullptr;
    }
  }

  // Copies into an owned real vector (promoting ints).
  std::vector<double> to_real_vector() const {
    if (const double* p = real_data())
      return std::vector<double>(p, p + vec_len());
    if (kind() == Kind::IntVec) {
      const auto& iv = std::get<std::vector<std::int64_t>>(v_);
      return std::vector<double>(iv.begin(), iv.end());
    }
    throw EvalError("expected a vector, got " + kind_name());
  }

  const Matrix& as_matrix() const {
    if (kind() != Kind::Mat)
      throw EvalError("expected a matrix, got " + kind_name());
    return std::get<Matrix>(v_);
  }

  const std::vector<std::int64_t>& int_vec() const {
    return std::get<std::vector<std::int64_t>>(v_);
  }

  std::string kind_name() const {
    switch (kind()) {
      case Kind::Missing: return "missing";
      case Kind::Real: return "real";
      case Kind::Int: return "int";
      case Kind::Bool: return "bool";
      case Kind::RealVec: return "real vector";
      case Kind::IntVec: return "int vector";
      case Kind::Span: return "real vector";
      case Kind::Mat: return "matrix";
    }
    return "?";
  }

  // Owned copy with spans materialized; safe to keep beyond the
  // current evaluation.
  Value owned() const {
    if (kind() == Kind::Span) return Value(to_real_vector());
    return *this;
  }

 private:
  std::variant<MissingValue, double, std::int64_t, bool, std::vector<double>,
               std::vector<std::int64_t>, RealSpan, Matrix>
      v_;
};

}  // namespace ppl
