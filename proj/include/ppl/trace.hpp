#pragma once

// Execution traces: the per-variable store of values, distributions and
// link flags, plus the log-probability accumulator.
//
// UntypedTrace is the first-run representation: every scalar lives in
// one heterogeneous vector of tagged boxes, so reads materialize an
// owned Value element by element. TypedTrace groups entries by symbol
// into concretely-typed contiguous buffers; vector reads hand out
// borrowed spans into that storage. Repeated evaluation on the typed
// form is the fast path the engine is built around.

#include <cmath>
#include <cstdint>
#include <limits>
#include <string>
#include <unordered_map>
#include <vector>

#include "ppl/distributions.hpp"
#include "ppl/errors.hpp"
#include "ppl/value.hpp"
#include "ppl/varname.hpp"

namespace ppl {

class LogpAccum {
 public:
  // -inf is the rejection signal and is sticky; NaN means a model bug
  // and always throws.
  void add(double delta) {
    if (std::isnan(delta))
      throw EvalError("NaN added to the log-probability accumulator");
    if (v_ == -std::numeric_limits<double>::infinity()) return;
    v_ += delta;
  }
  void reset() { v_ = 0.0; }
  void set_neg_inf() { v_ = -std::numeric_limits<double>::infinity(); }
  double value() const { return v_; }

 private:
  double v_ = 0.0;
};

enum class ElemType : std::uint8_t { Real, Int };

// Opaque entry handle; valid until the trace structure changes.
struct Slot {
  std::uint32_t a = 0, b = 0;
};

// ------------------------------------------------------------- untyped

class UntypedTrace {
 public:
  bool lookup(const VarName& vn, Slot& out) const;
  bool contains(const VarName& vn) const {
    Slot s;
    return lookup(vn, s);
  }

  Slot insert(const VarName& vn, Distribution dist, const Value& v);

  // Boxed read: materializes an owned Value.
  Value read(Slot s) const;
  void write(Slot s, const Value& v);

  const Distribution& dist(Slot s) const { return entries_[s.a].dist; }
  void set_dist(Slot s, const Distribution& d);
  bool linked(Slot s) const { return entries_[s.a].linked; }

  Value get_value(const VarName& vn) const;
  void set_value(const VarName& vn, const Value& v);

  void acc_logp(double delta) { logp_.add(delta); }
  void reset_logp() { logp_.reset(); }
  void set_logp_neg_inf() { logp_.set_neg_inf(); }
  double logp() const { return logp_.value(); }

  void begin_evaluation() { reset_logp(); }

  std::size_t size() const { return entries_.size(); }

  struct Entry {
    VarName name;
    std::string key;
    Distribution dist;
    bool linked = false;
    int order = 0;
    std::size_t offset = 0;
    std::size_t len = 0;
    bool scalar = true;
    ElemType et = ElemType::Real;
  };
  const std::vector<Entry>& entries() const { return entries_; }

  struct Box {
    ElemType tag;
    union {
      double d;
      std::int64_t i;
    };
  };
  const std::vector<Box>& storage() const { return storage_; }

 private:
  std::vector<Entry> entries_;
  std::vector<Box> storage_;
  std::unordered_map<std::string, std::size_t> index_;
  LogpAccum logp_;
};

// --------------------------------------------------------------- typed

class TypedTrace {
 public:
  // Groups the untyped entries by symbol into concrete buffers.
  // Throws SpecializationError when one symbol mixes element types.
  static TypedTrace specialize(const UntypedTrace& t);

  bool lookup(const VarName& vn, Slot& out) const;
  bool contains(const VarName& vn) const {
    Slot s;
    return lookup(vn, s);
  }

  // Appends within an existing symbol group; a brand-new symbol
  // requires re-specialization from an untyped run and throws
  // StateError.
  Slot insert(const VarName& vn, Distribution dist, const Value& v);

  // Spans for real vector entries (valid for the current evaluation),
  // plain scalars otherwise.
  Value read(Slot s) const;
  void write(Slot s, const Value& v);

  const Distribution& dist(Slot s) const {
    return groups_[s.a].dists[s.b];
  }
  void set_dist(Slot s, const Distribution& d);
  bool linked(Slot s) const { return groups_[s.a].linked[s.b]; }

  Value get_value(const VarName& vn) const;
  void set_value(const VarName& vn, const Value& v);

  void acc_logp(double delta) { logp_.add(delta); }
  void reset_logp() { logp_.reset(); }
  void set_logp_neg_inf() { logp_.set_neg_inf(); }
  double logp() const { return logp_.value(); }

  // Clears the buffer graveyard too: spans handed out before a growth
  // realloc stay valid until here.
  void begin_evaluation() {
    reset_logp();
    graveyard_.clear();
  }

  // Replace values by their bijector-forward (resp. inverse) images.
  // Empty target list means every symbol. Double conversion is a
  // StateError; discrete symbols are NotDifferentiable when targeted
  // explicitly and skipped when linking everything.
  void link(const std::vector<std::string>& symbols = {});
  void invlink(const std::vector<std::string>& symbols = {});

  // Flat view over the real-typed entries, ordered by global insertion
  // order. In linked state this is the unconstrained parameter vector.
  std::size_t flat_size() const;
  std::vector<double> flatten() const;
  void unflatten(const double* theta, std::size_t n);
  void unflatten(const std::vector<double>& theta) {
    unflatten(theta.data(), theta.size());
  }

  // Integer-typed entries (discrete parameters), in global order.
  std::size_t int_size() const;
  std::vector<std::int64_t> int_values() const;
  void set_int_values(const std::vector<std::int64_t>& v);

  // Constrained-space snapshot for chain recording: flattened names
  // ("w[1]", "w[2]", "s") and the matching row of values, both in
  // global order. Linked entries are inverse-transformed on the fly.
  std::vector<std::string> constrained_names() const;
  void constrained_row(std::vector<double>& out) const;

  std::size_t size() const;

  struct Group {
    std::string symbol;
    ElemType et = ElemType::Real;
    std::vector<VarName> names;
    std::vector<std::string> keys;
    std::vector<Distribution> dists;
    std::vector<std::pair<std::size_t, std::size_t>> ranges;  // offset,len
    std::vector<char> linked;
    std::vector<char> scalar;
    std::vector<int> order;
    std::vector<double> rbuf;
    std::vector<std::int64_t> ibuf;
    std::unordered_map<std::string, std::size_t> index;
  };
  const std::vector<Group>& groups() const { return groups_; }

 private:
  TypedTrace() = default;

  Group& group_for_insert(const std::string& symbol, ElemType et);
  void convert(const std::vector<std::string>& symbols, bool to_linked);

  std::vector<Group> groups_;
  std::unordered_map<std::string, std::size_t> group_idx_;
  int next_order_ = 0;
  LogpAccum logp_;
  std::vector<std::vector<double>> graveyard_;
};

}  // namespace ppl
