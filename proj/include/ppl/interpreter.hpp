#pragma once

// Model instantiation (the missing rule) and contextual evaluation of
// tilde / broadcast-tilde statements against a trace.

#include <map>
#include <memory>
#include <set>
#include <string>
#include <vector>

#include "ppl/ast.hpp"
#include "ppl/rng.hpp"
#include "ppl/trace.hpp"
#include "ppl/value.hpp"

namespace ppl {

class Tape;

// Execution mode: which tilde statements accumulate probability.
// MiniBatch wraps one of the three base modes and scales observation
// terms only.
struct Context {
  enum class Base { Default, Likelihood, Prior };
  Base base = Base::Default;
  bool minibatch = false;
  double weight = 1.0;

  static Context Default() { return Context{}; }
  static Context Likelihood() { return Context{Base::Likelihood, false, 1.0}; }
  static Context Prior() { return Context{Base::Prior, false, 1.0}; }
  static Context MiniBatch(const Context& inner, double weight) {
    if (inner.minibatch)
      throw EvalError("MiniBatch contexts do not nest");
    if (!(weight > 0.0))
      throw EvalError("MiniBatch weight must be positive");
    return Context{inner.base, true, weight};
  }
};

// A parsed model bound to data arguments. Tilde left-hand sides whose
// symbol is bound to a non-missing argument are observations; symbols
// bound to `missing` (or not arguments at all) are parameters.
class Model {
 public:
  Model(std::shared_ptr<const ModelDecl> decl, std::map<std::string, Value> args);

  const ModelDecl& decl() const { return *decl_; }
  const std::string& name() const { return decl_->name; }

  const std::map<std::string, Value>& args() const { return args_; }
  bool has_arg(const std::string& name) const { return args_.count(name) != 0; }
  const Value& arg(const std::string& name) const;

  // Symbols appearing as tilde left-hand sides anywhere in the body.
  const std::set<std::string>& tilde_symbols() const { return tilde_syms_; }
  bool is_observed(const std::string& symbol) const {
    return observed_.count(symbol) != 0;
  }
  // Tilde symbols that are inferred (not observed data).
  std::set<std::string> parameter_symbols() const;

 private:
  std::shared_ptr<const ModelDecl> decl_;
  std::map<std::string, Value> args_;
  std::set<std::string> tilde_syms_;
  std::set<std::string> observed_;
};

Model instantiate(ModelDecl decl, std::map<std::string, Value> args);
Model instantiate(std::shared_ptr<const ModelDecl> decl,
                  std::map<std::string, Value> args);

// Tilde left-hand-side symbols of a declaration (no data binding).
std::set<std::string> tilde_symbols(const ModelDecl& decl);

// Fixed parameter values consulted when a parameter is not yet in the
// trace: exact VarName match first, then element lookup through a
// whole-vector binding ("w" supplies w[i]; "w[i]" entries assemble a
// vector for "w").
class Presets {
 public:
  void set(const std::string& name, Value v) {
    byname_[name] = std::move(v);
  }
  bool empty() const { return byname_.empty(); }
  // dist_dim: slots the draw occupies (to assemble vectors).
  bool lookup(const VarName& vn, std::size_t dist_dim, Value& out) const;

 private:
  std::map<std::string, Value> byname_;
};

struct EvalStats {
  int statements_executed = 0;
  bool hit_reject = false;
  int assumes = 0;
  int observes = 0;
};

struct EvalOptions {
  EvalStats* stats = nullptr;
  const Presets* presets = nullptr;
};

// Executes the model body against the trace under the context.
// Returns the final log probability (also left in the trace
// accumulator). Throws ModelDomainError for invalid distribution
// parameters or math domain violations; samplers treat that as a
// rejection.
double evaluate(const Model& m, UntypedTrace& t, const Context& ctx, Rng& rng,
                const EvalOptions& opts = {});
double evaluate(const Model& m, TypedTrace& t, const Context& ctx, Rng& rng,
                const EvalOptions& opts = {});

// Tape-recording evaluation over a complete typed trace (every
// parameter present). Returns the accumulator node id (-1 when the
// final logp is a constant, e.g. after a rejection).
struct TracedLogp {
  double logp = 0.0;
  int node = -1;
};
TracedLogp evaluate_traced(const Model& m, TypedTrace& t, const Context& ctx,
                           Tape& tape, const EvalOptions& opts = {});

}  // namespace ppl
