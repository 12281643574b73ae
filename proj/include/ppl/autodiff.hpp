#pragma once

// Reverse-mode tape. The model evaluator records one node per numeric
// operation while computing values forward (recording is the forward
// sweep); reverse() then runs a single adjoint sweep. Vector-valued
// operations (matvec, sums, fused log-density accumulations) are
// first-class nodes, not scalarized.

#include <cstdint>
#include <vector>

#include "ppl/errors.hpp"
#include "ppl/value.hpp"

namespace ppl {

class Model;
class TypedTrace;
struct Context;

enum class Op : std::uint8_t {
  Input,   // theta slice; aux = flat offset
  Const,   // constant scalar or vector
  // scalar ops; local partials cached in p0/p1 at forward time
  AddSS,
  SubSS,
  MulSS,
  DivSS,
  NegS,
  ExpS,
  LogS,
  Log1pNegS,  // log(1 - x)
  SqrtS,
  LogisticS,
  PowSS,
  // vector structure
  AddVV,
  SubVV,
  NegV,
  ScaleVS,  // a(vec) * b(scalar)
  DivVS,    // a(vec) / b(scalar)
  ExpV,
  LogV,
  SqrtV,
  LogisticV,
  MatVec,   // cmat(rows x cols) * a(vec cols)
  MatVecT,  // cmat^T * a(vec rows)
  SumV,
  IndexV,  // a(vec)[aux]
  Pack,    // vector from scalar parents (in `parents`)
  // fused log-density terms
  NormalLpdf,     // a=x, b=mu, c=sigma (scalars)
  NormalLpdfSum,  // data y in cvec; a=mu (vec|scalar), b=sigma (scalar)
  MvIsoLpdf,      // a=x (vec), b=mu (vec or const cvec2), c=sigma
  GammaLpdf,      // a=x, b=shape, c=scale
  BetaLpdf,       // a=x, b=alpha, c=beta
  BernLpmf,       // a=p; y const in x0
  BernLpmfSum,    // data y in cvec; a=p (vec|scalar)
  PoisLpmf,       // a=lambda; y const in x0
  PoisLpmfSum,    // data y in cvec; a=lambda (vec|scalar)
  CatLpmf,        // a=probs (vec); 1-based category in aux
  DirLpdf,        // a=x (vec); alpha const in cvec (traced alpha in b)
};

struct TapeNode {
  Op kind = Op::Const;
  int a = -1, b = -1, c = -1;       // parent ids (-1 = constant operand)
  std::vector<int> parents;         // Pack only
  std::int64_t aux = 0;             // index / flat offset
  double x0 = 0, x1 = 0, x2 = 0;    // scalar constants (operand values)
  double p0 = 0, p1 = 0, p2 = 0;    // cached partials for scalar ops
  std::vector<double> cvec;         // constant vector payload
  std::vector<double> cvec2;        // second constant vector payload
  Matrix cmat;                      // MatVec / MatVecT
  bool is_vec = false;
  double sval = 0;                  // scalar value
  std::vector<double> vval;         // vector value
  double sadj = 0;
  std::vector<double> vadj;
};

class Tape {
 public:
  int push(TapeNode&& n) {
    nodes_.push_back(std::move(n));
    return static_cast<int>(nodes_.size()) - 1;
  }

  TapeNode& node(int id) { return nodes_[static_cast<std::size_t>(id)]; }
  const TapeNode& node(int id) const {
    return nodes_[static_cast<std::size_t>(id)];
  }
  std::size_t size() const { return nodes_.size(); }

  void clear() { nodes_.clear(); }

  // Marks the start of a recording pass.
  void begin_forward() { ++forward_sweeps_; }

  // One adjoint sweep from the given output node; gradients of the
  // inputs land in `grad` at their flat offsets.
  void reverse(int output, std::vector<double>& grad);

  int forward_sweeps() const { return forward_sweeps_; }
  int reverse_sweeps() const { return reverse_sweeps_; }

 private:
  std::vector<TapeNode> nodes_;
  int forward_sweeps_ = 0;
  int reverse_sweeps_ = 0;
};

struct GradientResult {
  double logp = 0.0;
  // empty when logp is -inf (rejected evaluation)
  std::vector<double> grad;
};

// d logp / d theta of the unconstrained (linked) log-joint. Unflattens
// theta into the trace, records one tape, runs one reverse sweep.
// Rejections and model domain errors yield logp = -inf with no
// gradient. Requires every parameter continuous (and linked for the
// gradient to be meaningful in HMC).
GradientResult gradient_logp(const Model& m, TypedTrace& t, const Context& ctx,
                             const std::vector<double>& theta);

// Same, but also exposes the tape (for instrumentation).
GradientResult gradient_logp(const Model& m, TypedTrace& t, const Context& ctx,
                             const std::vector<double>& theta, Tape& tape);

// Central finite differences, the test oracle for the tape. Throws
// EvalError when a stencil point evaluates to -inf.
std::vector<double> finite_diff_gradient(const Model& m, TypedTrace& t,
                                         const Context& ctx,
                                         const std::vector<double>& theta,
                                         double h);

}  // namespace ppl
