#pragma once

// Samplers: prior draws, random-walk Metropolis-Hastings with early
// rejection, and static HMC (fixed step size, fixed leapfrog count).
// HMC follows the two-phase trace protocol: first evaluation on an
// untyped trace, then specialization + linking, and every subsequent
// (gradient) evaluation on the typed trace.

#include <cstdint>
#include <functional>
#include <utility>
#include <vector>

#include "ppl/autodiff.hpp"
#include "ppl/chain.hpp"
#include "ppl/interpreter.hpp"

namespace ppl {

struct HmcConfig {
  double step_size = 0.1;
  int n_leapfrog = 4;
  int n_iters = 2000;
  std::uint64_t seed = 0;

  void validate() const {
    if (!(step_size > 0.0)) throw Error("HMC: step size must be positive");
    if (n_leapfrog < 1) throw Error("HMC: need at least one leapfrog step");
    if (n_iters < 1) throw Error("HMC: need at least one iteration");
  }
};

struct MhConfig {
  double proposal_sd = 0.5;  // per-coordinate Gaussian random walk
  int n_iters = 2000;
  std::uint64_t seed = 0;
  // propose in unconstrained space (the default); turning this off
  // exercises user-level support guards via `reject`
  bool link = true;

  void validate() const {
    if (!(proposal_sd > 0.0)) throw Error("MH: proposal sd must be positive");
    if (n_iters < 1) throw Error("MH: need at least one iteration");
  }
};

struct SamplerStats {
  int untyped_evals = 0;
  int typed_evals = 0;
  int grad_evals = 0;
  int accepted = 0;
  int diverged = 0;
  // evaluations terminated by `reject`, and what ran inside them
  long long reject_evals = 0;
  long long statements_in_reject_evals = 0;
  long long observes_in_reject_evals = 0;
};

// One complete model evaluation on a fresh untyped trace under the
// Default context; every parameter gets a prior draw.
std::pair<UntypedTrace, double> sample_prior(const Model& m, Rng& rng);

struct LeapfrogResult {
  std::vector<double> theta;
  std::vector<double> momentum;
  double logp = 0.0;  // at the final position
  bool diverged = false;
};

using GradFn = std::function<GradientResult(const std::vector<double>&)>;

// Standard leapfrog: half-step momentum, L position steps, closing
// half-step. Time-reversible and volume-preserving.
LeapfrogResult leapfrog(const GradFn& grad_fn, std::vector<double> theta,
                        std::vector<double> momentum, double step_size,
                        int n_steps);

// One recorded sampler step in unconstrained space.
struct Transition {
  std::vector<double> theta;
  double logp = 0.0;
  bool accepted = false;
  bool diverged = false;
};

Chain mh_sample(const Model& m, const MhConfig& cfg,
                SamplerStats* stats = nullptr,
                std::vector<Transition>* transitions = nullptr);

Chain hmc_sample(const Model& m, const HmcConfig& cfg,
                 SamplerStats* stats = nullptr,
                 std::vector<Transition>* transitions = nullptr);

}  // namespace ppl
