#include "ppl/inference.hpp"

#include <cmath>

namespace ppl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();

}  // namespace

std::pair<UntypedTrace, double> sample_prior(const Model& m, Rng& rng) {
  UntypedTrace t;
  const double lp = evaluate(m, t, Context::Default(), rng);
  return {std::move(t), lp};
}

LeapfrogResult leapfrog(const GradFn& grad_fn, std::vector<double> theta,
                        std::vector<double> momentum, double step_size,
                        int n_steps) {
  LeapfrogResult out;
  const std::size_t dim = theta.size();
  if (momentum.size() != dim) throw Error("leapfrog: dimension mismatch");

  GradientResult g = grad_fn(theta);
  if (g.grad.size() != dim) {
    out.diverged = true;
    out.theta = std::move(theta);
    out.momentum = std::move(momentum);
    out.logp = kNegInf;
    return out;
  }
  for (std::size_t i = 0; i < dim; ++i)
    momentum[i] += 0.5 * step_size * g.grad[i];

  for (int step = 0; step < n_steps; ++step) {
    for (std::size_t i = 0; i < dim; ++i) theta[i] += step_size * momentum[i];
    g = grad_fn(theta);
    if (g.grad.size() != dim) {
      out.diverged = true;
      break;
    }
    const double scale = step == n_steps - 1 ? 0.5 * step_size : step_size;
    for (std::size_t i = 0; i < dim; ++i) momentum[i] += scale * g.grad[i];
  }

  out.theta = std::move(theta);
  out.momentum = std::move(momentum);
  out.logp = g.grad.empty() ? kNegInf : g.logp;
  for (double v : out.theta)
    if (!std::isfinite(v)) out.diverged = true;
  return out;
}

namespace {

double kinetic(const std::vector<double>& p) {
  double acc = 0.0;
  for (double v : p) acc += v * v;
  return 0.5 * acc;
}

}  // namespace

Chain hmc_sample(const Model& m, const HmcConfig& cfg, SamplerStats* stats,
                 std::vector<Transition>* transitions) {
  cfg.validate();
  Rng rng(cfg.seed);
  SamplerStats local;
  SamplerStats& st = stats ? *stats : local;

  auto [ut, lp0] = sample_prior(m, rng);
  ++st.untyped_evals;
  TypedTrace tt = TypedTrace::specialize(ut);
  if (tt.int_size() > 0)
    throw NotDifferentiableError(
        "HMC requires continuous parameters; model has discrete ones");
  tt.link();

  std::vector<double> theta = tt.flatten();
  const std::size_t dim = theta.size();

  Tape tape;
  const auto grad_fn = [&](const std::vector<double>& th) {
    ++st.grad_evals;
    ++st.typed_evals;
    return gradient_logp(m, tt, Context::Default(), th, tape);
  };

  double logp_cur = grad_fn(theta).logp;

  Chain chain(tt.constrained_names(),
              ChainMeta{m.name(), "hmc", cfg.seed});
  std::vector<double> momentum(dim), row;

  for (int iter = 0; iter < cfg.n_iters; ++iter) {
    for (auto& p : momentum) p = rng.normal();
    const double h0 = -logp_cur + kinetic(momentum);

    LeapfrogResult prop =
        leapfrog(grad_fn, theta, momentum, cfg.step_size, cfg.n_leapfrog);
    const double h1 = -prop.logp + kinetic(prop.momentum);

    bool accept = false;
    if (!prop.diverged && std::isfinite(h1)) {
      const double log_alpha = h0 - h1;
      accept = std::log(rng.uniform_pos()) < log_alpha;
    }
    if (accept) {
      theta = std::move(prop.theta);
      logp_cur = prop.logp;
      ++st.accepted;
    }
    if (prop.diverged) ++st.diverged;
    if (transitions)
      transitions->push_back({theta, logp_cur, accept, prop.diverged});

    tt.unflatten(theta);
    tt.constrained_row(row);
    chain.add_row(row, logp_cur);
  }
  return chain;
}

Chain mh_sample(const Model& m, const MhConfig& cfg, SamplerStats* stats,
                std::vector<Transition>* transitions) {
  cfg.validate();
  Rng rng(cfg.seed);
  SamplerStats local;
  SamplerStats& st = stats ? *stats : local;

  auto [ut, lp0] = sample_prior(m, rng);
  ++st.untyped_evals;
  TypedTrace tt = TypedTrace::specialize(ut);
  if (cfg.link) tt.link();

  std::vector<double> theta = tt.flatten();
  std::vector<std::int64_t> ints = tt.int_values();

  EvalStats estats;
  EvalOptions opts;
  opts.stats = &estats;
  const auto eval_at = [&](const std::vector<double>& th,
                           const std::vector<std::int64_t>& zs) {
    tt.unflatten(th);
    if (!zs.empty()) tt.set_int_values(zs);
    ++st.typed_evals;
    estats = EvalStats{};
    double lp;
    try {
      lp = evaluate(m, tt, Context::Default(), rng, opts);
    } catch (const ModelDomainError&) {
      return kNegInf;
    }
    if (estats.hit_reject) {
      ++st.reject_evals;
      st.statements_in_reject_evals += estats.statements_executed;
      st.observes_in_reject_evals += estats.observes;
    }
    return lp;
  };

  double logp_cur = eval_at(theta, ints);

  Chain chain(tt.constrained_names(), ChainMeta{m.name(), "mh", cfg.seed});
  std::vector<double> row;
  std::vector<double> theta_prop(theta.size());
  std::vector<std::int64_t> ints_prop(ints.size());

  for (int iter = 0; iter < cfg.n_iters; ++iter) {
    for (std::size_t i = 0; i < theta.size(); ++i)
      theta_prop[i] = theta[i] + cfg.proposal_sd * rng.normal();
    for (std::size_t i = 0; i < ints.size(); ++i)
      ints_prop[i] = ints[i] + (rng.uniform() < 0.5 ? -1 : 1);

    const double logp_prop = eval_at(theta_prop, ints_prop);
    const bool accept =
        logp_prop > kNegInf &&
        std::log(rng.uniform_pos()) < logp_prop - logp_cur;
    if (accept) {
      theta = theta_prop;
      ints = ints_prop;
      logp_cur = logp_prop;
      ++st.accepted;
    } else {
      // restore current state in the trace for recording
      tt.unflatten(theta);
      if (!ints.empty()) tt.set_int_values(ints);
    }

    if (transitions)
      transitions->push_back({theta, logp_cur, accept, logp_prop == kNegInf});

    tt.constrained_row(row);
    chain.add_row(row, logp_cur);
  }
  return chain;
}

}  // namespace ppl
