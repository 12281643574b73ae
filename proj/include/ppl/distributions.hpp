#pragma once

// The distribution families the model language exposes, with
// log-densities, sampling, and constrain/unconstrain bijectors.
// Parameter constraints are validated at construction and raise
// ModelDomainError (samplers treat that as a rejection); out-of-support
// *arguments* to logpdf return -inf instead of erroring.

#include <cstdint>
#include <string>
#include <variant>
#include <vector>

#include "ppl/rng.hpp"
#include "ppl/value.hpp"

namespace ppl {

struct NormalDist {
  double mu, sigma;
};
struct MvNormalIsoDist {
  std::vector<double> mean;
  double sigma;
};
struct GammaDist {
  double shape, scale;
};
struct BetaDist {
  double alpha, beta;
};
struct BernoulliDist {
  double p;
};
struct PoissonDist {
  double lambda;
};
struct CategoricalDist {
  std::vector<double> probs;
};
struct DirichletDist {
  std::vector<double> alpha;
};

class Distribution {
 public:
  enum class Kind {
    Normal,
    MvNormalIso,
    Gamma,
    Beta,
    Bernoulli,
    Poisson,
    Categorical,
    Dirichlet
  };

  // Factories validate parameters (throw ModelDomainError).
  static Distribution normal(double mu, double sigma);
  static Distribution mvnormal_iso(std::vector<double> mean, double sigma);
  static Distribution gamma(double shape, double scale);
  static Distribution beta(double alpha, double beta);
  static Distribution bernoulli(double p);
  static Distribution poisson(double lambda);
  static Distribution categorical(std::vector<double> probs);
  static Distribution dirichlet(std::vector<double> alpha);

  Kind kind() const { return static_cast<Kind>(d_.index()); }
  const char* name() const;

  bool is_discrete() const {
    Kind k = kind();
    return k == Kind::Bernoulli || k == Kind::Poisson || k == Kind::Categorical;
  }
  bool is_multivariate() const {
    Kind k = kind();
    return k == Kind::MvNormalIso || k == Kind::Dirichlet;
  }
  // Number of constrained scalar slots a draw occupies.
  std::size_t dim() const;

  template <class T>
  const T& as() const {
    return std::get<T>(d_);
  }

 private:
  template <class T>
  explicit Distribution(T d) : d_(std::move(d)) {}

  std::variant<NormalDist, MvNormalIsoDist, GammaDist, BetaDist, BernoulliDist,
               PoissonDist, CategoricalDist, DirichletDist>
      d_;
};

// Log-density / log-mass at x. Out-of-support x yields -inf; a shape or
// dimension mismatch is an EvalError.
double logpdf(const Distribution& d, const Value& x);

// Scalar fast paths used by the interpreter's broadcast loops.
double normal_logpdf(double x, double mu, double sigma);
double gamma_logpdf(double x, double shape, double scale);
double beta_logpdf(double x, double alpha, double beta);
double bernoulli_logpmf(double x, double p);
double poisson_logpmf(double x, double lambda);

Value sample(const Distribution& d, Rng& rng);

// ----------------------------------------------------------- bijectors

class Bijector {
 public:
  enum class Kind { Identity, Log, Logit, StickBreaking };

  Kind kind() const { return kind_; }
  // Constrained dimension (K for the K-simplex; 1 for scalars is not
  // tracked -- scalar bijectors apply elementwise).
  std::size_t simplex_dim() const { return simplex_dim_; }

  // y length for a given x length.
  std::size_t unconstrained_len(std::size_t constrained_len) const {
    return kind_ == Kind::StickBreaking ? constrained_len - 1 : constrained_len;
  }

  static Bijector identity() { return Bijector(Kind::Identity, 0); }
  static Bijector log() { return Bijector(Kind::Log, 0); }
  static Bijector logit() { return Bijector(Kind::Logit, 0); }
  static Bijector stick_breaking(std::size_t k) {
    return Bijector(Kind::StickBreaking, k);
  }

 private:
  Bijector(Kind k, std::size_t sd) : kind_(k), simplex_dim_(sd) {}
  Kind kind_;
  std::size_t simplex_dim_;
};

// Unconstraining transform for a continuous distribution; throws
// NotDifferentiableError for discrete ones.
Bijector bijector_of(const Distribution& d);

struct BijectorResult {
  std::vector<double> y;
  double logjac;  // log|det d inverse / dy| at y
};

// forward map x -> (y, logjac), so that
// logpdf_unconstrained(y) = logpdf(d, inverse(y)) + logjac.
BijectorResult bijector_apply(const Bijector& b, const double* x,
                              std::size_t n);
std::vector<double> bijector_inverse(const Bijector& b, const double* y,
                                     std::size_t n);
double bijector_logjac(const Bijector& b, const double* y, std::size_t n);

double digamma(double x);

}  // namespace ppl
