#include "ppl/distributions.hpp"

#include <cmath>
#include <limits>

#include "ppl/kernels.hpp"

namespace ppl {

namespace {

constexpr double kNegInf = -std::numeric_limits<double>::infinity();
constexpr double kHalfLog2Pi = 0.91893853320467274178;  // 0.5*ln(2*pi)

void require(bool ok, const std::string& msg) {
  if (!ok) throw ModelDomainError(msg);
}

bool finite(double x) { return std::isfinite(x); }

bool is_integral(double x) { return std::floor(x) == x && std::isfinite(x); }

// Bool counts as 0/1 so observed flags work with discrete families.
double scalar_of(const Value& v) {
  if (v.is_bool()) return v.as_bool() ? 1.0 : 0.0;
  return v.as_real();
}

}  // namespace

// -------------------------------------------------------- construction

Distribution Distribution::normal(double mu, double sigma) {
  require(finite(mu) && finite(sigma) && sigma > 0.0,
          "Normal: sigma must be positive");
  return Distribution(NormalDist{mu, sigma});
}

Distribution Distribution::mvnormal_iso(std::vector<double> mean,
                                        double sigma) {
  require(finite(sigma) && sigma > 0.0, "MvNormal: sigma must be positive");
  require(!mean.empty(), "MvNormal: empty mean");
  for (double m : mean) require(finite(m), "MvNormal: non-finite mean");
  return Distribution(MvNormalIsoDist{std::move(mean), sigma});
}

Distribution Distribution::gamma(double shape, double scale) {
  require(finite(shape) && shape > 0.0 && finite(scale) && scale > 0.0,
          "Gamma: shape and scale must be positive");
  return Distribution(GammaDist{shape, scale});
}

Distribution Distribution::beta(double alpha, double beta) {
  require(finite(alpha) && alpha > 0.0 && finite(beta) && beta > 0.0,
          "Beta: alpha and beta must be positive");
  return Distribution(BetaDist{alpha, beta});
}

Distribution Distribution::bernoulli(double p) {
  require(finite(p) && p >= 0.0 && p <= 1.0, "Bernoulli: p must be in [0,1]");
  return Distribution(BernoulliDist{p});
}

Distribution Distribution::poisson(double lambda) {
  require(finite(lambda) && lambda > 0.0, "Poisson: lambda must be positive");
  return Distribution(PoissonDist{lambda});
}

Distribution Distribution::categorical(std::vector<double> probs) {
  require(!probs.empty(), "Categorical: empty probability vector");
  double total = 0.0;
  for (double p : probs) {
    require(finite(p) && p >= 0.0, "Categorical: negative probability");
    total += p;
  }
  require(std::abs(total - 1.0) <= 1e-12,
          "Categorical: probabilities must sum to 1");
  return Distribution(CategoricalDist{std::move(probs)});
}

Distribution Distribution::dirichlet(std::vector<double> alpha) {
  require(!alpha.empty(), "Dirichlet: empty concentration vector");
  for (double a : alpha)
    require(finite(a) && a > 0.0, "Dirichlet: alpha must be positive");
  return Distribution(DirichletDist{std::move(alpha)});
}

const char* Distribution::name() const {
  switch (kind()) {
    case Kind::Normal: return "Normal";
    case Kind::MvNormalIso: return "MvNormal";
    case Kind::Gamma: return "Gamma";
    case Kind::Beta: return "Beta";
    case Kind::Bernoulli: return "Bernoulli";
    case Kind::Poisson: return "Poisson";
    case Kind::Categorical: return "Categorical";
    case Kind::Dirichlet: return "Dirichlet";
  }
  return "?";
}

std::size_t Distribution::dim() const {
  switch (kind()) {
    case Kind::MvNormalIso: return as<MvNormalIsoDist>().mean.size();
    case Kind::Dirichlet: return as<DirichletDist>().alpha.size();
    default: return 1;
  }
}

// ----------------------------------------------------------- densities

double normal_logpdf(double x, double mu, double sigma) {
  if (!std::isfinite(x)) return kNegInf;
  const double z = (x - mu) / sigma;
  return -kHalfLog2Pi - std::log(sigma) - 0.5 * z * z;
}

double gamma_logpdf(double x, double shape, double scale) {
  if (!(x > 0.0) || !std::isfinite(x)) return kNegInf;
  return -std::lgamma(shape) - shape * std::log(scale) +
         (shape - 1.0) * std::log(x) - x / scale;
}

double beta_logpdf(double x, double alpha, double beta) {
  if (!(x > 0.0 && x < 1.0)) return kNegInf;
  const double lbeta =
      std::lgamma(alpha) + std::lgamma(beta) - std::lgamma(alpha + beta);
  return (alpha - 1.0) * std::log(x) + (beta - 1.0) * std::log1p(-x) - lbeta;
}

double bernoulli_logpmf(double x, double p) {
  if (x == 1.0) return std::log(p);
  if (x == 0.0) return std::log1p(-p);
  return kNegInf;
}

double poisson_logpmf(double x, double lambda) {
  if (!(x >= 0.0) || !is_integral(x)) return kNegInf;
  return x * std::log(lambda) - lambda - std::lgamma(x + 1.0);
}

namespace {

double mviso_logpdf(const MvNormalIsoDist& d, const Value& x) {
  const std::size_t n = d.mean.size();
  if (!x.is_vector() || x.vec_len() != n)
    throw EvalError("MvNormal: expected a vector of length " +
                    std::to_string(n));
  const auto& k = kernels::ops();
  double ss;
  if (const double* p = x.real_data()) {
    ss = k.sq_dev_sum_v(p, d.mean.data(), n);
  } else {
    const std::vector<double> tmp = x.to_real_vector();
    ss = k.sq_dev_sum_v(tmp.data(), d.mean.data(), n);
  }
  const double s2 = d.sigma * d.sigma;
  return -0.5 * ss / s2 -
         static_cast<double>(n) * (std::log(d.sigma) + kHalfLog2Pi);
}

double dirichlet_logpdf(const DirichletDist& d, const Value& x) {
  const std::size_t n = d.alpha.size();
  if (!x.is_vector() || x.vec_len() != n)
    throw EvalError("Dirichlet: expected a vector of length " +
                    std::to_string(n));
  double sum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double xi = x.vec_at(i);
    if (!(xi > 0.0)) return kNegInf;
    sum += xi;
  }
  if (std::abs(sum - 1.0) > 1e-9) return kNegInf;
  double out = 0.0, asum = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    out += (d.alpha[i] - 1.0) * std::log(x.vec_at(i)) - std::lgamma(d.alpha[i]);
    asum += d.alpha[i];
  }
  return out + std::lgamma(asum);
}

}  // namespace

double logpdf(const Distribution& d, const Value& x) {
  switch (d.kind()) {
    case Distribution::Kind::Normal: {
      const auto& p = d.as<NormalDist>();
      return normal_logpdf(scalar_of(x), p.mu, p.sigma);
    }
    case Distribution::Kind::MvNormalIso:
      return mviso_logpdf(d.as<MvNormalIsoDist>(), x);
    case Distribution::Kind::Gamma: {
      const auto& p = d.as<GammaDist>();
      return gamma_logpdf(scalar_of(x), p.shape, p.scale);
    }
    case Distribution::Kind::Beta: {
      const auto& p = d.as<BetaDist>();
      return beta_logpdf(scalar_of(x), p.alpha, p.beta);
    }
    case Distribution::Kind::Bernoulli:
      return bernoulli_logpmf(scalar_of(x), d.as<BernoulliDist>().p);
    case Distribution::Kind::Poisson:
      return poisson_logpmf(scalar_of(x), d.as<PoissonDist>().lambda);
    case Distribution::Kind::Categorical: {
      const double v = scalar_of(x);
      if (!is_integral(v)) return kNegInf;
      const auto& probs = d.as<CategoricalDist>().probs;
      const auto i = static_cast<std::int64_t>(v);
      if (i < 1 || i > static_cast<std::int64_t>(probs.size())) return kNegInf;
      return std::log(probs[static_cast<std::size_t>(i - 1)]);
    }
    case Distribution::Kind::Dirichlet:
      return dirichlet_logpdf(d.as<DirichletDist>(), x);
  }
  return kNegInf;
}

// ------------------------------------------------------------ sampling

namespace {

double sample_gamma(double shape, double scale, Rng& rng) {
  if (shape < 1.0) {
    // boost via G(shape+1) * U^(1/shape)
    const double g = sample_gamma(shape + 1.0, 1.0, rng);
    return g * std::pow(rng.uniform_pos(), 1.0 / shape) * scale;
  }
  // Marsaglia-Tsang squeeze
  const double d = shape - 1.0 / 3.0;
  const double c = 1.0 / std::sqrt(9.0 * d);
  while (true) {
    double x, v;
    do {
      x = rng.normal();
      v = 1.0 + c * x;
    } while (v <= 0.0);
    v = v * v * v;
    const double u = rng.uniform_pos();
    if (u < 1.0 - 0.0331 * x * x * x * x) return d * v * scale;
    if (std::log(u) < 0.5 * x * x + d * (1.0 - v + std::log(v)))
      return d * v * scale;
  }
}

std::int64_t sample_poisson(double lambda, Rng& rng) {
  // exact superposition split keeps the Knuth loop short
  std::int64_t total = 0;
  while (lambda > 30.0) {
    const double half = lambda * 0.5;
    total += sample_poisson(half, rng);
    lambda -= half;
  }
  const double limit = std::exp(-lambda);
  std::int64_t k = 0;
  double p = 1.0;
  do {
    ++k;
    p *= rng.uniform();
  } while (p > limit);
  return total + k - 1;
}

}  // namespace

Value sample(const Distribution& d, Rng& rng) {
  switch (d.kind()) {
    case Distribution::Kind::Normal: {
      const auto& p = d.as<NormalDist>();
      return Value(p.mu + p.sigma * rng.normal());
    }
    case Distribution::Kind::MvNormalIso: {
      const auto& p = d.as<MvNormalIsoDist>();
      std::vector<double> out(p.mean.size());
      for (std::size_t i = 0; i < out.size(); ++i)
        out[i] = p.mean[i] + p.sigma * rng.normal();
      return Value(std::move(out));
    }
    case Distribution::Kind::Gamma: {
      const auto& p = d.as<GammaDist>();
      return Value(sample_gamma(p.shape, p.scale, rng));
    }
    case Distribution::Kind::Beta: {
      const auto& p = d.as<BetaDist>();
      const double a = sample_gamma(p.alpha, 1.0, rng);
      const double b = sample_gamma(p.beta, 1.0, rng);
      return Value(a / (a + b));
    }
    case Distribution::Kind::Bernoulli: {
      const double p = d.as<BernoulliDist>().p;
      return Value(static_cast<std::int64_t>(rng.uniform() < p ? 1 : 0));
    }
    case Distribution::Kind::Poisson:
      return Value(sample_poisson(d.as<PoissonDist>().lambda, rng));
    case Distribution::Kind::Categorical: {
      const auto& probs = d.as<CategoricalDist>().probs;
      const double u = rng.uniform();
      double acc = 0.0;
      for (std::size_t i = 0; i < probs.size(); ++i) {
        acc += probs[i];
        if (u < acc) return Value(static_cast<std::int64_t>(i + 1));
      }
      return Value(static_cast<std::int64_t>(probs.size()));
    }
    case Distribution::Kind::Dirichlet: {
      const auto& alpha = d.as<DirichletDist>().alpha;
      std::vector<double> out(alpha.size());
      double total = 0.0;
      for (std::size_t i = 0; i < out.size(); ++i) {
        out[i] = sample_gamma(alpha[i], 1.0, rng);
        total += out[i];
      }
      for (double& o : out) o /= total;
      return Value(std::move(out));
    }
  }
  throw Error("unreachable distribution kind");
}

// ----------------------------------------------------------- bijectors

Bijector bijector_of(const Distribution& d) {
  switch (d.kind()) {
    case Distribution::Kind::Normal:
    case Distribution::Kind::MvNormalIso:
      return Bijector::identity();
    case Distribution::Kind::Gamma:
      return Bijector::log();
    case Distribution::Kind::Beta:
      return Bijector::logit();
    case Distribution::Kind::Dirichlet:
      return Bijector::stick_breaking(d.as<DirichletDist>().alpha.size());
    default:
      throw NotDifferentiableError(std::string(d.name()) +
                                   " is discrete and has no bijector");
  }
}

namespace {

double logistic(double y) { return 1.0 / (1.0 + std::exp(-y)); }

void check_domain(bool ok, const char* what) {
  if (!ok) throw ModelDomainError(std::string("bijector domain violation: ") + what);
}

}  // namespace

BijectorResult bijector_apply(const Bijector& b, const double* x,
                              std::size_t n) {
  BijectorResult res;
  res.logjac = 0.0;
  switch (b.kind()) {
    case Bijector::Kind::Identity:
      res.y.assign(x, x + n);
      return res;
    case Bijector::Kind::Log:
      res.y.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        check_domain(x[i] > 0.0, "log transform of non-positive value");
        res.y[i] = std::log(x[i]);
        res.logjac += res.y[i];
      }
      return res;
    case Bijector::Kind::Logit:
      res.y.resize(n);
      for (std::size_t i = 0; i < n; ++i) {
        check_domain(x[i] > 0.0 && x[i] < 1.0,
                     "logit transform outside (0,1)");
        res.y[i] = std::log(x[i] / (1.0 - x[i]));
        res.logjac += std::log(x[i]) + std::log1p(-x[i]);
      }
      return res;
    case Bijector::Kind::StickBreaking: {
      // z_k = x_k / remaining, y_k = logit(z_k) + log(K - k); the offset
      // maps the uniform simplex to the origin.
      check_domain(n >= 2, "stick-breaking needs K >= 2");
      const std::size_t K = n;
      res.y.resize(K - 1);
      double remaining = 1.0;
      for (std::size_t k = 0; k < K - 1; ++k) {
        check_domain(x[k] > 0.0 && x[k] < remaining,
                     "stick-breaking input off the open simplex");
        const double z = x[k] / remaining;
        res.y[k] = std::log(z / (1.0 - z)) +
                   std::log(static_cast<double>(K - 1 - k));
        res.logjac += std::log(z) + std::log1p(-z) + std::log(remaining);
        remaining -= x[k];
      }
      return res;
    }
  }
  throw Error("unreachable bijector kind");
}

std::vector<double> bijector_inverse(const Bijector& b, const double* y,
                                     std::size_t n) {
  switch (b.kind()) {
    case Bijector::Kind::Identity:
      return std::vector<double>(y, y + n);
    case Bijector::Kind::Log: {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = std::exp(y[i]);
      return x;
    }
    case Bijector::Kind::Logit: {
      std::vector<double> x(n);
      for (std::size_t i = 0; i < n; ++i) x[i] = logistic(y[i]);
      return x;
    }
    case Bijector::Kind::StickBreaking: {
      const std::size_t K = n + 1;
      std::vector<double> x(K);
      double remaining = 1.0;
      for (std::size_t k = 0; k < K - 1; ++k) {
        const double z =
            logistic(y[k] - std::log(static_cast<double>(K - 1 - k)));
        x[k] = z * remaining;
        remaining *= 1.0 - z;
      }
      x[K - 1] = remaining;
      return x;
    }
  }
  throw Error("unreachable bijector kind");
}

double bijector_logjac(const Bijector& b, const double* y, std::size_t n) {
  switch (b.kind()) {
    case Bijector::Kind::Identity:
      return 0.0;
    case Bijector::Kind::Log: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) acc += y[i];
      return acc;
    }
    case Bijector::Kind::Logit: {
      double acc = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        const double z = logistic(y[i]);
        acc += std::log(z) + std::log1p(-z);
      }
      return acc;
    }
    case Bijector::Kind::StickBreaking: {
      const std::size_t K = n + 1;
      double acc = 0.0;
      double remaining = 1.0;
      for (std::size_t k = 0; k < K - 1; ++k) {
        const double z =
            logistic(y[k] - std::log(static_cast<double>(K - 1 - k)));
        acc += std::log(z) + std::log1p(-z) + std::log(remaining);
        remaining *= 1.0 - z;
      }
      return acc;
    }
  }
  throw Error("unreachable bijector kind");
}

double digamma(double x) {
  // recurrence up to x >= 10, then the asymptotic Bernoulli series
  double acc = 0.0;
  while (x < 10.0) {
    acc -= 1.0 / x;
    x += 1.0;
  }
  const double inv = 1.0 / x;
  const double inv2 = inv * inv;
  double series = std::log(x) - 0.5 * inv;
  static const double coef[] = {
      -1.0 / 12.0,   1.0 / 120.0,  -1.0 / 252.0,     1.0 / 240.0,
      -1.0 / 132.0,  691.0 / 32760.0, -1.0 / 12.0,
  };
  double pw = inv2;
  for (double c : coef) {
    series += c * pw;
    pw *= inv2;
  }
  return acc + series;
}

}  // namespace ppl
