#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <limits>
#include <vector>

#include "ppl/distributions.hpp"
#include "ppl/errors.hpp"
#include "ppl/rng.hpp"

using ppl::Bijector;
using ppl::Distribution;
using ppl::Value;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

// Simpson quadrature of exp(logpdf) over [lo, hi].
double density_mass(const Distribution& d, double lo, double hi, int n) {
  auto f = [&](double x) { return std::exp(ppl::logpdf(d, Value(x))); };
  const double h = (hi - lo) / n;
  double acc = f(lo) + f(hi);
  for (int i = 1; i < n; ++i) acc += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
  return acc * h / 3.0;
}

// standard normal CDF
double norm_cdf(double x) { return 0.5 * std::erfc(-x / std::sqrt(2.0)); }

// regularized lower incomplete gamma P(a,x), series + continued fraction
double gamma_p(double a, double x) {
  if (x <= 0.0) return 0.0;
  const double lg = std::lgamma(a);
  if (x < a + 1.0) {
    double ap = a, sum = 1.0 / a, del = sum;
    for (int i = 0; i < 500; ++i) {
      ap += 1.0;
      del *= x / ap;
      sum += del;
      if (std::abs(del) < std::abs(sum) * 1e-15) break;
    }
    return sum * std::exp(-x + a * std::log(x) - lg);
  }
  double b = x + 1.0 - a, c = 1e300, dd = 1.0 / b, h = dd;
  for (int i = 1; i < 500; ++i) {
    const double an = -i * (i - a);
    b += 2.0;
    dd = an * dd + b;
    if (std::abs(dd) < 1e-300) dd = 1e-300;
    c = b + an / c;
    if (std::abs(c) < 1e-300) c = 1e-300;
    dd = 1.0 / dd;
    const double del = dd * c;
    h *= del;
    if (std::abs(del - 1.0) < 1e-15) break;
  }
  return 1.0 - std::exp(-x + a * std::log(x) - lg) * h;
}

double ks_statistic(std::vector<double> draws, double (*cdf)(double, double, double),
                    double p1, double p2) {
  std::sort(draws.begin(), draws.end());
  const double n = static_cast<double>(draws.size());
  double d = 0.0;
  for (std::size_t i = 0; i < draws.size(); ++i) {
    const double f = cdf(draws[i], p1, p2);
    d = std::max(d, std::abs(f - (i + 1) / n));
    d = std::max(d, std::abs(f - i / n));
  }
  return d;
}

}  // namespace

TEST_CASE("log-density spot values") {
  // frozen by tests/oracles/fixtures.py
  CHECK(ppl::logpdf(Distribution::normal(0, 1), Value(0.0)) ==
        doctest::Approx(-0.91893853320467267).epsilon(1e-14));
  CHECK(ppl::logpdf(Distribution::normal(-1, 2), Value(0.5)) ==
        doctest::Approx(-1.8933357137646181).epsilon(1e-14));
  CHECK(ppl::logpdf(Distribution::gamma(1, 1), Value(1.0)) ==
        doctest::Approx(-1.0).epsilon(1e-14));
  CHECK(ppl::logpdf(Distribution::gamma(2, 3), Value(4.0)) ==
        doctest::Approx(-2.1442635495496623).epsilon(1e-14));
  CHECK(ppl::logpdf(Distribution::gamma(0.5, 2), Value(0.7)) ==
        doctest::Approx(-1.0906010612353063).epsilon(1e-14));
  CHECK(ppl::logpdf(Distribution::beta(2, 5), Value(0.3)) ==
        doctest::Approx(0.77052480158128978).epsilon(1e-14));
  CHECK(ppl::logpdf(Distribution::bernoulli(0.5), Value(std::int64_t{1})) ==
        doctest::Approx(-0.6931471805599453).epsilon(1e-14));
  CHECK(ppl::logpdf(Distribution::poisson(3.5), Value(std::int64_t{2})) ==
        doctest::Approx(-1.6876212435692093).epsilon(1e-14));
  CHECK(ppl::logpdf(Distribution::poisson(3.5), Value(std::int64_t{0})) ==
        doctest::Approx(-3.5).epsilon(1e-14));
  CHECK(ppl::logpdf(Distribution::dirichlet({1, 1, 1}),
                    Value(std::vector<double>{1.0 / 3, 1.0 / 3, 1.0 / 3})) ==
        doctest::Approx(0.69314718055994529).epsilon(1e-14));
  CHECK(ppl::logpdf(Distribution::mvnormal_iso({1.0, 2.0}, 2.0),
                    Value(std::vector<double>{0.0, 3.0})) ==
        doctest::Approx(-3.4741714275292361).epsilon(1e-14));
}

TEST_CASE("out-of-support arguments give -inf, not errors") {
  CHECK(ppl::logpdf(Distribution::gamma(1, 1), Value(-0.5)) == -kInf);
  CHECK(ppl::logpdf(Distribution::gamma(1, 1), Value(0.0)) == -kInf);
  CHECK(ppl::logpdf(Distribution::beta(2, 2), Value(1.5)) == -kInf);
  CHECK(ppl::logpdf(Distribution::bernoulli(0.3), Value(2.0)) == -kInf);
  CHECK(ppl::logpdf(Distribution::poisson(2), Value(-1.0)) == -kInf);
  CHECK(ppl::logpdf(Distribution::poisson(2), Value(1.5)) == -kInf);
  CHECK(ppl::logpdf(Distribution::categorical({0.5, 0.5}), Value(3.0)) == -kInf);
  CHECK(ppl::logpdf(Distribution::dirichlet({1, 1}),
                    Value(std::vector<double>{0.9, 0.2})) == -kInf);
}

TEST_CASE("invalid parameters raise ModelDomainError") {
  CHECK_THROWS_AS(Distribution::normal(0, -1), ppl::ModelDomainError);
  CHECK_THROWS_AS(Distribution::normal(0, 0), ppl::ModelDomainError);
  CHECK_THROWS_AS(Distribution::gamma(-1, 1), ppl::ModelDomainError);
  CHECK_THROWS_AS(Distribution::beta(0, 1), ppl::ModelDomainError);
  CHECK_THROWS_AS(Distribution::bernoulli(1.5), ppl::ModelDomainError);
  CHECK_THROWS_AS(Distribution::poisson(0), ppl::ModelDomainError);
  CHECK_THROWS_AS(Distribution::categorical({0.5, 0.6}), ppl::ModelDomainError);
  CHECK_THROWS_AS(Distribution::dirichlet({1, 0}), ppl::ModelDomainError);
}

TEST_CASE("dimension mismatch is an error") {
  CHECK_THROWS_AS(ppl::logpdf(Distribution::mvnormal_iso({0, 0, 0}, 1),
                              Value(std::vector<double>{1, 2})),
                  ppl::EvalError);
  CHECK_THROWS_AS(ppl::logpdf(Distribution::normal(0, 1),
                              Value(std::vector<double>{1, 2})),
                  ppl::EvalError);
}

TEST_CASE("densities integrate to one") {
  CHECK(density_mass(Distribution::normal(0.3, 1.7), 0.3 - 14 * 1.7,
                     0.3 + 14 * 1.7, 4000) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(density_mass(Distribution::gamma(2, 3), 0.0, 120.0, 6000) ==
        doctest::Approx(1.0).epsilon(1e-6));
  CHECK(density_mass(Distribution::beta(2, 5), 0.0, 1.0, 4000) ==
        doctest::Approx(1.0).epsilon(1e-6));

  // discrete families sum exactly
  double bern = std::exp(ppl::logpdf(Distribution::bernoulli(0.3), Value(0.0))) +
                std::exp(ppl::logpdf(Distribution::bernoulli(0.3), Value(1.0)));
  CHECK(bern == doctest::Approx(1.0).epsilon(1e-12));

  double pois = 0.0;
  for (int k = 0; k <= 200; ++k)
    pois += std::exp(ppl::logpdf(Distribution::poisson(3.5),
                                 Value(static_cast<double>(k))));
  CHECK(pois == doctest::Approx(1.0).epsilon(1e-12));

  double cat = 0.0;
  for (int k = 1; k <= 3; ++k)
    cat += std::exp(ppl::logpdf(Distribution::categorical({0.5, 0.3, 0.2}),
                                Value(static_cast<double>(k))));
  CHECK(cat == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("bijector table") {
  CHECK(ppl::bijector_of(Distribution::gamma(2, 3)).kind() == Bijector::Kind::Log);
  CHECK(ppl::bijector_of(Distribution::normal(0, 1)).kind() ==
        Bijector::Kind::Identity);
  CHECK(ppl::bijector_of(Distribution::mvnormal_iso({0, 0}, 1)).kind() ==
        Bijector::Kind::Identity);
  CHECK(ppl::bijector_of(Distribution::beta(1, 1)).kind() == Bijector::Kind::Logit);
  const Bijector sb = ppl::bijector_of(Distribution::dirichlet({1, 1, 1}));
  CHECK(sb.kind() == Bijector::Kind::StickBreaking);
  CHECK(sb.simplex_dim() == 3);
  CHECK_THROWS_AS(ppl::bijector_of(Distribution::bernoulli(0.3)),
                  ppl::NotDifferentiableError);
  CHECK_THROWS_AS(ppl::bijector_of(Distribution::poisson(2)),
                  ppl::NotDifferentiableError);
  CHECK_THROWS_AS(ppl::bijector_of(Distribution::categorical({1.0})),
                  ppl::NotDifferentiableError);
}

TEST_CASE("bijector examples") {
  const double x = 2.0;
  auto res = ppl::bijector_apply(Bijector::log(), &x, 1);
  CHECK(res.y[0] == doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(res.logjac == doctest::Approx(std::log(2.0)).epsilon(1e-15));

  const double five = 5.0;
  res = ppl::bijector_apply(Bijector::identity(), &five, 1);
  CHECK(res.y[0] == 5.0);
  CHECK(res.logjac == 0.0);

  // fixtures.py: logit_0p3, logit_logjac_0p3
  const double p3 = 0.3;
  res = ppl::bijector_apply(Bijector::logit(), &p3, 1);
  CHECK(res.y[0] == doctest::Approx(-0.84729786038720356).epsilon(1e-14));
  CHECK(res.logjac == doctest::Approx(-1.5606477482646686).epsilon(1e-14));

  // uniform 3-simplex maps to the origin
  const std::vector<double> u3 = {1.0 / 3, 1.0 / 3, 1.0 / 3};
  res = ppl::bijector_apply(Bijector::stick_breaking(3), u3.data(), 3);
  REQUIRE(res.y.size() == 2);
  CHECK(std::abs(res.y[0]) < 1e-12);
  CHECK(std::abs(res.y[1]) < 1e-12);

  // fixtures.py: sb_fwd_0p2_0p5_0p1_0p2
  const std::vector<double> x4 = {0.2, 0.5, 0.1, 0.2};
  res = ppl::bijector_apply(Bijector::stick_breaking(4), x4.data(), 4);
  CHECK(res.y[0] == doctest::Approx(-0.28768207245178079).epsilon(1e-13));
  CHECK(res.y[1] == doctest::Approx(1.2039728043259359).epsilon(1e-13));
  CHECK(res.y[2] == doctest::Approx(-0.6931471805599454).epsilon(1e-13));

  // fixtures.py: sb_inv_y_0p3_m0p2_0p7 and sb_logjac_y_0p3_m0p2_0p7
  const std::vector<double> y3 = {0.3, -0.2, 0.7};
  auto inv = ppl::bijector_inverse(Bijector::stick_breaking(4), y3.data(), 3);
  REQUIRE(inv.size() == 4);
  CHECK(inv[0] == doctest::Approx(0.31032244201237041).epsilon(1e-13));
  CHECK(inv[1] == doctest::Approx(0.20032428631773394).epsilon(1e-13));
  CHECK(inv[2] == doctest::Approx(0.3269798724003109).epsilon(1e-13));
  CHECK(inv[3] == doctest::Approx(0.16237339926958466).epsilon(1e-13));
  CHECK(ppl::bijector_logjac(Bijector::stick_breaking(4), y3.data(), 3) ==
        doctest::Approx(-5.7136745050355948).epsilon(1e-13));
}

TEST_CASE("bijector round-trip within 1e-12") {
  ppl::Rng rng(5);
  for (int i = 0; i < 200; ++i) {
    const double g = 0.01 + 30.0 * rng.uniform();
    auto res = ppl::bijector_apply(Bijector::log(), &g, 1);
    auto back = ppl::bijector_inverse(Bijector::log(), res.y.data(), 1);
    CHECK(std::abs(back[0] - g) < 1e-12 * std::max(1.0, g));

    const double b = 0.001 + 0.998 * rng.uniform();
    res = ppl::bijector_apply(Bijector::logit(), &b, 1);
    back = ppl::bijector_inverse(Bijector::logit(), res.y.data(), 1);
    CHECK(std::abs(back[0] - b) < 1e-12);

    std::vector<double> simplex(4);
    double tot = 0.0;
    for (auto& s : simplex) {
      s = 0.05 + rng.uniform();
      tot += s;
    }
    for (auto& s : simplex) s /= tot;
    res = ppl::bijector_apply(Bijector::stick_breaking(4), simplex.data(), 4);
    back = ppl::bijector_inverse(Bijector::stick_breaking(4), res.y.data(), 3);
    for (int k = 0; k < 4; ++k) CHECK(std::abs(back[k] - simplex[k]) < 1e-12);

    // logjac from y agrees with logjac computed during forward
    CHECK(ppl::bijector_logjac(Bijector::stick_breaking(4), res.y.data(), 3) ==
          doctest::Approx(res.logjac).epsilon(1e-10));
  }
}

TEST_CASE("change of variables preserves total mass") {
  // integral over y of exp(logpdf(inv(y)) + logjac(y)) == 1
  auto transformed_mass = [](const Distribution& d, const Bijector& b,
                             double lo, double hi, int n) {
    auto f = [&](double y) {
      auto x = ppl::bijector_inverse(b, &y, 1);
      return std::exp(ppl::logpdf(d, Value(x[0])) +
                      ppl::bijector_logjac(b, &y, 1));
    };
    const double h = (hi - lo) / n;
    double acc = f(lo) + f(hi);
    for (int i = 1; i < n; ++i)
      acc += f(lo + i * h) * (i % 2 == 1 ? 4.0 : 2.0);
    return acc * h / 3.0;
  };
  CHECK(transformed_mass(Distribution::gamma(2, 1.5), Bijector::log(), -25.0,
                         8.0, 6000) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(transformed_mass(Distribution::beta(2, 5), Bijector::logit(), -30.0,
                         30.0, 6000) == doctest::Approx(1.0).epsilon(1e-6));

  // fixtures.py: dirichlet234_unconstrained_lpdf_y3
  const std::vector<double> x3 = {0.5, 0.2, 0.3};
  auto res = ppl::bijector_apply(Bijector::stick_breaking(3), x3.data(), 3);
  const double lp = ppl::logpdf(Distribution::dirichlet({2, 3, 4}),
                                Value(std::vector<double>(x3)));
  CHECK(lp == doctest::Approx(0.59575483455129685).epsilon(1e-13));
  CHECK(lp + res.logjac == doctest::Approx(-2.9108030627686849).epsilon(1e-12));
}

TEST_CASE("sampling determinism and degenerate cases") {
  ppl::Rng a(77), b(77);
  for (int i = 0; i < 100; ++i) {
    CHECK(ppl::sample(Distribution::normal(0, 1), a).as_real() ==
          ppl::sample(Distribution::normal(0, 1), b).as_real());
  }
  ppl::Rng rng(3);
  for (int i = 0; i < 50; ++i) {
    CHECK(ppl::sample(Distribution::bernoulli(1.0), rng).as_int() == 1);
    CHECK(ppl::sample(Distribution::categorical({0, 1, 0}), rng).as_int() == 2);
  }
}

TEST_CASE("empirical mean of normal draws") {
  ppl::Rng rng(2024);
  double acc = 0.0;
  const int n = 100000;
  for (int i = 0; i < n; ++i)
    acc += ppl::sample(Distribution::normal(0, 1), rng).as_real();
  const double mean = acc / n;
  CHECK(mean > -0.02);
  CHECK(mean < 0.02);
}

TEST_CASE("Kolmogorov-Smirnov: normal and gamma draws match analytic CDFs") {
  const int n = 100000;
  ppl::Rng rng(11);

  std::vector<double> draws(n);
  for (auto& d : draws)
    d = ppl::sample(Distribution::normal(1.5, 2.0), rng).as_real();
  double ks = ks_statistic(
      std::move(draws),
      [](double x, double mu, double sd) { return norm_cdf((x - mu) / sd); },
      1.5, 2.0);
  CHECK(ks < 0.01);

  draws.assign(n, 0.0);
  for (auto& d : draws)
    d = ppl::sample(Distribution::gamma(2.5, 1.3), rng).as_real();
  ks = ks_statistic(
      std::move(draws),
      [](double x, double shape, double scale) {
        return gamma_p(shape, x / scale);
      },
      2.5, 1.3);
  CHECK(ks < 0.01);

  // shape < 1 branch
  draws.assign(n, 0.0);
  for (auto& d : draws)
    d = ppl::sample(Distribution::gamma(0.5, 1.0), rng).as_real();
  ks = ks_statistic(
      std::move(draws),
      [](double x, double shape, double scale) {
        return gamma_p(shape, x / scale);
      },
      0.5, 1.0);
  CHECK(ks < 0.01);
}

TEST_CASE("poisson sampler: moments and the large-lambda split") {
  ppl::Rng rng(8);
  const double lambda = 95.0;  // exercises the superposition split
  const int n = 50000;
  double mean = 0.0, m2 = 0.0;
  for (int i = 0; i < n; ++i) {
    const double x = static_cast<double>(
        ppl::sample(Distribution::poisson(lambda), rng).as_int());
    mean += x;
    m2 += x * x;
  }
  mean /= n;
  const double var = m2 / n - mean * mean;
  CHECK(std::abs(mean - lambda) < 0.25);      // se ~ 0.044
  CHECK(std::abs(var - lambda) < 4.0);        // se ~ 0.6
}

TEST_CASE("digamma") {
  // fixtures.py
  CHECK(ppl::digamma(1.0) == doctest::Approx(-0.57721566490153287).epsilon(1e-13));
  CHECK(ppl::digamma(0.5) == doctest::Approx(-1.9635100260214235).epsilon(1e-13));
  CHECK(ppl::digamma(2.0) == doctest::Approx(0.42278433509846713).epsilon(1e-13));
  CHECK(ppl::digamma(4.7) == doctest::Approx(1.4374238096317817).epsilon(1e-13));
  CHECK(ppl::digamma(0.05) == doctest::Approx(-20.497844991299871).epsilon(1e-13));
}
