#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>

#include "ppl/interpreter.hpp"
#include "ppl/parser.hpp"

using namespace ppl;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

const char* kLinregSrc = R"(
model linreg(X, y) {
  d = size(X, 2)
  w ~ MvNormal(zeros(d), 1)
  s ~ Gamma(1, 1)
  y .~ Normal.(X * w, s)
}
)";

const char* kLogregSrc = R"(
model logreg(X, y) {
  d = size(X, 1)
  w ~ MvNormal(zeros(d), 1)
  v = logistic.(X' * w)
  y .~ Bernoulli.(v)
}
)";

Model linreg_fixture() {
  // X = [1 2] (1x2), y = [2]
  return instantiate(parse_model(kLinregSrc),
                     {{"X", Value(Matrix(1, 2, {1.0, 2.0}))},
                      {"y", Value(std::vector<double>{2.0})}});
}

Presets linreg_presets() {
  Presets p;
  p.set("w", Value(std::vector<double>{0.5, 0.0}));
  p.set("s", Value(1.0));
  return p;
}

}  // namespace

TEST_CASE("instantiation classifies observations and parameters") {
  Model m = linreg_fixture();
  CHECK(m.is_observed("y"));
  CHECK_FALSE(m.is_observed("w"));
  CHECK(m.parameter_symbols() == std::set<std::string>{"w", "s"});

  // y = missing turns y into a parameter
  Model gen = instantiate(parse_model(kLinregSrc),
                          {{"X", Value(Matrix(1, 2, {1.0, 2.0}))},
                           {"y", Value(MissingValue{})}});
  CHECK_FALSE(gen.is_observed("y"));
  CHECK(gen.parameter_symbols() == std::set<std::string>{"w", "s", "y"});

  CHECK_THROWS_WITH_AS(
      instantiate(parse_model(kLinregSrc),
                  {{"X", Value(Matrix(1, 2, {1.0, 2.0}))}}),
      doctest::Contains("missing: y"), EvalError);
  CHECK_THROWS_WITH_AS(
      instantiate(parse_model(kLinregSrc),
                  {{"X", Value(Matrix(1, 2, {1.0, 2.0}))},
                   {"y", Value(std::vector<double>{2.0})},
                   {"zz", Value(1.0)}}),
      doctest::Contains("unexpected: zz"), EvalError);
}

TEST_CASE("linreg fixed-value evaluation matches the oracle") {
  // frozen by tests/oracles/fixtures.py (linreg_*)
  Model m = linreg_fixture();
  Presets p = linreg_presets();
  Rng rng(1);

  UntypedTrace td;
  EvalOptions opts;
  opts.presets = &p;
  CHECK(evaluate(m, td, Context::Default(), rng, opts) ==
        doctest::Approx(-5.0068155996140185).epsilon(1e-13));

  UntypedTrace tl;
  CHECK(evaluate(m, tl, Context::Likelihood(), rng, opts) ==
        doctest::Approx(-2.0439385332046727).epsilon(1e-13));

  UntypedTrace tp;
  CHECK(evaluate(m, tp, Context::Prior(), rng, opts) ==
        doctest::Approx(-2.9628770664093453).epsilon(1e-13));
}

TEST_CASE("logreg fixed-value evaluation matches the oracle") {
  // frozen by tests/oracles/fixtures.py (logreg_*); X is 2x3, column per
  // observation, so X' * w pairs observation i with column i
  Model m = instantiate(
      parse_model(kLogregSrc),
      {{"X", Value(Matrix(2, 3, {1.0, -1.0, 2.0, 0.5, 1.5, -0.5}))},
       {"y", Value(std::vector<std::int64_t>{1, 0, 1})}});
  Presets p;
  p.set("w", Value(std::vector<double>{0.5, -0.25}));
  Rng rng(1);
  EvalOptions opts;
  opts.presets = &p;

  UntypedTrace t1, t2, t3;
  CHECK(evaluate(m, t1, Context::Default(), rng, opts) ==
        doctest::Approx(-3.146845047802556).epsilon(1e-13));
  CHECK(evaluate(m, t2, Context::Prior(), rng, opts) ==
        doctest::Approx(-1.9941270664093453).epsilon(1e-13));
  CHECK(evaluate(m, t3, Context::Likelihood(), rng, opts) ==
        doctest::Approx(-1.1527179813932107).epsilon(1e-13));
}

TEST_CASE("prior sampling fills the trace and re-evaluation is deterministic") {
  Model m = linreg_fixture();
  Rng rng(42);
  UntypedTrace t;
  const double lp = evaluate(m, t, Context::Default(), rng);
  CHECK(std::isfinite(lp));
  CHECK(t.contains(VarName("w")));
  CHECK(t.contains(VarName("s")));
  CHECK(t.size() == 2);

  // re-evaluation with all parameters present is rng-free
  Rng other(999);
  const double lp2 = evaluate(m, t, Context::Default(), other);
  CHECK(lp2 == lp);

  Rng r1(7), r2(7);
  UntypedTrace a, b;
  CHECK(evaluate(m, a, Context::Default(), r1) ==
        evaluate(m, b, Context::Default(), r2));
  CHECK(a.get_value(VarName("s")).as_real() ==
        b.get_value(VarName("s")).as_real());
}

TEST_CASE("posterior-predictive instantiation samples missing observations") {
  Model gen = instantiate(parse_model(kLinregSrc),
                          {{"X", Value(Matrix(2, 2, {1.0, 0.0, 0.0, 1.0}))},
                           {"y", Value(MissingValue{})}});
  Rng rng(5);
  UntypedTrace t;
  evaluate(gen, t, Context::Default(), rng);
  CHECK(t.contains(VarName::indexed("y", {1})));
  CHECK(t.contains(VarName::indexed("y", {2})));
}

TEST_CASE("context decomposition on random parameter draws") {
  Model m = instantiate(parse_model(kLinregSrc),
                        {{"X", Value(Matrix(3, 2, {1, 2, -1, 0.5, 0, 1}))},
                         {"y", Value(std::vector<double>{2.0, -0.5, 1.0})}});
  Rng rng(11);
  for (int rep = 0; rep < 50; ++rep) {
    UntypedTrace t;
    const double joint = evaluate(m, t, Context::Default(), rng);
    const double prior = evaluate(m, t, Context::Prior(), rng);
    const double lik = evaluate(m, t, Context::Likelihood(), rng);
    CHECK(std::abs(joint - prior - lik) < 1e-10);
  }
}

TEST_CASE("minibatch context scales observation terms only") {
  // spec of the weighting: logp += w * observe increment
  ModelDecl d = parse_model("model m(y) { y ~ Bernoulli(0.5) }");
  Model m = instantiate(std::move(d), {{"y", Value(std::int64_t{1})}});
  Rng rng(1);
  UntypedTrace t;
  const double lp =
      evaluate(m, t, Context::MiniBatch(Context::Default(), 10.0), rng);
  CHECK(lp == doctest::Approx(10.0 * std::log(0.5)).epsilon(1e-13));

  // assume terms are not scaled
  ModelDecl d2 = parse_model("model m2(y) { s ~ Gamma(1, 1) y ~ Normal(0, 1) }");
  Model m2 = instantiate(std::move(d2), {{"y", Value(0.0)}});
  Presets p;
  p.set("s", Value(1.0));
  EvalOptions opts;
  opts.presets = &p;
  UntypedTrace t2;
  const double lp2 =
      evaluate(m2, t2, Context::MiniBatch(Context::Default(), 10.0), rng, opts);
  CHECK(lp2 == doctest::Approx(-1.0 + 10.0 * -0.91893853320467267).epsilon(1e-12));

  // weight on a Prior inner context leaves only the prior terms
  UntypedTrace t3;
  const double lp3 =
      evaluate(m2, t3, Context::MiniBatch(Context::Prior(), 10.0), rng, opts);
  CHECK(lp3 == doctest::Approx(-1.0).epsilon(1e-13));

  CHECK_THROWS_AS(Context::MiniBatch(Context::MiniBatch(Context::Default(), 2), 2),
                  EvalError);
  CHECK_THROWS_AS(Context::MiniBatch(Context::Default(), 0.0), EvalError);
}

TEST_CASE("reject halts evaluation immediately") {
  ModelDecl d = parse_model(R"(
model g(y) {
  s ~ Normal(0, 1)
  if s < 0 { reject }
  y .~ Normal.(s, 1)
}
)");
  Model m = instantiate(std::move(d), {{"y", Value(std::vector<double>{0.0, 1.0})}});
  Presets p;
  p.set("s", Value(-0.5));
  Rng rng(1);
  UntypedTrace t;
  EvalStats stats;
  EvalOptions opts;
  opts.presets = &p;
  opts.stats = &stats;
  const double lp = evaluate(m, t, Context::Default(), rng, opts);
  CHECK(lp == -kInf);
  CHECK(stats.hit_reject);
  CHECK(stats.statements_executed == 3);  // tilde, if, reject
  CHECK(stats.observes == 0);

  // non-negative s runs the whole body
  Presets ok;
  ok.set("s", Value(0.5));
  UntypedTrace t2;
  EvalStats stats2;
  EvalOptions opts2;
  opts2.presets = &ok;
  opts2.stats = &stats2;
  const double lp2 = evaluate(m, t2, Context::Default(), rng, opts2);
  CHECK(std::isfinite(lp2));
  CHECK_FALSE(stats2.hit_reject);
  CHECK(stats2.statements_executed == 3);  // tilde, if, dot-tilde
  CHECK(stats2.observes == 1);
}

TEST_CASE("runtime domain violations raise ModelDomainError") {
  ModelDecl d = parse_model("model m(y) { s ~ Normal(0, 1) y ~ Normal(0, s) }");
  Model m = instantiate(std::move(d), {{"y", Value(1.0)}});
  Presets p;
  p.set("s", Value(-1.0));
  Rng rng(1);
  UntypedTrace t;
  EvalOptions opts;
  opts.presets = &p;
  CHECK_THROWS_AS(evaluate(m, t, Context::Default(), rng, opts),
                  ModelDomainError);

  ModelDecl d2 = parse_model("model m(y) { s ~ Normal(0, 1) y ~ Normal(sqrt(s), 1) }");
  Model m2 = instantiate(std::move(d2), {{"y", Value(1.0)}});
  UntypedTrace t2;
  CHECK_THROWS_AS(evaluate(m2, t2, Context::Default(), rng, opts),
                  ModelDomainError);

  ModelDecl d3 = parse_model("model m(y) { s ~ Normal(0, 1) y ~ Normal(log(s), 1) }");
  Model m3 = instantiate(std::move(d3), {{"y", Value(1.0)}});
  UntypedTrace t3;
  CHECK_THROWS_AS(evaluate(m3, t3, Context::Default(), rng, opts),
                  ModelDomainError);
}

TEST_CASE("evaluation errors carry positions and name the problem") {
  ModelDecl d = parse_model("model m(y) { v = nope + 1 y ~ Normal(0, 1) }");
  Model m = instantiate(std::move(d), {{"y", Value(1.0)}});
  Rng rng(1);
  UntypedTrace t;
  CHECK_THROWS_WITH_AS(evaluate(m, t, Context::Default(), rng),
                       doctest::Contains("unbound identifier 'nope'"),
                       EvalError);

  ModelDecl d2 = parse_model("model m(y) { v = y + 1 y ~ Normal(0, 1) }");
  Model m2 = instantiate(std::move(d2), {{"y", Value(1.0)}});
  UntypedTrace t2;
  // scalar + scalar fine; vector + scalar is a shape error
  ModelDecl d3 = parse_model("model m(y) { v = y + 1 s ~ Normal(0, 1) }");
  Model m3 = instantiate(std::move(d3),
                         {{"y", Value(std::vector<double>{1.0, 2.0})}});
  UntypedTrace t3;
  CHECK_THROWS_WITH_AS(evaluate(m3, t3, Context::Default(), rng),
                       doctest::Contains("shape mismatch"), EvalError);

  ModelDecl d4 = parse_model("model m(y) { if y + 1 { reject } s ~ Normal(0, 1) }");
  Model m4 = instantiate(std::move(d4), {{"y", Value(1.0)}});
  UntypedTrace t4;
  CHECK_THROWS_WITH_AS(evaluate(m4, t4, Context::Default(), rng),
                       doctest::Contains("must be a boolean"), EvalError);
}

TEST_CASE("broadcast rules: scalars repeat, vector lengths must agree") {
  ModelDecl d = parse_model("model m(y) { mu ~ Normal(0, 1) y .~ Normal.(mu, 1) }");
  Model m = instantiate(std::move(d),
                        {{"y", Value(std::vector<double>{0.5, 1.5, -0.5})}});
  Presets p;
  p.set("mu", Value(1.0));
  Rng rng(1);
  UntypedTrace t;
  EvalOptions opts;
  opts.presets = &p;
  const double lp = evaluate(m, t, Context::Likelihood(), rng, opts);
  double expect = 0.0;
  for (double y : {0.5, 1.5, -0.5})
    expect += -0.91893853320467267 - 0.5 * (y - 1.0) * (y - 1.0);
  CHECK(lp == doctest::Approx(expect).epsilon(1e-12));

  // mean vector of the wrong length: no recycling
  ModelDecl d2 = parse_model(R"(
model m2(y, mu) { s ~ Gamma(1, 1) y .~ Normal.(mu, s) }
)");
  Model m2 = instantiate(std::move(d2),
                         {{"y", Value(std::vector<double>{1.0, 2.0, 3.0})},
                          {"mu", Value(std::vector<double>{0.0, 1.0})}});
  UntypedTrace t2;
  CHECK_THROWS_WITH_AS(evaluate(m2, t2, Context::Default(), rng),
                       doctest::Contains("broadcast length mismatch"),
                       EvalError);

  // all-scalar parameter broadcast has no length to infer
  ModelDecl d3 = parse_model("model m3(y) { lam .~ Gamma.(1, 1) y ~ Normal(0, 1) }");
  Model m3 = instantiate(std::move(d3), {{"y", Value(0.0)}});
  UntypedTrace t3;
  CHECK_THROWS_WITH_AS(evaluate(m3, t3, Context::Default(), rng),
                       doctest::Contains("cannot determine broadcast length"),
                       EvalError);
}

TEST_CASE("broadcast parameter assume creates per-element entries") {
  ModelDecl d = parse_model(R"(
model hier(y) {
  a ~ Gamma(2, 2)
  lam .~ Gamma.(a * ones(size(y, 1)), 1)
  y .~ Poisson.(lam)
}
)");
  Model m = instantiate(std::move(d),
                        {{"y", Value(std::vector<std::int64_t>{1, 0, 3})}});
  Rng rng(3);
  UntypedTrace t;
  const double lp = evaluate(m, t, Context::Default(), rng);
  CHECK(std::isfinite(lp));
  CHECK(t.size() == 4);  // a, lam[1..3]
  CHECK(t.contains(VarName::indexed("lam", {3})));
}

TEST_CASE("untyped and typed evaluation agree bitwise") {
  Model m = instantiate(parse_model(kLinregSrc),
                        {{"X", Value(Matrix(3, 2, {1, 2, -1, 0.5, 0, 1}))},
                         {"y", Value(std::vector<double>{2.0, -0.5, 1.0})}});
  Rng rng(17);
  for (int rep = 0; rep < 20; ++rep) {
    UntypedTrace ut;
    const double lp_untyped = evaluate(m, ut, Context::Default(), rng);
    TypedTrace tt = TypedTrace::specialize(ut);
    Rng unused(0);
    const double lp_typed = evaluate(m, tt, Context::Default(), unused);
    CHECK(lp_typed == lp_untyped);

    // every value matches exactly
    for (const auto& e : ut.entries()) {
      const Value a = ut.get_value(e.name);
      const Value b = tt.get_value(e.name);
      if (a.is_numeric_scalar()) {
        CHECK(a.as_real() == b.as_real());
      } else {
        REQUIRE(a.vec_len() == b.vec_len());
        for (std::size_t i = 0; i < a.vec_len(); ++i)
          CHECK(a.vec_at(i) == b.vec_at(i));
      }
    }
  }
}

TEST_CASE("linked evaluation adds the inverse-map jacobian") {
  // fixtures.py: gamma11_lpdf_2, gamma11_linked_term_2
  ModelDecl d = parse_model("model m(dummy) { s ~ Gamma(1, 1) }");
  Model m = instantiate(std::move(d), {{"dummy", Value(0.0)}});
  Presets p;
  p.set("s", Value(2.0));
  Rng rng(1);
  UntypedTrace ut;
  EvalOptions opts;
  opts.presets = &p;
  CHECK(evaluate(m, ut, Context::Default(), rng, opts) ==
        doctest::Approx(-2.0).epsilon(1e-13));

  TypedTrace tt = TypedTrace::specialize(ut);
  tt.link();
  CHECK(tt.get_value(VarName("s")).as_real() ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const double lp = evaluate(m, tt, Context::Default(), rng);
  CHECK(lp == doctest::Approx(-1.3068528194400546).epsilon(1e-13));

  // round trip: invlink restores the unlinked evaluation
  tt.invlink();
  CHECK(evaluate(m, tt, Context::Default(), rng) ==
        doctest::Approx(-2.0).epsilon(1e-12));
}

TEST_CASE("evaluation on a typed trace with linked vector parameters") {
  Model m = linreg_fixture();
  Rng rng(23);
  UntypedTrace ut;
  const double unlinked = evaluate(m, ut, Context::Default(), rng);
  TypedTrace tt = TypedTrace::specialize(ut);
  tt.link();
  Rng unused(0);
  const double linked = evaluate(m, tt, Context::Default(), unused);
  // w has the identity bijector, s the log bijector: linked logp
  // differs from unlinked by exactly log(s)
  const double s = ut.get_value(VarName("s")).as_real();
  CHECK(linked == doctest::Approx(unlinked + std::log(s)).epsilon(1e-12));
}
