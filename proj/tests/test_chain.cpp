#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdio>
#include <fstream>

#include "ppl/chain.hpp"
#include "ppl/errors.hpp"
#include "ppl/rng.hpp"

using ppl::Chain;
using ppl::ChainMeta;

namespace {

Chain random_chain(ppl::Rng& rng, std::size_t iters) {
  Chain c({"w[1]", "w[2]", "s"}, ChainMeta{"linreg", "hmc", 42});
  for (std::size_t i = 0; i < iters; ++i) {
    c.add_row({rng.normal() * 1e-3, rng.normal() * 1e7, std::exp(rng.normal())},
              rng.normal() - 100.0);
  }
  return c;
}

struct TempFile {
  std::string path;
  explicit TempFile(const char* name) : path(std::string("/tmp/") + name) {}
  ~TempFile() { std::remove(path.c_str()); }
};

}  // namespace

TEST_CASE("summary statistics") {
  Chain c({"a", "b"}, {});
  for (int i = 0; i < 100; ++i)
    c.add_row({3.0, i % 2 == 0 ? 1.0 : -1.0}, 0.0);
  auto s = c.summarize();
  REQUIRE(s.size() == 2);
  CHECK(s[0].mean == doctest::Approx(3.0).epsilon(1e-15));
  CHECK(s[0].sd == 0.0);
  CHECK(s[0].ess == doctest::Approx(100.0));
  CHECK(s[1].mean == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("summarize mean equals the arithmetic oracle") {
  ppl::Rng rng(3);
  Chain c = random_chain(rng, 500);
  auto s = c.summarize();
  for (std::size_t j = 0; j < c.n_params(); ++j) {
    double acc = 0.0;
    for (std::size_t i = 0; i < c.n_iters(); ++i) acc += c.at(i, j);
    CHECK(std::abs(s[j].mean - acc / static_cast<double>(c.n_iters())) <=
          1e-12 * std::max(1.0, std::abs(s[j].mean)));
  }
}

TEST_CASE("ess of iid draws is near n") {
  ppl::Rng rng(9);
  const int n = 10000;
  std::vector<double> xs(n);
  for (auto& x : xs) x = rng.normal();
  const double ess = ppl::effective_sample_size(xs);
  CHECK(ess > 0.5 * n);
  CHECK(ess < 1.5 * n);
}

TEST_CASE("ess drops for a slowly mixing series") {
  ppl::Rng rng(10);
  const int n = 10000;
  std::vector<double> xs(n);
  double state = 0.0;
  for (auto& x : xs) {
    state = 0.95 * state + std::sqrt(1 - 0.95 * 0.95) * rng.normal();
    x = state;
  }
  const double ess = ppl::effective_sample_size(xs);
  // analytic tau for AR(1) with rho=0.95 is (1+rho)/(1-rho) = 39
  CHECK(ess < 0.1 * n);
  CHECK(ess > 0.005 * n);
}

TEST_CASE("csv round trip is bit exact") {
  ppl::Rng rng(4);
  Chain c = random_chain(rng, 157);
  TempFile tmp("ppl_chain_roundtrip.csv");
  c.save_csv(tmp.path);
  Chain back = Chain::load_csv(tmp.path);

  REQUIRE(back.n_iters() == c.n_iters());
  REQUIRE(back.names() == c.names());
  CHECK(back.meta().model == "linreg");
  CHECK(back.meta().sampler == "hmc");
  CHECK(back.meta().seed == 42);
  for (std::size_t i = 0; i < c.n_iters(); ++i) {
    CHECK(back.logp(i) == c.logp(i));
    for (std::size_t j = 0; j < c.n_params(); ++j)
      CHECK(back.at(i, j) == c.at(i, j));
  }
}

TEST_CASE("csv header format") {
  Chain c({"w[1]", "w[2]", "s"}, ChainMeta{"linreg", "hmc", 1});
  c.add_row({1.0, 2.0, 3.0}, -4.0);
  TempFile tmp("ppl_chain_header.csv");
  c.save_csv(tmp.path);
  std::ifstream f(tmp.path);
  std::string line;
  std::getline(f, line);
  CHECK(line == "# model=linreg sampler=hmc seed=1");
  std::getline(f, line);
  CHECK(line == "iteration,w[1],w[2],s,lp");
  std::getline(f, line);
  CHECK(line == "1,1,2,3,-4");
}

TEST_CASE("ragged rows are positioned errors") {
  TempFile tmp("ppl_chain_ragged.csv");
  {
    std::ofstream f(tmp.path);
    f << "iteration,a,lp\n1,1.0,-1\n2,2.0\n";
  }
  try {
    Chain::load_csv(tmp.path);
    FAIL("expected ParseError");
  } catch (const ppl::ParseError& e) {
    CHECK(e.pos().line == 3);
  }
}

TEST_CASE("column lookup by subsumption") {
  ppl::Rng rng(4);
  Chain c = random_chain(rng, 3);
  CHECK(c.columns(ppl::varname_parse("w")) == std::vector<std::size_t>{0, 1});
  CHECK(c.columns(ppl::varname_parse("s")) == std::vector<std::size_t>{2});
  CHECK(c.columns(ppl::varname_parse("w[2]")) == std::vector<std::size_t>{1});
  CHECK_THROWS_AS(c.columns(ppl::varname_parse("q")), ppl::NotFoundError);
}
