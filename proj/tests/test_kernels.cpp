#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <vector>

#include "ppl/kernels.hpp"
#include "ppl/rng.hpp"

using ppl::kernels::Ops;

namespace {

const double kInf = std::numeric_limits<double>::infinity();

std::vector<double> random_vec(ppl::Rng& rng, std::size_t n, double lo,
                               double hi) {
  std::vector<double> v(n);
  for (auto& x : v) x = lo + (hi - lo) * rng.uniform();
  return v;
}

bool close(double a, double b, double tol) {
  if (std::isnan(a) || std::isnan(b)) return std::isnan(a) == std::isnan(b);
  if (std::isinf(a) || std::isinf(b)) return a == b;
  return std::abs(a - b) <= tol * std::max(1.0, std::max(std::abs(a), std::abs(b)));
}

const std::vector<std::size_t> kSizes = {0, 1, 2, 3, 4, 5, 7, 8, 9, 16, 33, 100, 1001};

}  // namespace

TEST_CASE("active table is one of the known variants") {
  const Ops& o = ppl::kernels::ops();
  const bool is_scalar = &o == &ppl::kernels::scalar_ops();
  const bool is_avx2 = ppl::kernels::avx2_ops() != nullptr &&
                       &o == ppl::kernels::avx2_ops();
  CHECK((is_scalar || is_avx2));
}

TEST_CASE("simd variant matches scalar reference") {
  const Ops* simd = ppl::kernels::avx2_ops();
  if (simd == nullptr) return;  // nothing to compare on this machine
  const Ops& ref = ppl::kernels::scalar_ops();
  ppl::Rng rng(1234);

  for (std::size_t n : kSizes) {
    auto a = random_vec(rng, n, -3.0, 3.0);
    auto b = random_vec(rng, n, -3.0, 3.0);
    std::vector<double> out1(n), out2(n);

    CAPTURE(n);

    // reductions reassociate; allow a magnitude-aware tolerance
    double mag = 1.0;
    for (std::size_t i = 0; i < n; ++i) mag += std::abs(a[i] * b[i]);
    CHECK(std::abs(simd->dot(a.data(), b.data(), n) -
                   ref.dot(a.data(), b.data(), n)) <= 1e-13 * mag);
    CHECK(std::abs(simd->sum(a.data(), n) - ref.sum(a.data(), n)) <=
          1e-13 * mag);
    CHECK(std::abs(simd->sq_dev_sum(a.data(), 0.7, n) -
                   ref.sq_dev_sum(a.data(), 0.7, n)) <= 1e-13 * mag);
    CHECK(std::abs(simd->sq_dev_sum_v(a.data(), b.data(), n) -
                   ref.sq_dev_sum_v(a.data(), b.data(), n)) <= 1e-13 * mag);

    // elementwise lane ops are exact
    simd->add(a.data(), b.data(), out1.data(), n);
    ref.add(a.data(), b.data(), out2.data(), n);
    CHECK(out1 == out2);
    simd->sub(a.data(), b.data(), out1.data(), n);
    ref.sub(a.data(), b.data(), out2.data(), n);
    CHECK(out1 == out2);
    simd->mul(a.data(), b.data(), out1.data(), n);
    ref.mul(a.data(), b.data(), out2.data(), n);
    CHECK(out1 == out2);
    simd->div(a.data(), b.data(), out1.data(), n);
    ref.div(a.data(), b.data(), out2.data(), n);
    CHECK(out1 == out2);
    simd->scale(a.data(), -1.37, out1.data(), n);
    ref.scale(a.data(), -1.37, out2.data(), n);
    CHECK(out1 == out2);

    auto pos = random_vec(rng, n, 1e-6, 50.0);
    simd->vsqrt(pos.data(), out1.data(), n);
    ref.vsqrt(pos.data(), out2.data(), n);
    CHECK(out1 == out2);
  }
}

TEST_CASE("vector exp/log/logistic match libm") {
  const Ops* simd = ppl::kernels::avx2_ops();
  if (simd == nullptr) return;
  ppl::Rng rng(99);

  for (std::size_t n : kSizes) {
    auto x = random_vec(rng, n, -700.0, 700.0);
    std::vector<double> out(n);
    simd->vexp(x.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CAPTURE(x[i]);
      CHECK(close(out[i], std::exp(x[i]), 5e-15));
    }
    simd->vlogistic(x.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CAPTURE(x[i]);
      CHECK(close(out[i], 1.0 / (1.0 + std::exp(-x[i])), 5e-15));
    }

    auto p = random_vec(rng, n, 0.0, 1.0);
    for (auto& v : p) v = std::exp(600.0 * (v - 0.5));  // wide dynamic range
    simd->vlog(p.data(), out.data(), n);
    for (std::size_t i = 0; i < n; ++i) {
      CAPTURE(p[i]);
      CHECK(close(out[i], std::log(p[i]), 5e-15));
    }
  }
}

TEST_CASE("exp/log special values") {
  const Ops* simd = ppl::kernels::avx2_ops();
  if (simd == nullptr) return;
  const double nan = std::numeric_limits<double>::quiet_NaN();

  const std::vector<double> xs = {0.0,   1.0,    -1.0,  710.0, 709.7,
                                  -746.0, -709.0, kInf,  -kInf, nan};
  std::vector<double> out(xs.size());
  simd->vexp(xs.data(), out.data(), xs.size());
  CHECK(out[0] == 1.0);
  for (std::size_t i = 0; i < xs.size(); ++i) {
    CAPTURE(xs[i]);
    CHECK(close(out[i], std::exp(xs[i]), 5e-15));
  }

  const std::vector<double> ys = {1.0,
                                  0.0,
                                  -3.0,
                                  kInf,
                                  nan,
                                  std::numeric_limits<double>::min(),
                                  1e-310,  // subnormal
                                  std::numeric_limits<double>::max(),
                                  0.9999999999,
                                  1.0000000001};
  out.assign(ys.size(), 0.0);
  simd->vlog(ys.data(), out.data(), ys.size());
  CHECK(out[0] == 0.0);
  CHECK(out[1] == -kInf);
  CHECK(std::isnan(out[2]));
  CHECK(out[3] == kInf);
  CHECK(std::isnan(out[4]));
  for (std::size_t i = 5; i < ys.size(); ++i) {
    CAPTURE(ys[i]);
    CHECK(close(out[i], std::log(ys[i]), 5e-15));
  }
}

TEST_CASE("matvec variants match naive loops") {
  const Ops* simd = ppl::kernels::avx2_ops();
  const Ops& ref = ppl::kernels::scalar_ops();
  ppl::Rng rng(7);

  for (std::size_t rows : {1u, 3u, 4u, 17u}) {
    for (std::size_t cols : {1u, 2u, 5u, 8u, 31u}) {
      auto m = random_vec(rng, rows * cols, -2.0, 2.0);
      auto v = random_vec(rng, cols, -2.0, 2.0);
      auto u = random_vec(rng, rows, -2.0, 2.0);

      std::vector<double> naive(rows, 0.0);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
          naive[i] += m[i * cols + j] * v[j];

      std::vector<double> got(rows);
      ref.matvec(m.data(), rows, cols, v.data(), got.data());
      for (std::size_t i = 0; i < rows; ++i)
        CHECK(close(got[i], naive[i], 1e-12));
      if (simd) {
        simd->matvec(m.data(), rows, cols, v.data(), got.data());
        for (std::size_t i = 0; i < rows; ++i)
          CHECK(close(got[i], naive[i], 1e-12));
      }

      std::vector<double> naive_t(cols, 0.0);
      for (std::size_t i = 0; i < rows; ++i)
        for (std::size_t j = 0; j < cols; ++j)
          naive_t[j] += m[i * cols + j] * u[i];

      std::vector<double> got_t(cols);
      ref.matvec_t(m.data(), rows, cols, u.data(), got_t.data());
      for (std::size_t j = 0; j < cols; ++j)
        CHECK(close(got_t[j], naive_t[j], 1e-12));
      if (simd) {
        simd->matvec_t(m.data(), rows, cols, u.data(), got_t.data());
        for (std::size_t j = 0; j < cols; ++j)
          CHECK(close(got_t[j], naive_t[j], 1e-12));
      }
    }
  }
}

TEST_CASE("fused density accumulations match scalar reference") {
  const Ops* simd = ppl::kernels::avx2_ops();
  if (simd == nullptr) return;
  const Ops& ref = ppl::kernels::scalar_ops();
  ppl::Rng rng(21);

  for (std::size_t n : kSizes) {
    auto p = random_vec(rng, n, 1e-6, 1.0 - 1e-6);
    std::vector<double> y(n);
    for (auto& v : y) v = rng.uniform() < 0.5 ? 0.0 : 1.0;
    CHECK(close(simd->bernoulli_lpmf_sum(p.data(), y.data(), n),
                ref.bernoulli_lpmf_sum(p.data(), y.data(), n), 1e-13));

    auto lam = random_vec(rng, n, 0.01, 40.0);
    std::vector<double> counts(n);
    for (auto& v : counts) v = std::floor(rng.uniform() * 10);
    CHECK(close(simd->poisson_partial_sum(lam.data(), counts.data(), n),
                ref.poisson_partial_sum(lam.data(), counts.data(), n), 1e-13));
  }
}

TEST_CASE("set_ops override") {
  ppl::kernels::set_ops(&ppl::kernels::scalar_ops());
  CHECK(&ppl::kernels::ops() == &ppl::kernels::scalar_ops());
  ppl::kernels::set_ops(nullptr);
}
