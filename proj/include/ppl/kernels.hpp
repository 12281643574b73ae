#pragma once

// Double-precision kernels for the numeric inner loops: reductions,
// elementwise transcendentals, matrix-vector products and fused
// log-density accumulations. A scalar reference implementation always
// exists; an AVX2+FMA variant is selected at runtime when the CPU
// supports it. The two variants are equivalence-tested against each
// other (see tests/test_kernels.cpp).

#include <cstddef>

namespace ppl::kernels {

struct Ops {
  const char* name;

  double (*dot)(const double* a, const double* b, std::size_t n);
  double (*sum)(const double* a, std::size_t n);
  // sum_i (x[i] - mu)^2 and sum_i (x[i] - mu[i])^2
  double (*sq_dev_sum)(const double* x, double mu, std::size_t n);
  double (*sq_dev_sum_v)(const double* x, const double* mu, std::size_t n);

  void (*add)(const double* a, const double* b, double* out, std::size_t n);
  void (*sub)(const double* a, const double* b, double* out, std::size_t n);
  void (*mul)(const double* a, const double* b, double* out, std::size_t n);
  void (*div)(const double* a, const double* b, double* out, std::size_t n);
  void (*scale)(const double* a, double s, double* out, std::size_t n);

  // y = M v with M row-major (rows x cols), v of length cols.
  void (*matvec)(const double* m, std::size_t rows, std::size_t cols,
                 const double* v, double* out);
  // y = M^T v with M row-major (rows x cols), v of length rows.
  void (*matvec_t)(const double* m, std::size_t rows, std::size_t cols,
                   const double* v, double* out);

  void (*vexp)(const double* a, double* out, std::size_t n);
  void (*vlog)(const double* a, double* out, std::size_t n);
  void (*vlogistic)(const double* a, double* out, std::size_t n);
  void (*vsqrt)(const double* a, double* out, std::size_t n);

  // sum_i [ y[i] log p[i] + (1 - y[i]) log(1 - p[i]) ], y in {0,1}
  double (*bernoulli_lpmf_sum)(const double* p, const double* y, std::size_t n);
  // sum_i [ y[i] log lam[i] - lam[i] ]  (the lgamma(y+1) part is separate)
  double (*poisson_partial_sum)(const double* lam, const double* y, std::size_t n);
};

// Active table. Chosen once: AVX2 when compiled in and the CPU reports
// AVX2+FMA, else scalar. Env var PPL_KERNELS={scalar,avx2} overrides.
const Ops& ops();

const Ops& scalar_ops();
// Null when the binary lacks the AVX2 translation unit or the CPU
// cannot run it.
const Ops* avx2_ops();

// Test/bench hook; pass nullptr to restore automatic selection.
void set_ops(const Ops* table);

}  // namespace ppl::kernels
