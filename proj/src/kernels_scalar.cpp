// Scalar reference kernels. These define the semantics the SIMD
// variants are tested against; keep them simple and obviously correct.

#include <cmath>
#include <cstddef>

#include "ppl/kernels.hpp"

namespace ppl::kernels {
namespace {

double k_dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double k_sum(const double* a, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i];
  return acc;
}

double k_sq_dev_sum(const double* x, double mu, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mu;
    acc += d * d;
  }
  return acc;
}

double k_sq_dev_sum_v(const double* x, const double* mu, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mu[i];
    acc += d * d;
  }
  return acc;
}

void k_add(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] + b[i];
}

void k_sub(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] - b[i];
}

void k_mul(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * b[i];
}

void k_div(const double* a, const double* b, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] / b[i];
}

void k_scale(const double* a, double s, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = a[i] * s;
}

void k_matvec(const double* m, std::size_t rows, std::size_t cols,
              const double* v, double* out) {
  for (std::size_t i = 0; i < rows; ++i) out[i] = k_dot(m + i * cols, v, cols);
}

void k_matvec_t(const double* m, std::size_t rows, std::size_t cols,
                const double* v, double* out) {
  for (std::size_t j = 0; j < cols; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const double vi = v[i];
    const double* row = m + i * cols;
    for (std::size_t j = 0; j < cols; ++j) out[j] += vi * row[j];
  }
}

void k_vexp(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::exp(a[i]);
}

void k_vlog(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::log(a[i]);
}

void k_vlogistic(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = 1.0 / (1.0 + std::exp(-a[i]));
}

void k_vsqrt(const double* a, double* out, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) out[i] = std::sqrt(a[i]);
}

double k_bernoulli_lpmf_sum(const double* p, const double* y, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i)
    acc += y[i] != 0.0 ? std::log(p[i]) : std::log(1.0 - p[i]);
  return acc;
}

double k_poisson_partial_sum(const double* lam, const double* y,
                             std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += y[i] * std::log(lam[i]) - lam[i];
  return acc;
}

}  // namespace

const Ops& scalar_ops() {
  static const Ops table = {
      "scalar",       k_dot,  k_sum,  k_sq_dev_sum, k_sq_dev_sum_v,
      k_add,          k_sub,  k_mul,  k_div,        k_scale,
      k_matvec,       k_matvec_t,     k_vexp,       k_vlog,
      k_vlogistic,    k_vsqrt,        k_bernoulli_lpmf_sum,
      k_poisson_partial_sum,
  };
  return table;
}

}  // namespace ppl::kernels
