// AVX2+FMA kernel variants. Compiled with -mavx2 -mfma and selected at
// runtime via cpuid (see kernels_dispatch.cpp), so the rest of the
// binary stays baseline-ISA clean.
//
// exp: round-to-nearest power-of-two reduction, degree-13 Taylor on
// |r| <= ln2/2, two-step 2^n scaling so the subnormal tail still works.
// log: exponent/mantissa split, atanh series in (m-1)/(m+1) on
// [sqrt2/2, sqrt2].

#include <immintrin.h>

#include <cmath>
#include <cstdint>
#include <limits>

#include "ppl/kernels.hpp"

namespace ppl::kernels {
namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d sh = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

// ---------------------------------------------------------------- exp

const double kExpHi = 709.782712893384;   // above this exp overflows
const double kExpLo = -745.2;             // below this exp underflows to 0
const double kLog2E = 1.4426950408889634074;
const double kLn2Hi = 6.93145751953125e-1;
const double kLn2Lo = 1.42860682030941723212e-6;

inline __m256d exp_pd(__m256d x) {
  const __m256d nan_mask = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d over = _mm256_cmp_pd(x, _mm256_set1_pd(kExpHi), _CMP_GT_OQ);
  const __m256d under = _mm256_cmp_pd(x, _mm256_set1_pd(kExpLo), _CMP_LT_OQ);

  __m256d xc = _mm256_max_pd(_mm256_set1_pd(kExpLo),
                             _mm256_min_pd(_mm256_set1_pd(kExpHi), x));

  __m256d nd = _mm256_round_pd(
      _mm256_mul_pd(xc, _mm256_set1_pd(kLog2E)),
      _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(nd, _mm256_set1_pd(kLn2Hi), xc);
  r = _mm256_fnmadd_pd(nd, _mm256_set1_pd(kLn2Lo), r);

  // Taylor series sum_{k=0}^{13} r^k / k!
  __m256d p = _mm256_set1_pd(1.6059043836821613e-10);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.08767569878681e-9));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.505210838544172e-8));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.755731922398589e-7));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.7557319223985893e-6));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(2.48015873015873e-5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.984126984126984e-4));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.388888888888889e-3));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(8.333333333333333e-3));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(4.1666666666666664e-2));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.6666666666666666e-1));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  // 2^n in two halves so n in [-1075, 1024] never hits the exponent
  // field limits.
  __m128i n32 = _mm256_cvtpd_epi32(nd);
  __m128i n1_32 = _mm_srai_epi32(n32, 1);
  __m128i n2_32 = _mm_sub_epi32(n32, n1_32);
  __m256i n1 = _mm256_cvtepi32_epi64(n1_32);
  __m256i n2 = _mm256_cvtepi32_epi64(n2_32);
  const __m256i bias = _mm256_set1_epi64x(1023);
  __m256d s1 = _mm256_castsi256_pd(
      _mm256_slli_epi64(_mm256_add_epi64(n1, bias), 52));
  __m256d s2 = _mm256_castsi256_pd(
      _mm256_slli_epi64(_mm256_add_epi64(n2, bias), 52));
  __m256d res = _mm256_mul_pd(_mm256_mul_pd(p, s1), s2);

  res = _mm256_blendv_pd(res, _mm256_setzero_pd(), under);
  res = _mm256_blendv_pd(
      res, _mm256_set1_pd(std::numeric_limits<double>::infinity()), over);
  res = _mm256_blendv_pd(res, x, nan_mask);
  return res;
}

// ---------------------------------------------------------------- log

const double kSqrt2 = 1.4142135623730951;

// exact double(e) for |e| < 2^51
inline __m256d i64_to_pd(__m256i v) {
  const __m256i magic = _mm256_set1_epi64x(0x4338000000000000LL);
  __m256d d = _mm256_castsi256_pd(_mm256_add_epi64(v, magic));
  return _mm256_sub_pd(d, _mm256_set1_pd(6755399441055744.0));
}

inline __m256d log_pd(__m256d x) {
  const __m256d zero = _mm256_setzero_pd();
  const __m256d nan_mask = _mm256_cmp_pd(x, x, _CMP_UNORD_Q);
  const __m256d neg = _mm256_cmp_pd(x, zero, _CMP_LT_OQ);
  const __m256d is_zero = _mm256_cmp_pd(x, zero, _CMP_EQ_OQ);
  const __m256d inf_mask = _mm256_cmp_pd(
      x, _mm256_set1_pd(std::numeric_limits<double>::infinity()), _CMP_EQ_OQ);

  // normalize subnormals
  const __m256d tiny =
      _mm256_cmp_pd(x, _mm256_set1_pd(2.2250738585072014e-308), _CMP_LT_OQ);
  __m256d xn = _mm256_blendv_pd(
      x, _mm256_mul_pd(x, _mm256_set1_pd(18014398509481984.0)), tiny);  // 2^54
  __m256i eadj = _mm256_and_si256(_mm256_castpd_si256(tiny),
                                  _mm256_set1_epi64x(54));

  __m256i bits = _mm256_castpd_si256(xn);
  __m256i rexp = _mm256_and_si256(_mm256_srli_epi64(bits, 52),
                                  _mm256_set1_epi64x(0x7FF));
  __m256i e = _mm256_sub_epi64(_mm256_sub_epi64(rexp, _mm256_set1_epi64x(1023)),
                               eadj);
  __m256d m = _mm256_castsi256_pd(_mm256_or_si256(
      _mm256_and_si256(bits, _mm256_set1_epi64x(0x000FFFFFFFFFFFFFLL)),
      _mm256_set1_epi64x(0x3FF0000000000000LL)));

  const __m256d gt = _mm256_cmp_pd(m, _mm256_set1_pd(kSqrt2), _CMP_GT_OQ);
  m = _mm256_blendv_pd(m, _mm256_mul_pd(m, _mm256_set1_pd(0.5)), gt);
  e = _mm256_add_epi64(
      e, _mm256_and_si256(_mm256_castpd_si256(gt), _mm256_set1_epi64x(1)));

  const __m256d one = _mm256_set1_pd(1.0);
  __m256d s = _mm256_div_pd(_mm256_sub_pd(m, one), _mm256_add_pd(m, one));
  __m256d z = _mm256_mul_pd(s, s);

  // atanh series: ln m = 2 s sum_{k=0}^{10} z^k / (2k+1)
  __m256d q = _mm256_set1_pd(1.0 / 21.0);
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(1.0 / 19.0));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(1.0 / 17.0));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(1.0 / 15.0));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(1.0 / 13.0));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(1.0 / 11.0));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(1.0 / 9.0));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(1.0 / 7.0));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(1.0 / 5.0));
  q = _mm256_fmadd_pd(q, z, _mm256_set1_pd(1.0 / 3.0));
  q = _mm256_fmadd_pd(q, z, one);
  __m256d lnm = _mm256_mul_pd(_mm256_add_pd(s, s), q);

  __m256d ed = i64_to_pd(e);
  __m256d res = _mm256_fmadd_pd(ed, _mm256_set1_pd(kLn2Hi), lnm);
  res = _mm256_fmadd_pd(ed, _mm256_set1_pd(kLn2Lo), res);

  res = _mm256_blendv_pd(
      res, _mm256_set1_pd(-std::numeric_limits<double>::infinity()), is_zero);
  res = _mm256_blendv_pd(
      res, _mm256_set1_pd(std::numeric_limits<double>::quiet_NaN()), neg);
  res = _mm256_blendv_pd(
      res, _mm256_set1_pd(std::numeric_limits<double>::infinity()), inf_mask);
  res = _mm256_blendv_pd(res, x, nan_mask);
  return res;
}

inline __m256d logistic_pd(__m256d x) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d e = exp_pd(_mm256_sub_pd(_mm256_setzero_pd(), x));
  return _mm256_div_pd(one, _mm256_add_pd(one, e));
}

// ----------------------------------------------------------- kernels

double k_dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

double k_sum(const double* a, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc0 = _mm256_add_pd(acc0, _mm256_loadu_pd(a + i));
  double acc = hsum(acc0);
  for (; i < n; ++i) acc += a[i];
  return acc;
}

double k_sq_dev_sum(const double* x, double mu, std::size_t n) {
  const __m256d muv = _mm256_set1_pd(mu);
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), muv);
    acc0 = _mm256_fmadd_pd(d, d, acc0);
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) {
    const double d = x[i] - mu;
    acc += d * d;
  }
  return acc;
}

double k_sq_dev_sum_v(const double* x, const double* mu, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d d = _mm256_sub_pd(_mm256_loadu_pd(x + i), _mm256_loadu_pd(mu + i));
    acc0 = _mm256_fmadd_pd(d, d, acc0);
  }
  double acc = hsum(acc0);
  for (; i < n; ++i) {
    const double d = x[i] - mu[i];
    acc += d * d;
  }
  return acc;
}

#define PPL_ELEMENTWISE(NAME, SIMD_EXPR, SCALAR_EXPR)                       \
  void NAME(const double* a, const double* b, double* out, std::size_t n) { \
    std::size_t i = 0;                                                      \
    for (; i + 4 <= n; i += 4) {                                            \
      __m256d x = _mm256_loadu_pd(a + i);                                   \
      __m256d y = _mm256_loadu_pd(b + i);                                   \
      _mm256_storeu_pd(out + i, SIMD_EXPR);                                 \
    }                                                                       \
    for (; i < n; ++i) out[i] = SCALAR_EXPR;                                \
  }

PPL_ELEMENTWISE(k_add, _mm256_add_pd(x, y), a[i] + b[i])
PPL_ELEMENTWISE(k_sub, _mm256_sub_pd(x, y), a[i] - b[i])
PPL_ELEMENTWISE(k_mul, _mm256_mul_pd(x, y), a[i] * b[i])
PPL_ELEMENTWISE(k_div, _mm256_div_pd(x, y), a[i] / b[i])
#undef PPL_ELEMENTWISE

void k_scale(const double* a, double s, double* out, std::size_t n) {
  const __m256d sv = _mm256_set1_pd(s);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_mul_pd(_mm256_loadu_pd(a + i), sv));
  for (; i < n; ++i) out[i] = a[i] * s;
}

void k_matvec(const double* m, std::size_t rows, std::size_t cols,
              const double* v, double* out) {
  for (std::size_t i = 0; i < rows; ++i) out[i] = k_dot(m + i * cols, v, cols);
}

void k_matvec_t(const double* m, std::size_t rows, std::size_t cols,
                const double* v, double* out) {
  std::size_t j = 0;
  for (; j + 4 <= cols; j += 4) _mm256_storeu_pd(out + j, _mm256_setzero_pd());
  for (; j < cols; ++j) out[j] = 0.0;
  for (std::size_t i = 0; i < rows; ++i) {
    const __m256d vi = _mm256_set1_pd(v[i]);
    const double* row = m + i * cols;
    std::size_t k = 0;
    for (; k + 4 <= cols; k += 4) {
      __m256d o = _mm256_loadu_pd(out + k);
      _mm256_storeu_pd(out + k, _mm256_fmadd_pd(vi, _mm256_loadu_pd(row + k), o));
    }
    for (; k < cols; ++k) out[k] += v[i] * row[k];
  }
}

void k_vexp(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, exp_pd(_mm256_loadu_pd(a + i)));
  if (i < n) {
    double buf[4] = {0, 0, 0, 0};
    for (std::size_t k = i; k < n; ++k) buf[k - i] = a[k];
    double res[4];
    _mm256_storeu_pd(res, exp_pd(_mm256_loadu_pd(buf)));
    for (std::size_t k = i; k < n; ++k) out[k] = res[k - i];
  }
}

void k_vlog(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, log_pd(_mm256_loadu_pd(a + i)));
  if (i < n) {
    double buf[4] = {1, 1, 1, 1};
    for (std::size_t k = i; k < n; ++k) buf[k - i] = a[k];
    double res[4];
    _mm256_storeu_pd(res, log_pd(_mm256_loadu_pd(buf)));
    for (std::size_t k = i; k < n; ++k) out[k] = res[k - i];
  }
}

void k_vlogistic(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, logistic_pd(_mm256_loadu_pd(a + i)));
  if (i < n) {
    double buf[4] = {0, 0, 0, 0};
    for (std::size_t k = i; k < n; ++k) buf[k - i] = a[k];
    double res[4];
    _mm256_storeu_pd(res, logistic_pd(_mm256_loadu_pd(buf)));
    for (std::size_t k = i; k < n; ++k) out[k] = res[k - i];
  }
}

void k_vsqrt(const double* a, double* out, std::size_t n) {
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    _mm256_storeu_pd(out + i, _mm256_sqrt_pd(_mm256_loadu_pd(a + i)));
  for (; i < n; ++i) out[i] = std::sqrt(a[i]);
}

double k_bernoulli_lpmf_sum(const double* p, const double* y, std::size_t n) {
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d pv = _mm256_loadu_pd(p + i);
    __m256d yv = _mm256_loadu_pd(y + i);
    __m256d hit = _mm256_cmp_pd(yv, _mm256_setzero_pd(), _CMP_NEQ_OQ);
    __m256d arg = _mm256_blendv_pd(_mm256_sub_pd(one, pv), pv, hit);
    acc = _mm256_add_pd(acc, log_pd(arg));
  }
  double out = hsum(acc);
  for (; i < n; ++i)
    out += y[i] != 0.0 ? std::log(p[i]) : std::log(1.0 - p[i]);
  return out;
}

double k_poisson_partial_sum(const double* lam, const double* y,
                             std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d lv = _mm256_loadu_pd(lam + i);
    __m256d yv = _mm256_loadu_pd(y + i);
    acc = _mm256_add_pd(acc, _mm256_fmsub_pd(yv, log_pd(lv), lv));
  }
  double out = hsum(acc);
  for (; i < n; ++i) out += y[i] * std::log(lam[i]) - lam[i];
  return out;
}

const Ops avx2_table = {
    "avx2",         k_dot,  k_sum,  k_sq_dev_sum, k_sq_dev_sum_v,
    k_add,          k_sub,  k_mul,  k_div,        k_scale,
    k_matvec,       k_matvec_t,     k_vexp,       k_vlog,
    k_vlogistic,    k_vsqrt,        k_bernoulli_lpmf_sum,
    k_poisson_partial_sum,
};

}  // namespace

const Ops* avx2_ops_impl() { return &avx2_table; }

}  // namespace ppl::kernels
