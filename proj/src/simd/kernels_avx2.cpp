// Compiled with -mavx2 -mfma. Only reached through the dispatch table after a
// CPUID check, so nothing here may run on a machine without AVX2.

#include "mfchaos/simd/kernels.hpp"

#include <immintrin.h>

#include <cstdint>

namespace mfchaos::simd::avx2 {
namespace {

constexpr std::size_t kLanes = 4;

inline __m256i tail_mask(std::size_t remaining) {
  alignas(32) static constexpr std::int64_t table[8] = {-1, -1, -1, -1, 0, 0, 0, 0};
  return _mm256_loadu_si256(reinterpret_cast<const __m256i*>(table + 4 - remaining));
}

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

// exp on [-708, 709]; callers clamp. Cody-Waite reduction then a degree-12
// Taylor polynomial on |r| <= ln2/2, which is below one ulp there.
inline __m256d exp_pd(__m256d x) {
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634);
  const __m256d ln2_hi = _mm256_set1_pd(6.93147180369123816490e-01);
  const __m256d ln2_lo = _mm256_set1_pd(1.90821492927058770002e-10);
  const __m256d n =
      _mm256_round_pd(_mm256_mul_pd(x, log2e), _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  __m256d r = _mm256_fnmadd_pd(n, ln2_hi, x);
  r = _mm256_fnmadd_pd(n, ln2_lo, r);

  __m256d p = _mm256_set1_pd(1.0 / 479001600.0);
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 39916800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 3628800.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 362880.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 40320.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 5040.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 720.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 120.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 24.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0 / 6.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(0.5));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));
  p = _mm256_fmadd_pd(p, r, _mm256_set1_pd(1.0));

  __m256i e = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
  e = _mm256_slli_epi64(_mm256_add_epi64(e, _mm256_set1_epi64x(1023)), 52);
  return _mm256_mul_pd(p, _mm256_castsi256_pd(e));
}

// Returns q = 2 / (exp(2z) + 1), so tanh(z) = 1 - q and sech^2(z) = q (2 - q).
inline __m256d tanh_complement(__m256d z) {
  const __m256d lim = _mm256_set1_pd(20.0);
  z = _mm256_min_pd(_mm256_max_pd(z, _mm256_sub_pd(_mm256_setzero_pd(), lim)), lim);
  const __m256d e = exp_pd(_mm256_add_pd(z, z));
  return _mm256_div_pd(_mm256_set1_pd(2.0), _mm256_add_pd(e, _mm256_set1_pd(1.0)));
}

// 1 / d for d >= 1. A 12-bit float estimate x refined by x (1 + e)(1 + e^2)(1 + e^4)
// with e = 1 - d x, which leaves a relative error of e^8, below double rounding.
// Past d = 2^126 the float estimate flushes to 0, an absolute error below 1.2e-38.
inline __m256d reciprocal_pd(__m256d d) {
  const __m256d one = _mm256_set1_pd(1.0);
  d = _mm256_min_pd(d, _mm256_set1_pd(1e300));  // inf * 0 would poison the refinement
  __m256d x = _mm256_cvtps_pd(_mm_rcp_ps(_mm256_cvtpd_ps(d)));
  const __m256d e = _mm256_fnmadd_pd(d, x, one);
  const __m256d e2 = _mm256_mul_pd(e, e);
  const __m256d e4 = _mm256_mul_pd(e2, e2);
  x = _mm256_fmadd_pd(x, e, x);
  x = _mm256_fmadd_pd(x, e2, x);
  return _mm256_fmadd_pd(x, e4, x);
}

}  // namespace

double tanh_affine_sum(std::span<const double> y, double scale, double shift) {
  const __m256d vs = _mm256_set1_pd(scale);
  const __m256d vb = _mm256_set1_pd(shift);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  const double* p = y.data();
  const std::size_t n = y.size();
  std::size_t m = 0;
  for (; m + 2 * kLanes <= n; m += 2 * kLanes) {
    const __m256d z0 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(p + m), vb);
    const __m256d z1 = _mm256_fmadd_pd(vs, _mm256_loadu_pd(p + m + kLanes), vb);
    acc0 = _mm256_add_pd(acc0, _mm256_sub_pd(one, tanh_complement(z0)));
    acc1 = _mm256_add_pd(acc1, _mm256_sub_pd(one, tanh_complement(z1)));
  }
  for (; m + kLanes <= n; m += kLanes) {
    const __m256d z = _mm256_fmadd_pd(vs, _mm256_loadu_pd(p + m), vb);
    acc0 = _mm256_add_pd(acc0, _mm256_sub_pd(one, tanh_complement(z)));
  }
  if (m < n) {
    const __m256i mask = tail_mask(n - m);
    const __m256d z = _mm256_fmadd_pd(vs, _mm256_maskload_pd(p + m, mask), vb);
    const __m256d t = _mm256_sub_pd(one, tanh_complement(z));
    acc1 = _mm256_add_pd(acc1, _mm256_and_pd(t, _mm256_castsi256_pd(mask)));
  }
  return hsum(_mm256_add_pd(acc0, acc1));
}

TanhSums tanh_affine_sums(std::span<const double> y, double scale, double shift) {
  const __m256d vs = _mm256_set1_pd(scale);
  const __m256d vb = _mm256_set1_pd(shift);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);
  __m256d val = _mm256_setzero_pd();
  __m256d der = _mm256_setzero_pd();
  const double* p = y.data();
  const std::size_t n = y.size();
  std::size_t m = 0;
  for (; m + kLanes <= n; m += kLanes) {
    const __m256d q = tanh_complement(_mm256_fmadd_pd(vs, _mm256_loadu_pd(p + m), vb));
    val = _mm256_add_pd(val, _mm256_sub_pd(one, q));
    der = _mm256_fmadd_pd(q, _mm256_sub_pd(two, q), der);
  }
  if (m < n) {
    const __m256i mask = tail_mask(n - m);
    const __m256d keep = _mm256_castsi256_pd(mask);
    const __m256d q =
        tanh_complement(_mm256_fmadd_pd(vs, _mm256_maskload_pd(p + m, mask), vb));
    val = _mm256_add_pd(val, _mm256_and_pd(_mm256_sub_pd(one, q), keep));
    der = _mm256_add_pd(der, _mm256_and_pd(_mm256_mul_pd(q, _mm256_sub_pd(two, q)), keep));
  }
  return {hsum(val), hsum(der)};
}

double logistic_sum(std::span<const double> e, double c) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  const double* p = e.data();
  const std::size_t n = e.size();
  std::size_t m = 0;
  for (; m + 2 * kLanes <= n; m += 2 * kLanes) {
    acc0 = _mm256_add_pd(acc0, reciprocal_pd(_mm256_fmadd_pd(vc, _mm256_loadu_pd(p + m), one)));
    acc1 = _mm256_add_pd(acc1, reciprocal_pd(_mm256_fmadd_pd(vc, _mm256_loadu_pd(p + m + kLanes), one)));
  }
  for (; m + kLanes <= n; m += kLanes) {
    acc0 = _mm256_add_pd(acc0, reciprocal_pd(_mm256_fmadd_pd(vc, _mm256_loadu_pd(p + m), one)));
  }
  if (m < n) {
    const __m256i mask = tail_mask(n - m);
    const __m256d r = reciprocal_pd(_mm256_fmadd_pd(vc, _mm256_maskload_pd(p + m, mask), one));
    acc1 = _mm256_add_pd(acc1, _mm256_and_pd(r, _mm256_castsi256_pd(mask)));
  }
  return hsum(_mm256_add_pd(acc0, acc1));
}

LogisticSums logistic_sums(std::span<const double> e, double c) {
  const __m256d vc = _mm256_set1_pd(c);
  const __m256d one = _mm256_set1_pd(1.0);
  __m256d val = _mm256_setzero_pd();
  __m256d der = _mm256_setzero_pd();
  const double* p = e.data();
  const std::size_t n = e.size();
  std::size_t m = 0;
  for (; m + kLanes <= n; m += kLanes) {
    const __m256d r = reciprocal_pd(_mm256_fmadd_pd(vc, _mm256_loadu_pd(p + m), one));
    val = _mm256_add_pd(val, r);
    der = _mm256_fmadd_pd(r, _mm256_sub_pd(one, r), der);
  }
  if (m < n) {
    const __m256i mask = tail_mask(n - m);
    const __m256d keep = _mm256_castsi256_pd(mask);
    const __m256d r = _mm256_and_pd(reciprocal_pd(_mm256_fmadd_pd(vc, _mm256_maskload_pd(p + m, mask), one)), keep);
    val = _mm256_add_pd(val, r);
    der = _mm256_fmadd_pd(r, _mm256_sub_pd(one, r), der);
  }
  return {hsum(val), hsum(der)};
}

double sum_exp_shifted(std::span<const double> z, double shift) {
  const __m256d vb = _mm256_set1_pd(shift);
  const __m256d lo = _mm256_set1_pd(-708.0);
  const __m256d hi = _mm256_set1_pd(709.0);
  __m256d acc = _mm256_setzero_pd();
  const double* p = z.data();
  const std::size_t n = z.size();
  std::size_t m = 0;
  auto body = [&](__m256d x, __m256d keep) {
    const __m256d live = _mm256_and_pd(keep, _mm256_cmp_pd(x, lo, _CMP_GE_OQ));
    const __m256d e = exp_pd(_mm256_min_pd(_mm256_max_pd(x, lo), hi));
    acc = _mm256_add_pd(acc, _mm256_and_pd(e, live));
  };
  const __m256d all = _mm256_castsi256_pd(_mm256_set1_epi64x(-1));
  for (; m + kLanes <= n; m += kLanes) body(_mm256_sub_pd(_mm256_loadu_pd(p + m), vb), all);
  if (m < n) {
    const __m256i mask = tail_mask(n - m);
    body(_mm256_sub_pd(_mm256_maskload_pd(p + m, mask), vb), _mm256_castsi256_pd(mask));
  }
  return hsum(acc);
}

double squared_distance(std::span<const double> a, std::span<const double> b) {
  __m256d acc = _mm256_setzero_pd();
  const std::size_t n = a.size();
  std::size_t k = 0;
  for (; k + kLanes <= n; k += kLanes) {
    const __m256d d = _mm256_sub_pd(_mm256_loadu_pd(a.data() + k), _mm256_loadu_pd(b.data() + k));
    acc = _mm256_fmadd_pd(d, d, acc);
  }
  double tail = 0.0;
  for (; k < n; ++k) {
    const double d = a[k] - b[k];
    tail += d * d;
  }
  return hsum(acc) + tail;
}

}  // namespace mfchaos::simd::avx2
