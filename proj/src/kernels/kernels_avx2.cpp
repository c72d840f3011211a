// AVX2 variants of the reduction kernels. Compiled with -mavx2 -mno-fma;
// plain mul+add keeps results bit-identical to the scalar reference.

#include "nowcast/kernels.hpp"

#if defined(__x86_64__) || defined(__i386__)

#include <immintrin.h>

namespace nowcast::simd {
namespace {

// (l0+l2) + (l1+l3) — same combine order as the scalar reference.
inline double reduce4(__m256d acc) {
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(s) + _mm_cvtsd_f64(_mm_unpackhi_pd(s, s));
}

// Tail elements land in lanes 0..k-1, matching the scalar lane assignment
// (tail starts at a multiple of 4).
inline __m256d load_tail(const double* p, std::size_t k) {
  alignas(32) double buf[4] = {0, 0, 0, 0};
  for (std::size_t j = 0; j < k; ++j) buf[j] = p[j];
  return _mm256_load_pd(buf);
}

double sum_avx2(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  if (i < n) acc = _mm256_add_pd(acc, load_tail(x + i, n - i));
  return reduce4(acc);
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4)
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i)));
  if (i < n) {
    const std::size_t k = n - i;
    acc = _mm256_add_pd(acc, _mm256_mul_pd(load_tail(a + i, k), load_tail(b + i, k)));
  }
  return reduce4(acc);
}

double wsq_avx2(const double* x, const double* y, const double* w, std::size_t n,
                double cx, double cy) {
  const __m256d vcx = _mm256_set1_pd(cx);
  const __m256d vcy = _mm256_set1_pd(cy);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(x + i), vcx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(y + i), vcy);
    const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_loadu_pd(w + i), d2));
  }
  if (i < n) {
    const std::size_t k = n - i;
    // cx/cy must not leak into padding lanes: compute on a zero-padded copy
    // of the deltas instead of the raw inputs.
    alignas(32) double dxb[4] = {0, 0, 0, 0};
    alignas(32) double dyb[4] = {0, 0, 0, 0};
    alignas(32) double wb[4] = {0, 0, 0, 0};
    for (std::size_t j = 0; j < k; ++j) {
      dxb[j] = x[i + j] - cx;
      dyb[j] = y[i + j] - cy;
      wb[j] = w[i + j];
    }
    const __m256d dx = _mm256_load_pd(dxb);
    const __m256d dy = _mm256_load_pd(dyb);
    const __m256d d2 = _mm256_add_pd(_mm256_mul_pd(dx, dx), _mm256_mul_pd(dy, dy));
    acc = _mm256_add_pd(acc, _mm256_mul_pd(_mm256_load_pd(wb), d2));
  }
  return reduce4(acc);
}

Moments2 moments_avx2(const double* x, const double* y, std::size_t n, double mx, double my) {
  const __m256d vmx = _mm256_set1_pd(mx);
  const __m256d vmy = _mm256_set1_pd(my);
  __m256d axx = _mm256_setzero_pd();
  __m256d ayy = _mm256_setzero_pd();
  __m256d axy = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d dx = _mm256_sub_pd(_mm256_loadu_pd(x + i), vmx);
    const __m256d dy = _mm256_sub_pd(_mm256_loadu_pd(y + i), vmy);
    axx = _mm256_add_pd(axx, _mm256_mul_pd(dx, dx));
    ayy = _mm256_add_pd(ayy, _mm256_mul_pd(dy, dy));
    axy = _mm256_add_pd(axy, _mm256_mul_pd(dx, dy));
  }
  if (i < n) {
    const std::size_t k = n - i;
    alignas(32) double dxb[4] = {0, 0, 0, 0};
    alignas(32) double dyb[4] = {0, 0, 0, 0};
    for (std::size_t j = 0; j < k; ++j) {
      dxb[j] = x[i + j] - mx;
      dyb[j] = y[i + j] - my;
    }
    const __m256d dx = _mm256_load_pd(dxb);
    const __m256d dy = _mm256_load_pd(dyb);
    axx = _mm256_add_pd(axx, _mm256_mul_pd(dx, dx));
    ayy = _mm256_add_pd(ayy, _mm256_mul_pd(dy, dy));
    axy = _mm256_add_pd(axy, _mm256_mul_pd(dx, dy));
  }
  Moments2 m;
  m.sxx = reduce4(axx);
  m.syy = reduce4(ayy);
  m.sxy = reduce4(axy);
  return m;
}

void axpy_avx2(double a, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(a);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const __m256d t = _mm256_add_pd(_mm256_loadu_pd(y + i), _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
    _mm256_storeu_pd(y + i, t);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

namespace detail {
const KernelTable& avx2_table() {
  static const KernelTable t{sum_avx2, dot_avx2, wsq_avx2, moments_avx2, axpy_avx2};
  return t;
}
}  // namespace detail

}  // namespace nowcast::simd

#else

namespace nowcast::simd::detail {
const KernelTable& avx2_table() {
  static const KernelTable t{nullptr, nullptr, nullptr, nullptr, nullptr};
  return t;
}
}  // namespace nowcast::simd::detail

#endif
