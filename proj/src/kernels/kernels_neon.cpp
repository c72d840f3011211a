// NEON variants. Two float64x2 accumulators emulate the four logical lanes,
// combined as (l0+l2)+(l1+l3) like the scalar reference.

#include "nowcast/kernels.hpp"

#if defined(__aarch64__)

#include <arm_neon.h>

namespace nowcast::simd {
namespace {

// acc01 holds lanes {0,1}, acc23 lanes {2,3}.
inline double reduce4(float64x2_t acc01, float64x2_t acc23) {
  const double l0 = vgetq_lane_f64(acc01, 0);
  const double l1 = vgetq_lane_f64(acc01, 1);
  const double l2 = vgetq_lane_f64(acc23, 0);
  const double l3 = vgetq_lane_f64(acc23, 1);
  return (l0 + l2) + (l1 + l3);
}

inline float64x2_t load_pair_tail(const double* p, std::size_t k) {
  double buf[2] = {0, 0};
  for (std::size_t j = 0; j < k; ++j) buf[j] = p[j];
  return vld1q_f64(buf);
}

double sum_neon(const double* x, std::size_t n) {
  float64x2_t a01 = vdupq_n_f64(0.0);
  float64x2_t a23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a01 = vaddq_f64(a01, vld1q_f64(x + i));
    a23 = vaddq_f64(a23, vld1q_f64(x + i + 2));
  }
  const std::size_t k = n - i;
  if (k > 0) a01 = vaddq_f64(a01, load_pair_tail(x + i, k < 2 ? k : 2));
  if (k > 2) a23 = vaddq_f64(a23, load_pair_tail(x + i + 2, k - 2));
  return reduce4(a01, a23);
}

double dot_neon(const double* a, const double* b, std::size_t n) {
  float64x2_t a01 = vdupq_n_f64(0.0);
  float64x2_t a23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a01 = vaddq_f64(a01, vmulq_f64(vld1q_f64(a + i), vld1q_f64(b + i)));
    a23 = vaddq_f64(a23, vmulq_f64(vld1q_f64(a + i + 2), vld1q_f64(b + i + 2)));
  }
  const std::size_t k = n - i;
  if (k > 0)
    a01 = vaddq_f64(a01, vmulq_f64(load_pair_tail(a + i, k < 2 ? k : 2),
                                   load_pair_tail(b + i, k < 2 ? k : 2)));
  if (k > 2)
    a23 = vaddq_f64(a23, vmulq_f64(load_pair_tail(a + i + 2, k - 2),
                                   load_pair_tail(b + i + 2, k - 2)));
  return reduce4(a01, a23);
}

inline float64x2_t wsq_term(const double* x, const double* y, const double* w,
                            float64x2_t cx, float64x2_t cy) {
  const float64x2_t dx = vsubq_f64(vld1q_f64(x), cx);
  const float64x2_t dy = vsubq_f64(vld1q_f64(y), cy);
  const float64x2_t d2 = vaddq_f64(vmulq_f64(dx, dx), vmulq_f64(dy, dy));
  return vmulq_f64(vld1q_f64(w), d2);
}

double wsq_neon(const double* x, const double* y, const double* w, std::size_t n,
                double cx, double cy) {
  const float64x2_t vcx = vdupq_n_f64(cx);
  const float64x2_t vcy = vdupq_n_f64(cy);
  float64x2_t a01 = vdupq_n_f64(0.0);
  float64x2_t a23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    a01 = vaddq_f64(a01, wsq_term(x + i, y + i, w + i, vcx, vcy));
    a23 = vaddq_f64(a23, wsq_term(x + i + 2, y + i + 2, w + i + 2, vcx, vcy));
  }
  for (std::size_t j = i; j < n; ++j) {
    const double dx = x[j] - cx;
    const double dy = y[j] - cy;
    const double t = w[j] * (dx * dx + dy * dy);
    double buf[2] = {0, 0};
    buf[(j - i) & 1] = t;
    if (j - i < 2)
      a01 = vaddq_f64(a01, vld1q_f64(buf));
    else
      a23 = vaddq_f64(a23, vld1q_f64(buf));
  }
  return reduce4(a01, a23);
}

Moments2 moments_neon(const double* x, const double* y, std::size_t n, double mx, double my) {
  const float64x2_t vmx = vdupq_n_f64(mx);
  const float64x2_t vmy = vdupq_n_f64(my);
  float64x2_t xx01 = vdupq_n_f64(0.0), xx23 = vdupq_n_f64(0.0);
  float64x2_t yy01 = vdupq_n_f64(0.0), yy23 = vdupq_n_f64(0.0);
  float64x2_t xy01 = vdupq_n_f64(0.0), xy23 = vdupq_n_f64(0.0);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    const float64x2_t dx0 = vsubq_f64(vld1q_f64(x + i), vmx);
    const float64x2_t dy0 = vsubq_f64(vld1q_f64(y + i), vmy);
    const float64x2_t dx1 = vsubq_f64(vld1q_f64(x + i + 2), vmx);
    const float64x2_t dy1 = vsubq_f64(vld1q_f64(y + i + 2), vmy);
    xx01 = vaddq_f64(xx01, vmulq_f64(dx0, dx0));
    xx23 = vaddq_f64(xx23, vmulq_f64(dx1, dx1));
    yy01 = vaddq_f64(yy01, vmulq_f64(dy0, dy0));
    yy23 = vaddq_f64(yy23, vmulq_f64(dy1, dy1));
    xy01 = vaddq_f64(xy01, vmulq_f64(dx0, dy0));
    xy23 = vaddq_f64(xy23, vmulq_f64(dx1, dy1));
  }
  for (std::size_t j = i; j < n; ++j) {
    const double dx = x[j] - mx;
    const double dy = y[j] - my;
    double bxx[2] = {0, 0}, byy[2] = {0, 0}, bxy[2] = {0, 0};
    const std::size_t lane = (j - i) & 1;
    bxx[lane] = dx * dx;
    byy[lane] = dy * dy;
    bxy[lane] = dx * dy;
    if (j - i < 2) {
      xx01 = vaddq_f64(xx01, vld1q_f64(bxx));
      yy01 = vaddq_f64(yy01, vld1q_f64(byy));
      xy01 = vaddq_f64(xy01, vld1q_f64(bxy));
    } else {
      xx23 = vaddq_f64(xx23, vld1q_f64(bxx));
      yy23 = vaddq_f64(yy23, vld1q_f64(byy));
      xy23 = vaddq_f64(xy23, vld1q_f64(bxy));
    }
  }
  Moments2 m;
  m.sxx = reduce4(xx01, xx23);
  m.syy = reduce4(yy01, yy23);
  m.sxy = reduce4(xy01, xy23);
  return m;
}

void axpy_neon(double a, const double* x, double* y, std::size_t n) {
  const float64x2_t va = vdupq_n_f64(a);
  std::size_t i = 0;
  for (; i + 2 <= n; i += 2) {
    const float64x2_t t = vaddq_f64(vld1q_f64(y + i), vmulq_f64(va, vld1q_f64(x + i)));
    vst1q_f64(y + i, t);
  }
  for (; i < n; ++i) y[i] += a * x[i];
}

}  // namespace

namespace detail {
const KernelTable& neon_table() {
  static const KernelTable t{sum_neon, dot_neon, wsq_neon, moments_neon, axpy_neon};
  return t;
}
}  // namespace detail

}  // namespace nowcast::simd

#else

namespace nowcast::simd::detail {
const KernelTable& neon_table() {
  static const KernelTable t{nullptr, nullptr, nullptr, nullptr, nullptr};
  return t;
}
}  // namespace nowcast::simd::detail

#endif
