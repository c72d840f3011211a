#include "nowcast/kernels.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

#include "nowcast/error.hpp"

namespace nowcast::simd {

namespace {

// Scalar reference. The four-lane pattern mirrors one 256-bit register
// (or two 128-bit NEON registers), so the SIMD variants reproduce it
// operation for operation.

double sum_scalar(const double* x, std::size_t n) {
  double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += x[i];
    l1 += x[i + 1];
    l2 += x[i + 2];
    l3 += x[i + 3];
  }
  if (i < n) l0 += x[i];
  if (i + 1 < n) l1 += x[i + 1];
  if (i + 2 < n) l2 += x[i + 2];
  return (l0 + l2) + (l1 + l3);
}

double dot_scalar(const double* a, const double* b, std::size_t n) {
  double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += a[i] * b[i];
    l1 += a[i + 1] * b[i + 1];
    l2 += a[i + 2] * b[i + 2];
    l3 += a[i + 3] * b[i + 3];
  }
  if (i < n) l0 += a[i] * b[i];
  if (i + 1 < n) l1 += a[i + 1] * b[i + 1];
  if (i + 2 < n) l2 += a[i + 2] * b[i + 2];
  return (l0 + l2) + (l1 + l3);
}

double wsq_scalar(const double* x, const double* y, const double* w, std::size_t n,
                  double cx, double cy) {
  double l0 = 0, l1 = 0, l2 = 0, l3 = 0;
  auto term = [&](std::size_t i) {
    const double dx = x[i] - cx;
    const double dy = y[i] - cy;
    return w[i] * (dx * dx + dy * dy);
  };
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    l0 += term(i);
    l1 += term(i + 1);
    l2 += term(i + 2);
    l3 += term(i + 3);
  }
  if (i < n) l0 += term(i);
  if (i + 1 < n) l1 += term(i + 1);
  if (i + 2 < n) l2 += term(i + 2);
  return (l0 + l2) + (l1 + l3);
}

Moments2 moments_scalar(const double* x, const double* y, std::size_t n, double mx, double my) {
  double xx0 = 0, xx1 = 0, xx2 = 0, xx3 = 0;
  double yy0 = 0, yy1 = 0, yy2 = 0, yy3 = 0;
  double xy0 = 0, xy1 = 0, xy2 = 0, xy3 = 0;
  std::size_t i = 0;
  auto step = [&](std::size_t k, double& xx, double& yy, double& xy) {
    const double dx = x[k] - mx;
    const double dy = y[k] - my;
    xx += dx * dx;
    yy += dy * dy;
    xy += dx * dy;
  };
  for (; i + 4 <= n; i += 4) {
    step(i, xx0, yy0, xy0);
    step(i + 1, xx1, yy1, xy1);
    step(i + 2, xx2, yy2, xy2);
    step(i + 3, xx3, yy3, xy3);
  }
  if (i < n) step(i, xx0, yy0, xy0);
  if (i + 1 < n) step(i + 1, xx1, yy1, xy1);
  if (i + 2 < n) step(i + 2, xx2, yy2, xy2);
  Moments2 m;
  m.sxx = (xx0 + xx2) + (xx1 + xx3);
  m.syy = (yy0 + yy2) + (yy1 + yy3);
  m.sxy = (xy0 + xy2) + (xy1 + xy3);
  return m;
}

void axpy_scalar(double a, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

Backend detect_backend() {
  if (const char* env = std::getenv("NOWCAST_SIMD")) {
    if (std::strcmp(env, "scalar") == 0) return Backend::scalar;
    if (std::strcmp(env, "avx2") == 0 && backend_supported(Backend::avx2)) return Backend::avx2;
    if (std::strcmp(env, "neon") == 0 && backend_supported(Backend::neon)) return Backend::neon;
    throw ValidationError(std::string("NOWCAST_SIMD requests unavailable backend: ") + env);
  }
  if (backend_supported(Backend::avx2)) return Backend::avx2;
  if (backend_supported(Backend::neon)) return Backend::neon;
  return Backend::scalar;
}

std::atomic<int> g_backend{-1};

const detail::KernelTable& table_for(Backend b) {
  switch (b) {
    case Backend::avx2:
      return detail::avx2_table();
    case Backend::neon:
      return detail::neon_table();
    default:
      return detail::scalar_table();
  }
}

const detail::KernelTable& active_table() { return table_for(active_backend()); }

}  // namespace

namespace detail {
const KernelTable& scalar_table() {
  static const KernelTable t{sum_scalar, dot_scalar, wsq_scalar, moments_scalar, axpy_scalar};
  return t;
}
}  // namespace detail

Backend active_backend() {
  int b = g_backend.load(std::memory_order_acquire);
  if (b < 0) {
    b = int(detect_backend());
    g_backend.store(b, std::memory_order_release);
  }
  return Backend(b);
}

const char* backend_name(Backend b) {
  switch (b) {
    case Backend::scalar:
      return "scalar";
    case Backend::avx2:
      return "avx2";
    case Backend::neon:
      return "neon";
  }
  return "unknown";
}

bool backend_supported(Backend b) {
  switch (b) {
    case Backend::scalar:
      return true;
    case Backend::avx2:
#if defined(__x86_64__) || defined(__i386__)
      return detail::avx2_table().sum != nullptr && __builtin_cpu_supports("avx2");
#else
      return false;
#endif
    case Backend::neon:
      return detail::neon_table().sum != nullptr;
  }
  return false;
}

void force_backend(Backend b) {
  if (!backend_supported(b))
    throw ValidationError(std::string("SIMD backend not supported on this host: ") + backend_name(b));
  g_backend.store(int(b), std::memory_order_release);
}

double sum(std::span<const double> x) { return active_table().sum(x.data(), x.size()); }

double dot(std::span<const double> a, std::span<const double> b) {
  return active_table().dot(a.data(), b.data(), a.size() < b.size() ? a.size() : b.size());
}

double weighted_sqdist(std::span<const double> x, std::span<const double> y,
                       std::span<const double> w, double cx, double cy) {
  return active_table().weighted_sqdist(x.data(), y.data(), w.data(), x.size(), cx, cy);
}

Moments2 centered_moments(std::span<const double> x, std::span<const double> y,
                          double mx, double my) {
  return active_table().centered_moments(x.data(), y.data(),
                                         x.size() < y.size() ? x.size() : y.size(), mx, my);
}

void axpy(double a, std::span<const double> x, std::span<double> y) {
  active_table().axpy(a, x.data(), y.data(), x.size() < y.size() ? x.size() : y.size());
}

}  // namespace nowcast::simd
