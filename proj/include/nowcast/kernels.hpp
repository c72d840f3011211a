#pragma once

#include <cstddef>
#include <span>
#include <string>

namespace nowcast::simd {

enum class Backend { scalar, avx2, neon };

/// Backend picked at startup: NOWCAST_SIMD env override (scalar|avx2|neon),
/// otherwise the best one the CPU supports.
Backend active_backend();
const char* backend_name(Backend b);
bool backend_supported(Backend b);

/// Overrides the active backend (tests). Throws ValidationError if the CPU
/// cannot run it.
void force_backend(Backend b);

// All reductions below accumulate into four logical lanes (lane j sums the
// terms with index ≡ j mod 4) and combine as (l0+l2)+(l1+l3). Every backend
// implements exactly that order, so results are bit-identical across
// scalar, AVX2 and NEON.

/// Σ x[i]
double sum(std::span<const double> x);

/// Σ a[i]·b[i]
double dot(std::span<const double> a, std::span<const double> b);

/// Σ w[i]·((x[i]-cx)² + (y[i]-cy)²)
double weighted_sqdist(std::span<const double> x, std::span<const double> y,
                       std::span<const double> w, double cx, double cy);

/// Centered second moments about (mx, my).
struct Moments2 {
  double sxx = 0.0;
  double syy = 0.0;
  double sxy = 0.0;
};
Moments2 centered_moments(std::span<const double> x, std::span<const double> y,
                          double mx, double my);

/// y[i] += a·x[i] (elementwise, no cross-lane reduction involved)
void axpy(double a, std::span<const double> x, std::span<double> y);

namespace detail {

struct KernelTable {
  double (*sum)(const double*, std::size_t);
  double (*dot)(const double*, const double*, std::size_t);
  double (*weighted_sqdist)(const double*, const double*, const double*, std::size_t, double, double);
  Moments2 (*centered_moments)(const double*, const double*, std::size_t, double, double);
  void (*axpy)(double, const double*, double*, std::size_t);
};

const KernelTable& scalar_table();
const KernelTable& avx2_table();  // null members when not compiled in
const KernelTable& neon_table();

}  // namespace detail

}  // namespace nowcast::simd
