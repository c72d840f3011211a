#include <doctest.h>

#include <cmath>
#include <vector>

#include "nowcast/kernels.hpp"
#include "nowcast/rng.hpp"

using namespace nowcast;

namespace {

std::vector<double> random_vector(rng::Xoshiro256ss& gen, std::size_t n, double lo, double hi) {
  std::vector<double> v(n);
  for (double& x : v) x = gen.uniform(lo, hi);
  return v;
}

const std::vector<std::size_t> kSizes = {0, 1, 2, 3, 4, 5, 7, 8, 15, 16, 63, 64, 65, 1000, 4097};

}  // namespace

TEST_CASE("scalar reductions match a naive accumulation within tolerance") {
  rng::Xoshiro256ss gen(7);
  simd::force_backend(simd::Backend::scalar);
  for (const std::size_t n : kSizes) {
    const auto x = random_vector(gen, n, -3.0, 3.0);
    double naive = 0.0;
    for (const double v : x) naive += v;
    CHECK(simd::sum(x) == doctest::Approx(naive).epsilon(1e-12));
  }
}

TEST_CASE("active SIMD backend is bit-identical to the scalar reference") {
  if (!simd::backend_supported(simd::Backend::avx2) &&
      !simd::backend_supported(simd::Backend::neon)) {
    MESSAGE("no SIMD backend on this host; scalar-only");
    return;
  }
  const simd::Backend vector_backend = simd::backend_supported(simd::Backend::avx2)
                                           ? simd::Backend::avx2
                                           : simd::Backend::neon;
  rng::Xoshiro256ss gen(11);
  for (const std::size_t n : kSizes) {
    const auto x = random_vector(gen, n, -100.0, 100.0);
    const auto y = random_vector(gen, n, -5.0, 5.0);
    const auto w = random_vector(gen, n, 0.0, 9.0);

    simd::force_backend(simd::Backend::scalar);
    const double sum_s = simd::sum(x);
    const double dot_s = simd::dot(x, y);
    const double wsq_s = simd::weighted_sqdist(x, y, w, 0.25, -1.5);
    const simd::Moments2 mom_s = simd::centered_moments(x, y, 0.5, -0.5);
    std::vector<double> axpy_s = y;
    simd::axpy(1.7, x, axpy_s);

    simd::force_backend(vector_backend);
    CHECK(simd::sum(x) == sum_s);
    CHECK(simd::dot(x, y) == dot_s);
    CHECK(simd::weighted_sqdist(x, y, w, 0.25, -1.5) == wsq_s);
    const simd::Moments2 mom_v = simd::centered_moments(x, y, 0.5, -0.5);
    CHECK(mom_v.sxx == mom_s.sxx);
    CHECK(mom_v.syy == mom_s.syy);
    CHECK(mom_v.sxy == mom_s.sxy);
    std::vector<double> axpy_v = y;
    simd::axpy(1.7, x, axpy_v);
    for (std::size_t i = 0; i < n; ++i) CHECK(axpy_v[i] == axpy_s[i]);
  }
  simd::force_backend(simd::Backend::scalar);
}

TEST_CASE("dot and weighted_sqdist agree with direct formulas") {
  rng::Xoshiro256ss gen(23);
  const auto x = random_vector(gen, 257, -2.0, 2.0);
  const auto y = random_vector(gen, 257, -2.0, 2.0);
  const auto w = random_vector(gen, 257, 0.0, 4.0);

  double dot_naive = 0.0, wsq_naive = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    dot_naive += x[i] * y[i];
    const double dx = x[i] - 0.3, dy = y[i] + 0.7;
    wsq_naive += w[i] * (dx * dx + dy * dy);
  }
  CHECK(simd::dot(x, y) == doctest::Approx(dot_naive).epsilon(1e-12));
  CHECK(simd::weighted_sqdist(x, y, w, 0.3, -0.7) == doctest::Approx(wsq_naive).epsilon(1e-12));
}

TEST_CASE("centered moments reproduce two-pass variance sums") {
  rng::Xoshiro256ss gen(31);
  const auto x = random_vector(gen, 501, -1.0, 1.0);
  const auto y = random_vector(gen, 501, -1.0, 1.0);
  double mx = 0, my = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= double(x.size());
  my /= double(y.size());
  double sxx = 0, syy = 0, sxy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
    sxy += (x[i] - mx) * (y[i] - my);
  }
  const simd::Moments2 m = simd::centered_moments(x, y, mx, my);
  CHECK(m.sxx == doctest::Approx(sxx).epsilon(1e-12));
  CHECK(m.syy == doctest::Approx(syy).epsilon(1e-12));
  CHECK(m.sxy == doctest::Approx(sxy).epsilon(1e-11));
}

TEST_CASE("backend names and support flags are consistent") {
  CHECK(simd::backend_supported(simd::Backend::scalar));
  CHECK(std::string(simd::backend_name(simd::Backend::scalar)) == "scalar");
  const simd::Backend active = simd::active_backend();
  CHECK(simd::backend_supported(active));
}
