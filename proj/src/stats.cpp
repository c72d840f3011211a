#include "nowcast/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "nowcast/error.hpp"
#include "nowcast/kernels.hpp"
#include "nowcast/rng.hpp"

namespace nowcast::stats {

namespace {

// Continued fraction for the incomplete beta (modified Lentz).
double beta_cf(double a, double b, double x) {
  constexpr int kMaxIter = 300;
  constexpr double kEps = 1e-15;
  constexpr double kTiny = 1e-300;

  const double qab = a + b;
  const double qap = a + 1.0;
  const double qam = a - 1.0;
  double c = 1.0;
  double d = 1.0 - qab * x / qap;
  if (std::fabs(d) < kTiny) d = kTiny;
  d = 1.0 / d;
  double h = d;
  for (int m = 1; m <= kMaxIter; ++m) {
    const int m2 = 2 * m;
    double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    h *= d * c;
    aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
    d = 1.0 + aa * d;
    if (std::fabs(d) < kTiny) d = kTiny;
    c = 1.0 + aa / c;
    if (std::fabs(c) < kTiny) c = kTiny;
    d = 1.0 / d;
    const double del = d * c;
    h *= del;
    if (std::fabs(del - 1.0) < kEps) break;
  }
  return h;
}

}  // namespace

double incomplete_beta(double a, double b, double x) {
  if (x <= 0.0) return 0.0;
  if (x >= 1.0) return 1.0;
  const double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) +
                          a * std::log(x) + b * std::log1p(-x);
  const double front = std::exp(ln_front);
  if (x < (a + 1.0) / (a + b + 2.0)) return front * beta_cf(a, b, x) / a;
  return 1.0 - front * beta_cf(b, a, 1.0 - x) / b;
}

double student_t_two_sided(double t, double dof) {
  if (!std::isfinite(t)) return 0.0;
  const double x = dof / (dof + t * t);
  return incomplete_beta(dof / 2.0, 0.5, x);
}

CorrelationResult pearson(std::span<const double> x, std::span<const double> y,
                          std::string x_name, std::string y_name) {
  const std::size_t n = std::min(x.size(), y.size());
  if (x.size() != y.size()) throw ValidationError("pearson: length mismatch");
  if (n < 3) throw ValidationError("pearson: need at least 3 samples");

  const double mx = simd::sum(x) / double(n);
  const double my = simd::sum(y) / double(n);
  const simd::Moments2 m = simd::centered_moments(x, y, mx, my);
  if (m.sxx <= 0.0 || m.syy <= 0.0) throw ValidationError("pearson: degenerate sample");

  CorrelationResult out;
  out.x_name = std::move(x_name);
  out.y_name = std::move(y_name);
  out.n = n;
  double rho = m.sxy / std::sqrt(m.sxx * m.syy);
  if (rho > 1.0) rho = 1.0;
  if (rho < -1.0) rho = -1.0;
  out.rho = rho;

  const double dof = double(n - 2);
  const double denom = 1.0 - rho * rho;
  if (denom <= 0.0) {
    out.p_value = 0.0;
  } else {
    const double t = rho * std::sqrt(dof / denom);
    out.p_value = student_t_two_sided(t, dof);
  }
  return out;
}

DecileSummary decile_summary(std::span<const double> x, std::span<const double> y) {
  const std::size_t n = std::min(x.size(), y.size());
  if (x.size() != y.size()) throw ValidationError("decile_summary: length mismatch");
  if (n < 10) throw ValidationError("decile_summary: need at least 10 samples");

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), (std::size_t)0);
  // ties broken by original index for reproducible bins
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return x[a] < x[b]; });

  DecileSummary out;
  const std::size_t base = n / 10;
  const std::size_t extra = n % 10;
  std::size_t pos = 0;
  for (std::size_t bin = 0; bin < 10; ++bin) {
    const std::size_t size = base + (bin < extra ? 1 : 0);
    DecileBin b;
    b.count = size;
    b.x_lo = x[order[pos]];
    b.x_hi = x[order[pos + size - 1]];
    double sum = 0.0;
    for (std::size_t i = pos; i < pos + size; ++i) sum += y[order[i]];
    b.y_mean = sum / double(size);
    double sq = 0.0;
    for (std::size_t i = pos; i < pos + size; ++i) {
      const double d = y[order[i]] - b.y_mean;
      sq += d * d;
    }
    b.y_std = std::sqrt(sq / double(size));
    out.bins.push_back(b);
    pos += size;
  }
  return out;
}

PermutationFn seeded_permutations(uint64_t seed) {
  return [seed](std::size_t repetition, std::size_t n) {
    rng::Xoshiro256ss gen(rng::derive_seed(seed, repetition));
    std::vector<uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    gen.shuffle(perm);
    return perm;
  };
}

PermutationFn identity_permutations() {
  return [](std::size_t, std::size_t n) {
    std::vector<uint32_t> perm(n);
    std::iota(perm.begin(), perm.end(), 0u);
    return perm;
  };
}

std::vector<territory::RegionAggregate> null_model_users(
    const std::vector<measures::UserProfile>& profiles,
    const territory::UserAssignment& assignment, const territory::RegionTable& regions,
    std::size_t repetitions, const PermutationFn& permutation) {
  if (repetitions < 1) throw ValidationError("null model needs at least 1 repetition");

  // the pool is every assigned user, in profile order (profiles are already
  // deterministic); regions keep their observed sizes
  std::vector<std::size_t> pool;
  std::vector<uint32_t> region_size(regions.regions.size(), 0);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const int32_t r = assignment.region_of_profile[i];
    if (r < 0) continue;
    pool.push_back(i);
    ++region_size[std::size_t(r)];
  }

  struct Sums {
    double sv = 0, sd = 0, mv = 0, md = 0;
  };
  std::vector<Sums> totals(regions.regions.size());

  for (std::size_t rep = 0; rep < repetitions; ++rep) {
    const std::vector<uint32_t> perm = permutation(rep, pool.size());
    std::size_t cursor = 0;
    for (std::size_t r = 0; r < region_size.size(); ++r) {
      const uint32_t size = region_size[r];
      if (size == 0) continue;
      Sums s;
      for (uint32_t k = 0; k < size; ++k) {
        const measures::UserProfile& p = profiles[pool[perm[cursor + k]]];
        s.sv += double(p.social_volume);
        s.sd += p.social_diversity;
        s.mv += p.mobility_volume;
        s.md += p.mobility_diversity;
      }
      totals[r].sv += s.sv / double(size);
      totals[r].sd += s.sd / double(size);
      totals[r].mv += s.mv / double(size);
      totals[r].md += s.md / double(size);
      cursor += size;
    }
  }

  std::vector<territory::RegionAggregate> out;
  for (std::size_t r = 0; r < region_size.size(); ++r) {
    if (region_size[r] == 0) continue;
    territory::RegionAggregate a;
    a.region = int32_t(r);
    a.user_count = region_size[r];
    a.mean_sv = totals[r].sv / double(repetitions);
    a.mean_sd = totals[r].sd / double(repetitions);
    a.mean_mv = totals[r].mv / double(repetitions);
    a.mean_md = totals[r].md / double(repetitions);
    out.push_back(a);
  }
  return out;
}

std::vector<territory::RegionAggregate> null_model_users(
    const std::vector<measures::UserProfile>& profiles,
    const territory::UserAssignment& assignment, const territory::RegionTable& regions,
    std::size_t repetitions, uint64_t seed) {
  return null_model_users(profiles, assignment, regions, repetitions,
                          seeded_permutations(seed));
}

territory::RegionTable null_model_indicators(const territory::RegionTable& regions,
                                             std::size_t repetitions,
                                             const PermutationFn& permutation) {
  if (regions.regions.size() < 2)
    throw ValidationError("indicator null model needs at least 2 regions");
  if (repetitions < 1) throw ValidationError("null model needs at least 1 repetition");

  territory::RegionTable out = regions;

  // shuffle each indicator column independently over the regions where it
  // is present; a repetition uses one permutation per column
  auto shuffle_column = [&](auto getter, auto setter, uint64_t column_tag) {
    std::vector<std::size_t> rows;
    std::vector<double> values;
    for (std::size_t i = 0; i < regions.regions.size(); ++i) {
      const auto v = getter(regions.regions[i]);
      if (v) {
        rows.push_back(i);
        values.push_back(*v);
      }
    }
    if (rows.size() < 2) return;
    std::vector<double> sums(rows.size(), 0.0);
    for (std::size_t rep = 0; rep < repetitions; ++rep) {
      const std::vector<uint32_t> perm =
          permutation(rep * 2 + column_tag, rows.size());
      for (std::size_t i = 0; i < rows.size(); ++i) sums[i] += values[perm[i]];
    }
    for (std::size_t i = 0; i < rows.size(); ++i)
      setter(out.regions[rows[i]], sums[i] / double(repetitions));
  };

  shuffle_column([](const territory::Region& r) { return r.deprivation_index; },
                 [](territory::Region& r, double v) { r.deprivation_index = v; }, 0);
  shuffle_column([](const territory::Region& r) { return r.per_capita_income; },
                 [](territory::Region& r, double v) { r.per_capita_income = v; }, 1);
  return out;
}

territory::RegionTable null_model_indicators(const territory::RegionTable& regions,
                                             std::size_t repetitions, uint64_t seed) {
  return null_model_indicators(regions, repetitions, seeded_permutations(seed));
}

}  // namespace nowcast::stats
