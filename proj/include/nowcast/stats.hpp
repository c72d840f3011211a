#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "nowcast/measures.hpp"
#include "nowcast/territory.hpp"

namespace nowcast::stats {

/// Regularized incomplete beta I_x(a, b) by Lentz continued fraction,
/// accurate to ~1e-12.
double incomplete_beta(double a, double b, double x);

/// Two-sided tail probability P(|T| > t) for Student's t with `dof` degrees
/// of freedom: I_{dof/(dof+t²)}(dof/2, 1/2).
double student_t_two_sided(double t, double dof);

struct CorrelationResult {
  std::string x_name;
  std::string y_name;
  double rho = 0.0;
  double p_value = 1.0;
  std::size_t n = 0;
};

/// Product-moment correlation with the t-test p-value. Requires n ≥ 3 and
/// non-zero variance on both sides.
CorrelationResult pearson(std::span<const double> x, std::span<const double> y,
                          std::string x_name = "x", std::string y_name = "y");

struct DecileBin {
  double x_lo = 0.0;
  double x_hi = 0.0;
  double y_mean = 0.0;
  double y_std = 0.0;  // population standard deviation
  std::size_t count = 0;
};

struct DecileSummary {
  std::vector<DecileBin> bins;  // 10 bins, populations differ by at most 1
};

/// Ten equal-populated groups by x (stable sort on (x, index));
/// per-group mean and population std of y.
DecileSummary decile_summary(std::span<const double> x, std::span<const double> y);

/// Permutation source used by the null models; index is the repetition.
using PermutationFn = std::function<std::vector<uint32_t>(std::size_t repetition, std::size_t n)>;

PermutationFn seeded_permutations(uint64_t seed);
PermutationFn identity_permutations();  // test stub: degenerate shuffle

/// Reassigns users to regions uniformly at random, preserving each region's
/// observed user count, and averages the per-repetition aggregates.
std::vector<territory::RegionAggregate> null_model_users(
    const std::vector<measures::UserProfile>& profiles,
    const territory::UserAssignment& assignment, const territory::RegionTable& regions,
    std::size_t repetitions, const PermutationFn& permutation);

std::vector<territory::RegionAggregate> null_model_users(
    const std::vector<measures::UserProfile>& profiles,
    const territory::UserAssignment& assignment, const territory::RegionTable& regions,
    std::size_t repetitions, uint64_t seed);

/// Shuffles each indicator column across regions per repetition and returns
/// a region table whose indicators are the per-region means over
/// repetitions.
territory::RegionTable null_model_indicators(const territory::RegionTable& regions,
                                             std::size_t repetitions,
                                             const PermutationFn& permutation);

territory::RegionTable null_model_indicators(const territory::RegionTable& regions,
                                             std::size_t repetitions, uint64_t seed);

}  // namespace nowcast::stats
