#pragma once

#include <cstdint>
#include <string>
#include <vector>

namespace nowcast::synthgen {

struct DeprivationInputs {
  double overcrowding = 0.0;
  double no_electric_heating = 0.0;
  double non_owner = 0.0;
  double unemployment = 0.0;
  double foreign_nationality = 0.0;
  double no_car = 0.0;
  double unskilled_worker = 0.0;
  double household_6plus = 0.0;
  double low_education = 0.0;
  double single_parent = 0.0;
};

/// Fixed linear combination of the ten deprivation rates; inputs must lie
/// in [0, 1].
double deprivation_index(const DeprivationInputs& inputs);

/// The ten coefficients in DeprivationInputs field order.
extern const double kDeprivationCoefficients[10];

struct GeneratorConfig {
  uint64_t seed = 1;
  std::size_t users = 1000;             // must be even
  std::size_t regions = 20;
  std::size_t towers_per_region = 40;
  std::string start_date = "2007-09-01";
  int days = 45;

  // per-user call budget (outgoing calls over the window), drawn per group
  int calls_min = 70;
  int calls_max = 130;
  double night_fraction = 0.35;         // share of calls made at home at night

  // social targets: reciprocated degree (odd) and call entropy regime
  int sv_min = 3;
  int sv_max = 9;
  double sd_min = 0.55;
  double sd_max = 0.95;

  // mobility entropy regime: one level per region plus per-user jitter
  double md_region_lo = 0.35;
  double md_region_hi = 0.90;
  double md_user_jitter = 0.06;

  double tolerance = 0.05;              // |realized - target| bound for SD and MD

  // planted indicator relationships on regional mean mobility diversity
  double di_intercept = 5.0;
  double di_md_slope = -3.0;
  double di_noise_sd = 0.5;
  double pci_intercept = 9000.0;
  double pci_md_slope = 14000.0;
  double pci_noise_sd = 1200.0;

  double pop_min = 1500;
  double pop_max = 60000;
  double area_min = 20.0;
  double area_max = 180.0;

  bool null_benchmark = false;          // indicators independent of all measures
  int workers = 1;
};

struct CorpusPaths {
  std::string cdr;
  std::string towers;
  std::string regions;
  std::string mapping;
  std::string ground_truth;
};

/// Writes a CDR corpus with known per-user social/mobility targets and
/// regional indicators planted on the realized regional mean mobility
/// diversity. The ground-truth JSON records every planted quantity.
CorpusPaths generate_corpus(const GeneratorConfig& config, const std::string& out_dir);

/// Same corpus machinery with zero planted effects: indicators drawn
/// independently of all measures.
CorpusPaths generate_nulls_benchmark(GeneratorConfig config, const std::string& out_dir);

namespace detail {

/// Geometric edge-weight profile whose normalized entropy hits `sd_target`:
/// weights q^ℓ over k contacts, q solved by bisection to 1e-6. Returns q.
double solve_geometric_ratio(int k, double sd_target);

/// Integer per-contact call volumes (each even, ≥ 2) realizing the profile
/// at roughly `calls_target` outgoing calls per user.
std::vector<uint32_t> integer_contact_volumes(int k, double q, int calls_target);

double entropy_of_counts_normalized(const std::vector<uint32_t>& counts, std::size_t denom);

struct TripMix {
  uint32_t dominant_repeats = 0;  // round trips on the dominant pair
  uint32_t spread_pairs = 0;      // distinct out-and-back destinations
  double md_exact = 0.0;          // entropy of the resulting trip multiset
};

/// Dominant-plus-uniform trip mixture for a target normalized trip entropy
/// given an even trip budget.
TripMix trip_mix_for_target(double md_target, uint32_t n_trips);

/// One round-robin 1-factorization matching: partner of `player` in round
/// `round` for an even group size m.
std::size_t matching_partner(std::size_t player, std::size_t round, std::size_t m);

}  // namespace detail

}  // namespace nowcast::synthgen
