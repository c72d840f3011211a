#include "nowcast/synthgen.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <numeric>

#include "nowcast/csv.hpp"
#include "nowcast/error.hpp"
#include "nowcast/ingest.hpp"
#include "nowcast/measures.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/timeparse.hpp"

namespace nowcast::synthgen {

const double kDeprivationCoefficients[10] = {0.11, 0.34, 0.55, 0.47, 0.23,
                                             0.52, 0.37, 0.45, 0.19, 0.41};

double deprivation_index(const DeprivationInputs& inputs) {
  const double fields[10] = {
      inputs.overcrowding,   inputs.no_electric_heating, inputs.non_owner,
      inputs.unemployment,   inputs.foreign_nationality, inputs.no_car,
      inputs.unskilled_worker, inputs.household_6plus,   inputs.low_education,
      inputs.single_parent};
  double value = 0.0;
  for (int i = 0; i < 10; ++i) {
    if (!(fields[i] >= 0.0 && fields[i] <= 1.0))
      throw ValidationError("deprivation rate out of [0,1]");
    value += kDeprivationCoefficients[i] * fields[i];
  }
  return value;
}

namespace detail {

namespace {

double entropy_normalized(const double* weights, int k) {
  double total = 0.0;
  for (int i = 0; i < k; ++i) total += weights[i];
  double h = 0.0;
  for (int i = 0; i < k; ++i) {
    const double p = weights[i] / total;
    if (p > 0.0) h -= p * std::log(p);
  }
  return h / std::log(double(k));
}

}  // namespace

double solve_geometric_ratio(int k, double sd_target) {
  if (k <= 1) return 1.0;
  if (sd_target >= 1.0) return 1.0;
  if (sd_target <= 0.0) return 1e-9;

  std::vector<double> weights(static_cast<std::size_t>(k));
  auto normalized_entropy_at = [&](double q) {
    double w = 1.0;
    for (int i = 0; i < k; ++i) {
      weights[std::size_t(i)] = w;
      w *= q;
    }
    return entropy_normalized(weights.data(), k);
  };

  double lo = 1e-9, hi = 1.0;
  for (int iter = 0; iter < 100 && hi - lo > 1e-13; ++iter) {
    const double mid = (lo + hi) / 2.0;
    if (normalized_entropy_at(mid) < sd_target)
      lo = mid;
    else
      hi = mid;
  }
  return (lo + hi) / 2.0;
}

std::vector<uint32_t> integer_contact_volumes(int k, double q, int calls_target) {
  std::vector<uint32_t> counts(static_cast<std::size_t>(k));
  if (k == 1) {
    counts[0] = 2 * uint32_t(std::max(1, calls_target));
    return counts;
  }
  double z = 0.0, w = 1.0;
  for (int i = 0; i < k; ++i) {
    z += w;
    w *= q;
  }
  const double scale = 2.0 * double(calls_target) / z;
  w = 1.0;
  for (int i = 0; i < k; ++i) {
    const long long half = std::llround(scale * w / 2.0);
    counts[std::size_t(i)] = 2 * uint32_t(std::max(1LL, half));
    w *= q;
  }
  return counts;
}

double entropy_of_counts_normalized(const std::vector<uint32_t>& counts, std::size_t denom) {
  if (denom <= 1) return 0.0;
  double total = 0.0;
  for (const uint32_t c : counts) total += double(c);
  double h = 0.0;
  for (const uint32_t c : counts) {
    if (c == 0) continue;
    const double p = double(c) / total;
    h -= p * std::log(p);
  }
  return h / std::log(double(denom));
}

double trip_md(uint32_t dominant, uint32_t n_trips) {
  // trip multiset: the dominant pair in both directions `dominant` times,
  // plus (n_trips - 2·dominant) distinct out-and-back pairs once each
  const double n = double(n_trips);
  if (n_trips <= 1) return 0.0;
  if (dominant <= 1) return 1.0;  // every pair occurs once
  const double pr = double(dominant) / n;
  const uint32_t singles = n_trips - 2 * dominant;
  double h = -2.0 * pr * std::log(pr);
  if (singles > 0) h += double(singles) / n * std::log(n);
  return h / std::log(n);
}

TripMix trip_mix_for_target(double md_target, uint32_t n_trips) {
  TripMix best;
  best.md_exact = -10.0;
  // r = 0 and r = 1 both yield the all-distinct multiset; larger r trades
  // spread pairs for dominant repeats, so md is non-increasing in r
  for (uint32_t r = 0; r <= n_trips / 2; ++r) {
    const double md = trip_md(r, n_trips);
    if (std::fabs(md - md_target) < std::fabs(best.md_exact - md_target)) {
      best.dominant_repeats = r;
      best.spread_pairs = n_trips / 2 - r;
      best.md_exact = md;
    }
  }
  return best;
}

std::size_t matching_partner(std::size_t player, std::size_t round, std::size_t m) {
  const std::size_t mod = m - 1;  // m even, players 0..m-2 on the circle
  round %= mod;
  if (player == m - 1) return round;
  if (player == round) return m - 1;
  return (2 * round + mod - player % mod) % mod;
}

}  // namespace detail

namespace {

namespace fs = std::filesystem;

struct GroupPlan {
  int k = 1;
  double sd_target = 0.0;
  double sd_realized = 0.0;
  std::vector<uint32_t> contact_volumes;  // per matching round, both directions
  uint32_t n_out = 0;                     // outgoing calls per member
  std::size_t first_user = 0;
  std::size_t size = 0;                   // k + 1
};

struct UserPlan {
  std::size_t group = 0;
  std::size_t region = 0;
  int32_t home_tower = -1;
  int32_t dominant_tower = -1;
  std::vector<int32_t> spread_towers;
  uint32_t dominant_repeats = 0;
  uint32_t n_night = 0;
  uint32_t n_out = 0;
  bool single_trip = false;  // near-zero diversity target: one trip, rest home
  double md_target = 0.0;
  double md_realized = 0.0;
  double mv_expected = 0.0;
};

std::string user_id(std::size_t u) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "u%07zu", u);
  return buf;
}
std::string tower_id(std::size_t t) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "t%06zu", t);
  return buf;
}
std::string region_id(std::size_t r) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "r%05zu", r);
  return buf;
}

void validate_config(const GeneratorConfig& c) {
  if (c.users < 2) throw ValidationError("synth: users must be ≥ 2");
  if (c.users % 2 != 0) throw ValidationError("synth: users must be even");
  if (c.regions < 1) throw ValidationError("synth: regions must be ≥ 1");
  if (c.towers_per_region < 1) throw ValidationError("synth: towers_per_region must be ≥ 1");
  if (c.days < 1) throw ValidationError("synth: days must be ≥ 1");
  if (c.calls_min < 30 || c.calls_max < c.calls_min)
    throw ValidationError("synth: need 30 ≤ calls_min ≤ calls_max");
  if (double(c.calls_min) <= 0.55 * double(c.days))
    throw ValidationError("synth: calls_min too low for the window; users would be filtered out");
  if (c.night_fraction < 0.30 || c.night_fraction > 0.80)
    throw ValidationError("synth: night_fraction must be in [0.30, 0.80]");
  if (c.sv_min < 1 || c.sv_min % 2 == 0 || c.sv_max < c.sv_min)
    throw ValidationError("synth: sv_min must be odd and ≥ 1, sv_max ≥ sv_min");
  if (c.sd_min < 0.0 || c.sd_max > 1.0 || c.sd_max < c.sd_min)
    throw ValidationError("synth: sd regime must satisfy 0 ≤ sd_min ≤ sd_max ≤ 1");
  if (c.md_region_lo < 0.0 || c.md_region_hi >= 1.0 || c.md_region_hi < c.md_region_lo)
    throw ValidationError("synth: md regime must satisfy 0 ≤ lo ≤ hi < 1");
  if (c.tolerance <= 0.0) throw ValidationError("synth: tolerance must be > 0");
  if (!timeparse::parse_date_days(c.start_date))
    throw ValidationError("synth: bad start_date: " + c.start_date);

  // trip-entropy granularity at the smallest call budget must stay inside
  // the declared tolerance
  const uint32_t n_out_min = uint32_t(c.calls_min);
  const uint32_t n_night = std::max(1u, uint32_t(std::llround(c.night_fraction * n_out_min)));
  uint32_t n_trips = n_out_min - n_night - 1;
  if (n_trips % 2 == 1) --n_trips;
  if (n_trips < 8) throw ValidationError("synth: call budget leaves too few trips");
  double max_step = 0.0;
  double prev = detail::trip_md(1, n_trips);
  for (uint32_t r = 2; r <= n_trips / 2; ++r) {
    const double cur = detail::trip_md(r, n_trips);
    max_step = std::max(max_step, prev - cur);
    prev = cur;
  }
  // picking the nearest mixture halves the worst-case gap
  if (max_step / 2.0 > c.tolerance)
    throw ValidationError("synth: tolerance " + csv::format_real(c.tolerance) +
                          " unreachable at calls_min " + std::to_string(c.calls_min) +
                          "; raise calls_min or loosen the tolerance");
}

struct RegionSetup {
  std::vector<double> tower_lat;
  std::vector<double> tower_lon;
  std::vector<double> population;
  std::vector<double> area;
  std::vector<double> md_regime;
};

RegionSetup build_regions(const GeneratorConfig& c) {
  RegionSetup setup;
  const std::size_t total_towers = c.regions * c.towers_per_region;
  setup.tower_lat.resize(total_towers);
  setup.tower_lon.resize(total_towers);
  setup.population.resize(c.regions);
  setup.area.resize(c.regions);
  setup.md_regime.resize(c.regions);

  rng::Xoshiro256ss gen(rng::derive_seed(c.seed, 1));
  const std::size_t grid = std::size_t(std::ceil(std::sqrt(double(c.regions))));
  constexpr double kCellLat = 0.12;
  constexpr double kCellLon = 0.16;
  // coordinates are serialized with 9 significant digits; rounding them up
  // front keeps the expected gyration radii identical to what a consumer
  // recomputes from the files
  auto round9 = [](double v) { return std::atof(csv::format_real(v).c_str()); };
  for (std::size_t r = 0; r < c.regions; ++r) {
    const double lat0 = 44.0 + double(r / grid) * kCellLat;
    const double lon0 = 0.0 + double(r % grid) * kCellLon;
    for (std::size_t t = 0; t < c.towers_per_region; ++t) {
      const std::size_t idx = r * c.towers_per_region + t;
      setup.tower_lat[idx] = round9(lat0 + kCellLat * (0.05 + 0.90 * gen.next_double()));
      setup.tower_lon[idx] = round9(lon0 + kCellLon * (0.05 + 0.90 * gen.next_double()));
    }
    setup.population[r] = std::floor(gen.uniform(c.pop_min, c.pop_max));
    setup.area[r] = gen.uniform(c.area_min, c.area_max);
    setup.md_regime[r] = gen.uniform(c.md_region_lo, c.md_region_hi);
  }
  return setup;
}

std::vector<GroupPlan> build_groups(const GeneratorConfig& c) {
  rng::Xoshiro256ss gen(rng::derive_seed(c.seed, 2));
  std::vector<GroupPlan> groups;
  std::size_t next_user = 0;
  const uint32_t min_calls = uint32_t(std::max<double>(double(c.calls_min),
                                                       std::floor(0.5 * c.days) + 2.0));
  while (next_user < c.users) {
    GroupPlan g;
    const int span = (c.sv_max - c.sv_min) / 2 + 1;
    g.k = c.sv_min + 2 * int(gen.bounded(uint64_t(span)));
    std::size_t m = std::size_t(g.k) + 1;
    if (c.users - next_user < m) {
      m = c.users - next_user;  // even remainder by construction
      g.k = int(m) - 1;
    }
    g.first_user = next_user;
    g.size = m;
    next_user += m;

    g.sd_target = g.k <= 1 ? 0.0 : gen.uniform(c.sd_min, c.sd_max);
    const int calls_target = c.calls_min + int(gen.bounded(uint64_t(c.calls_max - c.calls_min + 1)));

    double scale_boost = 1.0;
    for (int attempt = 0; attempt < 10; ++attempt) {
      const double q = detail::solve_geometric_ratio(g.k, g.sd_target);
      g.contact_volumes =
          detail::integer_contact_volumes(g.k, q, int(double(calls_target) * scale_boost));
      uint32_t total = 0;
      for (const uint32_t v : g.contact_volumes) total += v / 2;
      g.n_out = total;
      g.sd_realized =
          detail::entropy_of_counts_normalized(g.contact_volumes, std::size_t(g.k));
      const bool entropy_ok = std::fabs(g.sd_realized - g.sd_target) <= c.tolerance / 2.0;
      if (g.n_out >= min_calls && entropy_ok) break;
      scale_boost *= 1.5;
    }
    if (g.n_out < min_calls ||
        std::fabs(g.sd_realized - g.sd_target) > c.tolerance / 2.0)
      throw ValidationError("synth: cannot realize social targets for group starting at user " +
                            user_id(g.first_user));
    groups.push_back(std::move(g));
  }
  return groups;
}

}  // namespace

CorpusPaths generate_corpus(const GeneratorConfig& config, const std::string& out_dir) {
  validate_config(config);
  fs::create_directories(out_dir);

  const RegionSetup setup = build_regions(config);
  const std::vector<GroupPlan> groups = build_groups(config);
  const std::size_t total_towers = config.regions * config.towers_per_region;
  const int64_t start_day = *timeparse::parse_date_days(config.start_date);

  // tower table mirrors what the pipeline will load, so expected values are
  // computed on identical coordinates
  ingest::TowerTable towers;
  for (std::size_t t = 0; t < total_towers; ++t) {
    towers.ids.intern(tower_id(t));
    towers.lat.push_back(setup.tower_lat[t]);
    towers.lon.push_back(setup.tower_lon[t]);
  }

  std::vector<std::size_t> group_of_user(config.users);
  for (std::size_t g = 0; g < groups.size(); ++g)
    for (std::size_t i = 0; i < groups[g].size; ++i)
      group_of_user[groups[g].first_user + i] = g;

  // --- per-user mobility plans (independent given the group solution) ---
  std::vector<UserPlan> plans(config.users);
  par::parallel_chunks(config.users, 512, config.workers,
                       [&](std::size_t begin, std::size_t end, std::size_t) {
    for (std::size_t u = begin; u < end; ++u) {
      const GroupPlan& group = groups[group_of_user[u]];
      UserPlan& plan = plans[u];
      plan.group = group_of_user[u];
      plan.region = u % config.regions;
      plan.n_out = group.n_out;

      rng::Xoshiro256ss gen(rng::derive_seed(config.seed, 0x75000000ULL + u));

      const std::size_t region_base = plan.region * config.towers_per_region;
      plan.home_tower = int32_t(region_base + gen.bounded(config.towers_per_region));
      if (total_towers < 2)
        throw ValidationError("synth: user " + user_id(u) +
                              ": mobility targets need at least 2 towers");
      if (config.towers_per_region >= 2) {
        do {
          plan.dominant_tower = int32_t(region_base + gen.bounded(config.towers_per_region));
        } while (plan.dominant_tower == plan.home_tower);
      } else {
        plan.dominant_tower = int32_t((std::size_t(plan.home_tower) + 1) % total_towers);
      }

      uint32_t n_night = std::max(1u, uint32_t(std::llround(config.night_fraction * plan.n_out)));
      uint32_t n_trips = plan.n_out - n_night - 1;
      if (n_trips % 2 == 1) {
        --n_trips;
        ++n_night;
      }
      plan.n_night = n_night;
      if ((plan.n_night + config.days - 1) / uint32_t(config.days) > 100 ||
          (n_trips / 2 + config.days - 1) / uint32_t(config.days) > 300)
        throw ValidationError("synth: user " + user_id(u) +
                              ": call budget exceeds per-day capacity; increase days");

      const double md_floor = std::log(2.0) / std::log(double(n_trips)) + 1e-3;
      const double jittered =
          setup.md_regime[plan.region] + config.md_user_jitter * gen.normal();

      if (jittered <= config.tolerance && jittered < md_floor) {
        // near-zero draws use the lone-trip construction: exactly zero
        // diversity, within tolerance of the drawn target
        plan.single_trip = true;
        plan.md_target = std::max(0.0, jittered);
        plan.md_realized = 0.0;
        plan.n_night = plan.n_out - 2;  // anchor + the final outbound call
        continue;
      }
      // draws below the closed-walk floor commit to the floor itself
      plan.md_target = std::clamp(jittered, md_floor, 0.985);

      const detail::TripMix mix = detail::trip_mix_for_target(plan.md_target, n_trips);
      if (std::fabs(mix.md_exact - plan.md_target) > config.tolerance)
        throw ValidationError("synth: user " + user_id(u) +
                              ": mobility diversity target " + csv::format_real(plan.md_target) +
                              " is not reachable with " + std::to_string(n_trips) + " trips");
      plan.dominant_repeats = mix.dominant_repeats;
      plan.md_realized = mix.md_exact;

      // distinct spread destinations: home region first, then global order
      plan.spread_towers.reserve(mix.spread_pairs);
      std::size_t cursor = 0;
      while (plan.spread_towers.size() < mix.spread_pairs) {
        if (cursor >= total_towers)
          throw ValidationError("synth: user " + user_id(u) + ": mobility diversity target " +
                                csv::format_real(plan.md_target) + " needs " +
                                std::to_string(mix.spread_pairs + 2) +
                                " towers but the corpus has " + std::to_string(total_towers));
        const std::size_t candidate =
            cursor < config.towers_per_region
                ? region_base + cursor
                : (region_base + cursor) % total_towers;
        ++cursor;
        if (int32_t(candidate) == plan.home_tower || int32_t(candidate) == plan.dominant_tower)
          continue;
        plan.spread_towers.push_back(int32_t(candidate));
      }
    }
  });

  // chronological event stream of one plan (anchor, excursions, nights);
  // excursions start and end at home, so interleaved nighttime home calls
  // never add trips. Call minutes are drawn uniformly inside the day/night
  // windows from a user-derived stream, sorted so the planned walk order is
  // preserved (equal minutes are fine: the consumer's stable sort keeps
  // file order). The stream depends only on (seed, user), so planning and
  // writing see identical events.
  auto enumerate_events = [&](std::size_t u, const UserPlan& plan,
                              const std::function<void(int64_t, int32_t)>& emit) {
    rng::Xoshiro256ss time_gen(rng::derive_seed(config.seed, 0x33000000ULL + u));
    constexpr int kDayLo = 8 * 60, kDayHi = 21 * 60;      // excursion window
    constexpr int kNightLo = 22 * 60, kNightHi = 23 * 60 + 55;  // night window

    auto sorted_minutes = [&](std::size_t count, int lo, int hi) {
      std::vector<int> minutes(count);
      for (int& m : minutes) m = lo + int(time_gen.bounded(uint64_t(hi - lo)));
      std::sort(minutes.begin(), minutes.end());
      return minutes;
    };

    emit((start_day)*1440 + 7 * 60 + 30, plan.home_tower);  // anchor at home

    if (plan.single_trip) {
      // every call at home except one final outbound call, so the walk has
      // exactly one trip
      const int night_days = std::max(1, config.days - 1);
      uint32_t night = 0;
      for (int day = 0; day < night_days; ++day) {
        std::size_t in_day = 0;
        while (night + in_day < plan.n_night &&
               int64_t(night + in_day) * night_days / int64_t(plan.n_night) == day)
          ++in_day;
        for (const int m : sorted_minutes(in_day, kNightLo, kNightHi))
          emit((start_day + day) * 1440 + m, plan.home_tower);
        night += uint32_t(in_day);
      }
      const int64_t final_minute =
          (start_day + config.days - 1) * 1440 + (config.days == 1 ? 23 * 60 + 59 : kDayLo);
      emit(final_minute, plan.dominant_tower);
      return;
    }

    const uint32_t excursions = plan.dominant_repeats + uint32_t(plan.spread_towers.size());
    uint32_t exc = 0;
    uint32_t night = 0;
    for (int day = 0; day < config.days; ++day) {
      std::size_t exc_today = 0;
      while (excursions > 0 && exc + exc_today < excursions &&
             int64_t(exc + exc_today) * config.days / int64_t(excursions) == day)
        ++exc_today;
      const std::vector<int> day_minutes = sorted_minutes(2 * exc_today, kDayLo, kDayHi);
      for (std::size_t e = 0; e < exc_today; ++e) {
        const uint32_t index = exc + uint32_t(e);
        const int32_t out_tower = index < plan.dominant_repeats
                                      ? plan.dominant_tower
                                      : plan.spread_towers[index - plan.dominant_repeats];
        const int64_t base = (start_day + day) * 1440;
        emit(base + day_minutes[2 * e], out_tower);
        emit(base + day_minutes[2 * e + 1], plan.home_tower);
      }
      exc += uint32_t(exc_today);

      std::size_t nights_today = 0;
      while (night + nights_today < plan.n_night &&
             int64_t(night + nights_today) * config.days / int64_t(plan.n_night) == day)
        ++nights_today;
      for (const int m : sorted_minutes(nights_today, kNightLo, kNightHi))
        emit((start_day + day) * 1440 + m, plan.home_tower);
      night += uint32_t(nights_today);
    }
  };

  // expected radius of gyration straight from the event stream
  par::parallel_chunks(config.users, 512, config.workers,
                       [&](std::size_t begin, std::size_t end, std::size_t) {
    std::vector<ingest::TrajectoryEvent> events;
    for (std::size_t u = begin; u < end; ++u) {
      events.clear();
      enumerate_events(u, plans[u],
                       [&](int64_t minute, int32_t tower) { events.push_back({minute, tower}); });
      plans[u].mv_expected = measures::mobility_volume(events, towers, geo::CoordMode::wgs84);
    }
  });

  // --- regional means and planted indicators ---
  std::vector<double> md_sum(config.regions, 0.0);
  std::vector<uint32_t> md_count(config.regions, 0);
  for (std::size_t u = 0; u < config.users; ++u) {
    md_sum[plans[u].region] += plans[u].md_realized;
    ++md_count[plans[u].region];
  }
  std::vector<double> mean_md(config.regions, 0.0);
  for (std::size_t r = 0; r < config.regions; ++r)
    if (md_count[r] > 0) mean_md[r] = md_sum[r] / double(md_count[r]);

  rng::Xoshiro256ss indicator_gen(rng::derive_seed(config.seed, 3));
  std::vector<double> di(config.regions), pci(config.regions);
  for (std::size_t r = 0; r < config.regions; ++r) {
    if (config.null_benchmark) {
      di[r] = indicator_gen.uniform(1.0, 9.0);
      pci[r] = indicator_gen.uniform(8000.0, 25000.0);
    } else {
      di[r] = config.di_intercept + config.di_md_slope * mean_md[r] +
              indicator_gen.normal(0.0, config.di_noise_sd);
      pci[r] = config.pci_intercept + config.pci_md_slope * mean_md[r] +
               indicator_gen.normal(0.0, config.pci_noise_sd);
    }
  }

  // --- files ---
  CorpusPaths paths;
  paths.cdr = out_dir + "/cdr.csv";
  paths.towers = out_dir + "/towers.csv";
  paths.regions = out_dir + "/regions.csv";
  paths.mapping = out_dir + "/tower_region.csv";
  paths.ground_truth = out_dir + "/ground_truth.json";

  {
    csv::AtomicWriter w(paths.towers);
    w.append("tower,latitude,longitude\n");
    for (std::size_t t = 0; t < total_towers; ++t) {
      w.append(tower_id(t));
      w.append(",");
      w.append_real(setup.tower_lat[t]);
      w.append(",");
      w.append_real(setup.tower_lon[t]);
      w.append("\n");
    }
    w.close();
  }
  {
    csv::AtomicWriter w(paths.regions);
    w.append("region_id,name,population,area_km2,deprivation_index,per_capita_income\n");
    for (std::size_t r = 0; r < config.regions; ++r) {
      w.append(region_id(r));
      w.append(",synthetic-");
      w.append_int(static_cast<long long>(r));
      w.append(",");
      w.append_int(static_cast<long long>(setup.population[r]));
      w.append(",");
      w.append_real(setup.area[r]);
      w.append(",");
      w.append_real(di[r]);
      w.append(",");
      w.append_real(pci[r]);
      w.append("\n");
    }
    w.close();
  }
  {
    csv::AtomicWriter w(paths.mapping);
    w.append("tower,region_id\n");
    for (std::size_t t = 0; t < total_towers; ++t) {
      w.append(tower_id(t));
      w.append(",");
      w.append(region_id(t / config.towers_per_region));
      w.append("\n");
    }
    w.close();
  }

  {
    // date strings repeat per day; format them once
    std::vector<std::string> date_of_day(std::size_t(config.days));
    for (int d = 0; d < config.days; ++d) {
      const std::string ts = timeparse::format_timestamp((start_day + d) * 1440);
      date_of_day[std::size_t(d)] = ts.substr(0, 10);
    }

    csv::AtomicWriter w(paths.cdr);
    w.append("timestamp,tower,caller,callee\n");
    std::string row;
    std::vector<uint32_t> callee_remaining;
    std::vector<std::size_t> callee_users;
    for (std::size_t u = 0; u < config.users; ++u) {
      const UserPlan& plan = plans[u];
      const GroupPlan& group = groups[plan.group];
      const std::string uid = user_id(u);

      // interleave contacts cyclically so call volumes spread over time
      callee_users.clear();
      callee_remaining.clear();
      const std::size_t member = u - group.first_user;
      for (std::size_t round = 0; round < std::size_t(group.k); ++round) {
        const std::size_t partner = detail::matching_partner(member, round, group.size);
        callee_users.push_back(group.first_user + partner);
        callee_remaining.push_back(group.contact_volumes[round] / 2);
      }
      std::size_t callee_cursor = 0;
      auto next_callee = [&]() -> std::size_t {
        for (std::size_t step = 0; step < callee_users.size(); ++step) {
          const std::size_t idx = (callee_cursor + step) % callee_users.size();
          if (callee_remaining[idx] > 0) {
            --callee_remaining[idx];
            callee_cursor = idx + 1;
            return callee_users[idx];
          }
        }
        throw std::logic_error("synth: callee budget exhausted before events");
      };

      enumerate_events(u, plan, [&](int64_t minute, int32_t tower) {
        const int day = int(minute / 1440 - start_day);
        const int mod = int(minute % 1440);
        row.clear();
        row += date_of_day[std::size_t(day)];
        row += ' ';
        row += char('0' + mod / 600);
        row += char('0' + (mod / 60) % 10);
        row += ':';
        row += char('0' + (mod % 60) / 10);
        row += char('0' + mod % 10);
        row += ',';
        row += towers.ids.name(tower);
        row += ',';
        row += uid;
        row += ',';
        row += user_id(next_callee());
        row += '\n';
        w.append(row);
      });
    }
    w.close();
  }

  {
    csv::AtomicWriter w(paths.ground_truth);
    w.append("{\n  \"window\": {\"start\": \"");
    w.append(timeparse::format_date(start_day));
    w.append("\", \"end\": \"");
    w.append(timeparse::format_date(start_day + config.days));
    w.append("\", \"days\": ");
    w.append_int(config.days);
    w.append("},\n");
    w.append("  \"planted\": {\"null_benchmark\": ");
    w.append(config.null_benchmark ? "true" : "false");
    w.append(",\n    \"deprivation\": {\"intercept\": ");
    w.append_real(config.null_benchmark ? 0.0 : config.di_intercept);
    w.append(", \"md_slope\": ");
    w.append_real(config.null_benchmark ? 0.0 : config.di_md_slope);
    w.append(", \"noise_sd\": ");
    w.append_real(config.di_noise_sd);
    w.append("},\n    \"income\": {\"intercept\": ");
    w.append_real(config.null_benchmark ? 0.0 : config.pci_intercept);
    w.append(", \"md_slope\": ");
    w.append_real(config.null_benchmark ? 0.0 : config.pci_md_slope);
    w.append(", \"noise_sd\": ");
    w.append_real(config.pci_noise_sd);
    w.append("}},\n");

    w.append("  \"regions\": [\n");
    for (std::size_t r = 0; r < config.regions; ++r) {
      w.append("    {\"region_id\": \"");
      w.append(region_id(r));
      w.append("\", \"md_regime\": ");
      w.append_real(setup.md_regime[r]);
      w.append(", \"mean_md\": ");
      w.append_real(mean_md[r]);
      w.append(", \"deprivation_index\": ");
      w.append_real(di[r]);
      w.append(", \"per_capita_income\": ");
      w.append_real(pci[r]);
      w.append(", \"users\": ");
      w.append_int(static_cast<long long>(md_count[r]));
      w.append(r + 1 < config.regions ? "},\n" : "}\n");
    }
    w.append("  ],\n");

    w.append("  \"users\": [\n");
    for (std::size_t u = 0; u < config.users; ++u) {
      const UserPlan& plan = plans[u];
      const GroupPlan& group = groups[plan.group];
      w.append("    {\"user_id\": \"");
      w.append(user_id(u));
      w.append("\", \"region_id\": \"");
      w.append(region_id(plan.region));
      w.append("\", \"home_tower\": \"");
      w.append(towers.ids.name(plan.home_tower));
      w.append("\", \"sv\": ");
      w.append_int(group.k);
      w.append(", \"sd_target\": ");
      w.append_real(group.sd_target);
      w.append(", \"sd_realized\": ");
      w.append_real(group.sd_realized);
      w.append(", \"md_target\": ");
      w.append_real(plan.md_target);
      w.append(", \"md_realized\": ");
      w.append_real(plan.md_realized);
      w.append(", \"mv_expected\": ");
      w.append_real(plan.mv_expected);
      w.append(", \"calls\": ");
      w.append_int(static_cast<long long>(plan.n_out));
      w.append(u + 1 < config.users ? "},\n" : "}\n");
    }
    w.append("  ]\n}\n");
    w.close();
  }

  return paths;
}

CorpusPaths generate_nulls_benchmark(GeneratorConfig config, const std::string& out_dir) {
  config.null_benchmark = true;
  return generate_corpus(config, out_dir);
}

}  // namespace nowcast::synthgen
