#include "nowcast/measures.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "nowcast/csv.hpp"
#include "nowcast/error.hpp"
#include "nowcast/kernels.hpp"
#include "nowcast/parallel.hpp"

namespace nowcast::measures {

double entropy_counts(std::span<const uint32_t> counts) {
  // H = ln N - (Σ c·ln c)/N
  double total = 0.0;
  double c_log_c = 0.0;
  for (const uint32_t c : counts) {
    if (c == 0) continue;
    total += double(c);
    c_log_c += double(c) * std::log(double(c));
  }
  if (total <= 0.0) return 0.0;
  const double h = std::log(total) - c_log_c / total;
  return h > 0.0 ? h : 0.0;  // clamp -0.0 / rounding dust
}

double normalized_entropy(std::span<const uint32_t> counts, std::size_t denominator) {
  if (denominator <= 1) return 0.0;
  return entropy_counts(counts) / std::log(double(denominator));
}

int social_volume(const ingest::CallGraph& graph, int32_t user) {
  if (user < 0 || std::size_t(user) >= graph.user_count())
    throw std::logic_error("social_volume: unknown user (pipeline order bug)");
  return int(graph.degree(user));
}

double social_diversity(const ingest::CallGraph& graph, int32_t user) {
  if (user < 0 || std::size_t(user) >= graph.user_count())
    throw std::logic_error("social_diversity: unknown user (pipeline order bug)");
  const auto& neighbors = graph.neighbors(user);
  const std::size_t k = neighbors.size();
  if (k <= 1) return 0.0;
  std::vector<uint32_t> volumes;
  volumes.reserve(k);
  for (const auto& n : neighbors) volumes.push_back(n.total());
  return normalized_entropy(volumes, k);
}

double mobility_volume(std::span<const ingest::TrajectoryEvent> events,
                       const ingest::TowerTable& towers, geo::CoordMode mode) {
  if (events.empty())
    throw std::logic_error("mobility_volume: empty trajectory (pipeline order bug)");

  // distinct towers with visitation frequencies, in first-visit order
  std::vector<int32_t> tower_ids;
  std::vector<double> freq;
  for (const auto& ev : events) {
    bool found = false;
    for (std::size_t i = 0; i < tower_ids.size(); ++i) {
      if (tower_ids[i] == ev.tower) {
        freq[i] += 1.0;
        found = true;
        break;
      }
    }
    if (!found) {
      tower_ids.push_back(ev.tower);
      freq.push_back(1.0);
    }
  }
  if (tower_ids.size() == 1) return 0.0;

  const double total = double(events.size());

  // unweighted centroid anchors the projection
  geo::GeoPoint anchor;
  for (const int32_t t : tower_ids) {
    anchor.lat += towers.lat[std::size_t(t)];
    anchor.lon += towers.lon[std::size_t(t)];
  }
  anchor.lat /= double(tower_ids.size());
  anchor.lon /= double(tower_ids.size());

  const geo::LocalProjection proj(anchor, mode);
  std::vector<double> xs(tower_ids.size()), ys(tower_ids.size());
  for (std::size_t i = 0; i < tower_ids.size(); ++i) {
    const geo::GeoPoint p{towers.lat[std::size_t(tower_ids[i])],
                          towers.lon[std::size_t(tower_ids[i])]};
    proj.project(p, xs[i], ys[i]);
  }
  const double cm_x = simd::dot(xs, freq) / total;
  const double cm_y = simd::dot(ys, freq) / total;

  double weighted_sq = 0.0;
  if (mode == geo::CoordMode::planar) {
    weighted_sq = simd::weighted_sqdist(xs, ys, freq, cm_x, cm_y);
  } else {
    const geo::GeoPoint center = proj.unproject(cm_x, cm_y);
    for (std::size_t i = 0; i < tower_ids.size(); ++i) {
      const geo::GeoPoint p{towers.lat[std::size_t(tower_ids[i])],
                            towers.lon[std::size_t(tower_ids[i])]};
      const double d = geo::haversine_km(p, center);
      weighted_sq += freq[i] * d * d;
    }
  }
  return std::sqrt(weighted_sq / total);
}

double mobility_diversity(std::span<const ingest::TrajectoryEvent> events,
                          std::vector<TripCount>* trips_out) {
  std::vector<uint64_t> trips;
  for (std::size_t i = 1; i < events.size(); ++i) {
    const int32_t a = events[i - 1].tower;
    const int32_t b = events[i].tower;
    if (a == b) continue;
    trips.push_back((uint64_t(uint32_t(a)) << 32) | uint64_t(uint32_t(b)));
  }
  std::sort(trips.begin(), trips.end());

  std::vector<uint32_t> counts;
  for (std::size_t i = 0; i < trips.size();) {
    std::size_t j = i;
    while (j < trips.size() && trips[j] == trips[i]) ++j;
    counts.push_back(uint32_t(j - i));
    if (trips_out)
      trips_out->push_back({int32_t(trips[i] >> 32), int32_t(trips[i] & 0xffffffffu),
                            uint32_t(j - i)});
    i = j;
  }
  return normalized_entropy(counts, trips.size());
}

int32_t home_tower(std::span<const ingest::TrajectoryEvent> events,
                   const ingest::TowerTable& towers,
                   const timeparse::MinuteWindow& night) {
  if (events.empty())
    throw std::logic_error("home_tower: empty trajectory (pipeline order bug)");

  struct TowerUse {
    int32_t tower;
    uint32_t night_count = 0;
    uint32_t total_count = 0;
  };
  std::vector<TowerUse> uses;
  for (const auto& ev : events) {
    const int minute_of_day = int(((ev.minute % 1440) + 1440) % 1440);
    const bool at_night = night.contains(minute_of_day);
    bool found = false;
    for (auto& u : uses) {
      if (u.tower == ev.tower) {
        ++u.total_count;
        if (at_night) ++u.night_count;
        found = true;
        break;
      }
    }
    if (!found) uses.push_back({ev.tower, at_night ? 1u : 0u, 1u});
  }

  bool any_night = false;
  for (const auto& u : uses) any_night = any_night || u.night_count > 0;

  const TowerUse* best = &uses[0];
  for (const auto& u : uses) {
    const uint32_t primary_u = any_night ? u.night_count : u.total_count;
    const uint32_t primary_b = any_night ? best->night_count : best->total_count;
    if (primary_u != primary_b) {
      if (primary_u > primary_b) best = &u;
      continue;
    }
    if (u.total_count != best->total_count) {
      if (u.total_count > best->total_count) best = &u;
      continue;
    }
    if (towers.ids.name(u.tower) < towers.ids.name(best->tower)) best = &u;
  }
  return best->tower;
}

std::vector<UserProfile> compute_all_profiles(const ingest::Trajectories& trajectories,
                                              const ingest::CallGraph& graph,
                                              const ingest::TowerTable& towers,
                                              const MeasureOptions& options,
                                              ProfileStats* stats) {
  const std::size_t user_count = trajectories.retained.size();
  std::vector<int32_t> retained_users;
  for (std::size_t u = 0; u < user_count; ++u)
    if (trajectories.retained[u]) retained_users.push_back(int32_t(u));

  std::vector<UserProfile> profiles(retained_users.size());
  std::atomic<std::size_t> skipped{0};

  par::parallel_chunks(retained_users.size(), 1024, options.workers,
                       [&](std::size_t begin, std::size_t end, std::size_t) {
                         for (std::size_t i = begin; i < end; ++i) {
                           const int32_t u = retained_users[i];
                           const auto& events = trajectories.events[std::size_t(u)];
                           UserProfile& p = profiles[i];
                           p.user = u;
                           if (events.empty()) {
                             ++skipped;
                             continue;
                           }
                           p.social_volume = social_volume(graph, u);
                           p.social_diversity = social_diversity(graph, u);
                           for (const auto& n : graph.neighbors(u))
                             p.contact_calls.push_back({n.user, n.total()});
                           p.mobility_volume = mobility_volume(events, towers, options.mode);
                           p.mobility_diversity = mobility_diversity(events, &p.trip_counts);
                           p.home_tower = home_tower(events, towers, options.night);
                         }
                       });

  if (stats) stats->skipped_empty = skipped.load();
  // retained users always have ≥ 1 outgoing call, so empty trajectories can
  // only appear through a caller bug; drop their placeholders after tallying
  std::vector<UserProfile> out;
  out.reserve(profiles.size());
  for (auto& p : profiles)
    if (p.home_tower >= 0) out.push_back(std::move(p));
  return out;
}

uint64_t write_profiles_csv(const std::string& path,
                            const std::vector<UserProfile>& profiles,
                            const ingest::IdTable& users,
                            const ingest::TowerTable& towers) {
  std::vector<std::size_t> order(profiles.size());
  std::iota(order.begin(), order.end(), (std::size_t)0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return users.name(profiles[a].user) < users.name(profiles[b].user);
  });

  csv::AtomicWriter w(path);
  w.append("user_id,SV,SD,MV,MD,home_tower\n");
  for (const std::size_t i : order) {
    const UserProfile& p = profiles[i];
    w.append(users.name(p.user));
    w.append(",");
    w.append_int(p.social_volume);
    w.append(",");
    w.append_real(p.social_diversity);
    w.append(",");
    w.append_real(p.mobility_volume);
    w.append(",");
    w.append_real(p.mobility_diversity);
    w.append(",");
    w.append(towers.ids.name(p.home_tower));
    w.append("\n");
  }
  return w.close();
}

}  // namespace nowcast::measures
