#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "nowcast/geo.hpp"
#include "nowcast/ingest.hpp"
#include "nowcast/timeparse.hpp"

namespace nowcast::measures {

struct MeasureOptions {
  geo::CoordMode mode = geo::CoordMode::wgs84;
  timeparse::MinuteWindow night;  // 22:00-07:00 default
  int workers = 1;
};

struct TripCount {
  int32_t from;
  int32_t to;
  uint32_t count;
};

struct ContactCalls {
  int32_t contact;
  uint32_t calls;  // both directions on the edge
};

struct UserProfile {
  int32_t user = -1;
  int32_t social_volume = 0;        // reciprocated degree
  double social_diversity = 0.0;    // normalized call entropy over contacts
  double mobility_volume = 0.0;     // radius of gyration, km
  double mobility_diversity = 0.0;  // normalized trip entropy
  int32_t home_tower = -1;
  std::vector<TripCount> trip_counts;
  std::vector<ContactCalls> contact_calls;
};

/// -Σ p·ln p over count frequencies (natural log).
double entropy_counts(std::span<const uint32_t> counts);

/// entropy / ln(denominator); 0 when denominator ≤ 1.
double normalized_entropy(std::span<const uint32_t> counts, std::size_t denominator);

int social_volume(const ingest::CallGraph& graph, int32_t user);

/// Normalized entropy of the user's call distribution over contacts;
/// 0 for degree ≤ 1. Call volume per contact counts both directions.
double social_diversity(const ingest::CallGraph& graph, int32_t user);

/// Radius of gyration over visited towers, weighted by visitation
/// frequency. Center of mass from a local equirectangular projection about
/// the unweighted tower centroid; point distances are geodesic (or
/// Euclidean in planar mode).
double mobility_volume(std::span<const ingest::TrajectoryEvent> events,
                       const ingest::TowerTable& towers, geo::CoordMode mode);

/// Trips are consecutive events at distinct towers; same-tower repeats are
/// stationarity, not movement. Normalized by ln(total trips); 0 when the
/// user made at most one trip.
double mobility_diversity(std::span<const ingest::TrajectoryEvent> events,
                          std::vector<TripCount>* trips_out = nullptr);

/// Tower with the most events in the night window; ties broken by all-day
/// count, then lexicographically smallest tower id. Falls back to the
/// all-day maximum when the user has no nighttime events.
int32_t home_tower(std::span<const ingest::TrajectoryEvent> events,
                   const ingest::TowerTable& towers,
                   const timeparse::MinuteWindow& night);

struct ProfileStats {
  std::size_t skipped_empty = 0;
};

/// One profile per retained user, ordered by user index. Per-user work is
/// independent; results are invariant to the worker count.
std::vector<UserProfile> compute_all_profiles(const ingest::Trajectories& trajectories,
                                              const ingest::CallGraph& graph,
                                              const ingest::TowerTable& towers,
                                              const MeasureOptions& options,
                                              ProfileStats* stats = nullptr);

/// CSV dump `user_id,SV,SD,MV,MD,home_tower`, rows sorted by user id.
/// Returns the content hash.
uint64_t write_profiles_csv(const std::string& path,
                            const std::vector<UserProfile>& profiles,
                            const ingest::IdTable& users,
                            const ingest::TowerTable& towers);

}  // namespace nowcast::measures
