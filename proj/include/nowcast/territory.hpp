#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nowcast/geo.hpp"
#include "nowcast/ingest.hpp"
#include "nowcast/measures.hpp"

namespace nowcast::territory {

struct Region {
  std::string id;
  std::string name;
  double population = 0.0;
  double area_km2 = 0.0;
  std::optional<double> deprivation_index;
  std::optional<double> per_capita_income;

  double population_density() const { return population / area_km2; }
};

struct RegionTable {
  std::vector<Region> regions;  // sorted by region id
  std::size_t excluded_by_population = 0;
  bool has_deprivation = false;
  bool has_income = false;

  int find(std::string_view id) const;
};

/// Regions with population ≤ population_floor are excluded. Duplicate ids
/// are fatal; indicator columns may be absent, the regions are kept with
/// the indicator marked absent.
RegionTable load_regions(const std::string& path, double population_floor = 1000.0);

struct TowerRegionMap {
  std::vector<int32_t> region_of_tower;  // index into RegionTable.regions, -1 unassigned
  std::size_t unassigned = 0;
  bool many_unassigned_warning = false;  // > 10% of towers
};

/// Explicit mapping rows win; remaining towers fall to polygon containment
/// (even-odd ray casting, ties to the lexicographically smallest region),
/// then to the nearest region centroid within `centroid_cutoff_km`.
TowerRegionMap map_tower_to_region(const ingest::TowerTable& towers,
                                   const RegionTable& regions,
                                   const std::optional<std::string>& mapping_path,
                                   const std::optional<std::string>& geometry_path,
                                   double centroid_cutoff_km = 10.0,
                                   geo::CoordMode mode = geo::CoordMode::wgs84);

struct UserAssignment {
  std::vector<int32_t> region_of_profile;  // aligned with the profiles vector, -1 dropped
  std::size_t dropped = 0;
};

/// A user belongs to the region of their home tower.
UserAssignment assign_users(const std::vector<measures::UserProfile>& profiles,
                            const TowerRegionMap& tower_region);

struct RegionAggregate {
  int32_t region = -1;  // index into RegionTable.regions
  uint32_t user_count = 0;
  double mean_sv = 0.0;
  double mean_sd = 0.0;
  double mean_mv = 0.0;
  double mean_md = 0.0;
};

struct AggregateStats {
  std::size_t excluded_regions = 0;  // below min_users
  std::size_t aggregated_users = 0;
};

/// Unweighted arithmetic means per region. Users are summed in sorted
/// user-id order so parallel runs stay bit-identical.
std::vector<RegionAggregate> aggregate(const std::vector<measures::UserProfile>& profiles,
                                       const UserAssignment& assignment,
                                       const RegionTable& regions,
                                       const ingest::IdTable& users,
                                       uint32_t min_users = 1,
                                       AggregateStats* stats = nullptr);

uint64_t write_aggregates_csv(const std::string& path,
                              const std::vector<RegionAggregate>& aggregates,
                              const RegionTable& regions);

std::vector<RegionAggregate> read_aggregates_csv(const std::string& path,
                                                 const RegionTable& regions);

}  // namespace nowcast::territory
