#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>

#include "nowcast/error.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/territory.hpp"

using namespace nowcast;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("nowcast_territory_" + std::to_string(::getpid()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
  std::string file(const std::string& name, const std::string& content) const {
    const fs::path p = path / name;
    std::ofstream out(p);
    out << content;
    return p.string();
  }
};

ingest::TowerTable towers_at(const std::vector<std::pair<double, double>>& latlon) {
  ingest::TowerTable towers;
  for (std::size_t i = 0; i < latlon.size(); ++i) {
    towers.ids.intern("T" + std::to_string(i));
    towers.lat.push_back(latlon[i].first);
    towers.lon.push_back(latlon[i].second);
  }
  return towers;
}

// two unit squares side by side: A covers lon [0,1], B covers lon [1,2]
const char* kTwoSquares = R"({
  "type": "FeatureCollection",
  "features": [
    {"type": "Feature", "properties": {"region_id": "A"},
     "geometry": {"type": "Polygon", "coordinates": [[[0,0],[1,0],[1,1],[0,1],[0,0]]]}},
    {"type": "Feature", "properties": {"region_id": "B"},
     "geometry": {"type": "Polygon", "coordinates": [[[1,0],[2,0],[2,1],[1,1],[1,0]]]}}
  ]
})";

const char* kRegionsAB =
    "region_id,name,population,area_km2,deprivation_index,per_capita_income\n"
    "A,alpha,5000,10,2.5,15000\n"
    "B,beta,8000,20,3.5,12000\n";

}  // namespace

TEST_CASE("region loading honors the population floor") {
  TempDir tmp;
  const std::string path = tmp.file("regions.csv",
                                    "region_id,name,population,area_km2,deprivation_index,per_capita_income\n"
                                    "tiny,t,999,5,1,1000\n"
                                    "edge,e,1000,5,1,1000\n"
                                    "kept,k,1001,5,1,1000\n");
  const auto table = territory::load_regions(path, 1000.0);
  CHECK(table.regions.size() == 1);
  CHECK(table.regions[0].id == "kept");
  CHECK(table.excluded_by_population == 2);
  CHECK(table.regions[0].population_density() == doctest::Approx(1001.0 / 5.0));
}

TEST_CASE("duplicate region ids and empty files are fatal") {
  TempDir tmp;
  CHECK_THROWS_AS(territory::load_regions(tmp.file("dup.csv",
                                                   "region_id,name,population,area_km2,deprivation_index,per_capita_income\n"
                                                   "A,a,2000,5,1,1\nA,b,3000,5,1,1\n"),
                                          1000.0),
                  ValidationError);
  CHECK_THROWS_AS(territory::load_regions(tmp.file("empty.csv", ""), 1000.0), ValidationError);
  CHECK_THROWS_AS(territory::load_regions(
                      tmp.file("headeronly.csv",
                               "region_id,name,population,area_km2,deprivation_index,per_capita_income\n"),
                      1000.0),
                  ValidationError);
}

TEST_CASE("missing indicator columns leave regions usable with absent values") {
  TempDir tmp;
  const auto table = territory::load_regions(
      tmp.file("regions.csv", "region_id,name,population,area_km2\nA,a,5000,10\n"), 1000.0);
  REQUIRE(table.regions.size() == 1);
  CHECK_FALSE(table.regions[0].deprivation_index.has_value());
  CHECK_FALSE(table.regions[0].per_capita_income.has_value());
  CHECK_FALSE(table.has_deprivation);

  const auto partial = territory::load_regions(
      tmp.file("partial.csv",
               "region_id,name,population,area_km2,deprivation_index,per_capita_income\n"
               "A,a,5000,10,,12000\n"),
      1000.0);
  CHECK_FALSE(partial.regions[0].deprivation_index.has_value());
  CHECK(partial.regions[0].per_capita_income.has_value());
}

TEST_CASE("tower assignment: containment, centroid fallback, explicit override") {
  TempDir tmp;
  const std::string geometry = tmp.file("regions.geojson", kTwoSquares);
  const std::string regions_path = tmp.file("regions.csv", kRegionsAB);
  const auto regions = territory::load_regions(regions_path, 100.0);

  SUBCASE("containment decides when the point is inside a polygon") {
    const auto towers = towers_at({{0.5, 0.5}, {0.5, 1.5}});
    const auto map = territory::map_tower_to_region(towers, regions, std::nullopt, geometry,
                                                    10.0, geo::CoordMode::planar);
    CHECK(regions.regions[std::size_t(map.region_of_tower[0])].id == "A");
    CHECK(regions.regions[std::size_t(map.region_of_tower[1])].id == "B");
    CHECK(map.unassigned == 0);
  }
  SUBCASE("points on the shared edge go to the lexicographically smallest region") {
    const auto towers = towers_at({{0.5, 1.0}});
    const auto map = territory::map_tower_to_region(towers, regions, std::nullopt, geometry,
                                                    10.0, geo::CoordMode::planar);
    CHECK(regions.regions[std::size_t(map.region_of_tower[0])].id == "A");
  }
  SUBCASE("outside every polygon the nearest centroid within the cutoff wins") {
    const auto towers = towers_at({{0.5, 2.6}});  // 1.1 from B's centroid (1.5, 0.5)
    const auto map = territory::map_tower_to_region(towers, regions, std::nullopt, geometry,
                                                    3.0, geo::CoordMode::planar);
    CHECK(regions.regions[std::size_t(map.region_of_tower[0])].id == "B");
  }
  SUBCASE("outside the cutoff the tower stays unassigned and is tallied") {
    const auto towers = towers_at({{0.5, 50.0}});
    const auto map = territory::map_tower_to_region(towers, regions, std::nullopt, geometry,
                                                    3.0, geo::CoordMode::planar);
    CHECK(map.region_of_tower[0] == -1);
    CHECK(map.unassigned == 1);
    CHECK(map.many_unassigned_warning);
  }
  SUBCASE("an explicit mapping row overrides containment") {
    const auto towers = towers_at({{0.5, 0.5}});
    const std::string mapping = tmp.file("map.csv", "tower,region_id\nT0,B\n");
    const auto map = territory::map_tower_to_region(towers, regions, mapping, geometry, 10.0,
                                                    geo::CoordMode::planar);
    CHECK(regions.regions[std::size_t(map.region_of_tower[0])].id == "B");
  }
  SUBCASE("either a mapping or a geometry source is required") {
    const auto towers = towers_at({{0.5, 0.5}});
    CHECK_THROWS_AS(territory::map_tower_to_region(towers, regions, std::nullopt, std::nullopt,
                                                   10.0, geo::CoordMode::planar),
                    ValidationError);
  }
}

TEST_CASE("multipolygons with holes assign by even-odd parity") {
  TempDir tmp;
  const char* donut = R"({
    "type": "FeatureCollection",
    "features": [
      {"type": "Feature", "properties": {"region_id": "A"},
       "geometry": {"type": "MultiPolygon", "coordinates": [
         [[[0,0],[4,0],[4,4],[0,4],[0,0]], [[1,1],[3,1],[3,3],[1,3],[1,1]]]
       ]}}
    ]
  })";
  const std::string geometry = tmp.file("donut.geojson", donut);
  const std::string regions_path = tmp.file("regions.csv",
                                            "region_id,name,population,area_km2\nA,a,5000,10\n");
  const auto regions = territory::load_regions(regions_path, 100.0);
  const auto towers = towers_at({{0.5, 0.5}, {2.0, 2.0}});
  // zero cutoff disables the centroid fallback so only parity decides
  const auto map = territory::map_tower_to_region(towers, regions, std::nullopt, geometry, 0.0,
                                                  geo::CoordMode::planar);
  CHECK(map.region_of_tower[0] == 0);   // in the ring
  CHECK(map.region_of_tower[1] == -1);  // in the hole
}

namespace {

std::vector<measures::UserProfile> profiles_with_md(const std::vector<double>& md,
                                                    ingest::IdTable& users) {
  std::vector<measures::UserProfile> out;
  for (std::size_t i = 0; i < md.size(); ++i) {
    measures::UserProfile p;
    p.user = users.intern("u" + std::to_string(i));
    p.social_volume = int32_t(i % 5);
    p.social_diversity = md[i] / 2.0;
    p.mobility_volume = 1.0 + double(i);
    p.mobility_diversity = md[i];
    p.home_tower = 0;
    out.push_back(p);
  }
  return out;
}

}  // namespace

TEST_CASE("users inherit the region of their home tower") {
  territory::TowerRegionMap map;
  map.region_of_tower = {1, -1};

  ingest::IdTable users;
  auto profiles = profiles_with_md({0.2, 0.4, 0.6}, users);
  profiles[1].home_tower = 1;  // unassigned tower

  const auto assignment = territory::assign_users(profiles, map);
  CHECK(assignment.region_of_profile[0] == 1);
  CHECK(assignment.region_of_profile[1] == -1);
  CHECK(assignment.region_of_profile[2] == 1);
  CHECK(assignment.dropped == 1);
}

TEST_CASE("aggregation is the arithmetic mean with deterministic exclusions") {
  TempDir tmp;
  const auto regions = territory::load_regions(tmp.file("regions.csv", kRegionsAB), 100.0);

  ingest::IdTable users;
  auto profiles = profiles_with_md({0.2, 0.4, 0.9}, users);
  territory::UserAssignment assignment;
  assignment.region_of_profile = {0, 0, 1};  // two users in A, one in B

  territory::AggregateStats stats;
  const auto aggregates = territory::aggregate(profiles, assignment, regions, users, 1, &stats);
  REQUIRE(aggregates.size() == 2);
  CHECK(aggregates[0].user_count == 2);
  CHECK(aggregates[0].mean_md == doctest::Approx(0.3).epsilon(1e-12));
  CHECK(aggregates[1].user_count == 1);
  CHECK(aggregates[1].mean_md == doctest::Approx(0.9).epsilon(1e-12));
  CHECK(stats.aggregated_users == 3);

  SUBCASE("a single-user region reports that user's measures") {
    CHECK(aggregates[1].mean_mv == doctest::Approx(3.0).epsilon(1e-12));
  }
  SUBCASE("regions below min_users are excluded and tallied") {
    territory::AggregateStats strict_stats;
    const auto strict =
        territory::aggregate(profiles, assignment, regions, users, 2, &strict_stats);
    REQUIRE(strict.size() == 1);
    CHECK(strict[0].user_count == 2);
    CHECK(strict_stats.excluded_regions == 1);
  }
  SUBCASE("user order does not change the aggregate") {
    std::vector<measures::UserProfile> shuffled = {profiles[2], profiles[0], profiles[1]};
    territory::UserAssignment shuffled_assignment;
    shuffled_assignment.region_of_profile = {1, 0, 0};
    const auto again =
        territory::aggregate(shuffled, shuffled_assignment, regions, users, 1, nullptr);
    REQUIRE(again.size() == 2);
    CHECK(again[0].mean_md == aggregates[0].mean_md);
    CHECK(again[0].mean_sv == aggregates[0].mean_sv);
    CHECK(again[1].mean_md == aggregates[1].mean_md);
  }
}

TEST_CASE("aggregate user counts plus drops cover every profile") {
  rng::Xoshiro256ss gen(8);
  ingest::IdTable users;
  std::vector<double> md;
  for (int i = 0; i < 200; ++i) md.push_back(gen.next_double());
  auto profiles = profiles_with_md(md, users);

  territory::TowerRegionMap map;
  map.region_of_tower = {0};
  territory::UserAssignment assignment;
  assignment.region_of_profile.resize(profiles.size());
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    if (gen.bounded(10) == 0) {
      assignment.region_of_profile[i] = -1;
      ++dropped;
    } else {
      assignment.region_of_profile[i] = int32_t(gen.bounded(2));
    }
  }
  assignment.dropped = dropped;

  TempDir tmp;
  const auto regions = territory::load_regions(tmp.file("regions.csv", kRegionsAB), 100.0);
  territory::AggregateStats stats;
  const auto aggregates = territory::aggregate(profiles, assignment, regions, users, 1, &stats);
  std::size_t total = 0;
  for (const auto& a : aggregates) {
    total += a.user_count;
    CHECK(a.mean_sd >= 0.0);
    CHECK(a.mean_sd <= 1.0);
    CHECK(a.mean_md >= 0.0);
    CHECK(a.mean_md <= 1.0);
    CHECK(a.mean_mv >= 0.0);
  }
  CHECK(total + dropped == profiles.size());
}
