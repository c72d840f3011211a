#include "nowcast/territory.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <numeric>

#include "nowcast/csv.hpp"
#include "nowcast/error.hpp"

namespace nowcast::territory {

namespace {

std::optional<double> parse_optional_real(std::string_view s) {
  if (s.empty()) return std::nullopt;
  double v = 0;
  const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
  if (r.ec != std::errc() || r.ptr != s.data() + s.size()) return std::nullopt;
  return v;
}

}  // namespace

int RegionTable::find(std::string_view id) const {
  const auto it = std::lower_bound(regions.begin(), regions.end(), id,
                                   [](const Region& r, std::string_view key) { return r.id < key; });
  if (it == regions.end() || it->id != id) return -1;
  return int(it - regions.begin());
}

RegionTable load_regions(const std::string& path, double population_floor) {
  const std::string buf = csv::read_file(path);
  csv::RowScanner scanner(buf);
  std::vector<std::string_view> fields;
  if (!scanner.next(fields)) throw ValidationError("region file is empty: " + path);

  static constexpr std::string_view kRequired[] = {"region_id", "name", "population", "area_km2"};
  static constexpr std::string_view kIndicators[] = {"deprivation_index", "per_capita_income"};
  csv::check_header(fields, kRequired, kIndicators, path);

  int di_col = -1, pci_col = -1;
  for (std::size_t i = 4; i < fields.size(); ++i) {
    if (fields[i] == "deprivation_index") di_col = int(i);
    if (fields[i] == "per_capita_income") pci_col = int(i);
  }

  RegionTable out;
  out.has_deprivation = di_col >= 0;
  out.has_income = pci_col >= 0;
  const std::size_t column_count = fields.size();

  while (scanner.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != column_count)
      throw ValidationError("bad region row at " + path + ":" + std::to_string(scanner.line()));
    Region r;
    r.id = std::string(fields[0]);
    r.name = std::string(fields[1]);
    const auto pop = parse_optional_real(fields[2]);
    const auto area = parse_optional_real(fields[3]);
    if (r.id.empty() || !pop || !area || *pop <= 0.0 || *area <= 0.0)
      throw ValidationError("bad region row at " + path + ":" + std::to_string(scanner.line()));
    r.population = *pop;
    r.area_km2 = *area;
    if (di_col >= 0) r.deprivation_index = parse_optional_real(fields[std::size_t(di_col)]);
    if (pci_col >= 0) r.per_capita_income = parse_optional_real(fields[std::size_t(pci_col)]);

    if (r.population <= population_floor) {
      ++out.excluded_by_population;
      continue;
    }
    out.regions.push_back(std::move(r));
  }

  if (out.regions.empty())
    throw ValidationError("region file has no usable regions: " + path);

  std::sort(out.regions.begin(), out.regions.end(),
            [](const Region& a, const Region& b) { return a.id < b.id; });
  for (std::size_t i = 1; i < out.regions.size(); ++i)
    if (out.regions[i].id == out.regions[i - 1].id)
      throw ValidationError("duplicate region_id '" + out.regions[i].id + "' in " + path);
  return out;
}

TowerRegionMap map_tower_to_region(const ingest::TowerTable& towers,
                                   const RegionTable& regions,
                                   const std::optional<std::string>& mapping_path,
                                   const std::optional<std::string>& geometry_path,
                                   double centroid_cutoff_km, geo::CoordMode mode) {
  if (!mapping_path && !geometry_path)
    throw ValidationError("tower-region assignment needs a mapping file or a geometry file");

  TowerRegionMap out;
  out.region_of_tower.assign(towers.ids.size(), -1);

  if (mapping_path) {
    const std::string buf = csv::read_file(*mapping_path);
    csv::RowScanner scanner(buf);
    std::vector<std::string_view> fields;
    if (!scanner.next(fields)) throw ValidationError("mapping file is empty: " + *mapping_path);
    static constexpr std::string_view kHeader[] = {"tower", "region_id"};
    csv::check_header(fields, kHeader, {}, *mapping_path);
    while (scanner.next(fields)) {
      if (fields.size() == 1 && fields[0].empty()) continue;
      if (fields.size() != 2)
        throw ValidationError("bad mapping row at " + *mapping_path + ":" +
                              std::to_string(scanner.line()));
      const auto tower = towers.ids.find(fields[0]);
      if (!tower) continue;  // mapping may cover towers outside this corpus
      const int region = regions.find(fields[1]);
      // region may have been excluded by the population floor
      if (region >= 0) out.region_of_tower[std::size_t(*tower)] = region;
    }
  }

  if (geometry_path) {
    std::vector<geo::RegionGeometry> geometries = geo::load_geojson(*geometry_path);
    // keep only geometries of regions present in the table, in id order so
    // the on-edge tie goes to the lexicographically smallest region
    std::vector<std::pair<int, const geo::RegionGeometry*>> usable;
    for (const auto& g : geometries) {
      const int region = regions.find(g.region_id);
      if (region >= 0) usable.push_back({region, &g});
    }
    std::sort(usable.begin(), usable.end(), [&](const auto& a, const auto& b) {
      return regions.regions[std::size_t(a.first)].id < regions.regions[std::size_t(b.first)].id;
    });

    for (std::size_t t = 0; t < towers.ids.size(); ++t) {
      if (out.region_of_tower[t] >= 0) continue;  // explicit mapping wins
      const geo::GeoPoint p{towers.lat[t], towers.lon[t]};
      int found = -1;
      for (const auto& [region, g] : usable) {
        if (geo::contains_point(*g, p)) {
          found = region;
          break;  // first hit is the smallest region id
        }
      }
      if (found < 0) {
        // ties at equal distance keep the first candidate, i.e. the
        // smallest region id
        double best_d = centroid_cutoff_km;
        for (const auto& [region, g] : usable) {
          const double d = geo::distance_km(p, g->centroid, mode);
          if (d < best_d) {
            best_d = d;
            found = region;
          }
        }
      }
      out.region_of_tower[t] = found;
    }
  }

  for (const int32_t r : out.region_of_tower)
    if (r < 0) ++out.unassigned;
  if (towers.ids.size() > 0 &&
      double(out.unassigned) > 0.10 * double(towers.ids.size())) {
    out.many_unassigned_warning = true;
    std::fprintf(stderr, "warning: %zu of %zu towers could not be assigned to a region\n",
                 out.unassigned, towers.ids.size());
  }
  return out;
}

UserAssignment assign_users(const std::vector<measures::UserProfile>& profiles,
                            const TowerRegionMap& tower_region) {
  UserAssignment out;
  out.region_of_profile.resize(profiles.size(), -1);
  for (std::size_t i = 0; i < profiles.size(); ++i) {
    const int32_t region = tower_region.region_of_tower[std::size_t(profiles[i].home_tower)];
    out.region_of_profile[i] = region;
    if (region < 0) ++out.dropped;
  }
  return out;
}

std::vector<RegionAggregate> aggregate(const std::vector<measures::UserProfile>& profiles,
                                       const UserAssignment& assignment,
                                       const RegionTable& regions,
                                       const ingest::IdTable& users,
                                       uint32_t min_users, AggregateStats* stats) {
  if (min_users < 1) min_users = 1;

  std::vector<std::size_t> order(profiles.size());
  std::iota(order.begin(), order.end(), (std::size_t)0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return users.name(profiles[a].user) < users.name(profiles[b].user);
  });

  struct Sums {
    double sv = 0, sd = 0, mv = 0, md = 0;
    uint32_t count = 0;
  };
  std::vector<Sums> sums(regions.regions.size());
  for (const std::size_t i : order) {
    const int32_t region = assignment.region_of_profile[i];
    if (region < 0) continue;
    Sums& s = sums[std::size_t(region)];
    s.sv += double(profiles[i].social_volume);
    s.sd += profiles[i].social_diversity;
    s.mv += profiles[i].mobility_volume;
    s.md += profiles[i].mobility_diversity;
    ++s.count;
  }

  std::vector<RegionAggregate> out;
  std::size_t excluded = 0;
  std::size_t total_users = 0;
  for (std::size_t r = 0; r < sums.size(); ++r) {
    const Sums& s = sums[r];
    if (s.count == 0) continue;
    if (s.count < min_users) {
      ++excluded;
      continue;
    }
    RegionAggregate agg;
    agg.region = int32_t(r);
    agg.user_count = s.count;
    agg.mean_sv = s.sv / double(s.count);
    agg.mean_sd = s.sd / double(s.count);
    agg.mean_mv = s.mv / double(s.count);
    agg.mean_md = s.md / double(s.count);
    out.push_back(agg);
    total_users += s.count;
  }
  if (stats) {
    stats->excluded_regions = excluded;
    stats->aggregated_users = total_users;
  }
  return out;
}

uint64_t write_aggregates_csv(const std::string& path,
                              const std::vector<RegionAggregate>& aggregates,
                              const RegionTable& regions) {
  csv::AtomicWriter w(path);
  w.append("region_id,user_count,mean_SV,mean_SD,mean_MV,mean_MD\n");
  for (const RegionAggregate& a : aggregates) {
    w.append(regions.regions[std::size_t(a.region)].id);
    w.append(",");
    w.append_int(a.user_count);
    w.append(",");
    w.append_real(a.mean_sv);
    w.append(",");
    w.append_real(a.mean_sd);
    w.append(",");
    w.append_real(a.mean_mv);
    w.append(",");
    w.append_real(a.mean_md);
    w.append("\n");
  }
  return w.close();
}

std::vector<RegionAggregate> read_aggregates_csv(const std::string& path,
                                                 const RegionTable& regions) {
  const std::string buf = csv::read_file(path);
  csv::RowScanner scanner(buf);
  std::vector<std::string_view> fields;
  if (!scanner.next(fields)) throw ValidationError("aggregate file is empty: " + path);
  static constexpr std::string_view kHeader[] = {"region_id", "user_count", "mean_SV",
                                                 "mean_SD",   "mean_MV",    "mean_MD"};
  csv::check_header(fields, kHeader, {}, path);

  std::vector<RegionAggregate> out;
  while (scanner.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 6)
      throw ValidationError("bad aggregate row at " + path + ":" + std::to_string(scanner.line()));
    RegionAggregate a;
    const int region = regions.find(fields[0]);
    if (region < 0) continue;  // region excluded on this run's floor
    a.region = region;
    long long count = 0;
    std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), count);
    a.user_count = uint32_t(count);
    const auto sv = parse_optional_real(fields[2]);
    const auto sd = parse_optional_real(fields[3]);
    const auto mv = parse_optional_real(fields[4]);
    const auto md = parse_optional_real(fields[5]);
    if (!sv || !sd || !mv || !md)
      throw ValidationError("bad aggregate row at " + path + ":" + std::to_string(scanner.line()));
    a.mean_sv = *sv;
    a.mean_sd = *sd;
    a.mean_mv = *mv;
    a.mean_md = *md;
    out.push_back(a);
  }
  return out;
}

}  // namespace nowcast::territory
