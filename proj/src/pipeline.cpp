#include "nowcast/pipeline.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <set>

#include "nowcast/classify.hpp"
#include "nowcast/csv.hpp"
#include "nowcast/error.hpp"
#include "nowcast/geo.hpp"
#include "nowcast/ingest.hpp"
#include "nowcast/measures.hpp"
#include "nowcast/parallel.hpp"
#include "nowcast/regression.hpp"
#include "nowcast/rng.hpp"
#include "nowcast/stats.hpp"
#include "nowcast/synthgen.hpp"
#include "nowcast/territory.hpp"
#include "nowcast/timeparse.hpp"

namespace nowcast::pipeline {

namespace fs = std::filesystem;

// ---------------------------------------------------------------------------
// Config

Config Config::from_file(const std::string& path) {
  Config config;
  const std::string buf = csv::read_file(path);
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < buf.size()) {
    std::size_t end = buf.find('\n', pos);
    if (end == std::string::npos) end = buf.size();
    std::string_view line(buf.data() + pos, end - pos);
    pos = end + 1;
    ++line_no;

    const std::size_t hash = line.find('#');
    if (hash != std::string_view::npos) line = line.substr(0, hash);
    auto trim = [](std::string_view s) {
      while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r'))
        s.remove_prefix(1);
      while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r'))
        s.remove_suffix(1);
      return s;
    };
    line = trim(line);
    if (line.empty()) continue;
    const std::size_t eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ValidationError("bad config line " + std::to_string(line_no) + " in " + path);
    std::string_view key = trim(line.substr(0, eq));
    std::string_view value = trim(line.substr(eq + 1));
    if (value.size() >= 2 && ((value.front() == '"' && value.back() == '"') ||
                              (value.front() == '\'' && value.back() == '\'')))
      value = value.substr(1, value.size() - 2);
    if (key.empty()) throw ValidationError("bad config line " + std::to_string(line_no) + " in " + path);
    config.values_[std::string(key)] = std::string(value);
  }
  return config;
}

std::string Config::get_string(const std::string& key, const std::string& fallback) const {
  const auto it = values_.find(key);
  return it == values_.end() ? fallback : it->second;
}

std::string Config::require_string(const std::string& key) const {
  const auto it = values_.find(key);
  if (it == values_.end() || it->second.empty())
    throw ValidationError("missing required config key: " + key);
  return it->second;
}

double Config::get_real(const std::string& key, double fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  double v = 0;
  const auto r = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (r.ec != std::errc() || r.ptr != it->second.data() + it->second.size())
    throw ValidationError("config key " + key + " is not a number: " + it->second);
  return v;
}

int64_t Config::get_int(const std::string& key, int64_t fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  int64_t v = 0;
  const auto r = std::from_chars(it->second.data(), it->second.data() + it->second.size(), v);
  if (r.ec != std::errc() || r.ptr != it->second.data() + it->second.size())
    throw ValidationError("config key " + key + " is not an integer: " + it->second);
  return v;
}

bool Config::get_bool(const std::string& key, bool fallback) const {
  const auto it = values_.find(key);
  if (it == values_.end()) return fallback;
  if (it->second == "true" || it->second == "1") return true;
  if (it->second == "false" || it->second == "0") return false;
  throw ValidationError("config key " + key + " is not a boolean: " + it->second);
}

uint64_t Config::require_seed(const std::string& stage) const {
  if (!has("seed"))
    throw ValidationError("stage '" + stage + "' is randomized and needs an explicit --seed");
  return uint64_t(get_int("seed", 0));
}

int Config::workers() const {
  const int64_t v = get_int("runtime.workers", 0);
  return v >= 1 ? int(v) : par::default_workers();
}

uint64_t Config::semantic_hash() const {
  uint64_t h = csv::kFnvOffset;
  for (const auto& [key, value] : values_) {
    if (key.rfind("runtime.", 0) == 0 || key == "paths.out") continue;
    h = csv::fnv1a(key, h);
    h = csv::fnv1a("=", h);
    h = csv::fnv1a(value, h);
    h = csv::fnv1a("\n", h);
  }
  return h;
}

// ---------------------------------------------------------------------------
// Manifests

namespace {

std::string hex64(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", (unsigned long long)v);
  return buf;
}

std::string basename_of(const std::string& path) { return fs::path(path).filename().string(); }

std::string join(const std::string& dir, const std::string& name) {
  return (fs::path(dir) / name).string();
}

struct FileDigest {
  uint64_t hash = 0;
  std::size_t newlines = 0;
};

FileDigest digest_file(const std::string& path) {
  std::FILE* f = std::fopen(path.c_str(), "rb");
  if (!f) throw IoError("cannot open file: " + path);
  FileDigest d;
  d.hash = csv::kFnvOffset;
  char buf[1 << 16];
  std::size_t got;
  while ((got = std::fread(buf, 1, sizeof buf, f)) > 0) {
    d.hash = csv::fnv1a(std::string_view(buf, got), d.hash);
    for (std::size_t i = 0; i < got; ++i)
      if (buf[i] == '\n') ++d.newlines;
  }
  std::fclose(f);
  return d;
}

ManifestFile manifest_input(const std::string& path) {
  const FileDigest d = digest_file(path);
  return {basename_of(path), hex64(d.hash), d.newlines};
}

double round9(double v) {
  if (!std::isfinite(v)) return v;
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.9g", v);
  return std::atof(buf);
}

}  // namespace

nlohmann::json Manifest::to_json() const {
  nlohmann::json j;
  j["stage"] = stage;
  j["config_hash"] = config_hash;
  auto files = [](const std::vector<ManifestFile>& list) {
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& f : list)
      arr.push_back({{"file", f.file}, {"hash", f.hash}, {"rows", f.rows}});
    return arr;
  };
  j["inputs"] = files(inputs);
  j["outputs"] = files(outputs);
  return j;
}

Manifest Manifest::from_json(const nlohmann::json& j) {
  Manifest m;
  m.stage = j.value("stage", "");
  m.config_hash = j.value("config_hash", "");
  auto files = [](const nlohmann::json& arr) {
    std::vector<ManifestFile> out;
    for (const auto& f : arr)
      out.push_back({f.value("file", ""), f.value("hash", ""), f.value("rows", std::size_t(0))});
    return out;
  };
  if (j.contains("inputs")) m.inputs = files(j["inputs"]);
  if (j.contains("outputs")) m.outputs = files(j["outputs"]);
  return m;
}

namespace {

void write_manifest(const Config& config, Manifest manifest) {
  manifest.config_hash = hex64(config.semantic_hash());
  const std::string path = join(config.out_dir(), "manifest_" + manifest.stage + ".json");
  csv::write_atomic(path, manifest.to_json().dump(2) + "\n");
}

// artifact → producing stage, for prerequisite errors
const std::map<std::string, std::string>& artifact_producers() {
  static const std::map<std::string, std::string> map = {
      {"filtered_events.csv", "ingest"},   {"call_graph.csv", "ingest"},
      {"profiles.csv", "measures"},        {"aggregates.csv", "aggregate"},
      {"user_region.csv", "aggregate"},    {"correlations.csv", "correlate"},
      {"correlations_nm1.csv", "nullmodel"}, {"correlations_nm2.csv", "nullmodel"},
      {"nm1_aggregates.csv", "nullmodel"}, {"nm2_indicators.csv", "nullmodel"},
      {"fit_m1.json", "regress"},          {"fit_m2.json", "regress"},
      {"cv_m1.csv", "regress"},            {"cv_m2.csv", "regress"},
      {"relerr_m1.csv", "regress"},        {"relerr_m2.csv", "regress"},
      {"classify_c1.json", "classify"},    {"classify_c2.json", "classify"},
  };
  return map;
}

void require_artifact(const Config& config, const std::string& name) {
  const std::string path = join(config.out_dir(), name);
  if (csv::file_exists(path)) return;
  const auto it = artifact_producers().find(name);
  const std::string stage = it == artifact_producers().end() ? "?" : it->second;
  throw MissingArtifactError("missing artifact '" + name + "'; run stage '" + stage + "' first");
}

// ---------------------------------------------------------------------------
// shared loaders

ingest::ObservationWindow window_from_config(const Config& config, bool* configured) {
  const std::string start = config.get_string("observation.start", "");
  const std::string end = config.get_string("observation.end", "");
  if (start.empty() != end.empty())
    throw ValidationError("observation.start and observation.end must be set together");
  if (start.empty()) {
    if (configured) *configured = false;
    return {};
  }
  const auto s = timeparse::parse_date_days(start);
  const auto e = timeparse::parse_date_days(end);
  if (!s || !e) throw ValidationError("bad observation window dates");
  ingest::ObservationWindow w{*s, *e};
  if (w.length_days() < 1)
    throw ValidationError("observation window must be at least one day (end is exclusive)");
  if (configured) *configured = true;
  return w;
}

timeparse::MinuteWindow night_from_config(const Config& config) {
  timeparse::MinuteWindow night;
  const auto start = timeparse::parse_time_of_day(config.get_string("night.start", "22:00"));
  const auto end = timeparse::parse_time_of_day(config.get_string("night.end", "07:00"));
  if (!start || !end) throw ValidationError("bad night window times");
  night.start = *start;
  night.end = *end;
  return night;
}

geo::CoordMode mode_from_config(const Config& config) {
  return geo::parse_coord_mode(config.get_string("geo.mode", "wgs84"));
}

struct LoadedProfiles {
  std::vector<measures::UserProfile> profiles;  // sorted by user id
  ingest::IdTable users;
};

LoadedProfiles load_profiles_csv(const std::string& path, const ingest::TowerTable& towers) {
  LoadedProfiles out;
  const std::string buf = csv::read_file(path);
  csv::RowScanner scanner(buf);
  std::vector<std::string_view> fields;
  if (!scanner.next(fields)) throw ValidationError("profiles file is empty: " + path);
  static constexpr std::string_view kHeader[] = {"user_id", "SV", "SD", "MV", "MD", "home_tower"};
  csv::check_header(fields, kHeader, {}, path);
  while (scanner.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    if (fields.size() != 6)
      throw ValidationError("bad profile row at " + path + ":" + std::to_string(scanner.line()));
    measures::UserProfile p;
    p.user = out.users.intern(fields[0]);
    auto real = [&](std::string_view s) {
      double v = 0;
      const auto r = std::from_chars(s.data(), s.data() + s.size(), v);
      if (r.ec != std::errc())
        throw ValidationError("bad profile row at " + path + ":" + std::to_string(scanner.line()));
      return v;
    };
    p.social_volume = int32_t(real(fields[1]));
    p.social_diversity = real(fields[2]);
    p.mobility_volume = real(fields[3]);
    p.mobility_diversity = real(fields[4]);
    const auto tower = towers.ids.find(fields[5]);
    if (!tower)
      throw ValidationError("profile home tower not in tower table at " + path + ":" +
                            std::to_string(scanner.line()));
    p.home_tower = *tower;
    out.profiles.push_back(std::move(p));
  }
  return out;
}

uint64_t write_correlations_csv(const std::string& path,
                                const std::vector<stats::CorrelationResult>& rows) {
  csv::AtomicWriter w(path);
  w.append("x,y,rho,p_value,n\n");
  for (const auto& r : rows) {
    w.append(r.x_name);
    w.append(",");
    w.append(r.y_name);
    w.append(",");
    w.append_real(r.rho);
    w.append(",");
    w.append_real(r.p_value);
    w.append(",");
    w.append_int(static_cast<long long>(r.n));
    w.append("\n");
  }
  return w.close();
}

struct IndicatorColumn {
  std::string name;
  std::vector<double> values;      // aligned with kept aggregate rows
  std::vector<std::size_t> rows;   // indices into the aggregates vector
};

std::vector<IndicatorColumn> indicator_columns(const territory::RegionTable& regions,
                                               const std::vector<territory::RegionAggregate>& aggregates) {
  std::vector<IndicatorColumn> out;
  IndicatorColumn di{"deprivation_index", {}, {}};
  IndicatorColumn pci{"per_capita_income", {}, {}};
  for (std::size_t i = 0; i < aggregates.size(); ++i) {
    const territory::Region& region = regions.regions[std::size_t(aggregates[i].region)];
    if (region.deprivation_index) {
      di.values.push_back(*region.deprivation_index);
      di.rows.push_back(i);
    }
    if (region.per_capita_income) {
      pci.values.push_back(*region.per_capita_income);
      pci.rows.push_back(i);
    }
  }
  if (!di.values.empty()) out.push_back(std::move(di));
  if (!pci.values.empty()) out.push_back(std::move(pci));
  return out;
}

double measure_of(const territory::RegionAggregate& a, int which) {
  switch (which) {
    case 0: return a.mean_sv;
    case 1: return a.mean_sd;
    case 2: return a.mean_mv;
    default: return a.mean_md;
  }
}
const char* kMeasureNames[4] = {"mean_SV", "mean_SD", "mean_MV", "mean_MD"};

std::vector<stats::CorrelationResult> correlate_aggregates(
    const std::vector<territory::RegionAggregate>& aggregates,
    const territory::RegionTable& regions) {
  std::vector<stats::CorrelationResult> out;
  const auto columns = indicator_columns(regions, aggregates);
  for (int m = 0; m < 4; ++m) {
    for (const auto& col : columns) {
      std::vector<double> x;
      x.reserve(col.rows.size());
      for (const std::size_t row : col.rows) x.push_back(measure_of(aggregates[row], m));
      out.push_back(stats::pearson(x, col.values, kMeasureNames[m], col.name));
    }
  }
  return out;
}

// design matrix for the regression/classification presets:
// regressors {PD, MD, SD, MV, SV} over regions carrying the target indicator
struct Design {
  regression::Matrix x;
  std::vector<double> y;
  std::vector<std::string> region_ids;
  std::vector<std::string> names = {"PD", "MD", "SD", "MV", "SV"};
};

Design build_design(const std::vector<territory::RegionAggregate>& aggregates,
                    const territory::RegionTable& regions, bool deprivation_target) {
  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < aggregates.size(); ++i) {
    const territory::Region& region = regions.regions[std::size_t(aggregates[i].region)];
    const auto& target = deprivation_target ? region.deprivation_index : region.per_capita_income;
    if (target) rows.push_back(i);
  }
  Design d;
  d.x = regression::Matrix(rows.size(), 5);
  d.y.resize(rows.size());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    const territory::RegionAggregate& a = aggregates[rows[i]];
    const territory::Region& region = regions.regions[std::size_t(a.region)];
    d.x.at(i, 0) = region.population_density();
    d.x.at(i, 1) = a.mean_md;
    d.x.at(i, 2) = a.mean_sd;
    d.x.at(i, 3) = a.mean_mv;
    d.x.at(i, 4) = a.mean_sv;
    d.y[i] = deprivation_target ? *region.deprivation_index : *region.per_capita_income;
    d.region_ids.push_back(region.id);
  }
  return d;
}

// ---------------------------------------------------------------------------
// stages

Manifest run_ingest(const Config& config) {
  const std::string cdr_path = config.require_string("paths.cdr");
  const std::string towers_path = config.require_string("paths.towers");
  const std::string out = config.out_dir();
  fs::create_directories(out);

  bool configured = false;
  const ingest::ObservationWindow window = window_from_config(config, &configured);
  const double min_rate = config.get_real("filter.min_rate", 0.5);

  const ingest::TowerTable towers = ingest::load_towers(towers_path);
  ingest::ParseResult parsed =
      ingest::parse_cdr(cdr_path, towers,
                        configured ? std::optional<ingest::ObservationWindow>(window) : std::nullopt);
  const std::vector<uint8_t> retained =
      ingest::filter_users(parsed.records, parsed.users.size(), parsed.window, min_rate);
  const ingest::Trajectories trajectories = ingest::build_trajectories(parsed.records, retained);
  const ingest::CallGraph graph =
      ingest::build_call_graph(parsed.records, retained, parsed.users.size());

  Manifest manifest;
  manifest.stage = "ingest";
  manifest.inputs.push_back(manifest_input(cdr_path));
  manifest.inputs.push_back(manifest_input(towers_path));

  // users ordered by id, events chronological
  std::vector<int32_t> retained_users;
  for (std::size_t u = 0; u < retained.size(); ++u)
    if (retained[u]) retained_users.push_back(int32_t(u));
  std::sort(retained_users.begin(), retained_users.end(), [&](int32_t a, int32_t b) {
    return parsed.users.name(a) < parsed.users.name(b);
  });

  {
    csv::AtomicWriter w(join(out, "filtered_events.csv"));
    w.append("user,minute,tower\n");
    for (const int32_t u : retained_users) {
      const std::string& uid = parsed.users.name(u);
      for (const auto& ev : trajectories.events[std::size_t(u)]) {
        w.append(uid);
        w.append(",");
        w.append_int(ev.minute);
        w.append(",");
        w.append(towers.ids.name(ev.tower));
        w.append("\n");
      }
    }
    manifest.outputs.push_back({"filtered_events.csv", hex64(w.close()), w.rows() - 1});
  }

  {
    // canonical edge order: lexicographic by (smaller id, larger id)
    struct EdgeRow {
      std::string a, b;
      uint32_t ab, ba;
    };
    std::vector<EdgeRow> rows;
    for (const int32_t u : retained_users) {
      for (const auto& n : graph.neighbors(u)) {
        if (parsed.users.name(u) < parsed.users.name(n.user))
          rows.push_back({parsed.users.name(u), parsed.users.name(n.user), n.calls_out, n.calls_in});
      }
    }
    std::sort(rows.begin(), rows.end(), [](const EdgeRow& a, const EdgeRow& b) {
      return a.a != b.a ? a.a < b.a : a.b < b.b;
    });
    csv::AtomicWriter w(join(out, "call_graph.csv"));
    w.append("user_a,user_b,calls_ab,calls_ba\n");
    for (const auto& row : rows) {
      w.append(row.a);
      w.append(",");
      w.append(row.b);
      w.append(",");
      w.append_int(row.ab);
      w.append(",");
      w.append_int(row.ba);
      w.append("\n");
    }
    manifest.outputs.push_back({"call_graph.csv", hex64(w.close()), w.rows() - 1});
  }

  {
    nlohmann::json summary;
    summary["window"] = {{"start", timeparse::format_date(parsed.window.start_day)},
                         {"end", timeparse::format_date(parsed.window.end_day)},
                         {"days", parsed.window.length_days()},
                         {"configured", configured}};
    summary["rows_total"] = parsed.stats.total_rows;
    summary["rows_malformed"] = parsed.stats.malformed;
    summary["rows_dropped_unknown_tower"] = parsed.stats.dropped_unknown_tower;
    summary["rows_dropped_out_of_window"] = parsed.stats.dropped_out_of_window;
    summary["records_kept"] = parsed.records.size();
    summary["users_seen"] = parsed.users.size();
    summary["users_retained"] = retained_users.size();
    summary["filter_min_rate"] = round9(min_rate);
    summary["reciprocated_edges"] = graph.edge_count();
    const std::string text = summary.dump(2) + "\n";
    const uint64_t hash = csv::write_atomic(join(out, "ingest_summary.json"), text);
    manifest.outputs.push_back({"ingest_summary.json", hex64(hash), 0});
  }
  return manifest;
}

Manifest run_measures(const Config& config) {
  const std::string out = config.out_dir();
  require_artifact(config, "filtered_events.csv");
  require_artifact(config, "call_graph.csv");
  const std::string towers_path = config.require_string("paths.towers");

  const ingest::TowerTable towers = ingest::load_towers(towers_path);

  Manifest manifest;
  manifest.stage = "measures";
  manifest.inputs.push_back(manifest_input(join(out, "filtered_events.csv")));
  manifest.inputs.push_back(manifest_input(join(out, "call_graph.csv")));
  manifest.inputs.push_back(manifest_input(towers_path));

  // rebuild trajectories; the file is grouped by user and time-ordered
  ingest::Trajectories trajectories;
  ingest::IdTable users;
  {
    const std::string buf = csv::read_file(join(out, "filtered_events.csv"));
    csv::RowScanner scanner(buf);
    std::vector<std::string_view> fields;
    if (!scanner.next(fields)) throw ValidationError("filtered_events.csv is empty");
    static constexpr std::string_view kHeader[] = {"user", "minute", "tower"};
    csv::check_header(fields, kHeader, {}, "filtered_events.csv");
    while (scanner.next(fields)) {
      if (fields.size() == 1 && fields[0].empty()) continue;
      if (fields.size() != 3) throw ValidationError("bad filtered_events row");
      const int32_t u = users.intern(fields[0]);
      if (std::size_t(u) >= trajectories.events.size()) trajectories.events.resize(u + 1);
      int64_t minute = 0;
      std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), minute);
      const auto tower = towers.ids.find(fields[2]);
      if (!tower) throw ValidationError("filtered_events tower not in tower table");
      trajectories.events[std::size_t(u)].push_back({minute, *tower});
    }
    trajectories.retained.assign(users.size(), 1);
  }

  ingest::CallGraph graph(users.size());
  {
    const std::string buf = csv::read_file(join(out, "call_graph.csv"));
    csv::RowScanner scanner(buf);
    std::vector<std::string_view> fields;
    if (!scanner.next(fields)) throw ValidationError("call_graph.csv is empty");
    static constexpr std::string_view kHeader[] = {"user_a", "user_b", "calls_ab", "calls_ba"};
    csv::check_header(fields, kHeader, {}, "call_graph.csv");
    while (scanner.next(fields)) {
      if (fields.size() == 1 && fields[0].empty()) continue;
      if (fields.size() != 4) throw ValidationError("bad call_graph row");
      const auto a = users.find(fields[0]);
      const auto b = users.find(fields[1]);
      if (!a || !b) throw ValidationError("call_graph user without trajectory");
      uint32_t ab = 0, ba = 0;
      std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), ab);
      std::from_chars(fields[3].data(), fields[3].data() + fields[3].size(), ba);
      graph.add_edge(*a, *b, ab, ba);
    }
  }

  measures::MeasureOptions options;
  options.mode = mode_from_config(config);
  options.night = night_from_config(config);
  options.workers = config.workers();
  measures::ProfileStats stats;
  const std::vector<measures::UserProfile> profiles =
      measures::compute_all_profiles(trajectories, graph, towers, options, &stats);

  const uint64_t hash = measures::write_profiles_csv(join(out, "profiles.csv"), profiles, users, towers);
  manifest.outputs.push_back({"profiles.csv", hex64(hash), profiles.size()});

  nlohmann::json summary;
  summary["profiles"] = profiles.size();
  summary["skipped_empty_trajectories"] = stats.skipped_empty;
  summary["geo_mode"] = geo::coord_mode_name(options.mode);
  summary["night_window"] = {{"start", config.get_string("night.start", "22:00")},
                             {"end", config.get_string("night.end", "07:00")}};
  const uint64_t shash = csv::write_atomic(join(out, "measures_summary.json"), summary.dump(2) + "\n");
  manifest.outputs.push_back({"measures_summary.json", hex64(shash), 0});
  return manifest;
}

Manifest run_aggregate(const Config& config) {
  const std::string out = config.out_dir();
  require_artifact(config, "profiles.csv");
  const std::string towers_path = config.require_string("paths.towers");
  const std::string regions_path = config.require_string("paths.regions");

  Manifest manifest;
  manifest.stage = "aggregate";
  manifest.inputs.push_back(manifest_input(join(out, "profiles.csv")));
  manifest.inputs.push_back(manifest_input(towers_path));
  manifest.inputs.push_back(manifest_input(regions_path));

  const ingest::TowerTable towers = ingest::load_towers(towers_path);
  const territory::RegionTable regions =
      territory::load_regions(regions_path, config.get_real("territory.population_floor", 1000.0));
  LoadedProfiles loaded = load_profiles_csv(join(out, "profiles.csv"), towers);

  std::optional<std::string> mapping;
  std::optional<std::string> geometry;
  if (config.has("paths.mapping")) mapping = config.require_string("paths.mapping");
  if (config.has("paths.geometry")) geometry = config.require_string("paths.geometry");
  if (mapping) manifest.inputs.push_back(manifest_input(*mapping));
  if (geometry) manifest.inputs.push_back(manifest_input(*geometry));

  const territory::TowerRegionMap tower_region = territory::map_tower_to_region(
      towers, regions, mapping, geometry, config.get_real("territory.centroid_cutoff_km", 10.0),
      mode_from_config(config));
  const territory::UserAssignment assignment = territory::assign_users(loaded.profiles, tower_region);
  territory::AggregateStats agg_stats;
  const std::vector<territory::RegionAggregate> aggregates =
      territory::aggregate(loaded.profiles, assignment, regions, loaded.users,
                           uint32_t(config.get_int("territory.min_users", 1)), &agg_stats);

  const uint64_t ahash = territory::write_aggregates_csv(join(out, "aggregates.csv"), aggregates, regions);
  manifest.outputs.push_back({"aggregates.csv", hex64(ahash), aggregates.size()});

  {
    // user → region table for the user-reassignment null model; rows follow
    // the (sorted) profile order
    csv::AtomicWriter w(join(out, "user_region.csv"));
    w.append("user,region_id\n");
    for (std::size_t i = 0; i < loaded.profiles.size(); ++i) {
      const int32_t region = assignment.region_of_profile[i];
      if (region < 0) continue;
      w.append(loaded.users.name(loaded.profiles[i].user));
      w.append(",");
      w.append(regions.regions[std::size_t(region)].id);
      w.append("\n");
    }
    manifest.outputs.push_back({"user_region.csv", hex64(w.close()), w.rows() - 1});
  }

  nlohmann::json summary;
  summary["regions_loaded"] = regions.regions.size();
  summary["regions_excluded_population"] = regions.excluded_by_population;
  summary["regions_aggregated"] = aggregates.size();
  summary["regions_excluded_min_users"] = agg_stats.excluded_regions;
  summary["users_assigned"] = agg_stats.aggregated_users;
  summary["users_dropped_unassigned"] = assignment.dropped;
  summary["towers_unassigned"] = tower_region.unassigned;
  summary["towers_unassigned_warning"] = tower_region.many_unassigned_warning;
  const uint64_t shash = csv::write_atomic(join(out, "aggregate_summary.json"), summary.dump(2) + "\n");
  manifest.outputs.push_back({"aggregate_summary.json", hex64(shash), 0});
  return manifest;
}

Manifest run_correlate(const Config& config) {
  const std::string out = config.out_dir();
  require_artifact(config, "aggregates.csv");
  const std::string regions_path = config.require_string("paths.regions");

  Manifest manifest;
  manifest.stage = "correlate";
  manifest.inputs.push_back(manifest_input(join(out, "aggregates.csv")));
  manifest.inputs.push_back(manifest_input(regions_path));

  const territory::RegionTable regions =
      territory::load_regions(regions_path, config.get_real("territory.population_floor", 1000.0));
  const std::vector<territory::RegionAggregate> aggregates =
      territory::read_aggregates_csv(join(out, "aggregates.csv"), regions);

  const std::vector<stats::CorrelationResult> correlations =
      correlate_aggregates(aggregates, regions);
  const uint64_t chash = write_correlations_csv(join(out, "correlations.csv"), correlations);
  manifest.outputs.push_back({"correlations.csv", hex64(chash), correlations.size()});

  // plot-ready decile tables per measure/indicator pair
  std::size_t decile_files = 0;
  const auto columns = indicator_columns(regions, aggregates);
  for (int m = 0; m < 4; ++m) {
    for (const auto& col : columns) {
      if (col.rows.size() < 10) continue;
      std::vector<double> x;
      x.reserve(col.rows.size());
      for (const std::size_t row : col.rows) x.push_back(measure_of(aggregates[row], m));
      const stats::DecileSummary summary = stats::decile_summary(x, col.values);
      const std::string name = std::string("decile_") + kMeasureNames[m] + "_" + col.name + ".csv";
      csv::AtomicWriter w(join(out, name));
      w.append("bin,x_lo,x_hi,y_mean,y_std,count\n");
      for (std::size_t b = 0; b < summary.bins.size(); ++b) {
        const stats::DecileBin& bin = summary.bins[b];
        w.append_int(static_cast<long long>(b + 1));
        w.append(",");
        w.append_real(bin.x_lo);
        w.append(",");
        w.append_real(bin.x_hi);
        w.append(",");
        w.append_real(bin.y_mean);
        w.append(",");
        w.append_real(bin.y_std);
        w.append(",");
        w.append_int(static_cast<long long>(bin.count));
        w.append("\n");
      }
      manifest.outputs.push_back({name, hex64(w.close()), w.rows() - 1});
      ++decile_files;
    }
  }

  nlohmann::json summary;
  summary["correlation_pairs"] = correlations.size();
  summary["decile_tables"] = decile_files;
  const uint64_t shash = csv::write_atomic(join(out, "correlate_summary.json"), summary.dump(2) + "\n");
  manifest.outputs.push_back({"correlate_summary.json", hex64(shash), 0});
  return manifest;
}

Manifest run_nullmodel(const Config& config) {
  const std::string out = config.out_dir();
  const uint64_t seed = config.require_seed("nullmodel");
  require_artifact(config, "profiles.csv");
  require_artifact(config, "user_region.csv");
  require_artifact(config, "aggregates.csv");
  const std::string towers_path = config.require_string("paths.towers");
  const std::string regions_path = config.require_string("paths.regions");
  const std::size_t repetitions = std::size_t(config.get_int("nullmodel.repetitions", 100));

  Manifest manifest;
  manifest.stage = "nullmodel";
  manifest.inputs.push_back(manifest_input(join(out, "profiles.csv")));
  manifest.inputs.push_back(manifest_input(join(out, "user_region.csv")));
  manifest.inputs.push_back(manifest_input(join(out, "aggregates.csv")));
  manifest.inputs.push_back(manifest_input(regions_path));

  const ingest::TowerTable towers = ingest::load_towers(towers_path);
  const territory::RegionTable regions =
      territory::load_regions(regions_path, config.get_real("territory.population_floor", 1000.0));
  LoadedProfiles loaded = load_profiles_csv(join(out, "profiles.csv"), towers);
  const std::vector<territory::RegionAggregate> aggregates =
      territory::read_aggregates_csv(join(out, "aggregates.csv"), regions);

  // user → region assignment back from the aggregate stage
  territory::UserAssignment assignment;
  assignment.region_of_profile.assign(loaded.profiles.size(), -1);
  {
    const std::string buf = csv::read_file(join(out, "user_region.csv"));
    csv::RowScanner scanner(buf);
    std::vector<std::string_view> fields;
    if (!scanner.next(fields)) throw ValidationError("user_region.csv is empty");
    static constexpr std::string_view kHeader[] = {"user", "region_id"};
    csv::check_header(fields, kHeader, {}, "user_region.csv");
    std::map<std::string, int32_t, std::less<>> region_of_user;
    while (scanner.next(fields)) {
      if (fields.size() == 1 && fields[0].empty()) continue;
      if (fields.size() != 2) throw ValidationError("bad user_region row");
      const int region = regions.find(fields[1]);
      if (region >= 0) region_of_user.emplace(std::string(fields[0]), region);
    }
    for (std::size_t i = 0; i < loaded.profiles.size(); ++i) {
      const auto it = region_of_user.find(loaded.users.name(loaded.profiles[i].user));
      if (it != region_of_user.end()) assignment.region_of_profile[i] = it->second;
    }
  }

  const std::vector<territory::RegionAggregate> nm1 = stats::null_model_users(
      loaded.profiles, assignment, regions, repetitions, rng::derive_seed(seed, 101));
  const uint64_t nm1hash = territory::write_aggregates_csv(join(out, "nm1_aggregates.csv"), nm1, regions);
  manifest.outputs.push_back({"nm1_aggregates.csv", hex64(nm1hash), nm1.size()});

  const std::vector<stats::CorrelationResult> corr_nm1 = correlate_aggregates(nm1, regions);
  const uint64_t c1hash = write_correlations_csv(join(out, "correlations_nm1.csv"), corr_nm1);
  manifest.outputs.push_back({"correlations_nm1.csv", hex64(c1hash), corr_nm1.size()});

  const territory::RegionTable nm2 =
      stats::null_model_indicators(regions, repetitions, rng::derive_seed(seed, 102));
  {
    csv::AtomicWriter w(join(out, "nm2_indicators.csv"));
    w.append("region_id,deprivation_index,per_capita_income\n");
    for (const territory::Region& r : nm2.regions) {
      w.append(r.id);
      w.append(",");
      if (r.deprivation_index) w.append_real(*r.deprivation_index);
      w.append(",");
      if (r.per_capita_income) w.append_real(*r.per_capita_income);
      w.append("\n");
    }
    manifest.outputs.push_back({"nm2_indicators.csv", hex64(w.close()), w.rows() - 1});
  }

  const std::vector<stats::CorrelationResult> corr_nm2 = correlate_aggregates(aggregates, nm2);
  const uint64_t c2hash = write_correlations_csv(join(out, "correlations_nm2.csv"), corr_nm2);
  manifest.outputs.push_back({"correlations_nm2.csv", hex64(c2hash), corr_nm2.size()});

  nlohmann::json summary;
  summary["repetitions"] = repetitions;
  summary["nm1_regions"] = nm1.size();
  summary["nm2_regions"] = nm2.regions.size();
  const uint64_t shash = csv::write_atomic(join(out, "nullmodel_summary.json"), summary.dump(2) + "\n");
  manifest.outputs.push_back({"nullmodel_summary.json", hex64(shash), 0});
  return manifest;
}

Manifest run_regress(const Config& config) {
  const std::string out = config.out_dir();
  const uint64_t seed = config.require_seed("regress");
  require_artifact(config, "aggregates.csv");
  const std::string regions_path = config.require_string("paths.regions");
  const std::size_t repetitions = std::size_t(config.get_int("cv.repetitions", 1000));
  const double train_fraction = config.get_real("cv.train_fraction", 0.6);

  Manifest manifest;
  manifest.stage = "regress";
  manifest.inputs.push_back(manifest_input(join(out, "aggregates.csv")));
  manifest.inputs.push_back(manifest_input(regions_path));

  const territory::RegionTable regions =
      territory::load_regions(regions_path, config.get_real("territory.population_floor", 1000.0));
  const std::vector<territory::RegionAggregate> aggregates =
      territory::read_aggregates_csv(join(out, "aggregates.csv"), regions);

  struct ModelSpec {
    const char* tag;
    const char* target;
    bool deprivation;
    uint64_t seed_index;
  };
  const ModelSpec specs[2] = {{"m1", "deprivation_index", true, 201},
                              {"m2", "per_capita_income", false, 202}};

  for (const ModelSpec& spec : specs) {
    const bool column_present = spec.deprivation ? regions.has_deprivation : regions.has_income;
    if (!column_present) continue;  // indicator absent from the region file
    const Design design = build_design(aggregates, regions, spec.deprivation);
    if (design.y.size() < 8)
      throw ValidationError(std::string("regress: too few regions with ") + spec.target);
    const regression::RegressionFit fit = regression::ols_fit(design.x, design.y, design.names);
    const std::vector<double> vifs = regression::variance_inflation(design.x);
    for (std::size_t j = 0; j < vifs.size(); ++j)
      if (vifs[j] > 10.0)
        std::fprintf(stderr, "warning: %s VIF %.9g for %s exceeds 10\n", spec.tag, vifs[j],
                     design.names[j].c_str());
    const regression::LmgDecomposition shares = regression::lmg(design.x, design.y);

    nlohmann::json j;
    j["model"] = spec.tag;
    j["target"] = spec.target;
    j["n"] = fit.n;
    j["r2"] = round9(fit.r2);
    j["adjusted_r2"] = round9(fit.adjusted_r2);
    j["zero_variance_y"] = fit.zero_variance_y;
    j["intercept"] = {{"estimate", round9(fit.intercept)},
                      {"std_error", round9(fit.intercept_std_error)},
                      {"p_value", round9(fit.intercept_p_value)}};
    nlohmann::json coeffs;
    for (std::size_t k = 0; k < fit.names.size(); ++k) {
      coeffs[fit.names[k]] = {{"estimate", round9(fit.coefficients[k])},
                              {"std_error", round9(fit.std_errors[k])},
                              {"p_value", round9(fit.p_values[k])},
                              {"vif", round9(vifs[k])},
                              {"lmg_share", round9(shares.shares[k])}};
    }
    j["coefficients"] = coeffs;
    const std::string fit_name = std::string("fit_") + spec.tag + ".json";
    const uint64_t fhash = csv::write_atomic(join(out, fit_name), j.dump(2) + "\n");
    manifest.outputs.push_back({fit_name, hex64(fhash), 0});

    const regression::CvReport cv = regression::cross_validate(
        design.x, design.y, repetitions, train_fraction, rng::derive_seed(seed, spec.seed_index),
        config.workers());
    {
      const std::string name = std::string("cv_") + spec.tag + ".csv";
      csv::AtomicWriter w(join(out, name));
      w.append("experiment,r2,rmse,cv_rmse\n");
      for (std::size_t e = 0; e < cv.experiments.size(); ++e) {
        const regression::CvExperiment& ex = cv.experiments[e];
        w.append_int(static_cast<long long>(e + 1));
        w.append(",");
        w.append_real(ex.r2);
        w.append(",");
        w.append_real(ex.rmse);
        w.append(",");
        w.append_real(ex.cv_rmse);
        w.append("\n");
      }
      manifest.outputs.push_back({name, hex64(w.close()), w.rows() - 1});
    }
    {
      const std::string name = std::string("relerr_") + spec.tag + ".csv";
      csv::AtomicWriter w(join(out, name));
      w.append("region_id,mean_rel_err\n");
      for (std::size_t i = 0; i < design.region_ids.size(); ++i) {
        w.append(design.region_ids[i]);
        w.append(",");
        w.append_real(cv.mean_rel_err(i));
        w.append("\n");
      }
      manifest.outputs.push_back({name, hex64(w.close()), w.rows() - 1});
    }
  }

  nlohmann::json summary;
  summary["cv_repetitions"] = repetitions;
  summary["train_fraction"] = round9(train_fraction);
  const uint64_t shash = csv::write_atomic(join(out, "regress_summary.json"), summary.dump(2) + "\n");
  manifest.outputs.push_back({"regress_summary.json", hex64(shash), 0});
  return manifest;
}

Manifest run_classify(const Config& config) {
  const std::string out = config.out_dir();
  const uint64_t seed = config.require_seed("classify");
  require_artifact(config, "aggregates.csv");
  const std::string regions_path = config.require_string("paths.regions");

  Manifest manifest;
  manifest.stage = "classify";
  manifest.inputs.push_back(manifest_input(join(out, "aggregates.csv")));
  manifest.inputs.push_back(manifest_input(regions_path));

  const territory::RegionTable regions =
      territory::load_regions(regions_path, config.get_real("territory.population_floor", 1000.0));
  const std::vector<territory::RegionAggregate> aggregates =
      territory::read_aggregates_csv(join(out, "aggregates.csv"), regions);

  classify::ForestConfig forest_config;
  forest_config.trees = int(config.get_int("forest.trees", 200));
  forest_config.features_per_split = int(config.get_int("forest.features_per_split", 0));
  forest_config.min_leaf = int(config.get_int("forest.min_leaf", 1));
  forest_config.workers = config.workers();
  const double train_fraction = config.get_real("classify.train_fraction", 0.6);

  struct ClassifierSpec {
    const char* tag;
    const char* target;
    bool deprivation;
    uint64_t split_seed;
    uint64_t forest_seed;
  };
  const ClassifierSpec specs[2] = {{"c1", "deprivation_index", true, 301, 311},
                                   {"c2", "per_capita_income", false, 302, 312}};

  for (const ClassifierSpec& spec : specs) {
    const Design design = build_design(aggregates, regions, spec.deprivation);
    if (design.y.size() < 12)
      throw ValidationError(std::string("classify: too few regions with ") + spec.target);

    const classify::TertileLabeling labeling = classify::tertile_labels(design.y);
    const classify::TrainTestSplit split =
        classify::split_rows(design.y.size(), train_fraction, rng::derive_seed(seed, spec.split_seed));

    const regression::Matrix x_train = design.x.select_rows(split.train);
    const regression::Matrix x_test = design.x.select_rows(split.test);
    std::vector<uint8_t> y_train, y_test;
    for (const std::size_t r : split.train) y_train.push_back(labeling.labels[r]);
    for (const std::size_t r : split.test) y_test.push_back(labeling.labels[r]);

    classify::ForestConfig fc = forest_config;
    fc.seed = rng::derive_seed(seed, spec.forest_seed);
    const classify::ForestModel model = classify::train_forest(x_train, y_train, fc);
    const classify::ClassReport report = classify::evaluate(model, x_test, y_test);

    nlohmann::json j;
    j["classifier"] = spec.tag;
    j["target"] = spec.target;
    j["classes"] = {"low", "medium", "high"};
    j["tertile_breaks"] = {{"low_medium", round9(labeling.break_low)},
                           {"medium_high", round9(labeling.break_high)}};
    j["train_rows"] = split.train.size();
    j["test_rows"] = split.test.size();
    nlohmann::json confusion = nlohmann::json::array();
    for (int a = 0; a < classify::kNumClasses; ++a) {
      nlohmann::json row = nlohmann::json::array();
      for (int p = 0; p < classify::kNumClasses; ++p) row.push_back(report.confusion[a][p]);
      confusion.push_back(row);
    }
    j["confusion_matrix"] = confusion;
    for (int c = 0; c < classify::kNumClasses; ++c) {
      j["recall"][classify::kClassNames[c]] = round9(report.recall[c]);
      j["precision"][classify::kClassNames[c]] = round9(report.precision[c]);
    }
    j["accuracy"] = round9(report.accuracy);
    for (std::size_t f = 0; f < design.names.size(); ++f)
      j["mean_decrease_gini"][design.names[f]] = round9(model.mean_decrease_gini[f]);
    j["config"] = {{"trees", fc.trees},
                   {"features_per_split", fc.features_per_split == 0 ? 2 : fc.features_per_split},
                   {"min_leaf", fc.min_leaf},
                   {"train_fraction", round9(train_fraction)}};

    const std::string name = std::string("classify_") + spec.tag + ".json";
    const uint64_t hash = csv::write_atomic(join(out, name), j.dump(2) + "\n");
    manifest.outputs.push_back({name, hex64(hash), 0});
  }

  nlohmann::json summary;
  summary["classifiers"] = 2;
  const uint64_t shash = csv::write_atomic(join(out, "classify_summary.json"), summary.dump(2) + "\n");
  manifest.outputs.push_back({"classify_summary.json", hex64(shash), 0});
  return manifest;
}

Manifest run_synth(const Config& config) {
  const std::string out = config.out_dir();
  fs::create_directories(out);
  synthgen::GeneratorConfig g;
  g.seed = config.require_seed("synth");
  g.users = std::size_t(config.get_int("synth.users", 1000));
  g.regions = std::size_t(config.get_int("synth.regions", 20));
  g.towers_per_region = std::size_t(config.get_int("synth.towers_per_region", 40));
  g.start_date = config.get_string("synth.start", "2007-09-01");
  g.days = int(config.get_int("synth.days", 45));
  g.calls_min = int(config.get_int("synth.calls_min", 70));
  g.calls_max = int(config.get_int("synth.calls_max", 130));
  g.night_fraction = config.get_real("synth.night_fraction", 0.35);
  g.sv_min = int(config.get_int("synth.sv_min", 3));
  g.sv_max = int(config.get_int("synth.sv_max", 9));
  g.sd_min = config.get_real("synth.sd_min", 0.55);
  g.sd_max = config.get_real("synth.sd_max", 0.95);
  g.md_region_lo = config.get_real("synth.md_lo", 0.35);
  g.md_region_hi = config.get_real("synth.md_hi", 0.90);
  g.md_user_jitter = config.get_real("synth.md_jitter", 0.06);
  g.tolerance = config.get_real("synth.tolerance", 0.05);
  g.di_intercept = config.get_real("synth.di_intercept", 5.0);
  g.di_md_slope = config.get_real("synth.di_md_slope", -3.0);
  g.di_noise_sd = config.get_real("synth.di_noise_sd", 0.5);
  g.pci_intercept = config.get_real("synth.pci_intercept", 9000.0);
  g.pci_md_slope = config.get_real("synth.pci_md_slope", 14000.0);
  g.pci_noise_sd = config.get_real("synth.pci_noise_sd", 1200.0);
  g.pop_min = config.get_real("synth.pop_min", 1500.0);
  g.pop_max = config.get_real("synth.pop_max", 60000.0);
  g.null_benchmark = config.get_bool("synth.null", false);
  g.workers = config.workers();

  const std::string corpus_dir = join(out, "corpus");
  const synthgen::CorpusPaths paths = synthgen::generate_corpus(g, corpus_dir);

  Manifest manifest;
  manifest.stage = "synth";
  for (const std::string& p :
       {paths.cdr, paths.towers, paths.regions, paths.mapping, paths.ground_truth}) {
    const FileDigest d = digest_file(p);
    manifest.outputs.push_back({"corpus/" + basename_of(p), hex64(d.hash), d.newlines});
  }

  // ready-to-use pipeline configuration for this corpus
  std::string corpus_config;
  corpus_config += "paths.cdr = " + paths.cdr + "\n";
  corpus_config += "paths.towers = " + paths.towers + "\n";
  corpus_config += "paths.regions = " + paths.regions + "\n";
  corpus_config += "paths.mapping = " + paths.mapping + "\n";
  corpus_config += "observation.start = " + g.start_date + "\n";
  const auto start_day = timeparse::parse_date_days(g.start_date);
  corpus_config += "observation.end = " + timeparse::format_date(*start_day + g.days) + "\n";
  corpus_config += "filter.min_rate = 0.5\n";
  csv::write_atomic(join(out, "corpus_config.toml"), corpus_config);

  nlohmann::json summary;
  summary["users"] = g.users;
  summary["regions"] = g.regions;
  summary["towers"] = g.regions * g.towers_per_region;
  summary["null_benchmark"] = g.null_benchmark;
  const uint64_t shash = csv::write_atomic(join(out, "synth_summary.json"), summary.dump(2) + "\n");
  manifest.outputs.push_back({"synth_summary.json", hex64(shash), 0});
  return manifest;
}

Manifest run_report(const Config& config) {
  const std::string out = config.out_dir();

  // every stage must have delivered; report the missing ones by stage name
  static const std::vector<std::string> required = {
      "correlations.csv",  "correlations_nm1.csv", "correlations_nm2.csv",
      "fit_m1.json",       "fit_m2.json",          "cv_m1.csv",
      "cv_m2.csv",         "relerr_m1.csv",        "relerr_m2.csv",
      "classify_c1.json",  "classify_c2.json"};
  std::set<std::string> missing_stages;
  for (const std::string& name : required)
    if (!csv::file_exists(join(out, name)))
      missing_stages.insert(artifact_producers().at(name));
  if (!missing_stages.empty()) {
    std::string list;
    for (const std::string& s : missing_stages) {
      if (!list.empty()) list += ", ";
      list += s;
    }
    throw MissingArtifactError("pipeline incomplete; missing stages: " + list);
  }

  Manifest manifest;
  manifest.stage = "report";

  auto read_csv_rows = [&](const std::string& name) {
    const std::string buf = csv::read_file(join(out, name));
    csv::RowScanner scanner(buf);
    std::vector<std::string_view> fields;
    std::vector<std::vector<std::string>> rows;
    bool header = true;
    std::vector<std::string> header_fields;
    while (scanner.next(fields)) {
      if (fields.size() == 1 && fields[0].empty()) continue;
      std::vector<std::string> row;
      for (const auto& f : fields) row.emplace_back(f);
      if (header) {
        header_fields = row;
        header = false;
      } else {
        rows.push_back(row);
      }
    }
    manifest.inputs.push_back(manifest_input(join(out, name)));
    return std::make_pair(header_fields, rows);
  };

  nlohmann::json report;

  auto correlations_json = [&](const std::string& name) {
    const auto [header, rows] = read_csv_rows(name);
    nlohmann::json arr = nlohmann::json::array();
    for (const auto& row : rows) {
      arr.push_back({{"x", row[0]},
                     {"y", row[1]},
                     {"rho", std::atof(row[2].c_str())},
                     {"p_value", std::atof(row[3].c_str())},
                     {"n", std::atoll(row[4].c_str())}});
    }
    return arr;
  };
  report["correlations"] = correlations_json("correlations.csv");
  report["null_models"]["nm1"] = correlations_json("correlations_nm1.csv");
  report["null_models"]["nm2"] = correlations_json("correlations_nm2.csv");

  // decile tables (whatever correlate produced)
  nlohmann::json deciles;
  for (int m = 0; m < 4; ++m) {
    for (const char* indicator : {"deprivation_index", "per_capita_income"}) {
      const std::string name =
          std::string("decile_") + kMeasureNames[m] + "_" + indicator + ".csv";
      if (!csv::file_exists(join(out, name))) continue;
      const auto [header, rows] = read_csv_rows(name);
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& row : rows) {
        arr.push_back({{"bin", std::atoll(row[0].c_str())},
                       {"x_lo", std::atof(row[1].c_str())},
                       {"x_hi", std::atof(row[2].c_str())},
                       {"y_mean", std::atof(row[3].c_str())},
                       {"y_std", std::atof(row[4].c_str())},
                       {"count", std::atoll(row[5].c_str())}});
      }
      deciles[std::string(kMeasureNames[m]) + "|" + indicator] = arr;
    }
  }
  report["deciles"] = deciles;

  for (const char* tag : {"m1", "m2"}) {
    const std::string fit_name = std::string("fit_") + tag + ".json";
    report["regression"][tag]["fit"] =
        nlohmann::json::parse(csv::read_file(join(out, fit_name)));
    manifest.inputs.push_back(manifest_input(join(out, fit_name)));

    const auto [header, rows] = read_csv_rows(std::string("cv_") + tag + ".csv");
    std::vector<double> r2, rmse, cv_rmse;
    for (const auto& row : rows) {
      r2.push_back(std::atof(row[1].c_str()));
      rmse.push_back(std::atof(row[2].c_str()));
      const double c = std::atof(row[3].c_str());
      if (std::isfinite(c)) cv_rmse.push_back(c);
    }
    auto summarize = [](const std::vector<double>& v) {
      nlohmann::json j;
      if (v.empty()) return j;
      double mean = 0;
      for (const double x : v) mean += x;
      mean /= double(v.size());
      double var = 0;
      for (const double x : v) var += (x - mean) * (x - mean);
      var /= double(v.size());
      j["mean"] = round9(mean);
      j["std"] = round9(std::sqrt(var));
      j["min"] = round9(*std::min_element(v.begin(), v.end()));
      j["max"] = round9(*std::max_element(v.begin(), v.end()));
      j["count"] = v.size();
      return j;
    };
    report["regression"][tag]["cv"] = {{"experiments", rows.size()},
                                       {"r2", summarize(r2)},
                                       {"rmse", summarize(rmse)},
                                       {"cv_rmse", summarize(cv_rmse)}};
    read_csv_rows(std::string("relerr_") + tag + ".csv");  // recorded as input
  }

  for (const char* tag : {"c1", "c2"}) {
    const std::string name = std::string("classify_") + tag + ".json";
    report["classification"][tag] = nlohmann::json::parse(csv::read_file(join(out, name)));
    manifest.inputs.push_back(manifest_input(join(out, name)));
  }

  const ProvenanceCheck chain = verify_manifest_chain(out, "report");
  report["provenance"] = {{"ok", chain.ok},
                          {"stages", chain.stages_seen},
                          {"mismatches", chain.mismatches}};

  const uint64_t hash = csv::write_atomic(join(out, "report.json"), report.dump(2) + "\n");
  manifest.outputs.push_back({"report.json", hex64(hash), 0});
  return manifest;
}

}  // namespace

const std::vector<std::string>& pipeline_stages() {
  static const std::vector<std::string> stages = {"ingest",    "measures", "aggregate",
                                                  "correlate", "nullmodel", "regress",
                                                  "classify",  "report"};
  return stages;
}

void run_stage(const std::string& stage, const Config& config) {
  fs::create_directories(config.out_dir());
  Manifest manifest;
  if (stage == "ingest") {
    manifest = run_ingest(config);
  } else if (stage == "measures") {
    manifest = run_measures(config);
  } else if (stage == "aggregate") {
    manifest = run_aggregate(config);
  } else if (stage == "correlate") {
    manifest = run_correlate(config);
  } else if (stage == "nullmodel") {
    manifest = run_nullmodel(config);
  } else if (stage == "regress") {
    manifest = run_regress(config);
  } else if (stage == "classify") {
    manifest = run_classify(config);
  } else if (stage == "synth") {
    manifest = run_synth(config);
  } else if (stage == "report") {
    manifest = run_report(config);
  } else if (stage == "pipeline") {
    config.require_seed("pipeline");
    for (const std::string& s : pipeline_stages()) run_stage(s, config);
    return;
  } else {
    throw ValidationError("unknown stage: " + stage);
  }
  write_manifest(config, std::move(manifest));
}

ProvenanceCheck verify_manifest_chain(const std::string& out_dir,
                                      const std::string& exclude_stage) {
  ProvenanceCheck check;
  std::map<std::string, std::pair<std::string, std::string>> produced;  // file → (hash, stage)
  for (const std::string& stage : pipeline_stages()) {
    if (stage == exclude_stage) continue;
    const std::string path = join(out_dir, "manifest_" + stage + ".json");
    if (!csv::file_exists(path)) continue;
    const Manifest manifest = Manifest::from_json(nlohmann::json::parse(csv::read_file(path)));
    check.stages_seen.push_back(stage);
    for (const ManifestFile& input : manifest.inputs) {
      const auto it = produced.find(input.file);
      if (it != produced.end() && it->second.first != input.hash) {
        check.ok = false;
        check.mismatches.push_back(stage + " read " + input.file + " with hash " + input.hash +
                                   " but " + it->second.second + " produced " + it->second.first);
      }
    }
    for (const ManifestFile& output : manifest.outputs)
      produced[output.file] = {output.hash, stage};
  }
  return check;
}

}  // namespace nowcast::pipeline
