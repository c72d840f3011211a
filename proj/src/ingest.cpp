#include "nowcast/ingest.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>

#include "nowcast/csv.hpp"
#include "nowcast/error.hpp"

namespace nowcast::ingest {

int32_t IdTable::intern(std::string_view id) {
  const auto it = index_.find(id);
  if (it != index_.end()) return it->second;
  const auto idx = int32_t(names_.size());
  names_.emplace_back(id);
  index_.emplace(names_.back(), idx);
  return idx;
}

std::optional<int32_t> IdTable::find(std::string_view id) const {
  const auto it = index_.find(id);
  if (it == index_.end()) return std::nullopt;
  return it->second;
}

TowerTable load_towers(const std::string& path) {
  const std::string buf = csv::read_file(path);
  csv::RowScanner scanner(buf);
  std::vector<std::string_view> fields;
  if (!scanner.next(fields)) throw ValidationError("tower file is empty: " + path);
  static constexpr std::string_view kHeader[] = {"tower", "latitude", "longitude"};
  csv::check_header(fields, kHeader, {}, path);

  TowerTable towers;
  while (scanner.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;  // trailing newline
    if (fields.size() != 3)
      throw ValidationError("bad tower row at " + path + ":" + std::to_string(scanner.line()));
    double lat = 0, lon = 0;
    const auto r1 = std::from_chars(fields[1].data(), fields[1].data() + fields[1].size(), lat);
    const auto r2 = std::from_chars(fields[2].data(), fields[2].data() + fields[2].size(), lon);
    if (fields[0].empty() || r1.ec != std::errc() || r2.ec != std::errc() ||
        lat < -90.0 || lat > 90.0 || lon < -180.0 || lon > 180.0)
      throw ValidationError("bad tower row at " + path + ":" + std::to_string(scanner.line()));
    if (towers.ids.find(fields[0]))
      throw ValidationError("duplicate tower id '" + std::string(fields[0]) + "' in " + path);
    towers.ids.intern(fields[0]);
    towers.lat.push_back(lat);
    towers.lon.push_back(lon);
  }
  if (towers.ids.size() == 0) throw ValidationError("tower file has no rows: " + path);
  return towers;
}

ParseResult parse_cdr(const std::string& path, const TowerTable& towers,
                      std::optional<ObservationWindow> window,
                      double max_malformed_fraction) {
  const std::string buf = csv::read_file(path);
  csv::RowScanner scanner(buf);
  std::vector<std::string_view> fields;
  if (!scanner.next(fields)) throw ValidationError("CDR file is empty: " + path);
  static constexpr std::string_view kHeader[] = {"timestamp", "tower", "caller", "callee"};
  static constexpr std::string_view kOptional[] = {"duration"};
  csv::check_header(fields, kHeader, kOptional, path);
  const std::size_t expected_fields = fields.size();

  ParseResult out;
  if (window) out.window = *window;
  const bool bounded = window.has_value();
  int64_t min_minute = 0, max_minute = 0;
  bool any = false;

  out.records.reserve(buf.size() / 40);
  while (scanner.next(fields)) {
    if (fields.size() == 1 && fields[0].empty()) continue;
    ++out.stats.total_rows;
    if (fields.size() != expected_fields && fields.size() != 4) {
      ++out.stats.malformed;
      continue;
    }
    const auto minute = timeparse::parse_timestamp_minutes(fields[0]);
    // self-calls violate the record contract and count as malformed
    if (!minute || fields[1].empty() || fields[2].empty() || fields[3].empty() ||
        fields[2] == fields[3]) {
      ++out.stats.malformed;
      continue;
    }
    if (bounded && !out.window.contains_minute(*minute)) {
      ++out.stats.dropped_out_of_window;
      continue;
    }
    const auto tower = towers.ids.find(fields[1]);
    if (!tower) {
      ++out.stats.dropped_unknown_tower;
      continue;
    }
    CdrRecord rec;
    rec.minute = *minute;
    rec.tower = *tower;
    rec.caller = out.users.intern(fields[2]);
    rec.callee = out.users.intern(fields[3]);
    out.records.push_back(rec);
    if (!any || rec.minute < min_minute) min_minute = rec.minute;
    if (!any || rec.minute > max_minute) max_minute = rec.minute;
    any = true;
  }

  if (out.stats.total_rows > 0 &&
      double(out.stats.malformed) > max_malformed_fraction * double(out.stats.total_rows))
    throw DataError("too many malformed CDR rows in " + path + ": " +
                    std::to_string(out.stats.malformed) + " of " +
                    std::to_string(out.stats.total_rows));

  if (!bounded) {
    // infer [first day, last day + 1): whole-day ceiling of the data span
    if (any) {
      const int64_t lo_day = min_minute >= 0 ? min_minute / timeparse::kMinutesPerDay
                                             : (min_minute - 1439) / timeparse::kMinutesPerDay;
      const int64_t hi_day = max_minute >= 0 ? max_minute / timeparse::kMinutesPerDay
                                             : (max_minute - 1439) / timeparse::kMinutesPerDay;
      out.window.start_day = lo_day;
      out.window.end_day = hi_day + 1;
    } else {
      out.window.start_day = 0;
      out.window.end_day = 1;
    }
  }
  return out;
}

std::vector<uint8_t> filter_users(const std::vector<CdrRecord>& records,
                                  std::size_t user_count,
                                  const ObservationWindow& window, double min_rate) {
  if (min_rate <= 0.0) throw ValidationError("filter.min_rate must be > 0");
  if (window.length_days() < 1) throw ValidationError("observation window must span ≥ 1 day");
  std::vector<int64_t> outgoing(user_count, 0);
  for (const CdrRecord& r : records) ++outgoing[std::size_t(r.caller)];
  std::vector<uint8_t> retained(user_count, 0);
  const double days = double(window.length_days());
  for (std::size_t u = 0; u < user_count; ++u)
    retained[u] = double(outgoing[u]) / days > min_rate ? 1 : 0;
  return retained;
}

Trajectories build_trajectories(const std::vector<CdrRecord>& records,
                                const std::vector<uint8_t>& retained) {
  Trajectories out;
  out.retained = retained;
  out.events.resize(retained.size());

  std::vector<uint32_t> counts(retained.size(), 0);
  for (const CdrRecord& r : records)
    if (retained[std::size_t(r.caller)]) ++counts[std::size_t(r.caller)];
  for (std::size_t u = 0; u < retained.size(); ++u) out.events[u].reserve(counts[u]);

  for (const CdrRecord& r : records)
    if (retained[std::size_t(r.caller)])
      out.events[std::size_t(r.caller)].push_back({r.minute, r.tower});

  // events were appended in input order; stable sort keeps that order on ties
  for (auto& ev : out.events)
    std::stable_sort(ev.begin(), ev.end(),
                     [](const TrajectoryEvent& a, const TrajectoryEvent& b) {
                       return a.minute < b.minute;
                     });
  return out;
}

bool CallGraph::has_edge(int32_t u, int32_t v) const {
  const auto& adj = adjacency_[std::size_t(u)];
  for (const Neighbor& n : adj)
    if (n.user == v) return true;
  return false;
}

void CallGraph::add_edge(int32_t u, int32_t v, uint32_t calls_uv, uint32_t calls_vu) {
  adjacency_[std::size_t(u)].push_back({v, calls_uv, calls_vu});
  adjacency_[std::size_t(v)].push_back({u, calls_vu, calls_uv});
  ++edges_;
}

CallGraph build_call_graph(const std::vector<CdrRecord>& records,
                           const std::vector<uint8_t>& retained,
                           std::size_t user_count) {
  // directed counts keyed by the unordered pair (lo, hi)
  std::unordered_map<uint64_t, std::pair<uint32_t, uint32_t>> pair_counts;
  pair_counts.reserve(records.size() / 4 + 16);
  for (const CdrRecord& r : records) {
    if (!retained[std::size_t(r.caller)] || !retained[std::size_t(r.callee)]) continue;
    const bool swapped = r.caller > r.callee;
    const uint64_t lo = uint64_t(uint32_t(swapped ? r.callee : r.caller));
    const uint64_t hi = uint64_t(uint32_t(swapped ? r.caller : r.callee));
    auto& counts = pair_counts[(lo << 32) | hi];
    if (swapped)
      ++counts.second;  // hi → lo
    else
      ++counts.first;  // lo → hi
  }

  CallGraph graph(user_count);
  // deterministic edge order: sort keys
  std::vector<uint64_t> keys;
  keys.reserve(pair_counts.size());
  for (const auto& [key, counts] : pair_counts)
    if (counts.first >= 1 && counts.second >= 1) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  for (const uint64_t key : keys) {
    const auto& counts = pair_counts[key];
    graph.add_edge(int32_t(key >> 32), int32_t(key & 0xffffffffu), counts.first, counts.second);
  }
  return graph;
}

}  // namespace nowcast::ingest
