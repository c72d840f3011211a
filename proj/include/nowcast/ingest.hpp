#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <unordered_map>
#include <vector>

#include "nowcast/timeparse.hpp"

namespace nowcast::ingest {

/// Transparent hash so interning tables can be probed with string_views.
struct StringHash {
  using is_transparent = void;
  std::size_t operator()(std::string_view s) const { return std::hash<std::string_view>{}(s); }
  std::size_t operator()(const std::string& s) const { return std::hash<std::string_view>{}(s); }
};
struct StringEq {
  using is_transparent = void;
  bool operator()(std::string_view a, std::string_view b) const { return a == b; }
};

/// Interns opaque identifiers to dense int32 indices.
class IdTable {
 public:
  int32_t intern(std::string_view id);
  std::optional<int32_t> find(std::string_view id) const;
  const std::string& name(int32_t idx) const { return names_[std::size_t(idx)]; }
  std::size_t size() const { return names_.size(); }
  const std::vector<std::string>& names() const { return names_; }

 private:
  std::vector<std::string> names_;
  std::unordered_map<std::string, int32_t, StringHash, StringEq> index_;
};

/// Half-open day range [start_day, end_day); length_days = end - start ≥ 1.
struct ObservationWindow {
  int64_t start_day = 0;
  int64_t end_day = 0;

  int64_t length_days() const { return end_day - start_day; }
  bool contains_minute(int64_t minute) const {
    return minute >= start_day * timeparse::kMinutesPerDay &&
           minute < end_day * timeparse::kMinutesPerDay;
  }
};

struct CdrRecord {
  int64_t minute;   // minutes since epoch, local wall clock
  int32_t tower;
  int32_t caller;
  int32_t callee;
};

struct TowerTable {
  IdTable ids;
  std::vector<double> lat;
  std::vector<double> lon;
};

TowerTable load_towers(const std::string& path);

struct ParseStats {
  std::size_t total_rows = 0;  // data rows seen (excluding header)
  std::size_t malformed = 0;
  std::size_t dropped_unknown_tower = 0;
  std::size_t dropped_out_of_window = 0;
};

struct ParseResult {
  std::vector<CdrRecord> records;  // in-window, known tower, input order
  IdTable users;                   // callers and callees
  ObservationWindow window;        // configured, or inferred from the data
  ParseStats stats;
};

/// Parses the CDR CSV against an already-loaded tower table. When `window`
/// is empty the window is inferred as [first day, last day + 1) of the data.
/// Malformed rows are skipped and tallied; more than `max_malformed_fraction`
/// of them is a DataError.
ParseResult parse_cdr(const std::string& path, const TowerTable& towers,
                      std::optional<ObservationWindow> window,
                      double max_malformed_fraction = 0.01);

/// User u is retained iff outgoing_calls(u) / length_days > min_rate.
std::vector<uint8_t> filter_users(const std::vector<CdrRecord>& records,
                                  std::size_t user_count,
                                  const ObservationWindow& window, double min_rate);

struct TrajectoryEvent {
  int64_t minute;
  int32_t tower;
};

/// Per-user time-ordered outgoing-call events. Filtered-out users have
/// empty event lists and retained() false.
class Trajectories {
 public:
  std::vector<std::vector<TrajectoryEvent>> events;  // index: user id
  std::vector<uint8_t> retained;

  bool is_retained(int32_t user) const { return retained[std::size_t(user)] != 0; }
};

/// Events come from records where the user is the caller; stable sort by
/// timestamp keeps input order on ties.
Trajectories build_trajectories(const std::vector<CdrRecord>& records,
                                const std::vector<uint8_t>& retained);

/// Reciprocated call graph over retained users. An edge exists iff both
/// directed counts are ≥ 1 and both endpoints are retained.
class CallGraph {
 public:
  struct Neighbor {
    int32_t user;
    uint32_t calls_out;  // this user → neighbor
    uint32_t calls_in;   // neighbor → this user
    uint32_t total() const { return calls_out + calls_in; }
  };

  explicit CallGraph(std::size_t user_count) : adjacency_(user_count) {}

  std::size_t degree(int32_t user) const { return adjacency_[std::size_t(user)].size(); }
  const std::vector<Neighbor>& neighbors(int32_t user) const {
    return adjacency_[std::size_t(user)];
  }
  bool has_edge(int32_t u, int32_t v) const;
  std::size_t edge_count() const { return edges_; }
  std::size_t user_count() const { return adjacency_.size(); }

  void add_edge(int32_t u, int32_t v, uint32_t calls_uv, uint32_t calls_vu);

 private:
  std::vector<std::vector<Neighbor>> adjacency_;
  std::size_t edges_ = 0;
};

CallGraph build_call_graph(const std::vector<CdrRecord>& records,
                           const std::vector<uint8_t>& retained,
                           std::size_t user_count);

}  // namespace nowcast::ingest
