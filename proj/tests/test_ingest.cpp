#include <doctest.h>

#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <string>

#include "nowcast/error.hpp"
#include "nowcast/ingest.hpp"
#include "nowcast/rng.hpp"

using namespace nowcast;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() / ("nowcast_ingest_" + std::to_string(::getpid()));
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

const char* kTowers =
    "tower,latitude,longitude\n"
    "36,49.54,3.64\n"
    "37,48.28,1.258\n"
    "38,48.22,-1.52\n";

ingest::ObservationWindow window_2007() {
  // 45 days starting 2007-09-10
  const int64_t start = timeparse::days_from_civil(2007, 9, 10);
  return {start, start + 45};
}

}  // namespace

TEST_CASE("well-formed rows parse into records") {
  TempDir tmp;
  const std::string towers = tmp.file("towers.csv", kTowers);
  const std::string cdr = tmp.file("cdr.csv",
                                   "timestamp,tower,caller,callee\n"
                                   "2007/09/10 23:34,36,4F80460,4F80331\n"
                                   "2007/10/10 01:12,36,2B01359,9H80125\n"
                                   "2007/10/10 01:43,38,2B19935,6W1199\n");
  const auto table = ingest::load_towers(towers);
  const auto parsed = ingest::parse_cdr(cdr, table, window_2007());
  CHECK(parsed.records.size() == 3);
  CHECK(parsed.stats.malformed == 0);
  CHECK(parsed.users.size() == 6);
  CHECK(parsed.records[0].minute % 1440 == 23 * 60 + 34);
}

TEST_CASE("empty file with a valid header parses to nothing") {
  TempDir tmp;
  const auto table = ingest::load_towers(tmp.file("towers.csv", kTowers));
  const auto parsed =
      ingest::parse_cdr(tmp.file("cdr.csv", "timestamp,tower,caller,callee\n"), table,
                        window_2007());
  CHECK(parsed.records.empty());
  CHECK(parsed.stats.malformed == 0);
  CHECK(parsed.stats.dropped_unknown_tower == 0);
}

TEST_CASE("records at unknown towers are dropped and tallied") {
  TempDir tmp;
  const auto table = ingest::load_towers(tmp.file("towers.csv", kTowers));
  const auto parsed = ingest::parse_cdr(
      tmp.file("cdr.csv", "timestamp,tower,caller,callee\n2007/09/11 10:00,99,A,B\n"), table,
      window_2007());
  CHECK(parsed.records.empty());
  CHECK(parsed.stats.dropped_unknown_tower == 1);
}

TEST_CASE("malformed rows are skipped until the fatal threshold") {
  TempDir tmp;
  const auto table = ingest::load_towers(tmp.file("towers.csv", kTowers));

  std::string ok_rows = "timestamp,tower,caller,callee\n";
  for (int i = 0; i < 200; ++i)
    ok_rows += "2007/09/11 10:00,36,A" + std::to_string(i) + ",B\n";
  SUBCASE("one bad row in 201 is tolerated") {
    const auto parsed = ingest::parse_cdr(
        tmp.file("cdr.csv", ok_rows + "not-a-timestamp,36,A,B\n"), table, window_2007());
    CHECK(parsed.stats.malformed == 1);
    CHECK(parsed.records.size() == 200);
  }
  SUBCASE("over 1% malformed rows is fatal") {
    std::string bad = "timestamp,tower,caller,callee\n";
    for (int i = 0; i < 97; ++i) bad += "2007/09/11 10:00,36,A" + std::to_string(i) + ",B\n";
    bad += "xxxx,36,A,B\nyyyy,36,A,B\nzzzz,36,A,B\n";
    CHECK_THROWS_AS(ingest::parse_cdr(tmp.file("bad.csv", bad), table, window_2007()), DataError);
  }
  SUBCASE("self-calls violate the record contract") {
    const auto parsed = ingest::parse_cdr(
        tmp.file("cdr.csv", ok_rows + "2007/09/11 10:01,36,SAME,SAME\n"), table, window_2007());
    CHECK(parsed.stats.malformed == 1);
  }
}

TEST_CASE("records outside the window are excluded") {
  TempDir tmp;
  const auto table = ingest::load_towers(tmp.file("towers.csv", kTowers));
  const auto parsed = ingest::parse_cdr(
      tmp.file("cdr.csv",
               "timestamp,tower,caller,callee\n"
               "2007/09/09 23:59,36,A,B\n"
               "2007/09/10 00:00,36,A,B\n"
               "2007/10/24 23:59,36,A,B\n"
               "2007/10/25 00:00,36,A,B\n"),
      table, window_2007());
  CHECK(parsed.records.size() == 2);
  CHECK(parsed.stats.dropped_out_of_window == 2);
}

TEST_CASE("window is inferred as whole covering days when not configured") {
  TempDir tmp;
  const auto table = ingest::load_towers(tmp.file("towers.csv", kTowers));
  const auto parsed = ingest::parse_cdr(
      tmp.file("cdr.csv",
               "timestamp,tower,caller,callee\n"
               "2007/09/10 10:00,36,A,B\n"
               "2007/09/12 09:00,36,A,B\n"),
      table, std::nullopt);
  CHECK(parsed.window.start_day == timeparse::days_from_civil(2007, 9, 10));
  CHECK(parsed.window.end_day == timeparse::days_from_civil(2007, 9, 13));
  CHECK(parsed.window.length_days() == 3);
}

TEST_CASE("ISO-8601 timestamps are accepted as a fallback") {
  TempDir tmp;
  const auto table = ingest::load_towers(tmp.file("towers.csv", kTowers));
  const auto parsed = ingest::parse_cdr(
      tmp.file("cdr.csv",
               "timestamp,tower,caller,callee\n"
               "2007-09-10T23:34,36,A,B\n"
               "2007-09-11 08:15:30,36,B,A\n"),
      table, window_2007());
  CHECK(parsed.records.size() == 2);
  CHECK(parsed.records[1].minute % 1440 == 8 * 60 + 15);
}

TEST_CASE("an optional duration column is accepted and ignored") {
  TempDir tmp;
  const auto table = ingest::load_towers(tmp.file("towers.csv", kTowers));
  const auto parsed = ingest::parse_cdr(
      tmp.file("cdr.csv",
               "timestamp,tower,caller,callee,duration\n"
               "2007/09/10 23:34,36,A,B,120\n"),
      table, window_2007());
  CHECK(parsed.records.size() == 1);
}

TEST_CASE("timestamp parsing validates the civil calendar") {
  using timeparse::parse_date_days;
  using timeparse::parse_timestamp_minutes;

  CHECK(parse_timestamp_minutes("2008/02/29 12:00").has_value());   // leap day
  CHECK_FALSE(parse_timestamp_minutes("2007/02/29 12:00").has_value());
  CHECK_FALSE(parse_timestamp_minutes("2007/13/01 12:00").has_value());
  CHECK_FALSE(parse_timestamp_minutes("2007/09/10 24:00").has_value());
  CHECK_FALSE(parse_timestamp_minutes("2007/09/10 23:60").has_value());
  CHECK_FALSE(parse_timestamp_minutes("2007-09/10 23:00").has_value());  // mixed separators

  const auto days = parse_date_days("2007-09-10");
  REQUIRE(days.has_value());
  CHECK(timeparse::format_date(*days) == "2007-09-10");
  CHECK(timeparse::format_timestamp(*days * 1440 + 23 * 60 + 34) == "2007/09/10 23:34");

  CHECK(timeparse::parse_time_of_day("07:00") == 7 * 60);
  CHECK_FALSE(timeparse::parse_time_of_day("7:00").has_value());
  CHECK_FALSE(timeparse::parse_time_of_day("25:00").has_value());
}

TEST_CASE("bad headers are fatal") {
  TempDir tmp;
  const auto table = ingest::load_towers(tmp.file("towers.csv", kTowers));
  CHECK_THROWS_AS(ingest::parse_cdr(tmp.file("cdr.csv", "time,cell,caller,callee\n"), table,
                                    window_2007()),
                  ValidationError);
  CHECK_THROWS_AS(ingest::load_towers(tmp.file("bad_towers.csv", "tower,lat,lon\n")),
                  ValidationError);
}

TEST_CASE("duplicate or out-of-range towers are fatal") {
  TempDir tmp;
  CHECK_THROWS_AS(
      ingest::load_towers(tmp.file("towers.csv", "tower,latitude,longitude\n1,49,3\n1,48,2\n")),
      ValidationError);
  CHECK_THROWS_AS(
      ingest::load_towers(tmp.file("towers2.csv", "tower,latitude,longitude\n1,91.0,3\n")),
      ValidationError);
}

namespace {

std::vector<ingest::CdrRecord> make_records(ingest::IdTable& users, int caller_calls) {
  std::vector<ingest::CdrRecord> records;
  const int32_t a = users.intern("A");
  const int32_t b = users.intern("B");
  const int64_t base = timeparse::days_from_civil(2007, 9, 10) * 1440;
  for (int i = 0; i < caller_calls; ++i)
    records.push_back({base + i * 30, 0, a, b});
  return records;
}

}  // namespace

TEST_CASE("the retention threshold splits at outgoing calls / window days") {
  const ingest::ObservationWindow window = window_2007();
  SUBCASE("23 outgoing calls in 45 days is retained") {
    ingest::IdTable users;
    const auto records = make_records(users, 23);
    const auto retained = ingest::filter_users(records, users.size(), window, 0.5);
    CHECK(retained[0] == 1);  // A
    CHECK(retained[1] == 0);  // B only receives
  }
  SUBCASE("22 outgoing calls in 45 days is dropped") {
    ingest::IdTable users;
    const auto records = make_records(users, 22);
    const auto retained = ingest::filter_users(records, users.size(), window, 0.5);
    CHECK(retained[0] == 0);
  }
  SUBCASE("zero outgoing calls is dropped for any positive rate") {
    ingest::IdTable users;
    users.intern("A");
    const auto retained = ingest::filter_users({}, users.size(), window, 0.01);
    CHECK(retained[0] == 0);
  }
  SUBCASE("a rate exactly at the threshold is dropped (strict inequality)") {
    ingest::IdTable users;
    const int32_t a = users.intern("A");
    users.intern("B");
    const int64_t base = timeparse::days_from_civil(2007, 9, 10) * 1440;
    const std::vector<ingest::CdrRecord> records = {{base, 0, a, 1}};  // 1 call / 2 days
    const ingest::ObservationWindow two_days{base / 1440, base / 1440 + 2};
    CHECK(ingest::filter_users(records, users.size(), two_days, 0.5)[0] == 0);
    CHECK(ingest::filter_users(records, users.size(), two_days, 0.49)[0] == 1);
  }
}

TEST_CASE("raising the threshold never adds a retained user") {
  rng::Xoshiro256ss gen(5);
  ingest::IdTable users;
  std::vector<ingest::CdrRecord> records;
  const int64_t base = timeparse::days_from_civil(2007, 9, 10) * 1440;
  for (int u = 0; u < 40; ++u) {
    const int32_t caller = users.intern("u" + std::to_string(u));
    const int32_t callee = users.intern("u" + std::to_string((u + 1) % 40));
    const int calls = int(gen.bounded(60));
    for (int i = 0; i < calls; ++i) records.push_back({base + i, 0, caller, callee});
  }
  const ingest::ObservationWindow window = window_2007();
  std::vector<uint8_t> previous(users.size(), 1);
  for (const double rate : {0.1, 0.3, 0.5, 0.8, 1.2}) {
    const auto retained = ingest::filter_users(records, users.size(), window, rate);
    for (std::size_t u = 0; u < retained.size(); ++u)
      CHECK(retained[u] <= previous[u]);
    previous = retained;
  }
}

TEST_CASE("trajectories sort by time with input order breaking ties") {
  ingest::IdTable users;
  const int32_t a = users.intern("A");
  const int64_t base = timeparse::days_from_civil(2007, 9, 10) * 1440;
  std::vector<ingest::CdrRecord> records = {
      {base + 100, 2, a, 1},  // tower B at t2
      {base + 50, 1, a, 1},   // tower A at t1
      {base + 100, 3, a, 1},  // same minute as the first row: input order holds
  };
  const auto traj = ingest::build_trajectories(records, {1, 1});
  REQUIRE(traj.events[0].size() == 3);
  CHECK(traj.events[0][0].tower == 1);
  CHECK(traj.events[0][1].tower == 2);
  CHECK(traj.events[0][2].tower == 3);
}

TEST_CASE("trajectory length equals the outgoing-call count and dropped users vanish") {
  ingest::IdTable users;
  const auto records = make_records(users, 23);
  const auto retained = ingest::filter_users(records, users.size(), window_2007(), 0.5);
  const auto traj = ingest::build_trajectories(records, retained);
  CHECK(traj.events[0].size() == 23);
  CHECK(traj.events[1].empty());
}

TEST_CASE("call graph keeps only reciprocated pairs") {
  ingest::IdTable users;
  const int32_t a = users.intern("A");
  const int32_t b = users.intern("B");
  const int32_t c = users.intern("C");
  const int64_t t = timeparse::days_from_civil(2007, 9, 10) * 1440;

  SUBCASE("A→B three times and B→A once gives directional counts (3,1)") {
    std::vector<ingest::CdrRecord> records = {
        {t, 0, a, b}, {t + 1, 0, a, b}, {t + 2, 0, a, b}, {t + 3, 0, b, a}};
    const auto graph = ingest::build_call_graph(records, {1, 1, 1}, users.size());
    REQUIRE(graph.has_edge(a, b));
    REQUIRE(graph.has_edge(b, a));  // symmetric through the query interface
    const auto& neighbors = graph.neighbors(a);
    REQUIRE(neighbors.size() == 1);
    CHECK(neighbors[0].calls_out == 3);
    CHECK(neighbors[0].calls_in == 1);
    CHECK(neighbors[0].total() == 4);
  }
  SUBCASE("one-way calling never creates an edge") {
    std::vector<ingest::CdrRecord> records;
    for (int i = 0; i < 5; ++i) records.push_back({t + i, 0, a, b});
    const auto graph = ingest::build_call_graph(records, {1, 1, 1}, users.size());
    CHECK_FALSE(graph.has_edge(a, b));
    CHECK(graph.edge_count() == 0);
  }
  SUBCASE("empty records give an empty graph") {
    const auto graph = ingest::build_call_graph({}, {1, 1, 1}, users.size());
    CHECK(graph.edge_count() == 0);
  }
  SUBCASE("edges touching non-retained users are discarded") {
    std::vector<ingest::CdrRecord> records = {{t, 0, a, b}, {t + 1, 0, b, a},
                                              {t + 2, 0, a, c}, {t + 3, 0, c, a}};
    const auto graph = ingest::build_call_graph(records, {1, 1, 0}, users.size());
    CHECK(graph.has_edge(a, b));
    CHECK_FALSE(graph.has_edge(a, c));
  }
}

TEST_CASE("re-parsing the same file yields identical outputs") {
  TempDir tmp;
  const auto table = ingest::load_towers(tmp.file("towers.csv", kTowers));
  std::string body = "timestamp,tower,caller,callee\n";
  rng::Xoshiro256ss gen(17);
  for (int i = 0; i < 500; ++i) {
    body += "2007/09/" + std::to_string(10 + int(gen.bounded(19))) + " 0" +
            std::to_string(int(gen.bounded(9))) + ":1" + std::to_string(int(gen.bounded(9))) +
            ",3" + std::to_string(6 + int(gen.bounded(3))) + ",u" +
            std::to_string(int(gen.bounded(20))) + ",u" + std::to_string(20 + int(gen.bounded(20))) +
            "\n";
  }
  const std::string path = tmp.file("cdr.csv", body);
  const auto first = ingest::parse_cdr(path, table, window_2007());
  const auto second = ingest::parse_cdr(path, table, window_2007());
  REQUIRE(first.records.size() == second.records.size());
  for (std::size_t i = 0; i < first.records.size(); ++i) {
    CHECK(first.records[i].minute == second.records[i].minute);
    CHECK(first.records[i].tower == second.records[i].tower);
    CHECK(first.records[i].caller == second.records[i].caller);
    CHECK(first.records[i].callee == second.records[i].callee);
  }
}
