#include <catch2/catch_amalgamated.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "sparsecast/cohort.hpp"
#include "sparsecast/ingest.hpp"
#include "sparsecast/rng.hpp"

using namespace sparsecast;
namespace fs = std::filesystem;

namespace {

struct TempDir {
    fs::path path;
    TempDir() {
        path = fs::temp_directory_path() / ("sc_ingest_" + std::to_string(::getpid()) + "_" +
                                            std::to_string(reinterpret_cast<std::uintptr_t>(this)));
        fs::create_directories(path);
    }
    ~TempDir() { fs::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

void spit(const std::string& path, const std::string& text) {
    std::ofstream out(path, std::ios::binary);
    out << text;
}

// Naive O(n*m) merge used as the oracle for the binary-search implementation.
MergedSeries naive_merge(const SensorStream& sensor, const EventLog& events) {
    MergedSeries out;
    for (const auto& s : sensor.samples) {
        MergedRecord rec;
        rec.sample = s;
        bool has_next_prescribed = false;
        std::int64_t next_prescribed = 0;
        for (const auto& e : events.entries) {
            if (e.prescribed_ts <= s.ts_utc) {
                if (!rec.prev_prescribed_ts || e.prescribed_ts > *rec.prev_prescribed_ts)
                    rec.prev_prescribed_ts = e.prescribed_ts;
            } else if (!has_next_prescribed || e.prescribed_ts < next_prescribed) {
                has_next_prescribed = true;
                next_prescribed = e.prescribed_ts;
            }
            if (e.taken_ts) {
                if (*e.taken_ts <= s.ts_utc) {
                    if (!rec.prev_event_ts || *e.taken_ts > *rec.prev_event_ts) rec.prev_event_ts = *e.taken_ts;
                } else if (!rec.next_event_ts || *e.taken_ts < *rec.next_event_ts) {
                    rec.next_event_ts = *e.taken_ts;
                }
            }
        }
        if (!has_next_prescribed) continue;  // dropped: next prescribed undefined
        rec.next_prescribed_ts = next_prescribed;
        out.records.push_back(rec);
    }
    return out;
}

}  // namespace

TEST_CASE("well-formed sensor file loads and round-trips byte-identically") {
    TempDir dir;
    CohortConfig cfg;
    cfg.n_participants = 1;
    cfg.days_per_participant = 2;
    cfg.seed = 5;
    Cohort cohort = gen_cohort(cfg);
    SensorStream s = gen_sensor_stream(cohort.profiles[0], 1, cfg.seed);
    s.samples.resize(512);  // plenty for a file-format test

    std::string path = dir.file("sensor.csv");
    write_sensor_csv(path, s);
    SensorStream loaded = load_sensor_csv(path);
    REQUIRE(loaded.size() == s.size());
    for (std::size_t i = 0; i < s.size(); ++i) {
        CHECK(loaded.samples[i].ts_utc == s.samples[i].ts_utc);
        for (int c = 0; c < kSensorChannels; ++c) CHECK(loaded.samples[i].ch[c] == s.samples[i].ch[c]);
    }

    std::string again = dir.file("sensor2.csv");
    write_sensor_csv(again, loaded);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("ten-row handmade sensor file loads as ten samples") {
    TempDir dir;
    std::string text = std::string(kSensorCsvHeader) + "\n";
    for (int i = 0; i < 10; ++i) {
        text += std::to_string(1000 + i) + "," + std::to_string(1000 + i - 3600) +
                ",0.1,0.2,0.3,0,0,0,0,0,1,40.5,-111.9,1200,5,0.4\n";
    }
    std::string path = dir.file("ok.csv");
    spit(path, text);
    SensorStream s = load_sensor_csv(path);
    CHECK(s.size() == 10);
    CHECK(s.utc_offset() == -3600);
}

TEST_CASE("sensor file missing the speed column is a schema error naming it") {
    TempDir dir;
    std::string path = dir.file("bad.csv");
    spit(path, "ts_utc,ts_local,yaw,pitch,roll,rot_x,rot_y,rot_z,acc_x,acc_y,acc_z,lat,lon,altitude,h_accuracy\n");
    CHECK_THROWS_WITH(load_sensor_csv(path), Catch::Matchers::ContainsSubstring("speed"));
}

TEST_CASE("out-of-order and duplicate sensor rows are data errors with the row number") {
    TempDir dir;
    std::string head = std::string(kSensorCsvHeader) + "\n";
    std::string row1 = "1000,1000,0,0,0,0,0,0,0,0,1,40,-110,100,5,0\n";
    std::string row2 = "999,999,0,0,0,0,0,0,0,0,1,40,-110,100,5,0\n";

    std::string path = dir.file("ooo.csv");
    spit(path, head + row1 + row2);
    CHECK_THROWS_WITH(load_sensor_csv(path), Catch::Matchers::ContainsSubstring("row 2") &&
                                                 Catch::Matchers::ContainsSubstring("non-monotonic"));

    spit(path, head + row1 + row1);
    CHECK_THROWS_WITH(load_sensor_csv(path), Catch::Matchers::ContainsSubstring("duplicate"));
}

TEST_CASE("event file round-trips and validates per-day timestamps") {
    TempDir dir;
    EventLog log;
    std::int64_t day = days_from_civil(2024, 3, 1);
    log.entries.push_back({day, day * kSecondsPerDay + 9 * 3600 + 120, day * kSecondsPerDay + 9 * 3600});
    log.entries.push_back({day + 1, std::nullopt, (day + 1) * kSecondsPerDay + 9 * 3600});
    std::string path = dir.file("events.csv");
    write_event_csv(path, log);
    EventLog loaded = load_event_csv(path, 0);
    REQUIRE(loaded.size() == 2);
    CHECK(loaded.entries[0].taken_ts == log.entries[0].taken_ts);
    CHECK_FALSE(loaded.entries[1].taken_ts.has_value());

    std::string again = dir.file("events2.csv");
    write_event_csv(again, loaded);
    CHECK(slurp(path) == slurp(again));
}

TEST_CASE("event rows with missing prescribed time or off-day timestamps fail") {
    TempDir dir;
    std::string path = dir.file("bad_events.csv");
    spit(path, "date,taken_ts,prescribed_ts\n2024-03-01,,\n");
    CHECK_THROWS_WITH(load_event_csv(path), Catch::Matchers::ContainsSubstring("prescribed_ts"));

    // taken_ts on the wrong calendar day
    std::int64_t day = days_from_civil(2024, 3, 1);
    std::string text = "date,taken_ts,prescribed_ts\n2024-03-01," +
                       std::to_string((day + 2) * kSecondsPerDay) + "," +
                       std::to_string(day * kSecondsPerDay + 9 * 3600) + "\n";
    spit(path, text);
    CHECK_THROWS_WITH(load_event_csv(path), Catch::Matchers::ContainsSubstring("taken_ts"));
}

TEST_CASE("absent days are completed as all-missed doses within the study span") {
    // 14-day span, 12 recorded day-entries -> 14 after completion, 2 missed.
    std::int64_t day0 = days_from_civil(2024, 5, 1);
    EventLog log;
    for (int d = 0; d < 14; ++d) {
        if (d == 3 || d == 9) continue;  // wholly absent days
        std::int64_t prescribed = (day0 + d) * kSecondsPerDay + 8 * 3600;
        log.entries.push_back({day0 + d, prescribed + 60, prescribed});
    }
    EventLog full = complete_event_log(log, day0, 14, {8}, 0);
    REQUIRE(full.size() == 14);
    int missed = 0;
    for (const auto& e : full.entries)
        if (!e.taken_ts) ++missed;
    CHECK(missed == 2);

    // Empty log over a 5-day span becomes 5 all-missed days.
    EventLog empty;
    EventLog five = complete_event_log(empty, day0, 5, {8}, 0);
    REQUIRE(five.size() == 5);
    for (const auto& e : five.entries) CHECK_FALSE(e.taken_ts.has_value());
}

TEST_CASE("merge assigns the nearest future prescribed dose") {
    SensorStream sensor;
    for (int i = 0; i < 5; ++i) {
        SensorSample s;
        s.ts_utc = 1000 + i;
        s.ts_local = s.ts_utc;
        sensor.samples.push_back(s);
    }
    EventLog events;
    events.entries.push_back({0, std::nullopt, 1000 + 5400});

    MergedSeries m = merge_streams(sensor, events);
    REQUIRE(m.size() == 5);
    CHECK(m.records[0].next_prescribed_ts == 1000 + 5400);
    CHECK_FALSE(m.records[0].prev_event_ts.has_value());  // first sample precedes any event
    CHECK_FALSE(m.records[0].prev_prescribed_ts.has_value());
}

TEST_CASE("merge drops samples at or after the final prescribed dose") {
    SensorStream sensor;
    for (int i = 0; i < 100; ++i) {
        SensorSample s;
        s.ts_utc = i * 10;
        s.ts_local = s.ts_utc;
        sensor.samples.push_back(s);
    }
    EventLog events;
    events.entries.push_back({0, 205, 200});
    events.entries.push_back({0, std::nullopt, 500});

    MergedSeries m = merge_streams(sensor, events);
    // Oracle: samples strictly before the last prescribed dose survive.
    std::size_t expected = 0;
    for (const auto& s : sensor.samples)
        if (s.ts_utc < 500) ++expected;
    CHECK(m.size() == expected);

    // next_prescribed_ts is non-decreasing along the series.
    for (std::size_t i = 1; i < m.size(); ++i)
        CHECK(m.records[i].next_prescribed_ts >= m.records[i - 1].next_prescribed_ts);
}

TEST_CASE("binary-search merge equals the naive merge on random instances") {
    Rng rng(2024);
    for (int trial = 0; trial < 5; ++trial) {
        SensorStream sensor;
        std::int64_t ts = 0;
        for (int i = 0; i < 1000; ++i) {
            ts += 1 + static_cast<std::int64_t>(rng.uniform_index(20));
            SensorSample s;
            s.ts_utc = ts;
            s.ts_local = ts + 3600;
            sensor.samples.push_back(s);
        }
        EventLog events;
        for (int e = 0; e < 20; ++e) {
            std::int64_t prescribed = static_cast<std::int64_t>(rng.uniform_index(static_cast<std::uint64_t>(ts)));
            MedicationEvent ev;
            ev.date_day = day_of_ts(prescribed);
            ev.prescribed_ts = prescribed;
            if (rng.bernoulli(0.7)) ev.taken_ts = prescribed + rng.uniform_int(-2700, 2700);
            events.entries.push_back(ev);
        }
        std::stable_sort(events.entries.begin(), events.entries.end(),
                         [](const MedicationEvent& a, const MedicationEvent& b) { return a.prescribed_ts < b.prescribed_ts; });

        MergedSeries fast = merge_streams(sensor, events);
        MergedSeries slow = naive_merge(sensor, events);
        REQUIRE(fast.size() == slow.size());
        for (std::size_t i = 0; i < fast.size(); ++i) {
            CHECK(fast.records[i].next_prescribed_ts == slow.records[i].next_prescribed_ts);
            CHECK(fast.records[i].prev_prescribed_ts == slow.records[i].prev_prescribed_ts);
            CHECK(fast.records[i].prev_event_ts == slow.records[i].prev_event_ts);
            CHECK(fast.records[i].next_event_ts == slow.records[i].next_event_ts);
        }
    }
}

TEST_CASE("zero temporal overlap is a merge error") {
    SensorStream sensor;
    SensorSample s;
    s.ts_utc = 10000;
    s.ts_local = 10000;
    sensor.samples.push_back(s);
    EventLog events;
    events.entries.push_back({0, std::nullopt, 500});  // all events precede the stream
    CHECK_THROWS_AS(merge_streams(sensor, events), DataError);
}

TEST_CASE("generated cohort files ingest with zero validation errors") {
    TempDir dir;
    CohortConfig cfg;
    cfg.n_participants = 2;
    cfg.days_per_participant = 2;
    cfg.seed = 17;
    Cohort cohort = gen_cohort(cfg);
    auto stems = write_cohort_files(cohort, dir.path.string());
    REQUIRE(stems.size() == 2);
    for (const auto& stem : stems) {
        SensorStream s = load_sensor_csv(dir.file(stem + "_sensor.csv"));
        EventLog e = load_event_csv(dir.file(stem + "_events.csv"), s.utc_offset());
        CHECK(s.size() == 2 * 43200);
        CHECK(e.size() == 2);

        // Round-trip of generator output is byte-identical.
        std::string rt = dir.file(stem + "_rt.csv");
        write_sensor_csv(rt, s);
        CHECK(slurp(rt) == slurp(dir.file(stem + "_sensor.csv")));
        write_event_csv(rt, e);
        CHECK(slurp(rt) == slurp(dir.file(stem + "_events.csv")));
    }
}
