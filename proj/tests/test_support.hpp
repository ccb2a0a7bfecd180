// Shared helpers and independent oracles for the test suites.
#pragma once

#include <filesystem>
#include <string>
#include <unistd.h>
#include <vector>

#include "sparsecast/featurize.hpp"
#include "sparsecast/ingest.hpp"
#include "sparsecast/types.hpp"

namespace sctest {

struct TempDir {
    std::filesystem::path path;
    explicit TempDir(const std::string& tag = "sc") {
        path = std::filesystem::temp_directory_path() /
               (tag + "_" + std::to_string(::getpid()) + "_" + std::to_string(counter()++));
        std::filesystem::create_directories(path);
    }
    ~TempDir() { std::filesystem::remove_all(path); }
    std::string file(const std::string& name) const { return (path / name).string(); }

private:
    static int& counter() {
        static int c = 0;
        return c;
    }
};

// Brute-force recomputation of one enriched row from the raw event log and
// the sample's own timestamps. L columns may consult only taken events at or
// before the sample time; K columns may consult only the prescribed-time
// schedule. Everything is recomputed from scratch, independently of the
// pipeline's prev/next bookkeeping.
inline std::vector<float> oracle_enrich_row(const sparsecast::SensorSample& s, const sparsecast::EventLog& events,
                                            bool* target_out = nullptr) {
    using namespace sparsecast;
    std::vector<float> row(kDimTotal, 0.0f);
    const std::int64_t ts = s.ts_utc;
    const std::int64_t offset = s.ts_local - s.ts_utc;

    for (int c = 0; c < kSensorChannels; ++c) row[static_cast<std::size_t>(c)] = static_cast<float>(s.ch[c]);

    // Past taken events only.
    std::int64_t last_taken = 0;
    bool has_taken = false;
    for (const auto& e : events.entries) {
        if (e.taken_ts && *e.taken_ts <= ts && (!has_taken || *e.taken_ts > last_taken)) {
            has_taken = true;
            last_taken = *e.taken_ts;
        }
    }
    // Prescribed schedule only.
    std::int64_t prev_prescribed = 0, next_prescribed = 0;
    bool has_prev = false, has_next = false;
    for (const auto& e : events.entries) {
        if (e.prescribed_ts <= ts && (!has_prev || e.prescribed_ts > prev_prescribed)) {
            has_prev = true;
            prev_prescribed = e.prescribed_ts;
        }
        if (e.prescribed_ts > ts && (!has_next || e.prescribed_ts < next_prescribed)) {
            has_next = true;
            next_prescribed = e.prescribed_ts;
        }
    }

    row[kColLastMedEvent] = has_taken ? 1.0f : 0.0f;
    row[kColLastPrescribedTime] = has_prev ? static_cast<float>(ts - prev_prescribed) : -1.0f;
    row[kColLastEventHour] = has_taken ? static_cast<float>(hour_of_ts(last_taken + offset)) : -1.0f;
    row[kColDayOfWeek + weekday_of_ts(s.ts_local)] = 1.0f;
    row[kColHourOfDay + hour_of_ts(s.ts_local)] = 1.0f;
    for (int k = 0; k < 5; ++k) {
        bool any = false;
        for (const auto& e : events.entries)
            any = any || (e.taken_ts && *e.taken_ts <= ts && *e.taken_ts > ts - kLookbackHours[k] * kSecondsPerHour);
        row[static_cast<std::size_t>(kColMedInLast + k)] = any ? 1.0f : 0.0f;
    }

    if (has_next) {
        row[kColRelativeTsUtc] = static_cast<float>(next_prescribed - ts);
        row[kColRelativeTsLocal] = static_cast<float>((next_prescribed + offset) - s.ts_local);
        row[kColNextPrescribedHour + hour_of_ts(next_prescribed + offset)] = 1.0f;
    }

    if (target_out) {
        bool t = false;
        for (const auto& e : events.entries)
            t = t || (e.taken_ts && *e.taken_ts > ts && *e.taken_ts <= ts + kSecondsPerHour);
        *target_out = t;
    }
    return row;
}

}  // namespace sctest
