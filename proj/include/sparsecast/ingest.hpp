// Canonical file formats and stream merging.
//
// Sensor CSV header:
//   ts_utc,ts_local,yaw,pitch,roll,rot_x,rot_y,rot_z,acc_x,acc_y,acc_z,lat,lon,altitude,h_accuracy,speed
// Event CSV header:
//   date,taken_ts,prescribed_ts        (taken_ts empty when the dose was missed)
// UTF-8, '\n' line endings, '.' decimal separator. Floats are written in
// shortest round-trip form so write(load(x)) is byte-identical for files the
// toolkit produced. A trailing vertical-accuracy column, if present in a
// sensor file, is accepted and ignored.
#pragma once

#include <algorithm>
#include <charconv>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "sparsecast/common.hpp"
#include "sparsecast/time_utils.hpp"
#include "sparsecast/types.hpp"

namespace sparsecast {

inline constexpr const char* kSensorCsvHeader =
    "ts_utc,ts_local,yaw,pitch,roll,rot_x,rot_y,rot_z,acc_x,acc_y,acc_z,lat,lon,altitude,h_accuracy,speed";
inline constexpr const char* kEventCsvHeader = "date,taken_ts,prescribed_ts";

namespace detail {

inline std::vector<std::string> split_csv_line(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

inline double parse_double(const std::string& s, const char* field, std::size_t row) {
    double v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw DataError("row " + std::to_string(row) + ": bad numeric value '" + s + "' in column " + field);
    return v;
}

inline std::int64_t parse_i64(const std::string& s, const char* field, std::size_t row) {
    std::int64_t v = 0;
    auto [p, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc{} || p != s.data() + s.size())
        throw DataError("row " + std::to_string(row) + ": bad integer value '" + s + "' in column " + field);
    return v;
}

// Shortest representation that parses back to the same double.
inline void append_double(std::string& out, double v) {
    char buf[32];
    auto [p, ec] = std::to_chars(buf, buf + sizeof(buf), v);
    (void)ec;
    out.append(buf, p);
}

inline std::vector<std::string> read_lines(const std::string& path, const char* what) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError(std::string(what) + " file not found: " + path);
    std::vector<std::string> lines;
    std::string line;
    while (std::getline(in, line)) {
        if (!line.empty() && line.back() == '\r') line.pop_back();
        lines.push_back(line);
    }
    return lines;
}

inline void check_header(const std::string& got, const char* expected, const std::string& path) {
    auto want_cols = split_csv_line(expected);
    auto got_cols = split_csv_line(got);
    for (std::size_t i = 0; i < want_cols.size(); ++i) {
        if (i >= got_cols.size() || got_cols[i] != want_cols[i]) {
            throw DataError("schema error in " + path + ": missing or misplaced column '" + want_cols[i] + "'");
        }
    }
    // Extra trailing columns beyond the canonical set are tolerated (e.g.
    // vertical accuracy); they are ignored on load.
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Sensor CSV
// ---------------------------------------------------------------------------

inline SensorStream load_sensor_csv(const std::string& path) {
    auto lines = detail::read_lines(path, "sensor");
    if (lines.empty()) throw DataError("sensor file is empty: " + path);
    detail::check_header(lines[0], kSensorCsvHeader, path);

    static const char* kFieldNames[kSensorChannels] = {
        "yaw", "pitch", "roll", "rot_x", "rot_y", "rot_z",
        "acc_x", "acc_y", "acc_z", "lat", "lon", "altitude", "h_accuracy", "speed"};

    SensorStream stream;
    stream.samples.reserve(lines.size() - 1);
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].empty()) continue;
        auto cols = detail::split_csv_line(lines[r]);
        if (cols.size() < 16)
            throw DataError("row " + std::to_string(r) + ": expected 16 columns, got " + std::to_string(cols.size()));
        SensorSample s;
        s.ts_utc = detail::parse_i64(cols[0], "ts_utc", r);
        s.ts_local = detail::parse_i64(cols[1], "ts_local", r);
        for (int c = 0; c < kSensorChannels; ++c) s.ch[c] = detail::parse_double(cols[2 + c], kFieldNames[c], r);
        if (s.ch[kChLat] < -90.0 || s.ch[kChLat] > 90.0)
            throw DataError("row " + std::to_string(r) + ": latitude out of range");
        if (s.ch[kChLon] < -180.0 || s.ch[kChLon] > 180.0)
            throw DataError("row " + std::to_string(r) + ": longitude out of range");
        if (!stream.samples.empty()) {
            std::int64_t prev = stream.samples.back().ts_utc;
            if (s.ts_utc == prev) throw DataError("row " + std::to_string(r) + ": duplicate timestamp " + std::to_string(s.ts_utc));
            if (s.ts_utc < prev)
                throw DataError("row " + std::to_string(r) + ": non-monotonic timestamp " + std::to_string(s.ts_utc));
        }
        stream.samples.push_back(s);
    }
    return stream;
}

inline void write_sensor_csv(const std::string& path, const SensorStream& stream) {
    std::string out;
    out.reserve(64 * (stream.size() + 1));
    out += kSensorCsvHeader;
    out += '\n';
    for (const auto& s : stream.samples) {
        out += std::to_string(s.ts_utc);
        out += ',';
        out += std::to_string(s.ts_local);
        for (double v : s.ch) {
            out += ',';
            detail::append_double(out, v);
        }
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

// ---------------------------------------------------------------------------
// Event CSV
// ---------------------------------------------------------------------------

// `utc_offset` is the participant's fixed local-clock offset, used to check
// that timestamps fall on their row's local calendar day.
inline EventLog load_event_csv(const std::string& path, std::int64_t utc_offset = 0) {
    auto lines = detail::read_lines(path, "event");
    if (lines.empty()) throw DataError("event file is empty: " + path);
    detail::check_header(lines[0], kEventCsvHeader, path);

    EventLog log;
    for (std::size_t r = 1; r < lines.size(); ++r) {
        if (lines[r].empty()) continue;
        auto cols = detail::split_csv_line(lines[r]);
        if (cols.size() != 3)
            throw DataError("row " + std::to_string(r) + ": expected 3 columns, got " + std::to_string(cols.size()));
        MedicationEvent e;
        e.date_day = parse_date(cols[0]);
        if (cols[2].empty()) throw DataError("row " + std::to_string(r) + ": prescribed_ts is required");
        e.prescribed_ts = detail::parse_i64(cols[2], "prescribed_ts", r);
        if (!cols[1].empty()) e.taken_ts = detail::parse_i64(cols[1], "taken_ts", r);
        if (day_of_ts(e.prescribed_ts + utc_offset) != e.date_day)
            throw DataError("row " + std::to_string(r) + ": prescribed_ts does not fall on " + format_date(e.date_day));
        if (e.taken_ts && day_of_ts(*e.taken_ts + utc_offset) != e.date_day)
            throw DataError("row " + std::to_string(r) + ": taken_ts does not fall on " + format_date(e.date_day));
        log.entries.push_back(e);
    }
    std::stable_sort(log.entries.begin(), log.entries.end(),
                     [](const MedicationEvent& a, const MedicationEvent& b) { return a.prescribed_ts < b.prescribed_ts; });
    return log;
}

inline void write_event_csv(const std::string& path, const EventLog& log) {
    std::string out;
    out += kEventCsvHeader;
    out += '\n';
    for (const auto& e : log.entries) {
        out += format_date(e.date_day);
        out += ',';
        if (e.taken_ts) out += std::to_string(*e.taken_ts);
        out += ',';
        out += std::to_string(e.prescribed_ts);
        out += '\n';
    }
    std::ofstream f(path, std::ios::binary);
    if (!f) throw DataError("cannot open for writing: " + path);
    f.write(out.data(), static_cast<std::streamsize>(out.size()));
}

// Fills in days absent from the log as all-missed doses, reconstructing their
// prescribed times from the participant's fixed prescribed hours (local clock).
// Days outside [first_day, first_day + n_days) are left untouched.
inline EventLog complete_event_log(const EventLog& log, std::int64_t first_day, int n_days,
                                   const std::vector<int>& prescribed_hours, std::int64_t utc_offset) {
    EventLog out = log;
    for (std::int64_t day = first_day; day < first_day + n_days; ++day) {
        for (int hour : prescribed_hours) {
            std::int64_t prescribed_local = day * kSecondsPerDay + hour * kSecondsPerHour;
            std::int64_t prescribed_utc = prescribed_local - utc_offset;
            bool present = std::any_of(log.entries.begin(), log.entries.end(), [&](const MedicationEvent& e) {
                return e.date_day == day && e.prescribed_ts == prescribed_utc;
            });
            if (!present) out.entries.push_back(MedicationEvent{day, std::nullopt, prescribed_utc});
        }
    }
    std::stable_sort(out.entries.begin(), out.entries.end(),
                     [](const MedicationEvent& a, const MedicationEvent& b) { return a.prescribed_ts < b.prescribed_ts; });
    return out;
}

// ---------------------------------------------------------------------------
// Merge
// ---------------------------------------------------------------------------

// One MergedRecord per sensor sample, with previous/next event context found
// by binary search over the event timeline. Samples at or after the final
// prescribed dose are dropped (their next_prescribed_ts is undefined).
inline MergedSeries merge_streams(const SensorStream& sensor, const EventLog& events) {
    if (sensor.empty()) throw DataError("merge: sensor stream is empty");
    if (events.empty()) throw DataError("merge: event log is empty");

    std::vector<std::int64_t> prescribed;
    std::vector<std::int64_t> taken;
    prescribed.reserve(events.size());
    for (const auto& e : events.entries) {
        prescribed.push_back(e.prescribed_ts);
        if (e.taken_ts) taken.push_back(*e.taken_ts);
    }
    std::sort(prescribed.begin(), prescribed.end());
    std::sort(taken.begin(), taken.end());

    const std::int64_t last_prescribed = prescribed.back();
    if (sensor.samples.front().ts_utc >= last_prescribed)
        throw DataError("merge: no temporal overlap between sensor stream and event timeline");

    MergedSeries series;
    series.records.reserve(sensor.size());
    for (const auto& s : sensor.samples) {
        if (s.ts_utc >= last_prescribed) break;  // sorted, nothing mergeable follows
        MergedRecord rec;
        rec.sample = s;

        // Earliest prescribed strictly after ts.
        auto np = std::upper_bound(prescribed.begin(), prescribed.end(), s.ts_utc);
        rec.next_prescribed_ts = *np;
        if (np != prescribed.begin()) rec.prev_prescribed_ts = *(np - 1);

        auto nt = std::upper_bound(taken.begin(), taken.end(), s.ts_utc);
        if (nt != taken.end()) rec.next_event_ts = *nt;
        if (nt != taken.begin()) rec.prev_event_ts = *(nt - 1);

        series.records.push_back(rec);
    }
    if (series.empty()) throw DataError("merge: no temporal overlap between sensor stream and event timeline");
    return series;
}

}  // namespace sparsecast
