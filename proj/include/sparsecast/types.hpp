// Core domain records shared by the ingest and feature pipeline.
#pragma once

#include <cstdint>
#include <optional>
#include <vector>

namespace sparsecast {

constexpr int kSensorChannels = 14;

// One per-second sensor reading. Channel order matches the canonical CSV:
// yaw,pitch,roll,rot_x,rot_y,rot_z,acc_x,acc_y,acc_z,lat,lon,altitude,h_accuracy,speed
struct SensorSample {
    std::int64_t ts_utc = 0;
    std::int64_t ts_local = 0;
    double ch[kSensorChannels] = {};

    double yaw() const { return ch[0]; }
    double lat() const { return ch[9]; }
    double lon() const { return ch[10]; }
};

// Channel indices into SensorSample::ch.
enum SensorChannel : int {
    kChYaw = 0, kChPitch, kChRoll,
    kChRotX, kChRotY, kChRotZ,
    kChAccX, kChAccY, kChAccZ,
    kChLat, kChLon, kChAltitude, kChHAccuracy, kChSpeed,
};

struct SensorStream {
    std::vector<SensorSample> samples;

    bool empty() const { return samples.empty(); }
    std::size_t size() const { return samples.size(); }
    // Fixed local-clock offset of this stream, in seconds.
    std::int64_t utc_offset() const { return samples.empty() ? 0 : samples.front().ts_local - samples.front().ts_utc; }
};

// One prescribed dose on one calendar day. taken_ts is absent when the dose
// was missed. Timestamps are UTC seconds; `date` is the local calendar day.
struct MedicationEvent {
    std::int64_t date_day = 0;  // days since epoch, local calendar
    std::optional<std::int64_t> taken_ts;
    std::int64_t prescribed_ts = 0;
};

struct EventLog {
    std::vector<MedicationEvent> entries;  // sorted by prescribed_ts

    bool empty() const { return entries.empty(); }
    std::size_t size() const { return entries.size(); }
};

// One sensor sample annotated with its surrounding medication context.
struct MergedRecord {
    SensorSample sample;
    std::optional<std::int64_t> prev_event_ts;       // latest taken_ts <= ts_utc
    std::optional<std::int64_t> prev_prescribed_ts;  // latest prescribed_ts <= ts_utc
    std::optional<std::int64_t> next_event_ts;       // earliest taken_ts > ts_utc
    std::int64_t next_prescribed_ts = 0;             // earliest prescribed_ts > ts_utc
};

struct MergedSeries {
    std::vector<MergedRecord> records;

    bool empty() const { return records.empty(); }
    std::size_t size() const { return records.size(); }
};

}  // namespace sparsecast
