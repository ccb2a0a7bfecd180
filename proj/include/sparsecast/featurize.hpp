// Feature derivation, feature-set selection, windowing, and the
// chronological train/test split.
//
// Enriched column layout (79 columns):
//   [0,14)   H: the 14 sensor channels
//   [14,53)  L: last_med_event, last_prescribed_time, last_event_hour,
//            day_of_week one-hot(7), hour_of_day one-hot(24),
//            med_in_last_{2,3,6,12,24}h
//   [53,79)  K: relative_ts_utc, relative_ts_local, next_prescribed_hour one-hot(24)
// The target (medication taken in the next hour) is stored separately.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sparsecast/common.hpp"
#include "sparsecast/time_utils.hpp"
#include "sparsecast/types.hpp"
#include "sparsecast/windows.hpp"

namespace sparsecast {

constexpr int kDimH = 14;
constexpr int kDimL = 39;
constexpr int kDimK = 26;
constexpr int kDimTotal = kDimH + kDimL + kDimK;  // 79

constexpr int kColLastMedEvent = 14;
constexpr int kColLastPrescribedTime = 15;
constexpr int kColLastEventHour = 16;
constexpr int kColDayOfWeek = 17;       // 7 columns
constexpr int kColHourOfDay = 24;       // 24 columns
constexpr int kColMedInLast = 48;       // 5 columns: 2,3,6,12,24 hours
constexpr int kColRelativeTsUtc = 53;
constexpr int kColRelativeTsLocal = 54;
constexpr int kColNextPrescribedHour = 55;  // 24 columns

inline const int kLookbackHours[5] = {2, 3, 6, 12, 24};

inline std::vector<std::string> enriched_column_names() {
    std::vector<std::string> names = {"yaw", "pitch", "roll", "rot_x", "rot_y", "rot_z",
                                      "acc_x", "acc_y", "acc_z", "lat", "lon", "altitude", "h_accuracy", "speed",
                                      "last_med_event", "last_prescribed_time", "last_event_hour"};
    for (int d = 0; d < 7; ++d) names.push_back("day_of_week_" + std::to_string(d));
    for (int h = 0; h < 24; ++h) names.push_back("hour_of_day_" + std::to_string(h));
    for (int hrs : kLookbackHours) names.push_back("med_in_last_" + std::to_string(hrs) + "h");
    names.push_back("relative_ts_utc");
    names.push_back("relative_ts_local");
    for (int h = 0; h < 24; ++h) names.push_back("next_prescribed_hour_" + std::to_string(h));
    return names;
}

// Row-major (n x 79) feature matrix plus the per-record target.
struct EnrichedSeries {
    std::vector<float> data;          // n * kDimTotal
    std::vector<std::uint8_t> target;  // medication taken in (ts, ts+3600]
    std::vector<std::int64_t> ts_utc;
    std::size_t skipped = 0;  // records dropped for missing next_prescribed_ts

    std::size_t size() const { return target.size(); }
    const float* row(std::size_t i) const { return data.data() + i * kDimTotal; }
    float* row(std::size_t i) { return data.data() + i * kDimTotal; }
};

// Derives every L and K column and the target from the merged series.
// All L columns are functions of events at or before the record's timestamp;
// K columns are functions of the prescription schedule only.
inline EnrichedSeries derive_features(const MergedSeries& merged) {
    if (merged.empty()) throw DataError("derive_features: merged series is empty");
    EnrichedSeries out;
    out.data.reserve(merged.size() * kDimTotal);
    out.target.reserve(merged.size());
    out.ts_utc.reserve(merged.size());

    std::vector<float> row(kDimTotal);
    for (const auto& rec : merged.records) {
        const std::int64_t ts = rec.sample.ts_utc;
        if (rec.next_prescribed_ts <= ts) {  // undefined next dose; counted and skipped
            ++out.skipped;
            continue;
        }
        std::fill(row.begin(), row.end(), 0.0f);
        const std::int64_t offset = rec.sample.ts_local - rec.sample.ts_utc;

        for (int c = 0; c < kSensorChannels; ++c) row[static_cast<std::size_t>(c)] = static_cast<float>(rec.sample.ch[c]);

        row[kColLastMedEvent] = rec.prev_event_ts ? 1.0f : 0.0f;
        row[kColLastPrescribedTime] =
            rec.prev_prescribed_ts ? static_cast<float>(ts - *rec.prev_prescribed_ts) : -1.0f;
        row[kColLastEventHour] =
            rec.prev_event_ts ? static_cast<float>(hour_of_ts(*rec.prev_event_ts + offset)) : -1.0f;
        row[kColDayOfWeek + weekday_of_ts(rec.sample.ts_local)] = 1.0f;
        row[kColHourOfDay + hour_of_ts(rec.sample.ts_local)] = 1.0f;
        for (int k = 0; k < 5; ++k) {
            bool hit = rec.prev_event_ts && *rec.prev_event_ts > ts - kLookbackHours[k] * kSecondsPerHour;
            row[static_cast<std::size_t>(kColMedInLast + k)] = hit ? 1.0f : 0.0f;
        }

        const std::int64_t rel = rec.next_prescribed_ts - ts;
        row[kColRelativeTsUtc] = static_cast<float>(rel);
        // Same subtraction on the local clock; identical under a fixed offset.
        row[kColRelativeTsLocal] = static_cast<float>((rec.next_prescribed_ts + offset) - rec.sample.ts_local);
        row[kColNextPrescribedHour + hour_of_ts(rec.next_prescribed_ts + offset)] = 1.0f;

        bool med_next_hour = rec.next_event_ts && *rec.next_event_ts <= ts + kSecondsPerHour;

        out.data.insert(out.data.end(), row.begin(), row.end());
        out.target.push_back(med_next_hour ? 1 : 0);
        out.ts_utc.push_back(ts);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Feature-set selection
// ---------------------------------------------------------------------------

struct FeatureSetSpec {
    bool include_H = false;
    bool include_L = false;
    bool include_K = false;
    bool loc_only = false;  // restricts H to lat/lon

    void validate() const {
        if (!include_H && !include_L && !include_K) throw ConfigError("feature set: at least one block required");
        if (loc_only && !include_H) throw ConfigError("feature set: loc_only requires the H block");
    }

    std::vector<int> columns() const {
        validate();
        std::vector<int> cols;
        if (include_H) {
            if (loc_only) {
                cols.push_back(kChLat);
                cols.push_back(kChLon);
            } else {
                for (int c = 0; c < kDimH; ++c) cols.push_back(c);
            }
        }
        if (include_L)
            for (int c = kDimH; c < kDimH + kDimL; ++c) cols.push_back(c);
        if (include_K)
            for (int c = kDimH + kDimL; c < kDimTotal; ++c) cols.push_back(c);
        return cols;
    }

    int dim() const { return static_cast<int>(columns().size()); }

    std::string name() const {
        std::string s;
        if (include_H) s += loc_only ? "Loc" : "H";
        if (include_L) s += s.empty() ? "L" : "+L";
        if (include_K) s += s.empty() ? "K" : "+K";
        return s;
    }

    // Parses "H", "H+K", "H+L+K", "Loc+K", ...
    static FeatureSetSpec parse(const std::string& text) {
        FeatureSetSpec spec;
        std::size_t pos = 0;
        while (pos < text.size()) {
            std::size_t next = text.find('+', pos);
            std::string tok = text.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
            if (tok == "H") {
                spec.include_H = true;
            } else if (tok == "Loc") {
                spec.include_H = true;
                spec.loc_only = true;
            } else if (tok == "L") {
                spec.include_L = true;
            } else if (tok == "K") {
                spec.include_K = true;
            } else {
                throw ConfigError("unknown feature block '" + tok + "' in feature set '" + text + "'");
            }
            if (next == std::string::npos) break;
            pos = next + 1;
        }
        spec.validate();
        return spec;
    }
};

// Projects an enriched series onto the spec's columns. Returns the projected
// row-major matrix and the selected column names.
struct ProjectedSeries {
    std::vector<float> data;
    int n_cols = 0;
    std::vector<std::string> col_names;
    std::size_t size() const { return n_cols == 0 ? 0 : data.size() / static_cast<std::size_t>(n_cols); }
};

inline ProjectedSeries select_features(const EnrichedSeries& series, const FeatureSetSpec& spec) {
    auto cols = spec.columns();
    auto all_names = enriched_column_names();
    ProjectedSeries out;
    out.n_cols = static_cast<int>(cols.size());
    for (int c : cols) out.col_names.push_back(all_names[static_cast<std::size_t>(c)]);
    out.data.reserve(series.size() * cols.size());
    for (std::size_t i = 0; i < series.size(); ++i) {
        const float* r = series.row(i);
        for (int c : cols) out.data.push_back(r[c]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Windowing and split
// ---------------------------------------------------------------------------

// Cuts sliding windows of `window_len` samples. The hop is
// round(window_len * (1 - overlap)); overlap 0.5 gives the standard
// half-window hop, overlap < 0 spaces windows apart (used for desk-scale
// runs). The window label is the target of its final record. A trailing
// partial window is discarded.
inline WindowSet slide_windows(const EnrichedSeries& series, int participant_id, int window_len = 1800,
                               double overlap = 0.5) {
    if (window_len < 1) throw ConfigError("slide_windows: window_len must be >= 1");
    if (overlap >= 1.0) throw ConfigError("slide_windows: overlap must be < 1");
    const int hop = static_cast<int>(std::lround(window_len * (1.0 - overlap)));
    if (hop < 1) throw ConfigError("slide_windows: hop computed as < 1 sample");

    WindowSet ws(window_len, enriched_column_names());
    const std::size_t n = series.size();
    if (n < static_cast<std::size_t>(window_len)) return ws;  // empty result

    std::vector<double> buf(static_cast<std::size_t>(window_len) * kDimTotal);
    for (std::size_t start = 0; start + static_cast<std::size_t>(window_len) <= n;
         start += static_cast<std::size_t>(hop)) {
        std::copy(series.row(start), series.row(start) + buf.size(), buf.begin());
        std::size_t last = start + static_cast<std::size_t>(window_len) - 1;
        ws.push_window(buf, series.target[last] != 0, series.ts_utc[start], participant_id);
    }
    return ws;
}

// Per-participant chronological split: the first ceil(train_frac * n) windows
// go to train, the rest to test. The input must already be in time order.
struct SplitWindows {
    WindowSet train;
    WindowSet test;
};

inline SplitWindows chronological_split(const WindowSet& windows, double train_frac = 0.8) {
    if (train_frac <= 0.0 || train_frac >= 1.0) throw ConfigError("chronological_split: train_frac must be in (0,1)");
    if (windows.size() < 2) throw DataError("chronological_split: fewer than 2 windows");
    for (std::size_t i = 1; i < windows.size(); ++i)
        if (windows.start_ts(i) < windows.start_ts(i - 1))
            throw DataError("chronological_split: windows not sorted by start time");

    std::size_t n_train =
        static_cast<std::size_t>(std::ceil(train_frac * static_cast<double>(windows.size())));
    if (n_train >= windows.size()) n_train = windows.size() - 1;

    SplitWindows out;
    out.train = WindowSet(windows.window_len(), windows.col_names());
    out.test = WindowSet(windows.window_len(), windows.col_names());
    for (std::size_t i = 0; i < windows.size(); ++i) {
        std::vector<double> buf(windows.window(i).begin(), windows.window(i).end());
        (i < n_train ? out.train : out.test)
            .push_window(buf, windows.label(i), windows.start_ts(i), windows.participant(i));
    }
    return out;
}

// ---------------------------------------------------------------------------
// Standardization
// ---------------------------------------------------------------------------

// Zero-mean unit-variance scaling of the numeric columns, fit on the train
// split only. One-hot and boolean columns are left untouched.
struct Standardizer {
    std::vector<int> cols;
    std::vector<double> mean;
    std::vector<double> inv_std;

    static std::vector<int> numeric_columns() {
        std::vector<int> c;
        for (int i = 0; i < kDimH; ++i) c.push_back(i);
        c.push_back(kColLastPrescribedTime);
        c.push_back(kColLastEventHour);
        c.push_back(kColRelativeTsUtc);
        c.push_back(kColRelativeTsLocal);
        return c;
    }

    static Standardizer fit(const WindowSet& train) {
        Standardizer s;
        s.cols = numeric_columns();
        s.mean.assign(s.cols.size(), 0.0);
        s.inv_std.assign(s.cols.size(), 1.0);
        if (train.empty()) return s;
        const int W = train.window_len();
        const int C = train.n_cols();
        std::vector<double> sum(s.cols.size(), 0.0), sumsq(s.cols.size(), 0.0);
        double n = 0;
        for (std::size_t i = 0; i < train.size(); ++i) {
            auto w = train.window(i);
            for (int t = 0; t < W; ++t) {
                for (std::size_t k = 0; k < s.cols.size(); ++k) {
                    double v = w[static_cast<std::size_t>(t) * C + static_cast<std::size_t>(s.cols[k])];
                    sum[k] += v;
                    sumsq[k] += v * v;
                }
            }
            n += W;
        }
        for (std::size_t k = 0; k < s.cols.size(); ++k) {
            s.mean[k] = sum[k] / n;
            double var = sumsq[k] / n - s.mean[k] * s.mean[k];
            s.inv_std[k] = var > 1e-12 ? 1.0 / std::sqrt(var) : 1.0;
        }
        return s;
    }


    void apply(WindowSet& ws) const {
        const int W = ws.window_len();
        const int C = ws.n_cols();
        for (std::size_t i = 0; i < ws.size(); ++i) {
            auto w = ws.window_mut(i);
            for (int t = 0; t < W; ++t)
                for (std::size_t k = 0; k < cols.size(); ++k) {
                    double& v = w[static_cast<std::size_t>(t) * C + static_cast<std::size_t>(cols[k])];
                    v = (v - mean[k]) * inv_std[k];
                }
        }
    }
};

}  // namespace sparsecast
