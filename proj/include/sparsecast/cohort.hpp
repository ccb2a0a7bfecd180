// Synthetic cohort generation.
//
// Produces participants whose sensor streams and medication events follow the
// canonical file formats, with a recoverable dependence of adherence on
// behavioral context and on the prescribed time of day. Each participant's
// doses are sampled from a logistic model over planted context covariates, so
// downstream feature ablations have a real signal to find.
#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "sparsecast/ingest.hpp"
#include "sparsecast/rng.hpp"
#include "sparsecast/time_utils.hpp"
#include "sparsecast/types.hpp"

namespace sparsecast {

struct CohortConfig {
    int n_participants = 1;
    int days_per_participant = 2;
    int doses_per_day = 1;  // 1 or 2
    double base_adherence = 0.8;
    double context_effect_strength = 1.0;
    std::uint64_t seed = 0;

    void validate() const {
        if (n_participants < 1) throw ConfigError("cohort.n_participants must be >= 1");
        if (days_per_participant < 2) throw ConfigError("cohort.days_per_participant must be >= 2");
        if (doses_per_day != 1 && doses_per_day != 2) throw ConfigError("cohort.doses_per_day must be 1 or 2");
        if (base_adherence < 0.0 || base_adherence > 1.0) throw ConfigError("cohort.base_adherence must be in [0,1]");
        if (context_effect_strength < 0.0) throw ConfigError("cohort.context_effect_strength must be >= 0");
    }
};

// Context covariates entering the adherence logit.
struct AdherenceWeights {
    double is_away = 0.0;
    double is_late_night = 0.0;
    double is_weekend = 0.0;
    double hours_to_prescribed = 0.0;  // applied to the normalized midday distance of the prescribed hour
};

struct BehaviorProfile {
    int participant_id = 0;
    std::vector<int> prescribed_hours;        // 1 or 2 distinct hours in [0,24)
    double home_lat = 0.0, home_lon = 0.0;
    double away_lat = 0.0, away_lon = 0.0;
    double away_probability_by_weekday[7] = {};
    double late_activity_propensity = 0.0;    // P(late-night activity on a given day)
    AdherenceWeights adherence_logit_weights;
    std::int64_t utc_offset = 0;              // fixed local-clock offset, seconds
    std::int64_t first_day = 0;               // local calendar day the study starts
    double home_altitude = 0.0;
    std::uint64_t context_seed = 0;           // shared by sensor and event generation
};

struct Cohort {
    CohortConfig config;
    std::vector<BehaviorProfile> profiles;
};

// Per-day planted context. Shared between the sensor stream and the adherence
// model so location actually carries adherence information.
struct DayContext {
    bool away = false;
    bool late_night = false;
};

namespace detail {

inline std::vector<DayContext> day_contexts(const BehaviorProfile& p, int days) {
    Rng rng(derive_seed(p.context_seed, "day-context"));
    std::vector<DayContext> ctx(static_cast<std::size_t>(days));
    for (int d = 0; d < days; ++d) {
        int wd = weekday_of_day(p.first_day + d);
        ctx[static_cast<std::size_t>(d)].away = rng.bernoulli(p.away_probability_by_weekday[wd]);
        ctx[static_cast<std::size_t>(d)].late_night = rng.bernoulli(p.late_activity_propensity);
    }
    return ctx;
}

// Normalized circular distance of an hour from 13:00, in [0,1]. Doses far
// from midday are the ones the planted model is allowed to miss more often.
inline double midday_distance(int hour) {
    int d = std::abs(hour - 13);
    d = std::min(d, 24 - d);
    return d / 11.0;
}

inline double sigmoid(double x) {
    if (x >= 0) return 1.0 / (1.0 + std::exp(-x));
    double e = std::exp(x);
    return e / (1.0 + e);
}

}  // namespace detail

// Take-probability of one dose under the planted logistic model. Exposed so
// tests can evaluate the exact model the generator samples from.
inline double adherence_probability(const CohortConfig& cfg, const BehaviorProfile& p, const DayContext& ctx,
                                    int weekday, int prescribed_hour) {
    double base = cfg.base_adherence;
    double logit;
    if (base <= 0.0) {
        logit = -std::numeric_limits<double>::infinity();
    } else if (base >= 1.0) {
        logit = std::numeric_limits<double>::infinity();
    } else {
        logit = std::log(base / (1.0 - base));
    }
    const AdherenceWeights& w = p.adherence_logit_weights;
    double context = w.is_away * (ctx.away ? 1.0 : 0.0) + w.is_late_night * (ctx.late_night ? 1.0 : 0.0) +
                     w.is_weekend * (weekday >= 5 ? 1.0 : 0.0) +
                     w.hours_to_prescribed * detail::midday_distance(prescribed_hour);
    return detail::sigmoid(logit + cfg.context_effect_strength * context);
}

// Deterministic function of (config, seed): builds per-participant behavior
// profiles with prescribed hours jittered uniformly over all 24 values.
inline Cohort gen_cohort(const CohortConfig& config) {
    config.validate();
    Cohort cohort;
    cohort.config = config;
    cohort.profiles.reserve(static_cast<std::size_t>(config.n_participants));
    for (int pid = 0; pid < config.n_participants; ++pid) {
        Rng rng(derive_seed(config.seed, "profile", static_cast<std::uint64_t>(pid)));
        BehaviorProfile p;
        p.participant_id = pid;
        int h0 = static_cast<int>(rng.uniform_index(24));
        p.prescribed_hours.push_back(h0);
        if (config.doses_per_day == 2) {
            int h1 = (h0 + 12 + static_cast<int>(rng.uniform_int(-2, 2))) % 24;
            if (h1 < 0) h1 += 24;
            if (h1 == h0) h1 = (h1 + 1) % 24;
            p.prescribed_hours.push_back(h1);
        }
        p.home_lat = rng.uniform(33.0, 48.0);
        p.home_lon = rng.uniform(-120.0, -75.0);
        double bearing = rng.uniform(0.0, 2.0 * std::numbers::pi);
        double dist = rng.uniform(0.05, 0.25);  // degrees; clearly outside the home cluster
        p.away_lat = p.home_lat + dist * std::cos(bearing);
        p.away_lon = p.home_lon + dist * std::sin(bearing);
        for (double& prob : p.away_probability_by_weekday) prob = rng.uniform(0.05, 0.5);
        // Weekends travel more.
        p.away_probability_by_weekday[5] = rng.uniform(0.3, 0.8);
        p.away_probability_by_weekday[6] = rng.uniform(0.3, 0.8);
        p.late_activity_propensity = rng.uniform(0.05, 0.4);
        p.adherence_logit_weights.is_away = rng.uniform(-2.0, -0.75);
        p.adherence_logit_weights.is_late_night = rng.uniform(-1.5, -0.25);
        p.adherence_logit_weights.is_weekend = rng.uniform(-0.75, 0.75);
        p.adherence_logit_weights.hours_to_prescribed = rng.uniform(-2.0, -0.5);
        p.utc_offset = -3600 * rng.uniform_int(5, 8);  // continental US offsets
        p.first_day = days_from_civil(2024, 1, 1) + rng.uniform_int(0, 59);
        p.home_altitude = rng.uniform(10.0, 1600.0);
        p.context_seed = derive_seed(config.seed, "context", static_cast<std::uint64_t>(pid));
        cohort.profiles.push_back(std::move(p));
    }
    return cohort;
}

// 14-channel samples at 1 Hz, duty-cycled 5 s on / 5 s off: exactly 5 samples
// in every 10-second wall-clock block. Location follows the per-day home/away
// state; motion channels carry a mild diurnal activity pattern.
inline SensorStream gen_sensor_stream(const BehaviorProfile& profile, int days, std::uint64_t seed) {
    if (days < 1) throw ConfigError("gen_sensor_stream: days must be >= 1");
    Rng rng(derive_seed(seed, "sensor", static_cast<std::uint64_t>(profile.participant_id)));
    auto ctx = detail::day_contexts(profile, days);

    SensorStream stream;
    stream.samples.reserve(static_cast<std::size_t>(days) * 43200);

    double yaw = rng.uniform(-std::numbers::pi, std::numbers::pi);
    double pitch = rng.uniform(-0.3, 0.3);
    double roll = rng.uniform(-0.3, 0.3);

    const std::int64_t start_local = profile.first_day * kSecondsPerDay;
    for (int d = 0; d < days; ++d) {
        const DayContext& today = ctx[static_cast<std::size_t>(d)];
        double lat0 = today.away ? profile.away_lat : profile.home_lat;
        double lon0 = today.away ? profile.away_lon : profile.home_lon;
        for (int block = 0; block < 8640; ++block) {
            std::int64_t block_local = start_local + static_cast<std::int64_t>(d) * kSecondsPerDay + 10LL * block;
            for (int k = 0; k < 5; ++k) {
                std::int64_t ts_local = block_local + k;
                int hour = hour_of_ts(ts_local);
                // Activity level: quiet overnight, active during the day;
                // late-night days keep the evening active.
                bool awake = hour >= 7 && hour < 22;
                if (today.late_night && (hour >= 22 || hour < 1)) awake = true;
                double act = awake ? 1.0 : 0.08;

                SensorSample s;
                s.ts_local = ts_local;
                s.ts_utc = ts_local - profile.utc_offset;
                yaw += rng.normal(0.0, 0.02 * act);
                if (yaw > std::numbers::pi) yaw -= 2 * std::numbers::pi;
                if (yaw < -std::numbers::pi) yaw += 2 * std::numbers::pi;
                pitch = std::clamp(pitch + rng.normal(0.0, 0.01 * act), -1.2, 1.2);
                roll = std::clamp(roll + rng.normal(0.0, 0.01 * act), -1.2, 1.2);
                s.ch[kChYaw] = yaw;
                s.ch[kChPitch] = pitch;
                s.ch[kChRoll] = roll;
                s.ch[kChRotX] = rng.normal(0.0, 0.5 * act);
                s.ch[kChRotY] = rng.normal(0.0, 0.5 * act);
                s.ch[kChRotZ] = rng.normal(0.0, 0.3 * act);
                s.ch[kChAccX] = rng.normal(0.0, 0.15 * act);
                s.ch[kChAccY] = rng.normal(0.0, 0.15 * act);
                s.ch[kChAccZ] = 1.0 + rng.normal(0.0, 0.1 * act);
                // Truncated jitter keeps every sample inside a 0.01-degree
                // cluster radius around the day's anchor.
                s.ch[kChLat] = lat0 + std::clamp(rng.normal(0.0, 0.0015), -0.008, 0.008);
                s.ch[kChLon] = lon0 + std::clamp(rng.normal(0.0, 0.0015), -0.008, 0.008);
                s.ch[kChAltitude] = profile.home_altitude + (today.away ? 25.0 : 0.0) + rng.normal(0.0, 2.0);
                s.ch[kChHAccuracy] = std::abs(rng.normal(8.0, 3.0)) + 1.0;
                s.ch[kChSpeed] = std::abs(rng.normal(0.0, 1.2 * act));
                stream.samples.push_back(s);
            }
        }
    }
    return stream;
}

// One entry per prescribed dose: taken doses carry prescribed time plus
// uniform noise within +/-45 minutes (clamped into the dose's calendar day);
// skipped doses carry no taken timestamp.
inline EventLog gen_adherence_events(const BehaviorProfile& profile, const SensorStream& sensor,
                                     const CohortConfig& config) {
    const int days = config.days_per_participant;
    if (sensor.empty() ||
        sensor.samples.back().ts_local < (profile.first_day + days) * kSecondsPerDay - 10)
        throw ConfigError("gen_adherence_events: sensor stream does not cover the configured days");

    Rng rng(derive_seed(config.seed, "events", static_cast<std::uint64_t>(profile.participant_id)));
    auto ctx = detail::day_contexts(profile, days);

    EventLog log;
    for (int d = 0; d < days; ++d) {
        std::int64_t day = profile.first_day + d;
        int wd = weekday_of_day(day);
        for (int hour : profile.prescribed_hours) {
            std::int64_t prescribed_local = day * kSecondsPerDay + hour * kSecondsPerHour;
            MedicationEvent e;
            e.date_day = day;
            e.prescribed_ts = prescribed_local - profile.utc_offset;
            double p_take = adherence_probability(config, profile, ctx[static_cast<std::size_t>(d)], wd, hour);
            if (rng.bernoulli(p_take)) {
                std::int64_t noise = rng.uniform_int(-45 * 60, 45 * 60);
                std::int64_t taken_local =
                    std::clamp(prescribed_local + noise, day * kSecondsPerDay, (day + 1) * kSecondsPerDay - 1);
                e.taken_ts = taken_local - profile.utc_offset;
            }
            log.entries.push_back(e);
        }
    }
    std::stable_sort(log.entries.begin(), log.entries.end(),
                     [](const MedicationEvent& a, const MedicationEvent& b) { return a.prescribed_ts < b.prescribed_ts; });
    return log;
}

// Writes one sensor CSV and one event CSV per participant into `out_dir`.
// Returns the participant file stems ("p000", "p001", ...).
inline std::vector<std::string> write_cohort_files(const Cohort& cohort, const std::string& out_dir) {
    std::vector<std::string> stems;
    for (const auto& p : cohort.profiles) {
        char stem[16];
        std::snprintf(stem, sizeof(stem), "p%03d", p.participant_id);
        SensorStream s = gen_sensor_stream(p, cohort.config.days_per_participant, cohort.config.seed);
        EventLog e = gen_adherence_events(p, s, cohort.config);
        write_sensor_csv(out_dir + "/" + stem + "_sensor.csv", s);
        write_event_csv(out_dir + "/" + stem + "_events.csv", e);
        stems.push_back(stem);
    }
    return stems;
}

}  // namespace sparsecast
