#include <catch2/catch_amalgamated.hpp>

#include <cmath>
#include <map>

#include "sparsecast/cohort.hpp"

using namespace sparsecast;

namespace {

CohortConfig small_config() {
    CohortConfig cfg;
    cfg.n_participants = 4;
    cfg.days_per_participant = 3;
    cfg.doses_per_day = 1;
    cfg.base_adherence = 0.8;
    cfg.context_effect_strength = 1.0;
    cfg.seed = 99;
    return cfg;
}

// Minimal stream that satisfies the coverage precondition of
// gen_adherence_events without paying for full sensor generation.
SensorStream coverage_stub(const BehaviorProfile& p, int days) {
    SensorStream s;
    SensorSample first;
    first.ts_local = p.first_day * kSecondsPerDay;
    first.ts_utc = first.ts_local - p.utc_offset;
    SensorSample last;
    last.ts_local = (p.first_day + days) * kSecondsPerDay - 6;
    last.ts_utc = last.ts_local - p.utc_offset;
    s.samples = {first, last};
    return s;
}

}  // namespace

TEST_CASE("same config and seed produce identical cohorts") {
    CohortConfig cfg = small_config();
    Cohort a = gen_cohort(cfg);
    Cohort b = gen_cohort(cfg);
    REQUIRE(a.profiles.size() == b.profiles.size());
    for (std::size_t i = 0; i < a.profiles.size(); ++i) {
        CHECK(a.profiles[i].prescribed_hours == b.profiles[i].prescribed_hours);
        CHECK(a.profiles[i].home_lat == b.profiles[i].home_lat);
        CHECK(a.profiles[i].utc_offset == b.profiles[i].utc_offset);
        CHECK(a.profiles[i].context_seed == b.profiles[i].context_seed);
    }

    SensorStream sa = gen_sensor_stream(a.profiles[0], 1, cfg.seed);
    SensorStream sb = gen_sensor_stream(b.profiles[0], 1, cfg.seed);
    REQUIRE(sa.size() == sb.size());
    for (std::size_t i = 0; i < sa.size(); i += 997) {
        CHECK(sa.samples[i].ts_utc == sb.samples[i].ts_utc);
        for (int c = 0; c < kSensorChannels; ++c) CHECK(sa.samples[i].ch[c] == sb.samples[i].ch[c]);
    }

    CohortConfig one_day = cfg;  // the generated streams above cover one day
    one_day.days_per_participant = 1;
    EventLog ea = gen_adherence_events(a.profiles[0], sa, one_day);
    EventLog eb = gen_adherence_events(b.profiles[0], sb, one_day);
    REQUIRE(ea.size() == eb.size());
    for (std::size_t i = 0; i < ea.size(); ++i) {
        CHECK(ea.entries[i].prescribed_ts == eb.entries[i].prescribed_ts);
        CHECK(ea.entries[i].taken_ts == eb.entries[i].taken_ts);
    }
}

TEST_CASE("22 participants with one dose per day get exactly one prescribed hour each") {
    CohortConfig cfg = small_config();
    cfg.n_participants = 22;
    Cohort cohort = gen_cohort(cfg);
    REQUIRE(cohort.profiles.size() == 22);
    for (const auto& p : cohort.profiles) {
        REQUIRE(p.prescribed_hours.size() == 1);
        CHECK(p.prescribed_hours[0] >= 0);
        CHECK(p.prescribed_hours[0] < 24);
    }
}

TEST_CASE("two doses per day are distinct hours in range") {
    CohortConfig cfg = small_config();
    cfg.doses_per_day = 2;
    cfg.n_participants = 40;
    Cohort cohort = gen_cohort(cfg);
    for (const auto& p : cohort.profiles) {
        REQUIRE(p.prescribed_hours.size() == 2);
        CHECK(p.prescribed_hours[0] != p.prescribed_hours[1]);
        for (int h : p.prescribed_hours) {
            CHECK(h >= 0);
            CHECK(h < 24);
        }
    }
}

TEST_CASE("different seeds produce different prescribed hours") {
    CohortConfig cfg = small_config();
    cfg.n_participants = 22;
    Cohort a = gen_cohort(cfg);
    cfg.seed = cfg.seed + 1;
    Cohort b = gen_cohort(cfg);
    bool any_difference = false;
    for (std::size_t i = 0; i < a.profiles.size(); ++i)
        any_difference = any_difference || a.profiles[i].prescribed_hours != b.profiles[i].prescribed_hours;
    CHECK(any_difference);
}

TEST_CASE("invalid configs name the offending field") {
    CohortConfig cfg = small_config();
    cfg.n_participants = 0;
    CHECK_THROWS_WITH(gen_cohort(cfg), Catch::Matchers::ContainsSubstring("n_participants"));
    cfg = small_config();
    cfg.days_per_participant = 1;
    CHECK_THROWS_WITH(gen_cohort(cfg), Catch::Matchers::ContainsSubstring("days_per_participant"));
    cfg = small_config();
    cfg.base_adherence = 1.5;
    CHECK_THROWS_WITH(gen_cohort(cfg), Catch::Matchers::ContainsSubstring("base_adherence"));
    cfg = small_config();
    cfg.doses_per_day = 3;
    CHECK_THROWS_WITH(gen_cohort(cfg), Catch::Matchers::ContainsSubstring("doses_per_day"));
}

TEST_CASE("one day of sensor data is 8640 blocks of 5 samples") {
    CohortConfig cfg = small_config();
    Cohort cohort = gen_cohort(cfg);
    SensorStream s = gen_sensor_stream(cohort.profiles[0], 1, cfg.seed);
    REQUIRE(s.size() == 43200);

    // Duty cycle: every 10-second wall-clock block holds exactly 5 timestamps.
    std::map<std::int64_t, int> block_counts;
    for (const auto& sample : s.samples) ++block_counts[floor_div(sample.ts_local, 10)];
    REQUIRE(block_counts.size() == 8640);
    for (const auto& [block, count] : block_counts) CHECK(count == 5);

    // Strictly increasing timestamps.
    for (std::size_t i = 1; i < s.size(); ++i) CHECK(s.samples[i].ts_utc > s.samples[i - 1].ts_utc);
}

TEST_CASE("zero away probability keeps every sample inside the home cluster") {
    CohortConfig cfg = small_config();
    Cohort cohort = gen_cohort(cfg);
    BehaviorProfile p = cohort.profiles[1];
    for (double& prob : p.away_probability_by_weekday) prob = 0.0;
    SensorStream s = gen_sensor_stream(p, 2, cfg.seed);
    for (const auto& sample : s.samples) {
        CHECK(std::abs(sample.ch[kChLat] - p.home_lat) < 0.01);
        CHECK(std::abs(sample.ch[kChLon] - p.home_lon) < 0.01);
    }
}

TEST_CASE("saturated adherence model records every dose; zero records none") {
    CohortConfig cfg = small_config();
    cfg.days_per_participant = 10;
    Cohort cohort = gen_cohort(cfg);
    BehaviorProfile p = cohort.profiles[0];
    p.adherence_logit_weights = {};
    SensorStream stub = coverage_stub(p, 10);

    cfg.base_adherence = 1.0;
    EventLog all = gen_adherence_events(p, stub, cfg);
    REQUIRE(all.size() == 10);
    for (const auto& e : all.entries) {
        REQUIRE(e.taken_ts.has_value());
        // Taken timestamp stays within +/-45 minutes of the prescribed time
        // and on the prescribed day.
        CHECK(std::abs(*e.taken_ts - e.prescribed_ts) <= 45 * 60);
        CHECK(day_of_ts(*e.taken_ts + p.utc_offset) == e.date_day);
    }

    cfg.base_adherence = 0.0;
    EventLog none = gen_adherence_events(p, stub, cfg);
    REQUIRE(none.size() == 10);
    for (const auto& e : none.entries) CHECK_FALSE(e.taken_ts.has_value());
}

TEST_CASE("away-day adherence margin matches a Monte Carlo oracle of the model") {
    CohortConfig cfg = small_config();
    const int days = 4000;
    cfg.days_per_participant = days;
    cfg.base_adherence = 0.7;
    cfg.context_effect_strength = 1.0;
    Cohort cohort = gen_cohort(cfg);
    BehaviorProfile p = cohort.profiles[0];
    p.adherence_logit_weights = {};
    p.adherence_logit_weights.is_away = -2.0;  // isolate the away effect
    for (double& prob : p.away_probability_by_weekday) prob = 0.5;

    EventLog log = gen_adherence_events(p, coverage_stub(p, days), cfg);
    auto ctx = detail::day_contexts(p, days);

    double taken_away = 0, total_away = 0, taken_home = 0, total_home = 0;
    double expect_away = 0, expect_home = 0;
    for (int d = 0; d < days; ++d) {
        const auto& e = log.entries[static_cast<std::size_t>(d)];
        int wd = weekday_of_day(p.first_day + d);
        double prob = adherence_probability(cfg, p, ctx[static_cast<std::size_t>(d)], wd, p.prescribed_hours[0]);
        if (ctx[static_cast<std::size_t>(d)].away) {
            total_away += 1;
            expect_away += prob;
            taken_away += e.taken_ts ? 1 : 0;
        } else {
            total_home += 1;
            expect_home += prob;
            taken_home += e.taken_ts ? 1 : 0;
        }
    }
    REQUIRE(total_away > 100);
    REQUIRE(total_home > 100);
    double empirical_away = taken_away / total_away;
    double empirical_home = taken_home / total_home;
    expect_away /= total_away;
    expect_home /= total_home;

    // Monte Carlo tolerance ~ 3 * sqrt(p(1-p)/n) < 0.035 at n >= 1800.
    CHECK(std::abs(empirical_away - expect_away) < 0.05);
    CHECK(std::abs(empirical_home - expect_home) < 0.05);
    // The planted effect direction: being away lowers adherence.
    CHECK(expect_home - expect_away > 0.1);
    CHECK(empirical_home - empirical_away > 0.05);
}

TEST_CASE("planted signal: relative hour of day carries mutual information about the label") {
    CohortConfig cfg = small_config();
    const int days = 30;
    cfg.days_per_participant = days;
    cfg.context_effect_strength = 1.0;
    Cohort cohort = gen_cohort(cfg);
    const BehaviorProfile& p = cohort.profiles[2];
    EventLog log = gen_adherence_events(p, coverage_stub(p, days), cfg);

    // Sample a per-minute grid: feature = hour relative to the prescribed
    // hour, label = medication taken within the next hour.
    std::vector<std::int64_t> taken;
    for (const auto& e : log.entries)
        if (e.taken_ts) taken.push_back(*e.taken_ts + p.utc_offset);

    const int prescribed = p.prescribed_hours[0];
    double joint[24][2] = {};
    double n = 0;
    for (int d = 0; d < days; ++d) {
        for (int minute = 0; minute < 1440; ++minute) {
            std::int64_t ts = (p.first_day + d) * kSecondsPerDay + 60LL * minute;
            int rel_hour = ((minute / 60) - prescribed + 24) % 24;
            bool label = false;
            for (std::int64_t t : taken) label = label || (t > ts && t <= ts + kSecondsPerHour);
            joint[rel_hour][label ? 1 : 0] += 1;
            n += 1;
        }
    }
    REQUIRE(n >= 1e4);

    double mi = 0.0;
    for (int h = 0; h < 24; ++h) {
        double ph = (joint[h][0] + joint[h][1]) / n;
        for (int l = 0; l < 2; ++l) {
            double pl = 0;
            for (int hh = 0; hh < 24; ++hh) pl += joint[hh][l];
            pl /= n;
            double pj = joint[h][l] / n;
            if (pj > 0) mi += pj * std::log(pj / (ph * pl));
        }
    }
    CHECK(mi > 0.01);
}
