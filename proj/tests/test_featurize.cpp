#include <catch2/catch_amalgamated.hpp>

#include "sparsecast/cohort.hpp"
#include "sparsecast/featurize.hpp"
#include "sparsecast/ingest.hpp"
#include "sparsecast/rng.hpp"
#include "test_support.hpp"

using namespace sparsecast;

namespace {

MergedRecord make_record(std::int64_t ts, std::int64_t next_prescribed) {
    MergedRecord r;
    r.sample.ts_utc = ts;
    r.sample.ts_local = ts;
    r.next_prescribed_ts = next_prescribed;
    return r;
}

// A realistic merged series from the generator, for property checks.
MergedSeries generated_series(EventLog* events_out = nullptr, int days = 2, std::uint64_t seed = 11) {
    CohortConfig cfg;
    cfg.n_participants = 1;
    cfg.days_per_participant = days;
    cfg.base_adherence = 0.8;
    cfg.seed = seed;
    Cohort cohort = gen_cohort(cfg);
    SensorStream s = gen_sensor_stream(cohort.profiles[0], days, cfg.seed);
    EventLog e = gen_adherence_events(cohort.profiles[0], s, cfg);
    if (events_out) *events_out = e;
    return merge_streams(s, e);
}

}  // namespace

TEST_CASE("relative timestamp is next prescribed minus current") {
    MergedSeries m;
    m.records.push_back(make_record(1000, 4600));
    EnrichedSeries e = derive_features(m);
    REQUIRE(e.size() == 1);
    CHECK(e.row(0)[kColRelativeTsUtc] == 3600.0f);
    CHECK(e.row(0)[kColRelativeTsLocal] == 3600.0f);
}

TEST_CASE("medication-next-hour boundary is (ts, ts+3600]") {
    MergedSeries m;
    MergedRecord in_window = make_record(1000, 999000);
    in_window.next_event_ts = 1000 + 1800;
    MergedRecord at_edge = make_record(1000, 999000);
    at_edge.next_event_ts = 1000 + 3600;
    MergedRecord past_edge = make_record(1000, 999000);
    past_edge.next_event_ts = 1000 + 3601;
    m.records = {in_window, at_edge, past_edge};
    EnrichedSeries e = derive_features(m);
    REQUIRE(e.size() == 3);
    CHECK(e.target[0] == 1);
    CHECK(e.target[1] == 1);  // inclusive upper boundary
    CHECK(e.target[2] == 0);
}

TEST_CASE("records without a next prescribed dose are skipped with a count") {
    MergedSeries m;
    m.records.push_back(make_record(1000, 2000));
    m.records.push_back(make_record(3000, 2000));  // next_prescribed in the past
    EnrichedSeries e = derive_features(m);
    CHECK(e.size() == 1);
    CHECK(e.skipped == 1);
}

TEST_CASE("lookback flags match the brute-force oracle on the worked example") {
    // One dose taken at 09:05; the record at 10:00 sees med_in_last_2h and 24h.
    std::int64_t day = days_from_civil(2024, 6, 3);
    std::int64_t taken = day * kSecondsPerDay + 9 * 3600 + 300;
    EventLog events;
    events.entries.push_back({day, taken, day * kSecondsPerDay + 9 * 3600});
    events.entries.push_back({day + 1, std::nullopt, (day + 1) * kSecondsPerDay + 9 * 3600});

    SensorStream sensor;
    SensorSample s;
    s.ts_utc = day * kSecondsPerDay + 10 * 3600;
    s.ts_local = s.ts_utc;
    sensor.samples.push_back(s);

    MergedSeries m = merge_streams(sensor, events);
    EnrichedSeries e = derive_features(m);
    REQUIRE(e.size() == 1);
    CHECK(e.row(0)[kColMedInLast + 0] == 1.0f);  // last 2h
    CHECK(e.row(0)[kColMedInLast + 4] == 1.0f);  // last 24h
    CHECK(e.row(0)[kColLastMedEvent] == 1.0f);
    CHECK(e.row(0)[kColLastEventHour] == 9.0f);

    bool target = false;
    auto oracle = sctest::oracle_enrich_row(s, events, &target);
    for (int c = 0; c < kDimTotal; ++c) CHECK(e.row(0)[c] == oracle[static_cast<std::size_t>(c)]);
    CHECK((e.target[0] != 0) == target);
}

TEST_CASE("every enriched record matches the independent oracle and has valid one-hots") {
    EventLog events;
    MergedSeries m = generated_series(&events);
    EnrichedSeries e = derive_features(m);
    REQUIRE(e.size() > 10000);

    Rng rng(7);
    for (int trial = 0; trial < 500; ++trial) {
        std::size_t i = static_cast<std::size_t>(rng.uniform_index(e.size()));
        bool target = false;
        auto oracle = sctest::oracle_enrich_row(m.records[i].sample, events, &target);
        for (int c = 0; c < kDimTotal; ++c) {
            INFO("record " << i << " column " << c);
            CHECK(e.row(i)[c] == oracle[static_cast<std::size_t>(c)]);
        }
        CHECK((e.target[i] != 0) == target);
    }

    // One-hot groups each sum to exactly 1.
    for (std::size_t i = 0; i < e.size(); i += 501) {
        float dow = 0, hod = 0, nph = 0;
        for (int c = 0; c < 7; ++c) dow += e.row(i)[kColDayOfWeek + c];
        for (int c = 0; c < 24; ++c) hod += e.row(i)[kColHourOfDay + c];
        for (int c = 0; c < 24; ++c) nph += e.row(i)[kColNextPrescribedHour + c];
        CHECK(dow == 1.0f);
        CHECK(hod == 1.0f);
        CHECK(nph == 1.0f);
    }
}

TEST_CASE("feature-set selection yields the published dimensions") {
    CHECK(FeatureSetSpec::parse("H").dim() == 14);
    CHECK(FeatureSetSpec::parse("H+K").dim() == 40);
    CHECK(FeatureSetSpec::parse("H+L").dim() == 53);
    CHECK(FeatureSetSpec::parse("H+L+K").dim() == 79);
    CHECK(FeatureSetSpec::parse("Loc").dim() == 2);
    CHECK(FeatureSetSpec::parse("Loc+K").dim() == 28);
    CHECK(kDimH + kDimL + kDimK == 79);

    MergedSeries m;
    m.records.push_back(make_record(1000, 4600));
    EnrichedSeries e = derive_features(m);
    CHECK(select_features(e, FeatureSetSpec::parse("H+L+K")).n_cols == 79);
    CHECK(select_features(e, FeatureSetSpec::parse("H+K")).n_cols == 40);
    auto loc = select_features(e, FeatureSetSpec::parse("Loc+K"));
    CHECK(loc.n_cols == 28);
    CHECK(loc.col_names[0] == "lat");
    CHECK(loc.col_names[1] == "lon");

    CHECK_THROWS_AS(FeatureSetSpec::parse("Q"), ConfigError);
    FeatureSetSpec bad;  // nothing selected
    CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("window counts follow the hop arithmetic") {
    auto series_of = [](std::size_t n) {
        MergedSeries m;
        for (std::size_t i = 0; i < n; ++i) m.records.push_back(make_record(static_cast<std::int64_t>(i), 1 << 30));
        return derive_features(m);
    };

    WindowSet three = slide_windows(series_of(3600), 0);
    REQUIRE(three.size() == 3);
    CHECK(three.start_ts(0) == 0);
    CHECK(three.start_ts(1) == 900);
    CHECK(three.start_ts(2) == 1800);
    CHECK(three.window_len() == 1800);
    CHECK(three.n_cols() == kDimTotal);

    CHECK(slide_windows(series_of(1799), 0).size() == 0);

    // Enumeration oracle for assorted lengths.
    Rng rng(3);
    for (int trial = 0; trial < 20; ++trial) {
        std::size_t n = 1800 + rng.uniform_index(20000);
        std::size_t expected = 0;
        for (std::size_t start = 0; start + 1800 <= n; start += 900) ++expected;
        CHECK(slide_windows(series_of(n), 0).size() == expected);
        CHECK(expected == (n - 1800) / 900 + 1);
    }

    // Short windows with spacing (negative overlap) follow the same formula.
    EnrichedSeries s = series_of(1000);
    WindowSet spaced = slide_windows(s, 0, 100, -3.0);  // hop 400
    std::size_t expected = 0;
    for (std::size_t start = 0; start + 100 <= 1000; start += 400) ++expected;
    CHECK(spaced.size() == expected);
}

TEST_CASE("window label comes from the final record") {
    MergedSeries m;
    for (int i = 0; i < 10; ++i) {
        MergedRecord r = make_record(i, 1 << 20);
        if (i == 9) r.next_event_ts = i + 100;  // only the final record is positive
        m.records.push_back(r);
    }
    EnrichedSeries e = derive_features(m);
    WindowSet ws = slide_windows(e, 0, 10, 0.5);
    REQUIRE(ws.size() == 1);
    CHECK(ws.label(0));
}

TEST_CASE("chronological split puts the first ceil(frac*n) windows in train") {
    MergedSeries m;
    for (int i = 0; i < 100; ++i) m.records.push_back(make_record(i, 1 << 20));
    EnrichedSeries e = derive_features(m);
    WindowSet ws = slide_windows(e, 0, 10, 0.0);
    REQUIRE(ws.size() == 10);

    SplitWindows sp = chronological_split(ws, 0.8);
    CHECK(sp.train.size() == 8);
    CHECK(sp.test.size() == 2);

    // Every test window starts at or after the latest train window start.
    std::int64_t latest_train = 0;
    for (std::size_t i = 0; i < sp.train.size(); ++i) latest_train = std::max(latest_train, sp.train.start_ts(i));
    for (std::size_t i = 0; i < sp.test.size(); ++i) CHECK(sp.test.start_ts(i) >= latest_train);

    WindowSet tiny(10, enriched_column_names());
    CHECK_THROWS_AS(chronological_split(tiny, 0.8), DataError);
}

TEST_CASE("standardizer normalizes numeric columns using train statistics only") {
    EventLog events;
    MergedSeries m = generated_series(&events, 2, 21);
    EnrichedSeries e = derive_features(m);
    WindowSet ws = slide_windows(e, 0, 60, -4.0);
    REQUIRE(ws.size() > 20);
    SplitWindows sp = chronological_split(ws, 0.8);

    Standardizer sc = Standardizer::fit(sp.train);
    WindowSet train_before = sp.train;
    sc.apply(sp.train);
    sc.apply(sp.test);

    // Numeric train columns now have near-zero mean and unit variance.
    const int C = sp.train.n_cols();
    for (std::size_t k = 0; k < sc.cols.size(); ++k) {
        double sum = 0, sumsq = 0, n = 0;
        for (std::size_t i = 0; i < sp.train.size(); ++i) {
            auto w = sp.train.window(i);
            for (int t = 0; t < sp.train.window_len(); ++t) {
                double v = w[static_cast<std::size_t>(t) * C + static_cast<std::size_t>(sc.cols[k])];
                sum += v;
                sumsq += v * v;
                n += 1;
            }
        }
        double mean = sum / n, var = sumsq / n - mean * mean;
        CHECK(std::abs(mean) < 1e-4);
        if (sc.inv_std[k] != 1.0) CHECK(std::abs(var - 1.0) < 1e-3);
    }

    // Boolean/one-hot columns are untouched.
    for (std::size_t i = 0; i < sp.train.size(); i += 7) {
        auto before = train_before.window(i);
        auto after = sp.train.window(i);
        for (int t = 0; t < sp.train.window_len(); ++t)
            for (int c = kColDayOfWeek; c < kColMedInLast + 5; ++c)
                CHECK(before[static_cast<std::size_t>(t) * C + static_cast<std::size_t>(c)] ==
                      after[static_cast<std::size_t>(t) * C + static_cast<std::size_t>(c)]);
    }
}

TEST_CASE("windowing is a pure function of its input") {
    EventLog events;
    MergedSeries m = generated_series(&events, 2, 33);
    EnrichedSeries e = derive_features(m);
    WindowSet a = slide_windows(e, 3, 120, 0.5);
    WindowSet b = slide_windows(e, 3, 120, 0.5);
    REQUIRE(a.size() == b.size());
    CHECK(a.raw() == b.raw());
    CHECK(a.labels() == b.labels());
}

TEST_CASE("window container round-trips through its binary format") {
    EventLog events;
    MergedSeries m = generated_series(&events, 2, 42);
    EnrichedSeries e = derive_features(m);
    WindowSet ws = slide_windows(e, 5, 60, -9.0);
    REQUIRE(ws.size() > 5);

    sctest::TempDir dir("sc_win");
    save_windows(dir.file("w.win"), ws);
    WindowSet back = load_windows(dir.file("w.win"));
    REQUIRE(back.size() == ws.size());
    CHECK(back.raw() == ws.raw());
    CHECK(back.labels() == ws.labels());
    CHECK(back.col_names() == ws.col_names());
    for (std::size_t i = 0; i < ws.size(); ++i) {
        CHECK(back.start_ts(i) == ws.start_ts(i));
        CHECK(back.participant(i) == ws.participant(i));
    }
}
