// End-to-end pipeline commands: synth, prepare, train, evaluate, ablate,
// personalize. Each command is deterministic given its config and seeds,
// writes its artifacts under the configured output directories, and records
// a manifest (config snapshot, seeds, artifact hashes) for reproducibility.
#pragma once

#include <cstdio>
#include <filesystem>
#include <set>

#include <json.hpp>

#include "sparsecast/ablation.hpp"
#include "sparsecast/balance.hpp"
#include "sparsecast/cohort.hpp"
#include "sparsecast/config.hpp"
#include "sparsecast/featurize.hpp"
#include "sparsecast/ingest.hpp"
#include "sparsecast/trainer.hpp"

namespace sparsecast {

namespace fs = std::filesystem;

// The order prepare applies its stages in; asserted by the integrity tests.
inline const std::vector<std::string> kPrepareStageOrder = {"merge", "derive", "window",
                                                            "split", "standardize", "balance"};

struct PipelineLog {
    std::function<void(const std::string&)> sink;
    void operator()(const std::string& msg) const {
        if (sink) sink(msg);
    }
};

namespace detail {

inline std::string participant_stem(int pid) {
    char buf[16];
    std::snprintf(buf, sizeof(buf), "p%03d", pid);
    return buf;
}

inline std::uint64_t hash_file(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot hash missing file: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return fnv1a64(ss.str());
}

inline void write_manifest(const RunConfig& cfg, const std::string& command,
                           const std::vector<std::string>& artifacts, const nlohmann::json& extra) {
    nlohmann::json j;
    j["command"] = command;
    j["config_fnv64"] = fnv1a64(cfg.raw_text);
    j["config_text"] = cfg.raw_text;
    j["global_seed"] = cfg.global_seed;
    nlohmann::json arts = nlohmann::json::object();
    for (const auto& a : artifacts) arts[a] = hash_file(a);
    j["artifacts"] = arts;
    j["extra"] = extra;
    fs::create_directories(cfg.report_dir);
    std::ofstream out(cfg.report_dir + "/manifest_" + command + ".json");
    out << j.dump(2) << "\n";
}

// Exclusive lock on a checkpoint directory; released on destruction.
class DirLock {
public:
    explicit DirLock(const std::string& dir) : path_(dir + "/.lock") {
        fs::create_directories(dir);
        std::FILE* f = std::fopen(path_.c_str(), "wx");
        if (!f)
            throw TrainError("checkpoint directory is locked by another run (remove " + path_ +
                             " if that run is dead)");
        std::fprintf(f, "sparsecast\n");
        std::fclose(f);
    }
    ~DirLock() { std::remove(path_.c_str()); }
    DirLock(const DirLock&) = delete;
    DirLock& operator=(const DirLock&) = delete;

private:
    std::string path_;
};

}  // namespace detail

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

// Generates the cohort's sensor and event CSVs under <data_dir>/raw.
inline void cmd_synth(const RunConfig& cfg, const PipelineLog& log = {}) {
    Cohort cohort = gen_cohort(cfg.cohort);
    std::string raw_dir = cfg.data_dir + "/raw";
    fs::create_directories(raw_dir);
    auto stems = write_cohort_files(cohort, raw_dir);
    std::vector<std::string> artifacts;
    for (const auto& stem : stems) {
        artifacts.push_back(raw_dir + "/" + stem + "_sensor.csv");
        artifacts.push_back(raw_dir + "/" + stem + "_events.csv");
    }
    nlohmann::json extra;
    extra["participants"] = cohort.profiles.size();
    extra["days_per_participant"] = cfg.cohort.days_per_participant;
    detail::write_manifest(cfg, "synth", artifacts, extra);
    log("synth: wrote " + std::to_string(stems.size()) + " participants to " + raw_dir);
}

// ---------------------------------------------------------------------------
// prepare
// ---------------------------------------------------------------------------

struct PrepareSummary {
    std::vector<int> participant_ids;
    std::vector<std::string> warnings;
    std::vector<std::string> stage_order = kPrepareStageOrder;
};

// merge -> derive -> window -> split -> standardize -> balance, per
// participant, persisting one train and one test window container each.
// Balancing falls back to a smaller k when the minority class is tiny and is
// skipped (with a warning) for single-class splits.
inline PrepareSummary cmd_prepare(const RunConfig& cfg, const PipelineLog& log = {}) {
    std::string raw_dir = cfg.data_dir + "/raw";
    std::string out_dir = cfg.data_dir + "/prepared";
    fs::create_directories(out_dir);

    PrepareSummary summary;
    std::vector<std::string> artifacts;

    for (int pid = 0;; ++pid) {
        std::string stem = detail::participant_stem(pid);
        std::string sensor_path = raw_dir + "/" + stem + "_sensor.csv";
        if (!fs::exists(sensor_path)) {
            if (pid == 0)
                throw DataError("prepare: no participant files in " + raw_dir + "; run `sparsecast synth` first");
            break;
        }

        SensorStream sensor = load_sensor_csv(sensor_path);
        std::int64_t offset = sensor.utc_offset();
        EventLog events = load_event_csv(raw_dir + "/" + stem + "_events.csv", offset);
        if (events.empty()) throw DataError("prepare: " + stem + " has an empty event log");

        // Reconstruct the participant's fixed prescribed hours from the file
        // and fill any absent days as all-missed.
        std::set<int> hours_seen;
        for (const auto& e : events.entries) hours_seen.insert(hour_of_ts(e.prescribed_ts + offset));
        std::int64_t first_day = day_of_ts(sensor.samples.front().ts_local);
        int n_days = static_cast<int>(day_of_ts(sensor.samples.back().ts_local) - first_day + 1);
        events = complete_event_log(events, first_day, n_days,
                                    std::vector<int>(hours_seen.begin(), hours_seen.end()), offset);

        MergedSeries merged = merge_streams(sensor, events);
        EnrichedSeries enriched = derive_features(merged);
        if (enriched.skipped > 0)
            summary.warnings.push_back(stem + ": skipped " + std::to_string(enriched.skipped) +
                                       " records with no next prescribed dose");

        WindowSet windows = slide_windows(enriched, pid, cfg.window_length, cfg.window_overlap);
        if (windows.size() < 2) {
            summary.warnings.push_back(stem + ": fewer than 2 windows; participant excluded");
            continue;
        }
        SplitWindows split = chronological_split(windows, cfg.train_frac);

        Standardizer scaler = Standardizer::fit(split.train);
        scaler.apply(split.train);
        scaler.apply(split.test);

        auto balance_or_warn = [&](WindowSet& ws, const char* which, std::uint64_t seed) {
            AdasynConfig bal = cfg.balance;
            bal.seed = seed;
            std::size_t minority = std::min(ws.count_label(true), ws.count_label(false));
            if (minority == 0) {
                summary.warnings.push_back(stem + ": " + which + " split is single-class; left unbalanced");
                return;
            }
            if (minority < static_cast<std::size_t>(bal.k) + 1) {
                bal.k = static_cast<int>(minority) - 1;
                if (bal.k < 1) {
                    summary.warnings.push_back(stem + ": " + which + " split minority too small; left unbalanced");
                    return;
                }
                summary.warnings.push_back(stem + ": " + which + " split balanced with reduced k=" +
                                           std::to_string(bal.k));
            }
            ws = adasyn(ws, bal);
        };
        balance_or_warn(split.train, "train", derive_seed(cfg.global_seed, "balance-train", static_cast<std::uint64_t>(pid)));
        balance_or_warn(split.test, "test", derive_seed(cfg.global_seed, "balance-test", static_cast<std::uint64_t>(pid)));

        std::string train_path = out_dir + "/" + stem + "_train.win";
        std::string test_path = out_dir + "/" + stem + "_test.win";
        save_windows(train_path, split.train);
        save_windows(test_path, split.test);
        artifacts.push_back(train_path);
        artifacts.push_back(test_path);
        summary.participant_ids.push_back(pid);
        log("prepare: " + stem + " train=" + std::to_string(split.train.size()) +
            " test=" + std::to_string(split.test.size()) + " windows");
    }

    nlohmann::json extra;
    extra["participants"] = summary.participant_ids;
    extra["stage_order"] = summary.stage_order;
    extra["warnings"] = summary.warnings;
    extra["window_length"] = cfg.window_length;
    extra["window_overlap"] = cfg.window_overlap;
    detail::write_manifest(cfg, "prepare", artifacts, extra);
    return summary;
}

// Participants that have prepared window containers, in id order.
inline std::vector<int> prepared_participants(const RunConfig& cfg) {
    std::vector<int> ids;
    std::string out_dir = cfg.data_dir + "/prepared";
    for (int pid = 0; pid < cfg.cohort.n_participants; ++pid) {
        if (fs::exists(out_dir + "/" + detail::participant_stem(pid) + "_train.win")) ids.push_back(pid);
    }
    if (ids.empty())
        throw DataError("no prepared window containers in " + out_dir + "; run `sparsecast prepare` first");
    return ids;
}

inline ParticipantProvider make_participant_provider(const RunConfig& cfg) {
    std::string out_dir = cfg.data_dir + "/prepared";
    return [out_dir](int pid) {
        ParticipantData d;
        d.train = load_windows(out_dir + "/" + detail::participant_stem(pid) + "_train.win");
        d.test = load_windows(out_dir + "/" + detail::participant_stem(pid) + "_test.win");
        return d;
    };
}

// The shuffled training pool and held-out cohort for this config.
struct ParticipantSplit {
    std::vector<int> pool;     // schedule.total_train() ids, shuffled
    std::vector<int> holdout;  // schedule.holdout_test ids
};

inline ParticipantSplit split_participants(const RunConfig& cfg, const std::vector<int>& ids) {
    const int need = cfg.schedule.total_train() + cfg.schedule.holdout_test;
    if (static_cast<int>(ids.size()) < need)
        throw DataError("schedule needs " + std::to_string(need) + " prepared participants, found " +
                        std::to_string(ids.size()));
    ParticipantSplit out;
    out.pool.assign(ids.begin(), ids.begin() + cfg.schedule.total_train());
    out.holdout.assign(ids.begin() + cfg.schedule.total_train(), ids.begin() + need);
    Rng rng(cfg.schedule.shuffle_seed);
    rng.shuffle(out.pool);
    return out;
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

inline std::vector<PhaseReport> cmd_train(const RunConfig& cfg, bool resume = false, const PipelineLog& log = {}) {
    detail::DirLock lock(cfg.checkpoint_dir);
    auto ids = prepared_participants(cfg);
    auto split = split_participants(cfg, ids);
    auto provider = make_participant_provider(cfg);
    const auto& spec = cfg.active;

    std::vector<std::vector<int>> phase_pids;
    std::size_t cursor = 0;
    for (int size : cfg.schedule.chunk_sizes) {
        phase_pids.emplace_back(split.pool.begin() + static_cast<std::ptrdiff_t>(cursor),
                                split.pool.begin() + static_cast<std::ptrdiff_t>(cursor + static_cast<std::size_t>(size)));
        cursor += static_cast<std::size_t>(size);
    }

    ChunkProvider chunks = [&](int phase) {
        PhaseData d;
        const auto& pids = phase_pids[static_cast<std::size_t>(phase - 1)];
        d.train = detail::concat_projected(pids, provider, spec, true);
        d.test = detail::concat_projected(pids, provider, spec, false);
        d.n_train_participants = static_cast<int>(pids.size());
        d.n_test_participants = static_cast<int>(pids.size());
        return d;
    };

    IncrementalOptions opt;
    opt.kind = cfg.model_kind;
    opt.hyper = cfg.hyper;
    opt.seed = derive_seed(cfg.global_seed, "train");
    opt.checkpoint_path = cfg.checkpoint_dir + "/model.weights";
    opt.run_log_path = cfg.checkpoint_dir + "/run_log.jsonl";
    opt.resume = resume;
    opt.progress = log.sink;

    auto [state, reports] = incremental_train(cfg.schedule.phases(), chunks, opt);
    (void)state;

    nlohmann::json extra;
    extra["feature_set"] = spec.name();
    extra["phases"] = reports.size();
    detail::write_manifest(cfg, "train", {opt.checkpoint_path}, extra);
    return reports;
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluationResult {
    Metrics final_chunk;
    std::optional<Metrics> holdout;
};

inline EvaluationResult cmd_evaluate(const RunConfig& cfg, const PipelineLog& log = {}) {
    std::string ckpt = cfg.checkpoint_dir + "/model.weights";
    ModelState state = load_model(ckpt);
    auto ids = prepared_participants(cfg);
    auto split = split_participants(cfg, ids);
    auto provider = make_participant_provider(cfg);
    const auto& spec = cfg.active;

    std::vector<int> final_chunk(split.pool.end() - cfg.schedule.chunk_sizes.back(), split.pool.end());
    EvaluationResult res;
    res.final_chunk = evaluate_model(state, detail::concat_projected(final_chunk, provider, spec, false));
    if (!split.holdout.empty())
        res.holdout = evaluate_model(state, detail::concat_projected(split.holdout, provider, spec, false));

    fs::create_directories(cfg.report_dir);
    std::string path = cfg.report_dir + "/evaluation.csv";
    {
        std::ofstream out(path);
        out << "cohort,accuracy,macro_precision,macro_recall,macro_f1\n";
        out << "final_chunk," << res.final_chunk.accuracy << ',' << res.final_chunk.macro_precision << ','
            << res.final_chunk.macro_recall << ',' << res.final_chunk.macro_f1 << "\n";
        if (res.holdout)
            out << "holdout," << res.holdout->accuracy << ',' << res.holdout->macro_precision << ','
                << res.holdout->macro_recall << ',' << res.holdout->macro_f1 << "\n";
    }
    detail::write_manifest(cfg, "evaluate", {path}, {});
    log("evaluate: final_chunk f1=" + std::to_string(res.final_chunk.macro_f1));
    return res;
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

inline AblationReport cmd_ablate(const RunConfig& cfg, const PipelineLog& log = {}) {
    detail::DirLock lock(cfg.checkpoint_dir);
    auto ids = prepared_participants(cfg);

    AblationInputs in;
    in.specs = cfg.ablation;
    in.participant_ids = ids;
    in.provider = make_participant_provider(cfg);
    in.schedule = cfg.schedule;
    in.kind = cfg.model_kind;
    in.hyper = cfg.hyper;
    for (int i = 0; i < cfg.orderings; ++i)
        in.ordering_seeds.push_back(derive_seed(cfg.global_seed, "ordering", static_cast<std::uint64_t>(i)));
    in.train_seed = derive_seed(cfg.global_seed, "ablation-train");
    in.checkpoint_dir = cfg.checkpoint_dir;
    in.run_log_path = cfg.checkpoint_dir + "/ablation_log.jsonl";
    in.progress = log.sink;

    AblationReport report = run_ablation(in);

    fs::create_directories(cfg.report_dir);
    std::string wide = cfg.report_dir + "/ablation.csv";
    std::string longf = cfg.report_dir + "/ablation_long.csv";
    write_ablation_csv(wide, report);
    write_ablation_long_csv(longf, report);
    detail::write_manifest(cfg, "ablate", {wide, longf}, {});
    return report;
}

// ---------------------------------------------------------------------------
// personalize
// ---------------------------------------------------------------------------

struct PersonalizationResult {
    Metrics before;
    Metrics after;
};

// Retrains the final checkpoint on the named participants' training windows
// and reports their test metrics before and after.
inline PersonalizationResult cmd_personalize(const RunConfig& cfg, const std::vector<int>& participant_ids,
                                             const PipelineLog& log = {}) {
    if (participant_ids.empty()) throw ConfigError("personalize: no participant ids given");
    detail::DirLock lock(cfg.checkpoint_dir);
    ModelState state = load_model(cfg.checkpoint_dir + "/model.weights");
    auto provider = make_participant_provider(cfg);
    const auto& spec = cfg.active;

    WindowSet target_train = detail::concat_projected(participant_ids, provider, spec, true);
    WindowSet target_test = detail::concat_projected(participant_ids, provider, spec, false);

    PersonalizationResult res;
    res.before = evaluate_model(state, target_test);
    ModelState adapted = personalize(state, target_train, cfg.hyper, derive_seed(cfg.global_seed, "personalize"));
    res.after = evaluate_model(adapted, target_test);

    save_model(cfg.checkpoint_dir + "/personalized.weights", adapted);
    fs::create_directories(cfg.report_dir);
    std::string path = cfg.report_dir + "/personalization.csv";
    {
        std::ofstream out(path);
        out << "stage,accuracy,macro_precision,macro_recall,macro_f1\n";
        out << "before," << res.before.accuracy << ',' << res.before.macro_precision << ',' << res.before.macro_recall
            << ',' << res.before.macro_f1 << "\n";
        out << "after," << res.after.accuracy << ',' << res.after.macro_precision << ',' << res.after.macro_recall
            << ',' << res.after.macro_f1 << "\n";
    }
    detail::write_manifest(cfg, "personalize", {path, cfg.checkpoint_dir + "/personalized.weights"}, {});
    log("personalize: f1 " + std::to_string(res.before.macro_f1) + " -> " + std::to_string(res.after.macro_f1));
    return res;
}

}  // namespace sparsecast
