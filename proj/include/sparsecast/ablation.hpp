// Feature-ablation experiment driver: trains one model per feature set over
// the incremental schedule, for several participant orderings, and reports
// per-phase metrics plus a paired t-test on the effect of the K block.
#pragma once

#include <map>
#include <string>
#include <vector>

#include "sparsecast/featurize.hpp"
#include "sparsecast/trainer.hpp"

namespace sparsecast {

struct AblationRow {
    int ordering = 0;  // 1-based ordering index
    int phase = 0;     // 1-based; 0 marks the held-out final evaluation
    std::string spec;
    int cumulative_train_participants = 0;
    int test_participants = 0;
    Metrics metrics;
    bool holdout = false;
};

struct AblationReport {
    std::vector<AblationRow> rows;
    // "A+K vs A" -> p-value of the paired t-test over per-phase F-1 diffs.
    std::map<std::string, double> k_effect_p_values;

    const AblationRow* find(int ordering, const std::string& spec, bool holdout, int phase = 0) const {
        for (const auto& r : rows)
            if (r.ordering == ordering && r.spec == spec && r.holdout == holdout && (holdout || r.phase == phase))
                return &r;
        return nullptr;
    }
};

// Access to prepared, balanced per-participant window splits (full 79-column
// feature space; projection happens per ablation arm).
struct ParticipantData {
    WindowSet train;
    WindowSet test;
};
using ParticipantProvider = std::function<ParticipantData(int participant_id)>;

struct AblationInputs {
    std::vector<FeatureSetSpec> specs;
    std::vector<int> participant_ids;  // pool; the last `schedule.holdout_test` stay out of training
    ParticipantProvider provider;
    Schedule schedule;
    ModelKind kind = ModelKind::lstm;
    Hyper hyper;
    std::vector<std::uint64_t> ordering_seeds;  // one per repetition
    std::uint64_t train_seed = 0;
    std::string checkpoint_dir;
    std::string run_log_path;
    std::function<void(const std::string&)> progress;
};

namespace detail {

inline WindowSet concat_projected(const std::vector<int>& pids, const ParticipantProvider& provider,
                                  const FeatureSetSpec& spec, bool train_split) {
    auto cols = spec.columns();
    WindowSet out;
    for (int pid : pids) {
        ParticipantData d = provider(pid);
        const WindowSet& src = train_split ? d.train : d.test;
        std::vector<std::string> names;
        for (int c : cols) names.push_back(src.col_names()[static_cast<std::size_t>(c)]);
        out.append(src.project(cols, names));
    }
    return out;
}

}  // namespace detail

inline AblationReport run_ablation(const AblationInputs& in) {
    if (in.specs.empty()) throw ConfigError("run_ablation: no feature sets given");
    if (in.ordering_seeds.empty()) throw ConfigError("run_ablation: no ordering seeds given");
    const int total_needed = in.schedule.total_train() + in.schedule.holdout_test;
    if (static_cast<int>(in.participant_ids.size()) < total_needed)
        throw ConfigError("run_ablation: schedule needs " + std::to_string(total_needed) + " participants but only " +
                          std::to_string(in.participant_ids.size()) + " are available");

    // The held-out cohort is fixed across orderings; orderings permute the
    // training pool only.
    std::vector<int> pool(in.participant_ids.begin(), in.participant_ids.begin() + in.schedule.total_train());
    std::vector<int> holdout(in.participant_ids.begin() + in.schedule.total_train(),
                             in.participant_ids.begin() + total_needed);

    AblationReport report;
    for (std::size_t oi = 0; oi < in.ordering_seeds.size(); ++oi) {
        std::vector<int> order = pool;
        Rng rng(derive_seed(in.ordering_seeds[oi], "participant-order"));
        rng.shuffle(order);

        // Consecutive groups of the shuffled pool become the phase chunks.
        std::vector<std::vector<int>> phase_pids;
        std::size_t cursor = 0;
        for (int size : in.schedule.chunk_sizes) {
            phase_pids.emplace_back(order.begin() + static_cast<std::ptrdiff_t>(cursor),
                                    order.begin() + static_cast<std::ptrdiff_t>(cursor + static_cast<std::size_t>(size)));
            cursor += static_cast<std::size_t>(size);
        }

        for (const auto& spec : in.specs) {
            ChunkProvider chunks = [&](int phase) {
                PhaseData d;
                const auto& pids = phase_pids[static_cast<std::size_t>(phase - 1)];
                d.train = detail::concat_projected(pids, in.provider, spec, true);
                d.test = detail::concat_projected(pids, in.provider, spec, false);
                d.n_train_participants = static_cast<int>(pids.size());
                d.n_test_participants = static_cast<int>(pids.size());
                return d;
            };

            IncrementalOptions opt;
            opt.kind = in.kind;
            opt.hyper = in.hyper;
            opt.seed = derive_seed(in.train_seed, "ablation", fnv1a64(spec.name()) ^ (oi + 1));
            opt.checkpoint_path =
                in.checkpoint_dir + "/ablate_" + spec.name() + "_o" + std::to_string(oi + 1) + ".weights";
            opt.run_log_path = in.run_log_path;
            opt.progress = in.progress;

            auto [state, phases] = incremental_train(in.schedule.phases(), chunks, opt);
            for (const auto& ph : phases) {
                AblationRow row;
                row.ordering = static_cast<int>(oi + 1);
                row.phase = ph.phase;
                row.spec = spec.name();
                row.cumulative_train_participants = ph.cumulative_train_participants;
                row.test_participants = ph.test_participants;
                row.metrics = ph.metrics;
                report.rows.push_back(row);
            }

            if (!holdout.empty()) {
                WindowSet held = detail::concat_projected(holdout, in.provider, spec, false);
                AblationRow row;
                row.ordering = static_cast<int>(oi + 1);
                row.phase = 0;
                row.spec = spec.name();
                row.cumulative_train_participants = in.schedule.total_train();
                row.test_participants = static_cast<int>(holdout.size());
                row.metrics = evaluate_model(state, held);
                row.holdout = true;
                report.rows.push_back(row);
                if (in.progress)
                    in.progress("holdout " + spec.name() + " o" + std::to_string(oi + 1) +
                                " f1=" + std::to_string(row.metrics.macro_f1));
            }
        }
    }

    // Paired t-test for every spec pair that differs only by the K block,
    // over per-(ordering, phase) F-1 differences. The paper reports p-values
    // for this effect without naming the test; a paired two-sided t-test is
    // the interpretation used here.
    for (const auto& spec : in.specs) {
        if (spec.include_K) continue;
        FeatureSetSpec with_k = spec;
        with_k.include_K = true;
        bool have = false;
        for (const auto& s : in.specs) have = have || s.name() == with_k.name();
        if (!have) continue;
        std::vector<double> diffs;
        for (const auto& r : report.rows) {
            if (r.spec != spec.name() || r.holdout) continue;
            const AblationRow* paired = report.find(r.ordering, with_k.name(), false, r.phase);
            if (paired) diffs.push_back(paired->metrics.macro_f1 - r.metrics.macro_f1);
        }
        if (diffs.size() >= 2)
            report.k_effect_p_values[with_k.name() + " vs " + spec.name()] = paired_t_test_p(diffs);
    }
    return report;
}

// ---------------------------------------------------------------------------
// Report files
// ---------------------------------------------------------------------------

// Wide CSV: one row per (ordering, phase, spec); phase 0 rows are the
// held-out final evaluations.
inline void write_ablation_csv(const std::string& path, const AblationReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "ordering,phase,spec,cumulative_train_participants,test_participants,holdout,"
           "accuracy,macro_precision,macro_recall,macro_f1\n";
    for (const auto& r : report.rows) {
        out << r.ordering << ',' << r.phase << ',' << r.spec << ',' << r.cumulative_train_participants << ','
            << r.test_participants << ',' << (r.holdout ? 1 : 0) << ',' << r.metrics.accuracy << ','
            << r.metrics.macro_precision << ',' << r.metrics.macro_recall << ',' << r.metrics.macro_f1 << "\n";
    }
    out << "# paired two-sided t-test over per-phase F-1 differences\n";
    for (const auto& [name, p] : report.k_effect_p_values) out << "# p-value " << name << " = " << p << "\n";
}

// Long format suitable for plotting one series per (spec, metric).
inline void write_ablation_long_csv(const std::string& path, const AblationReport& report) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "series,ordering,phase,metric,value\n";
    auto emit = [&](const AblationRow& r, const char* metric, double v) {
        out << r.spec << (r.holdout ? "/holdout" : "") << ',' << r.ordering << ',' << r.phase << ',' << metric << ','
            << v << "\n";
    };
    for (const auto& r : report.rows) {
        emit(r, "accuracy", r.metrics.accuracy);
        emit(r, "macro_precision", r.metrics.macro_precision);
        emit(r, "macro_recall", r.metrics.macro_recall);
        emit(r, "macro_f1", r.metrics.macro_f1);
    }
}

}  // namespace sparsecast
