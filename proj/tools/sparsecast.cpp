// Command-line entry point wiring the pipeline:
//   sparsecast <synth|prepare|train|evaluate|ablate|personalize>
//       --config <path> [--seed N] [--participants a,b,c] [--out DIR] [--resume]
#include <cstdio>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "sparsecast/config.hpp"
#include "sparsecast/pipeline.hpp"

namespace {

sparsecast::RunConfig load(const std::string& config_path, std::uint64_t seed_override, bool seed_given,
                           const std::string& out_override) {
    sparsecast::RunConfig cfg = sparsecast::load_config(config_path);
    if (seed_given) {
        cfg.global_seed = seed_override;
        cfg.seed_set = true;
        cfg.cohort.seed = sparsecast::derive_seed(cfg.global_seed, "cohort");
        cfg.schedule.shuffle_seed = sparsecast::derive_seed(cfg.global_seed, "participant-order");
    }
    if (!out_override.empty()) cfg.data_dir = out_override;
    cfg.validate();
    return cfg;
}

std::vector<int> parse_participants(const std::string& csv) {
    std::vector<int> out;
    std::string cur;
    for (char c : csv + ",") {
        if (c == ',') {
            if (!cur.empty()) out.push_back(std::stoi(cur));
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    return out;
}

void print_metrics(const char* tag, const sparsecast::Metrics& m) {
    std::printf("%s accuracy=%.4f precision=%.4f recall=%.4f f1=%.4f\n", tag, m.accuracy, m.macro_precision,
                m.macro_recall, m.macro_f1);
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"sparse-event forecasting pipeline"};
    app.require_subcommand(1);

    std::string config_path;
    std::string out_dir;
    std::string participants_csv;
    std::uint64_t seed = 0;
    bool seed_given = false;
    bool resume = false;

    auto add_common = [&](CLI::App* cmd) {
        cmd->add_option("--config", config_path, "run configuration file")->required();
        cmd->add_option("--seed", seed, "override the global seed")->each([&](const std::string&) { seed_given = true; });
        cmd->add_option("--out", out_dir, "override the data directory");
    };

    CLI::App* synth = app.add_subcommand("synth", "generate a synthetic cohort");
    add_common(synth);
    CLI::App* prepare = app.add_subcommand("prepare", "merge, featurize, window, split, and balance");
    add_common(prepare);
    CLI::App* train = app.add_subcommand("train", "incremental training over the schedule");
    add_common(train);
    train->add_flag("--resume", resume, "resume from the last completed phase");
    CLI::App* evaluate = app.add_subcommand("evaluate", "evaluate the trained checkpoint");
    add_common(evaluate);
    CLI::App* ablate = app.add_subcommand("ablate", "run the feature-set ablation experiments");
    add_common(ablate);
    CLI::App* personalize = app.add_subcommand("personalize", "retrain the checkpoint on named participants");
    add_common(personalize);
    personalize->add_option("--participants", participants_csv, "comma-separated participant ids")->required();

    CLI11_PARSE(app, argc, argv);

    sparsecast::PipelineLog log;
    log.sink = [](const std::string& msg) { std::printf("%s\n", msg.c_str()); };

    try {
        sparsecast::RunConfig cfg = load(config_path, seed, seed_given, out_dir);
        if (synth->parsed()) {
            sparsecast::cmd_synth(cfg, log);
        } else if (prepare->parsed()) {
            auto summary = sparsecast::cmd_prepare(cfg, log);
            for (const auto& w : summary.warnings) std::printf("warning: %s\n", w.c_str());
        } else if (train->parsed()) {
            auto reports = sparsecast::cmd_train(cfg, resume, log);
            for (const auto& r : reports)
                std::printf("phase %d: train=%d test=%d f1=%.4f\n", r.phase, r.cumulative_train_participants,
                            r.test_participants, r.metrics.macro_f1);
        } else if (evaluate->parsed()) {
            auto res = sparsecast::cmd_evaluate(cfg, log);
            print_metrics("final_chunk", res.final_chunk);
            if (res.holdout) print_metrics("holdout", *res.holdout);
        } else if (ablate->parsed()) {
            auto report = sparsecast::cmd_ablate(cfg, log);
            for (const auto& [name, p] : report.k_effect_p_values)
                std::printf("p-value %s = %g (paired two-sided t-test)\n", name.c_str(), p);
        } else if (personalize->parsed()) {
            auto res = sparsecast::cmd_personalize(cfg, parse_participants(participants_csv), log);
            print_metrics("before", res.before);
            print_metrics("after", res.after);
        }
    } catch (const sparsecast::ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return sparsecast::kExitConfigError;
    } catch (const sparsecast::DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return sparsecast::kExitDataError;
    } catch (const sparsecast::TrainError& e) {
        std::fprintf(stderr, "training error: %s\n", e.what());
        return sparsecast::kExitTrainError;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "error: %s\n", e.what());
        return 1;
    }
    return sparsecast::kExitOk;
}
