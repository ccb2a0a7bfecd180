// Run configuration: flat key-value text with [section] headers.
//
// Unknown keys and malformed lines are reported with their line number. The
// global seed is mandatory; nothing in the toolkit falls back to wall-clock
// randomness.
#pragma once

#include <fstream>
#include <map>
#include <string>
#include <vector>

#include "sparsecast/balance.hpp"
#include "sparsecast/cohort.hpp"
#include "sparsecast/featurize.hpp"
#include "sparsecast/model.hpp"
#include "sparsecast/trainer.hpp"

namespace sparsecast {

struct RunConfig {
    // [paths]
    std::string data_dir = "data";
    std::string checkpoint_dir = "checkpoints";
    std::string report_dir = "reports";

    CohortConfig cohort;

    // [features]
    FeatureSetSpec active = FeatureSetSpec{true, true, true, false};  // H+L+K
    std::vector<FeatureSetSpec> ablation = {
        FeatureSetSpec{true, false, false, false},  // H
        FeatureSetSpec{true, false, true, false},   // H+K
        FeatureSetSpec{true, true, false, false},   // H+L
        FeatureSetSpec{true, true, true, false},    // H+L+K
    };

    // [window]
    int window_length = 1800;
    double window_overlap = 0.5;
    double train_frac = 0.8;

    AdasynConfig balance;

    // [model]
    ModelKind model_kind = ModelKind::lstm;
    Hyper hyper;

    Schedule schedule;
    int orderings = 3;

    // [seed]
    std::uint64_t global_seed = 0;
    bool seed_set = false;

    std::string raw_text;  // original file contents, for the manifest

    void validate() const {
        if (!seed_set) throw ConfigError("config: [seed] global is mandatory");
        cohort.validate();
        balance.validate();
        hyper.validate();
        active.validate();
        if (window_length < 1) throw ConfigError("config: window.length must be >= 1");
        if (train_frac <= 0.0 || train_frac >= 1.0) throw ConfigError("config: window.train_frac must be in (0,1)");
        if (orderings < 1) throw ConfigError("config: schedule.orderings must be >= 1");
        if (schedule.chunk_sizes.empty()) throw ConfigError("config: schedule.chunks must be non-empty");
        for (int c : schedule.chunk_sizes)
            if (c < 1) throw ConfigError("config: schedule.chunks entries must be >= 1");
        if (schedule.holdout_test < 0) throw ConfigError("config: schedule.holdout_test must be >= 0");
        if (schedule.total_train() + schedule.holdout_test > cohort.n_participants)
            throw ConfigError("config: schedule needs " +
                              std::to_string(schedule.total_train() + schedule.holdout_test) +
                              " participants but cohort.n_participants is " + std::to_string(cohort.n_participants));
    }
};

namespace detail {

inline std::string trim(const std::string& s) {
    std::size_t a = s.find_first_not_of(" \t\r");
    if (a == std::string::npos) return "";
    std::size_t b = s.find_last_not_of(" \t\r");
    return s.substr(a, b - a + 1);
}

inline std::vector<int> parse_int_list(const std::string& s, const std::string& where) {
    std::vector<int> out;
    std::string cur;
    auto flush = [&]() {
        if (cur.empty()) return;
        try {
            out.push_back(std::stoi(cur));
        } catch (...) {
            throw ConfigError(where + ": bad integer '" + cur + "'");
        }
        cur.clear();
    };
    for (char c : s) {
        if (c == ',') flush();
        else if (!std::isspace(static_cast<unsigned char>(c))) cur.push_back(c);
    }
    flush();
    return out;
}

}  // namespace detail

inline RunConfig parse_config_text(const std::string& text, const std::string& filename = "<config>") {
    RunConfig cfg;
    cfg.raw_text = text;
    std::string section;
    std::istringstream in(text);
    std::string line;
    int lineno = 0;

    auto fail = [&](const std::string& msg) {
        throw ConfigError(filename + ":" + std::to_string(lineno) + ": " + msg);
    };

    while (std::getline(in, line)) {
        ++lineno;
        std::string t = detail::trim(line);
        if (t.empty() || t[0] == '#') continue;
        if (t.front() == '[') {
            if (t.back() != ']') fail("unterminated section header");
            section = t.substr(1, t.size() - 2);
            continue;
        }
        std::size_t eq = t.find('=');
        if (eq == std::string::npos) fail("expected 'key = value'");
        std::string key = detail::trim(t.substr(0, eq));
        std::string value = detail::trim(t.substr(eq + 1));
        if (key.empty()) fail("empty key");

        try {
            if (section == "paths") {
                if (key == "data_dir") cfg.data_dir = value;
                else if (key == "checkpoint_dir") cfg.checkpoint_dir = value;
                else if (key == "report_dir") cfg.report_dir = value;
                else fail("unknown key '" + key + "' in [paths]");
            } else if (section == "cohort") {
                if (key == "n_participants") cfg.cohort.n_participants = std::stoi(value);
                else if (key == "days_per_participant") cfg.cohort.days_per_participant = std::stoi(value);
                else if (key == "doses_per_day") cfg.cohort.doses_per_day = std::stoi(value);
                else if (key == "base_adherence") cfg.cohort.base_adherence = std::stod(value);
                else if (key == "context_effect_strength") cfg.cohort.context_effect_strength = std::stod(value);
                else fail("unknown key '" + key + "' in [cohort]");
            } else if (section == "features") {
                if (key == "active") cfg.active = FeatureSetSpec::parse(value);
                else if (key == "ablation") {
                    cfg.ablation.clear();
                    std::string cur;
                    for (char c : value + ",") {
                        if (c == ',') {
                            std::string name = detail::trim(cur);
                            if (!name.empty()) cfg.ablation.push_back(FeatureSetSpec::parse(name));
                            cur.clear();
                        } else {
                            cur.push_back(c);
                        }
                    }
                } else fail("unknown key '" + key + "' in [features]");
            } else if (section == "window") {
                if (key == "length") cfg.window_length = std::stoi(value);
                else if (key == "overlap") cfg.window_overlap = std::stod(value);
                else if (key == "train_frac") cfg.train_frac = std::stod(value);
                else fail("unknown key '" + key + "' in [window]");
            } else if (section == "balance") {
                if (key == "k") cfg.balance.k = std::stoi(value);
                else if (key == "beta") cfg.balance.beta = std::stod(value);
                else fail("unknown key '" + key + "' in [balance]");
            } else if (section == "model") {
                if (key == "kind") cfg.model_kind = parse_model_kind(value);
                else if (key == "learning_rate") cfg.hyper.learning_rate = std::stod(value);
                else if (key == "batch_size") cfg.hyper.batch_size = std::stoi(value);
                else if (key == "epochs") cfg.hyper.epochs = std::stoi(value);
                else if (key == "beta1") cfg.hyper.beta1 = std::stod(value);
                else if (key == "beta2") cfg.hyper.beta2 = std::stod(value);
                else if (key == "epsilon") cfg.hyper.epsilon = std::stod(value);
                else fail("unknown key '" + key + "' in [model]");
            } else if (section == "schedule") {
                if (key == "chunks") cfg.schedule.chunk_sizes = detail::parse_int_list(value, filename);
                else if (key == "holdout_test") cfg.schedule.holdout_test = std::stoi(value);
                else if (key == "orderings") cfg.orderings = std::stoi(value);
                else fail("unknown key '" + key + "' in [schedule]");
            } else if (section == "seed") {
                if (key == "global") {
                    cfg.global_seed = std::stoull(value);
                    cfg.seed_set = true;
                } else fail("unknown key '" + key + "' in [seed]");
            } else {
                fail("unknown section [" + section + "]");
            }
        } catch (const ConfigError&) {
            throw;
        } catch (const std::exception&) {
            fail("bad value '" + value + "' for key '" + key + "'");
        }
    }

    cfg.cohort.seed = derive_seed(cfg.global_seed, "cohort");
    cfg.schedule.shuffle_seed = derive_seed(cfg.global_seed, "participant-order");
    cfg.validate();
    return cfg;
}

inline RunConfig load_config(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw ConfigError("config file not found: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse_config_text(ss.str(), path);
}

}  // namespace sparsecast
