// Incremental chunked training with checkpointing, plus personalization.
//
// Training runs in sessions over disjoint participant chunks. Every session
// starts from the weights persisted by the previous one (loaded from the
// checkpoint file, not carried in memory), trains for the configured number
// of epochs, and persists the updated weights before the next chunk is
// touched. Only one chunk's windows are resident at a time.
#pragma once

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "sparsecast/evaluate.hpp"
#include "sparsecast/neural.hpp"
#include "sparsecast/rng.hpp"
#include "sparsecast/windows.hpp"

namespace sparsecast {

enum class ModelKind { lstm, cnn };

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "lstm") return ModelKind::lstm;
    if (s == "cnn") return ModelKind::cnn;
    throw ConfigError("unknown model kind '" + s + "' (expected lstm or cnn)");
}

inline Arch make_arch(ModelKind kind, int input_dim, int window_len) {
    if (kind == ModelKind::lstm) return LstmArch{input_dim, 2};
    CnnArch a;
    a.window_len = window_len;
    a.input_dim = input_dim;
    if (window_len < a.kernel_h) {
        // Reduced-window runs scale the kernel/stride down proportionally.
        a.kernel_h = std::max(2, window_len / 30);
        a.stride_h = std::max(1, a.kernel_h / 2);
    }
    return a;
}

struct TrainLog {
    std::vector<double> epoch_loss;
};

// One training session over a single chunk. When `prior` is present the
// session resumes from its weights and optimizer state; otherwise the model
// is freshly initialized from `seed`. Mini-batches of hyper.batch_size are
// drawn in a shuffled order derived from (seed, epoch).
inline ModelState train_session(const std::optional<ModelState>& prior, const WindowSet& chunk, ModelKind kind,
                                const Hyper& hyper, std::uint64_t seed, TrainLog* log = nullptr) {
    hyper.validate();
    if (chunk.empty()) throw TrainError("train_session: chunk is empty");

    ModelState state;
    if (prior) {
        state = *prior;
        if (arch_input_dim(state.arch) != chunk.n_cols())
            throw TrainError("train_session: prior model expects " + std::to_string(arch_input_dim(state.arch)) +
                             " features but the chunk has " + std::to_string(chunk.n_cols()));
        if (std::holds_alternative<CnnArch>(state.arch) &&
            std::get<CnnArch>(state.arch).window_len != chunk.window_len())
            throw TrainError("train_session: prior CNN window length does not match the chunk");
    } else {
        state = init_model(make_arch(kind, chunk.n_cols(), chunk.window_len()), derive_seed(seed, "init"));
    }

    std::vector<std::size_t> order(chunk.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;

    for (int epoch = 0; epoch < hyper.epochs; ++epoch) {
        Rng rng(derive_seed(seed, "shuffle", static_cast<std::uint64_t>(epoch)));
        rng.shuffle(order);
        double loss_sum = 0.0;
        std::size_t batches = 0;
        for (std::size_t start = 0; start < order.size(); start += static_cast<std::size_t>(hyper.batch_size)) {
            std::size_t end = std::min(order.size(), start + static_cast<std::size_t>(hyper.batch_size));
            std::span<const std::size_t> idx(order.data() + start, end - start);
            MatrixXd X = make_batch(chunk, idx);
            VectorXd y = make_labels(chunk, idx);
            LossAndGrad lg = model_loss_grad(state, X, y);
            adam_step(state, lg.grad, hyper);
            loss_sum += lg.loss;
            ++batches;
        }
        if (log) log->epoch_loss.push_back(batches ? loss_sum / static_cast<double>(batches) : 0.0);
    }
    return state;
}

// ---------------------------------------------------------------------------
// Incremental training over phases
// ---------------------------------------------------------------------------

struct Schedule {
    std::vector<int> chunk_sizes = {1, 4, 4, 4, 4, 5};  // train participants per phase
    int holdout_test = 0;  // participants reserved as a never-trained final test cohort
    std::uint64_t shuffle_seed = 0;

    int phases() const { return static_cast<int>(chunk_sizes.size()); }
    int total_train() const {
        int n = 0;
        for (int c : chunk_sizes) n += c;
        return n;
    }
    std::vector<int> cumulative() const {
        std::vector<int> c;
        int sum = 0;
        for (int s : chunk_sizes) c.push_back(sum += s);
        return c;
    }
};

struct PhaseReport {
    int phase = 0;  // 1-based
    int cumulative_train_participants = 0;
    int test_participants = 0;
    Metrics metrics;
    double final_epoch_loss = 0.0;
};

// The data one phase consumes: the chunk's (balanced) train windows and the
// same participants' (balanced) test windows.
struct PhaseData {
    WindowSet train;
    WindowSet test;
    int n_train_participants = 0;
    int n_test_participants = 0;
};

using ChunkProvider = std::function<PhaseData(int phase)>;  // phase is 1-based

struct IncrementalOptions {
    ModelKind kind = ModelKind::lstm;
    Hyper hyper;
    std::uint64_t seed = 0;
    std::string checkpoint_path;       // canonical weights file (Algorithm-1 "model_weights")
    std::string run_log_path;          // JSONL phase reports; empty disables
    bool resume = false;               // continue from the checkpoint's phase marker
    int stop_after_phase = 0;          // > 0: return early after that phase (crash simulation)
    std::function<void(const std::string&)> progress;  // optional progress sink
};

namespace detail {

inline void atomic_write_file(const std::string& path, const std::string& contents) {
    std::string tmp = path + ".tmp";
    {
        std::ofstream out(tmp, std::ios::binary);
        if (!out) throw DataError("cannot open for writing: " + tmp);
        out.write(contents.data(), static_cast<std::streamsize>(contents.size()));
        if (!out) throw DataError("write failed: " + tmp);
    }
    std::filesystem::rename(tmp, path);
}

inline std::string file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("cannot read: " + path);
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

// Weights are written to a temp file and renamed, then the phase marker is
// updated with a hash of the weight bytes. A crash between the two renames
// surfaces as a hash mismatch on resume, never as a silently wrong restart.
inline void save_checkpoint(const std::string& path, const ModelState& st, int completed_phase) {
    save_model(path + ".tmp", st);
    std::filesystem::rename(path + ".tmp", path);
    nlohmann::json j;
    j["completed_phase"] = completed_phase;
    j["weights_fnv64"] = fnv1a64(file_bytes(path));
    atomic_write_file(path + ".state", j.dump());
}

inline int load_checkpoint_phase(const std::string& path) {
    std::ifstream in(path + ".state");
    if (!in) throw TrainError("resume: no checkpoint state found at " + path + ".state");
    nlohmann::json j = nlohmann::json::parse(in, nullptr, false);
    if (j.is_discarded() || !j.contains("completed_phase") || !j.contains("weights_fnv64"))
        throw TrainError("resume: malformed checkpoint state at " + path + ".state");
    int phase = j["completed_phase"].get<int>();
    std::uint64_t want = j["weights_fnv64"].get<std::uint64_t>();
    std::uint64_t got = fnv1a64(file_bytes(path));
    if (want != got)
        throw TrainError("resume: checkpoint corrupted after phase " + std::to_string(phase));
    return phase;
}

inline void append_run_log(const std::string& path, const nlohmann::json& j) {
    if (path.empty()) return;
    std::ofstream out(path, std::ios::app);
    out << j.dump() << "\n";
}

}  // namespace detail

// Sequentially trains over `n_phases` chunks, persisting weights after every
// phase and evaluating each phase on its own test chunk. Returns the final
// state and the reports of the phases this call executed.
inline std::pair<ModelState, std::vector<PhaseReport>> incremental_train(int n_phases, const ChunkProvider& provider,
                                                                         const IncrementalOptions& opt) {
    if (n_phases < 1) throw TrainError("incremental_train: need at least one phase");
    if (opt.checkpoint_path.empty()) throw TrainError("incremental_train: checkpoint path required");

    int first_phase = 1;
    int cumulative_participants = 0;
    if (opt.resume) {
        first_phase = detail::load_checkpoint_phase(opt.checkpoint_path) + 1;
        if (first_phase > n_phases) first_phase = n_phases + 1;  // everything done already
    }

    std::vector<PhaseReport> reports;
    ModelState state;
    bool have_state = false;

    for (int phase = 1; phase <= n_phases; ++phase) {
        // Accounting for phases completed before a resume.
        PhaseData data = provider(phase);
        if (phase < first_phase) {
            cumulative_participants += data.n_train_participants;
            continue;
        }

        // Algorithm-1 shape: a fresh model per session; sessions after the
        // first load the persisted weights rather than reusing memory.
        std::optional<ModelState> prior;
        if (phase > 1) prior = load_model(opt.checkpoint_path);

        TrainLog log;
        std::uint64_t session_seed = derive_seed(opt.seed, "phase", static_cast<std::uint64_t>(phase));
        state = train_session(prior, data.train, opt.kind, opt.hyper, session_seed, &log);
        have_state = true;
        detail::save_checkpoint(opt.checkpoint_path, state, phase);

        cumulative_participants += data.n_train_participants;
        PhaseReport rep;
        rep.phase = phase;
        rep.cumulative_train_participants = cumulative_participants;
        rep.test_participants = data.n_test_participants;
        rep.final_epoch_loss = log.epoch_loss.empty() ? 0.0 : log.epoch_loss.back();
        rep.metrics = evaluate_model(state, data.test);
        reports.push_back(rep);

        nlohmann::json j;
        j["phase"] = rep.phase;
        j["cumulative_train_participants"] = rep.cumulative_train_participants;
        j["test_participants"] = rep.test_participants;
        j["accuracy"] = rep.metrics.accuracy;
        j["macro_precision"] = rep.metrics.macro_precision;
        j["macro_recall"] = rep.metrics.macro_recall;
        j["macro_f1"] = rep.metrics.macro_f1;
        j["epoch_loss"] = log.epoch_loss;
        detail::append_run_log(opt.run_log_path, j);
        if (opt.progress) {
            std::ostringstream msg;
            msg << "phase " << phase << "/" << n_phases << " train_participants=" << rep.cumulative_train_participants
                << " loss=" << rep.final_epoch_loss << " test_f1=" << rep.metrics.macro_f1;
            opt.progress(msg.str());
        }

        if (opt.stop_after_phase > 0 && phase == opt.stop_after_phase) return {state, reports};
    }

    if (!have_state) state = load_model(opt.checkpoint_path);
    return {state, reports};
}

// Continues training a fully trained model on one target chunk only. The
// input state is not modified; the adapted copy is returned.
inline ModelState personalize(const ModelState& state, const WindowSet& target_train, const Hyper& hyper,
                              std::uint64_t seed = 0) {
    if (target_train.empty()) throw TrainError("personalize: target chunk is empty");
    return train_session(state, target_train,
                         std::holds_alternative<LstmArch>(state.arch) ? ModelKind::lstm : ModelKind::cnn, hyper,
                         derive_seed(seed, "personalize"));
}

}  // namespace sparsecast
