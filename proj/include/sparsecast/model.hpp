// Model state, architectures, loss, and optimizer shared by the LSTM and CNN
// kernels. Parameters live in one flat 64-bit vector; the weight file is a
// text header followed by raw little-endian doubles and round-trips bit-exact.
#pragma once

#include <Eigen/Dense>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <string>
#include <variant>
#include <vector>

#include "sparsecast/common.hpp"
#include "sparsecast/rng.hpp"

namespace sparsecast {

using Eigen::MatrixXd;
using Eigen::VectorXd;
using RowMajorMatrixXd = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

struct LstmArch {
    int input_dim = 0;
    int hidden_dim = 2;
};

struct CnnArch {
    int window_len = 1800;
    int input_dim = 0;
    int kernel_h = 60;
    int stride_h = 30;
    int filters = 10;
    int pointwise_layers = 5;

    // Output height of the strided convolution (valid padding).
    int conv_rows() const {
        if (window_len < kernel_h) throw ConfigError("cnn: window_len shorter than the convolution kernel");
        return (window_len - kernel_h) / stride_h + 1;
    }
};

using Arch = std::variant<LstmArch, CnnArch>;

inline std::int64_t param_count(const LstmArch& a) {
    const std::int64_t F = a.input_dim, h = a.hidden_dim;
    return 4 * (h * (F + h) + h) + (h + 1);
}

inline std::int64_t param_count(const CnnArch& a) {
    const std::int64_t F = a.input_dim, T1 = a.conv_rows(), nf = a.filters;
    std::int64_t n = nf * a.kernel_h + nf;                            // strided conv
    n += a.pointwise_layers * (nf * nf + nf);                         // 1x1 convs
    n += T1 * F * nf + 1;                                             // dense head
    n += static_cast<std::int64_t>(a.window_len) * F + 1;             // input skip
    return n;
}

inline std::int64_t param_count(const Arch& arch) {
    return std::visit([](const auto& a) { return param_count(a); }, arch);
}

inline int arch_input_dim(const Arch& arch) {
    return std::visit([](const auto& a) { return a.input_dim; }, arch);
}

struct Hyper {
    double learning_rate = 1e-3;
    int batch_size = 32;
    int epochs = 10;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double epsilon = 1e-8;

    void validate() const {
        if (batch_size < 1) throw ConfigError("hyper.batch_size must be >= 1");
        if (epochs < 0) throw ConfigError("hyper.epochs must be >= 0");
        if (learning_rate <= 0) throw ConfigError("hyper.learning_rate must be > 0");
    }
};

struct ModelState {
    Arch arch;
    VectorXd params;
    VectorXd adam_m;
    VectorXd adam_v;
    std::uint64_t step = 0;  // optimizer steps taken
    std::uint64_t seed = 0;  // seed used for initialization

    std::int64_t size() const { return params.size(); }
};

// ---------------------------------------------------------------------------
// Initialization
// ---------------------------------------------------------------------------

inline ModelState init_model(const Arch& arch, std::uint64_t seed) {
    ModelState st;
    st.arch = arch;
    st.seed = seed;
    const std::int64_t n = param_count(arch);
    st.params = VectorXd::Zero(n);
    st.adam_m = VectorXd::Zero(n);
    st.adam_v = VectorXd::Zero(n);
    Rng rng(derive_seed(seed, "init"));

    if (std::holds_alternative<LstmArch>(arch)) {
        const auto& a = std::get<LstmArch>(arch);
        const int F = a.input_dim, h = a.hidden_dim;
        double sx = 1.0 / std::sqrt(static_cast<double>(F));
        double sh = 1.0 / std::sqrt(static_cast<double>(h));
        std::int64_t off = 0;
        for (int i = 0; i < 4 * h * F; ++i) st.params[off++] = rng.uniform(-sx, sx);
        for (int i = 0; i < 4 * h * h; ++i) st.params[off++] = rng.uniform(-sh, sh);
        for (int i = 0; i < 4 * h; ++i) st.params[off++] = (i >= h && i < 2 * h) ? 1.0 : 0.0;  // forget bias 1
        for (int i = 0; i < h; ++i) st.params[off++] = rng.uniform(-sh, sh);
        st.params[off++] = 0.0;  // head bias
    } else {
        const auto& a = std::get<CnnArch>(arch);
        const int T1 = a.conv_rows();
        std::int64_t off = 0;
        double s1 = 1.0 / std::sqrt(static_cast<double>(a.kernel_h));
        for (int i = 0; i < a.filters * a.kernel_h; ++i) st.params[off++] = rng.uniform(-s1, s1);
        off += a.filters;  // biases zero
        double sp = 1.0 / std::sqrt(static_cast<double>(a.filters));
        for (int l = 0; l < a.pointwise_layers; ++l) {
            for (int i = 0; i < a.filters * a.filters; ++i) st.params[off++] = rng.uniform(-sp, sp);
            off += a.filters;
        }
        std::int64_t dense_in = static_cast<std::int64_t>(T1) * a.input_dim * a.filters;
        double sd = 1.0 / std::sqrt(static_cast<double>(dense_in));
        for (std::int64_t i = 0; i < dense_in; ++i) st.params[off++] = rng.uniform(-sd, sd);
        ++off;  // dense bias
        std::int64_t skip_in = static_cast<std::int64_t>(a.window_len) * a.input_dim;
        double ss = 1.0 / std::sqrt(static_cast<double>(skip_in));
        for (std::int64_t i = 0; i < skip_in; ++i) st.params[off++] = rng.uniform(-ss, ss);
        ++off;  // skip bias
    }
    return st;
}

// ---------------------------------------------------------------------------
// Loss
// ---------------------------------------------------------------------------

// Mean binary cross-entropy with probability clamping at 1e-7.
// Returns the scalar loss and dL/dp for each sample.
struct BceResult {
    double loss = 0.0;
    VectorXd dprobs;
};

inline BceResult bce_loss(const VectorXd& probs, const VectorXd& labels) {
    if (probs.size() != labels.size() || probs.size() == 0)
        throw TrainError("bce_loss: probs and labels must be equal-length and non-empty");
    constexpr double kClamp = 1e-7;
    const double n = static_cast<double>(probs.size());
    BceResult r;
    r.dprobs = VectorXd::Zero(probs.size());
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        double p = std::clamp(probs[i], kClamp, 1.0 - kClamp);
        double y = labels[i];
        r.loss += -(y * std::log(p) + (1.0 - y) * std::log(1.0 - p));
        r.dprobs[i] = (p - y) / (p * (1.0 - p)) / n;
    }
    r.loss /= n;
    return r;
}

// ---------------------------------------------------------------------------
// Optimizer
// ---------------------------------------------------------------------------

// Adaptive-moment update with bias correction; increments the step counter.
inline void adam_step(ModelState& state, const VectorXd& grads, const Hyper& hyper) {
    if (grads.size() != state.params.size()) throw TrainError("adam_step: gradient size mismatch");
    if (!grads.allFinite()) throw TrainError("adam_step: non-finite gradients");
    state.step += 1;
    const double t = static_cast<double>(state.step);
    state.adam_m = hyper.beta1 * state.adam_m + (1.0 - hyper.beta1) * grads;
    state.adam_v = hyper.beta2 * state.adam_v + (1.0 - hyper.beta2) * grads.cwiseProduct(grads);
    const double bc1 = 1.0 - std::pow(hyper.beta1, t);
    const double bc2 = 1.0 - std::pow(hyper.beta2, t);
    for (Eigen::Index i = 0; i < state.params.size(); ++i) {
        double mhat = state.adam_m[i] / bc1;
        double vhat = state.adam_v[i] / bc2;
        state.params[i] -= hyper.learning_rate * mhat / (std::sqrt(vhat) + hyper.epsilon);
    }
}

// ---------------------------------------------------------------------------
// Weight file
// ---------------------------------------------------------------------------

inline void save_model(const std::string& path, const ModelState& st) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw DataError("cannot open for writing: " + path);
    out << "sparsecast-weights v1\n";
    if (std::holds_alternative<LstmArch>(st.arch)) {
        const auto& a = std::get<LstmArch>(st.arch);
        out << "arch lstm\n";
        out << "input_dim " << a.input_dim << "\n";
        out << "hidden_dim " << a.hidden_dim << "\n";
    } else {
        const auto& a = std::get<CnnArch>(st.arch);
        out << "arch cnn\n";
        out << "input_dim " << a.input_dim << "\n";
        out << "window_len " << a.window_len << "\n";
        out << "kernel_h " << a.kernel_h << "\n";
        out << "stride_h " << a.stride_h << "\n";
        out << "filters " << a.filters << "\n";
        out << "pointwise_layers " << a.pointwise_layers << "\n";
    }
    out << "step " << st.step << "\n";
    out << "seed " << st.seed << "\n";
    out << "param_count " << st.params.size() << "\n";
    out << "payload\n";
    auto write_block = [&](const VectorXd& v) {
        out.write(reinterpret_cast<const char*>(v.data()), static_cast<std::streamsize>(v.size() * sizeof(double)));
    };
    write_block(st.params);
    write_block(st.adam_m);
    write_block(st.adam_v);
    if (!out) throw DataError("write failed: " + path);
}

inline ModelState load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw DataError("weight file not found: " + path);
    std::string line;
    if (!std::getline(in, line) || line != "sparsecast-weights v1")
        throw DataError("bad weight file header: " + path);

    std::string arch_kind;
    std::int64_t input_dim = -1, hidden_dim = 2, window_len = 1800, kernel_h = 60, stride_h = 30, filters = 10,
                 pointwise = 5, n_params = -1;
    std::uint64_t step = 0, seed = 0;
    bool saw_payload = false;
    while (std::getline(in, line)) {
        if (line == "payload") {
            saw_payload = true;
            break;
        }
        std::istringstream ls(line);
        std::string key;
        ls >> key;
        if (key == "arch") ls >> arch_kind;
        else if (key == "input_dim") ls >> input_dim;
        else if (key == "hidden_dim") ls >> hidden_dim;
        else if (key == "window_len") ls >> window_len;
        else if (key == "kernel_h") ls >> kernel_h;
        else if (key == "stride_h") ls >> stride_h;
        else if (key == "filters") ls >> filters;
        else if (key == "pointwise_layers") ls >> pointwise;
        else if (key == "step") ls >> step;
        else if (key == "seed") ls >> seed;
        else if (key == "param_count") ls >> n_params;
        else throw DataError("unknown weight header field '" + key + "' in " + path);
    }
    if (!saw_payload || input_dim < 0 || n_params < 0) throw DataError("truncated weight header: " + path);

    ModelState st;
    if (arch_kind == "lstm") {
        st.arch = LstmArch{static_cast<int>(input_dim), static_cast<int>(hidden_dim)};
    } else if (arch_kind == "cnn") {
        st.arch = CnnArch{static_cast<int>(window_len), static_cast<int>(input_dim), static_cast<int>(kernel_h),
                          static_cast<int>(stride_h), static_cast<int>(filters), static_cast<int>(pointwise)};
    } else {
        throw DataError("unknown arch kind '" + arch_kind + "' in " + path);
    }
    if (n_params != param_count(st.arch)) throw DataError("param_count mismatch in " + path);
    st.step = step;
    st.seed = seed;
    auto read_block = [&](VectorXd& v) {
        v.resize(n_params);
        in.read(reinterpret_cast<char*>(v.data()), static_cast<std::streamsize>(n_params * sizeof(double)));
    };
    read_block(st.params);
    read_block(st.adam_m);
    read_block(st.adam_v);
    if (!in) throw DataError("truncated weight payload: " + path);
    if (!st.params.allFinite()) throw DataError("non-finite parameters in " + path);
    return st;
}

}  // namespace sparsecast
