// Facade over the two architectures plus gradient checking.
#pragma once

#include "sparsecast/cnn.hpp"
#include "sparsecast/lstm.hpp"
#include "sparsecast/model.hpp"
#include "sparsecast/rng.hpp"
#include "sparsecast/windows.hpp"

namespace sparsecast {

inline VectorXd model_forward(const ModelState& state, const MatrixXd& batch) {
    if (std::holds_alternative<LstmArch>(state.arch)) return lstm_forward(state, batch);
    return cnn_forward(state, batch);
}

// Loss on a batch and the gradient w.r.t. every parameter.
struct LossAndGrad {
    double loss = 0.0;
    VectorXd grad;
};

inline LossAndGrad model_loss_grad(const ModelState& state, const MatrixXd& batch, const VectorXd& labels) {
    LossAndGrad out;
    if (std::holds_alternative<LstmArch>(state.arch)) {
        LstmCache cache;
        VectorXd probs = lstm_forward(state, batch, &cache);
        BceResult bce = bce_loss(probs, labels);
        out.loss = bce.loss;
        out.grad = lstm_backward(state, cache, bce.dprobs);
    } else {
        CnnCache cache;
        VectorXd probs = cnn_forward(state, batch, &cache);
        BceResult bce = bce_loss(probs, labels);
        out.loss = bce.loss;
        out.grad = cnn_backward(state, cache, bce.dprobs);
    }
    return out;
}

// Converts windows into a (B x W*F) double batch, one window per row,
// column t*F + c holding step t / feature c.
inline MatrixXd make_batch(const WindowSet& ws, std::span<const std::size_t> indices) {
    const std::size_t stride = static_cast<std::size_t>(ws.window_len()) * static_cast<std::size_t>(ws.n_cols());
    MatrixXd X(indices.size(), stride);
    for (std::size_t r = 0; r < indices.size(); ++r) {
        auto w = ws.window(indices[r]);
        for (std::size_t c = 0; c < stride; ++c) X(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = w[c];
    }
    return X;
}

inline VectorXd make_labels(const WindowSet& ws, std::span<const std::size_t> indices) {
    VectorXd y(indices.size());
    for (std::size_t r = 0; r < indices.size(); ++r) y[static_cast<Eigen::Index>(r)] = ws.label(indices[r]) ? 1.0 : 0.0;
    return y;
}

// ---------------------------------------------------------------------------
// Gradient checking
// ---------------------------------------------------------------------------

// Worst relative disagreement between two gradient vectors.
inline double max_relative_error(const VectorXd& analytic, const VectorXd& numeric) {
    double worst = 0.0;
    for (Eigen::Index i = 0; i < analytic.size(); ++i) {
        double denom = std::max(std::abs(analytic[i]) + std::abs(numeric[i]), 1e-8);
        worst = std::max(worst, std::abs(analytic[i] - numeric[i]) / denom);
    }
    return worst;
}

// Central finite differences of the batch loss over every parameter.
inline VectorXd numeric_gradient(const ModelState& state, const MatrixXd& batch, const VectorXd& labels,
                                 double eps = 1e-5) {
    VectorXd numeric(state.params.size());
    ModelState probe = state;
    for (Eigen::Index i = 0; i < state.params.size(); ++i) {
        double orig = probe.params[i];
        probe.params[i] = orig + eps;
        double up = bce_loss(model_forward(probe, batch), labels).loss;
        probe.params[i] = orig - eps;
        double down = bce_loss(model_forward(probe, batch), labels).loss;
        probe.params[i] = orig;
        numeric[i] = (up - down) / (2.0 * eps);
    }
    return numeric;
}

// Builds a small random batch for the architecture, runs analytic vs central
// finite-difference gradients, and returns the max relative error.
inline double grad_check(const Arch& arch, std::uint64_t seed, int batch_size = 2, int steps = 12) {
    int window_len = steps;
    if (std::holds_alternative<CnnArch>(arch)) window_len = std::get<CnnArch>(arch).window_len;
    const int F = arch_input_dim(arch);

    ModelState st = init_model(arch, seed);
    Rng rng(derive_seed(seed, "gradcheck-data"));
    MatrixXd batch(batch_size, window_len * F);
    for (Eigen::Index i = 0; i < batch.rows(); ++i)
        for (Eigen::Index j = 0; j < batch.cols(); ++j) batch(i, j) = rng.normal();
    VectorXd labels(batch_size);
    for (int i = 0; i < batch_size; ++i) labels[i] = rng.bernoulli(0.5) ? 1.0 : 0.0;

    LossAndGrad lg = model_loss_grad(st, batch, labels);
    VectorXd numeric = numeric_gradient(st, batch, labels);
    return max_relative_error(lg.grad, numeric);
}

}  // namespace sparsecast
