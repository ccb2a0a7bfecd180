// Single-layer LSTM with a sigmoid dense head, batched over windows.
//
// Flat parameter layout:
//   Wx (4h x F, row-major, gates stacked [input; forget; candidate; output])
//   Wh (4h x h, row-major)
//   b  (4h)
//   w_head (h), b_head (1)
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sparsecast/model.hpp"

namespace sparsecast {

namespace detail {

inline MatrixXd sigmoid_m(const MatrixXd& x) {
    return x.unaryExpr([](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
}

struct LstmParamView {
    Eigen::Map<const RowMajorMatrixXd> Wx, Wh;
    Eigen::Map<const VectorXd> b, w_head;
    double b_head;

    LstmParamView(const VectorXd& p, const LstmArch& a)
        : Wx(p.data(), 4 * a.hidden_dim, a.input_dim),
          Wh(p.data() + 4 * a.hidden_dim * a.input_dim, 4 * a.hidden_dim, a.hidden_dim),
          b(p.data() + 4 * a.hidden_dim * (a.input_dim + a.hidden_dim), 4 * a.hidden_dim),
          w_head(p.data() + 4 * a.hidden_dim * (a.input_dim + a.hidden_dim) + 4 * a.hidden_dim, a.hidden_dim),
          b_head(p[p.size() - 1]) {}
};

struct LstmGradView {
    Eigen::Map<RowMajorMatrixXd> Wx, Wh;
    Eigen::Map<VectorXd> b, w_head;
    double* b_head;

    LstmGradView(VectorXd& g, const LstmArch& a)
        : Wx(g.data(), 4 * a.hidden_dim, a.input_dim),
          Wh(g.data() + 4 * a.hidden_dim * a.input_dim, 4 * a.hidden_dim, a.hidden_dim),
          b(g.data() + 4 * a.hidden_dim * (a.input_dim + a.hidden_dim), 4 * a.hidden_dim),
          w_head(g.data() + 4 * a.hidden_dim * (a.input_dim + a.hidden_dim) + 4 * a.hidden_dim, a.hidden_dim),
          b_head(&g[g.size() - 1]) {}
};

}  // namespace detail

// Per-step activations kept for backprop through time.
struct LstmCache {
    int steps = 0;
    const MatrixXd* input = nullptr;  // B x (W*F), column-major; owned by the caller
    std::vector<MatrixXd> gate_i, gate_f, gate_g, gate_o, cell, tanh_cell, hidden;
    VectorXd probs;
};

// Runs the recurrence over all time steps of the batch. `batch` holds one
// window per row, laid out step-major (column t*F+c is step t, feature c).
inline VectorXd lstm_forward(const ModelState& state, const MatrixXd& batch, LstmCache* cache = nullptr) {
    const auto& a = std::get<LstmArch>(state.arch);
    const int F = a.input_dim, h = a.hidden_dim;
    if (batch.cols() % F != 0) throw TrainError("lstm_forward: batch width is not a multiple of the feature dim");
    const int W = static_cast<int>(batch.cols() / F);
    const int B = static_cast<int>(batch.rows());
    detail::LstmParamView p(state.params, a);

    MatrixXd H = MatrixXd::Zero(B, h), C = MatrixXd::Zero(B, h);
    if (cache) {
        cache->steps = W;
        cache->input = &batch;
        auto prep = [&](std::vector<MatrixXd>& v) { v.assign(static_cast<std::size_t>(W), MatrixXd()); };
        prep(cache->gate_i);
        prep(cache->gate_f);
        prep(cache->gate_g);
        prep(cache->gate_o);
        prep(cache->cell);
        prep(cache->tanh_cell);
        prep(cache->hidden);
    }

    for (int t = 0; t < W; ++t) {
        MatrixXd G = batch.middleCols(static_cast<Eigen::Index>(t) * F, F) * p.Wx.transpose() + H * p.Wh.transpose();
        G.rowwise() += p.b.transpose();
        MatrixXd gi = detail::sigmoid_m(G.leftCols(h));
        MatrixXd gf = detail::sigmoid_m(G.middleCols(h, h));
        MatrixXd gg = G.middleCols(2 * h, h).array().tanh().matrix();
        MatrixXd go = detail::sigmoid_m(G.rightCols(h));
        C = gf.cwiseProduct(C) + gi.cwiseProduct(gg);
        MatrixXd tc = C.array().tanh().matrix();
        H = go.cwiseProduct(tc);
        if (cache) {
            auto ti = static_cast<std::size_t>(t);
            cache->gate_i[ti] = std::move(gi);
            cache->gate_f[ti] = std::move(gf);
            cache->gate_g[ti] = std::move(gg);
            cache->gate_o[ti] = std::move(go);
            cache->cell[ti] = C;
            cache->tanh_cell[ti] = std::move(tc);
            cache->hidden[ti] = H;
        }
    }

    VectorXd logits = H * p.w_head;
    logits.array() += p.b_head;
    VectorXd probs = logits.unaryExpr(
        [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
    if (cache) cache->probs = probs;
    return probs;
}

// Exact gradients of the loss w.r.t. every parameter, via backprop through
// time. `dprobs` is dLoss/dprob per batch row (as produced by bce_loss).
inline VectorXd lstm_backward(const ModelState& state, const LstmCache& cache, const VectorXd& dprobs) {
    const auto& a = std::get<LstmArch>(state.arch);
    const int F = a.input_dim, h = a.hidden_dim;
    if (cache.input == nullptr || cache.steps == 0) throw TrainError("lstm_backward: cache not populated");
    const MatrixXd& batch = *cache.input;
    const int W = cache.steps;
    const int B = static_cast<int>(batch.rows());
    if (dprobs.size() != B) throw TrainError("lstm_backward: dprobs size mismatch");
    detail::LstmParamView p(state.params, a);

    VectorXd grad = VectorXd::Zero(state.params.size());
    detail::LstmGradView g(grad, a);

    // Through the sigmoid head.
    VectorXd dlogit = dprobs.cwiseProduct(cache.probs.cwiseProduct((1.0 - cache.probs.array()).matrix()));
    const MatrixXd& H_last = cache.hidden[static_cast<std::size_t>(W - 1)];
    g.w_head = H_last.transpose() * dlogit;
    *g.b_head = dlogit.sum();

    MatrixXd dH = dlogit * p.w_head.transpose();  // B x h
    MatrixXd dC = MatrixXd::Zero(B, h);

    for (int t = W - 1; t >= 0; --t) {
        auto ti = static_cast<std::size_t>(t);
        const MatrixXd& gi = cache.gate_i[ti];
        const MatrixXd& gf = cache.gate_f[ti];
        const MatrixXd& gg = cache.gate_g[ti];
        const MatrixXd& go = cache.gate_o[ti];
        const MatrixXd& tc = cache.tanh_cell[ti];

        MatrixXd dgo = dH.cwiseProduct(tc);
        dC += dH.cwiseProduct(go).cwiseProduct((1.0 - tc.array().square()).matrix());

        MatrixXd c_prev = t > 0 ? cache.cell[ti - 1] : MatrixXd::Zero(B, h);
        MatrixXd dgi = dC.cwiseProduct(gg);
        MatrixXd dgg = dC.cwiseProduct(gi);
        MatrixXd dgf = dC.cwiseProduct(c_prev);
        MatrixXd dC_prev = dC.cwiseProduct(gf);

        MatrixXd dG(B, 4 * h);
        dG.leftCols(h) = dgi.cwiseProduct(gi).cwiseProduct((1.0 - gi.array()).matrix());
        dG.middleCols(h, h) = dgf.cwiseProduct(gf).cwiseProduct((1.0 - gf.array()).matrix());
        dG.middleCols(2 * h, h) = dgg.cwiseProduct((1.0 - gg.array().square()).matrix());
        dG.rightCols(h) = dgo.cwiseProduct(go).cwiseProduct((1.0 - go.array()).matrix());

        g.Wx += dG.transpose() * batch.middleCols(static_cast<Eigen::Index>(t) * F, F);
        MatrixXd h_prev = t > 0 ? cache.hidden[ti - 1] : MatrixXd::Zero(B, h);
        g.Wh += dG.transpose() * h_prev;
        g.b += dG.colwise().sum().transpose();

        dH = dG * p.Wh;
        dC = dC_prev;
    }
    return grad;
}

}  // namespace sparsecast
