// Convolutional forecaster with an input skip connection.
//
// Pipeline per window (valid padding throughout):
//   conv (kernel_h x 1, stride_h x 1, `filters` maps, relu)
//   pointwise 1x1 conv x pointwise_layers (relu)
//   flatten -> dense(1, relu)
//   skip: flatten(input) -> dense(1)
//   add -> sigmoid
//
// Flat parameter layout:
//   conv w (filters x kernel_h, row-major), conv b (filters)
//   per pointwise layer: W (filters x filters, row-major), b (filters)
//   dense w (conv_rows * F * filters), dense b (1)
//   skip w (window_len * F), skip b (1)
//
// Activations use the (row, feature, channel) order when flattened, so the
// dense weight at index (o*F + f)*filters + k multiplies map k at (o, f).
#pragma once

#include <Eigen/Dense>
#include <vector>

#include "sparsecast/model.hpp"

namespace sparsecast {

namespace detail {

struct CnnOffsets {
    std::int64_t conv_w = 0, conv_b = 0;
    std::vector<std::int64_t> pw_w, pw_b;
    std::int64_t dense_w = 0, dense_b = 0, skip_w = 0, skip_b = 0;
    std::int64_t dense_in = 0, skip_in = 0;

    explicit CnnOffsets(const CnnArch& a) {
        std::int64_t off = 0;
        conv_w = off;
        off += static_cast<std::int64_t>(a.filters) * a.kernel_h;
        conv_b = off;
        off += a.filters;
        for (int l = 0; l < a.pointwise_layers; ++l) {
            pw_w.push_back(off);
            off += static_cast<std::int64_t>(a.filters) * a.filters;
            pw_b.push_back(off);
            off += a.filters;
        }
        dense_in = static_cast<std::int64_t>(a.conv_rows()) * a.input_dim * a.filters;
        dense_w = off;
        off += dense_in;
        dense_b = off;
        off += 1;
        skip_in = static_cast<std::int64_t>(a.window_len) * a.input_dim;
        skip_w = off;
        off += skip_in;
        skip_b = off;
        off += 1;
    }
};

}  // namespace detail

struct CnnCache {
    const MatrixXd* input = nullptr;  // B x (W*F)
    // Activations after relu, one matrix per layer: B x (T1*F*filters),
    // column index (o*F + f)*filters + k.
    std::vector<MatrixXd> acts;
    VectorXd dense_pre;  // pre-relu dense output, B
    VectorXd probs;
};

inline VectorXd cnn_forward(const ModelState& state, const MatrixXd& batch, CnnCache* cache = nullptr) {
    const auto& a = std::get<CnnArch>(state.arch);
    const int F = a.input_dim, T1 = a.conv_rows(), nf = a.filters;
    if (batch.cols() != static_cast<Eigen::Index>(a.window_len) * F)
        throw TrainError("cnn_forward: batch width does not match window_len * input_dim");
    const int B = static_cast<int>(batch.rows());
    detail::CnnOffsets off(a);
    const VectorXd& P = state.params;

    // Strided convolution over rows, weights shared across features.
    MatrixXd act = MatrixXd::Zero(B, static_cast<Eigen::Index>(T1) * F * nf);
    for (int o = 0; o < T1; ++o) {
        for (int k = 0; k < nf; ++k) {
            MatrixXd sum = MatrixXd::Zero(B, F);
            for (int j = 0; j < a.kernel_h; ++j) {
                double w = P[off.conv_w + static_cast<std::int64_t>(k) * a.kernel_h + j];
                sum += w * batch.middleCols(static_cast<Eigen::Index>(o * a.stride_h + j) * F, F);
            }
            sum.array() += P[off.conv_b + k];
            // Scatter into (o, f, k) layout.
            for (int f = 0; f < F; ++f)
                act.col((static_cast<Eigen::Index>(o) * F + f) * nf + k) = sum.col(f).cwiseMax(0.0);
        }
    }

    if (cache) {
        cache->input = &batch;
        cache->acts.clear();
        cache->acts.push_back(act);
    }

    // Pointwise channel-mixing layers: reshape as (B*T1*F) x nf row blocks.
    for (int l = 0; l < a.pointwise_layers; ++l) {
        Eigen::Map<const RowMajorMatrixXd> Wl(P.data() + off.pw_w[static_cast<std::size_t>(l)], nf, nf);
        Eigen::Map<const VectorXd> bl(P.data() + off.pw_b[static_cast<std::size_t>(l)], nf);
        MatrixXd next(B, act.cols());
        const Eigen::Index cells = static_cast<Eigen::Index>(T1) * F;
        for (Eigen::Index cell = 0; cell < cells; ++cell) {
            // (B x nf) block for this (o, f) position.
            MatrixXd z = act.middleCols(cell * nf, nf) * Wl.transpose();
            z.rowwise() += bl.transpose();
            next.middleCols(cell * nf, nf) = z.cwiseMax(0.0);
        }
        act = std::move(next);
        if (cache) cache->acts.push_back(act);
    }

    Eigen::Map<const VectorXd> wd(P.data() + off.dense_w, off.dense_in);
    VectorXd dense_pre = act * wd;
    dense_pre.array() += P[off.dense_b];
    VectorXd dense_out = dense_pre.cwiseMax(0.0);

    Eigen::Map<const VectorXd> ws(P.data() + off.skip_w, off.skip_in);
    VectorXd skip = batch * ws;
    skip.array() += P[off.skip_b];

    VectorXd logits = dense_out + skip;
    VectorXd probs = logits.unaryExpr(
        [](double v) { return v >= 0 ? 1.0 / (1.0 + std::exp(-v)) : std::exp(v) / (1.0 + std::exp(v)); });
    if (cache) {
        cache->dense_pre = std::move(dense_pre);
        cache->probs = probs;
    }
    return probs;
}

inline VectorXd cnn_backward(const ModelState& state, const CnnCache& cache, const VectorXd& dprobs) {
    const auto& a = std::get<CnnArch>(state.arch);
    const int F = a.input_dim, T1 = a.conv_rows(), nf = a.filters;
    if (cache.input == nullptr) throw TrainError("cnn_backward: cache not populated");
    const MatrixXd& batch = *cache.input;
    const int B = static_cast<int>(batch.rows());
    if (dprobs.size() != B) throw TrainError("cnn_backward: dprobs size mismatch");
    detail::CnnOffsets off(a);
    const VectorXd& P = state.params;

    VectorXd grad = VectorXd::Zero(state.params.size());

    VectorXd dlogit = dprobs.cwiseProduct(cache.probs.cwiseProduct((1.0 - cache.probs.array()).matrix()));

    // Skip path.
    grad.segment(off.skip_w, off.skip_in) = batch.transpose() * dlogit;
    grad[off.skip_b] = dlogit.sum();

    // Dense path through its relu.
    VectorXd ddense = dlogit.cwiseProduct(
        cache.dense_pre.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    const MatrixXd& top = cache.acts.back();
    grad.segment(off.dense_w, off.dense_in) = top.transpose() * ddense;
    grad[off.dense_b] = ddense.sum();

    Eigen::Map<const VectorXd> wd(P.data() + off.dense_w, off.dense_in);
    MatrixXd dact = ddense * wd.transpose();  // B x (T1*F*nf)

    // Pointwise layers in reverse.
    for (int l = a.pointwise_layers - 1; l >= 0; --l) {
        const MatrixXd& out_act = cache.acts[static_cast<std::size_t>(l) + 1];
        const MatrixXd& in_act = cache.acts[static_cast<std::size_t>(l)];
        dact = dact.cwiseProduct(out_act.unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));

        Eigen::Map<const RowMajorMatrixXd> Wl(P.data() + off.pw_w[static_cast<std::size_t>(l)], nf, nf);
        Eigen::Map<RowMajorMatrixXd> gW(grad.data() + off.pw_w[static_cast<std::size_t>(l)], nf, nf);
        Eigen::Map<VectorXd> gb(grad.data() + off.pw_b[static_cast<std::size_t>(l)], nf);

        MatrixXd dprev(B, dact.cols());
        const Eigen::Index cells = static_cast<Eigen::Index>(T1) * F;
        for (Eigen::Index cell = 0; cell < cells; ++cell) {
            auto dz = dact.middleCols(cell * nf, nf);   // B x nf
            auto x = in_act.middleCols(cell * nf, nf);  // B x nf
            gW += dz.transpose() * x;
            gb += dz.colwise().sum().transpose();
            dprev.middleCols(cell * nf, nf) = dz * Wl;
        }
        dact = std::move(dprev);
    }

    // Through the first convolution's relu.
    dact = dact.cwiseProduct(cache.acts.front().unaryExpr([](double v) { return v > 0.0 ? 1.0 : 0.0; }));
    for (int o = 0; o < T1; ++o) {
        for (int k = 0; k < nf; ++k) {
            // Gather dsum (B x F) for this (o, k) from the (o, f, k) layout.
            MatrixXd dsum(B, F);
            for (int f = 0; f < F; ++f)
                dsum.col(f) = dact.col((static_cast<Eigen::Index>(o) * F + f) * nf + k);
            for (int j = 0; j < a.kernel_h; ++j) {
                auto xin = batch.middleCols(static_cast<Eigen::Index>(o * a.stride_h + j) * F, F);
                grad[off.conv_w + static_cast<std::int64_t>(k) * a.kernel_h + j] += dsum.cwiseProduct(xin).sum();
            }
            grad[off.conv_b + k] += dsum.sum();
        }
    }
    return grad;
}

}  // namespace sparsecast
