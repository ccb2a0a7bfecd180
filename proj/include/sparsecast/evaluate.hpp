// Confusion counts, accuracy, and macro-averaged precision/recall/F-1.
#pragma once

#include <cstdint>
#include <vector>

#include "sparsecast/common.hpp"
#include "sparsecast/neural.hpp"
#include "sparsecast/windows.hpp"

namespace sparsecast {

struct Confusion {
    std::int64_t tp = 0, fp = 0, fn = 0, tn = 0;

    std::int64_t total() const { return tp + fp + fn + tn; }
};

inline Confusion confusion(const std::vector<std::uint8_t>& predictions, const std::vector<std::uint8_t>& labels) {
    if (predictions.size() != labels.size() || predictions.empty())
        throw DataError("confusion: predictions and labels must be equal-length and non-empty");
    Confusion c;
    for (std::size_t i = 0; i < predictions.size(); ++i) {
        bool p = predictions[i] != 0, y = labels[i] != 0;
        if (p && y) ++c.tp;
        else if (p && !y) ++c.fp;
        else if (!p && y) ++c.fn;
        else ++c.tn;
    }
    return c;
}

struct Metrics {
    double accuracy = 0.0;
    double macro_precision = 0.0;
    double macro_recall = 0.0;
    double macro_f1 = 0.0;
};

// Per-class statistics for both classes, unweighted-averaged. A 0/0
// denominator contributes 0 for that class's statistic.
inline Metrics macro_metrics(const Confusion& c) {
    if (c.total() <= 0) throw DataError("macro_metrics: empty confusion");
    auto safe_div = [](double num, double den) { return den > 0.0 ? num / den : 0.0; };
    auto f1 = [](double p, double r) { return (p + r) > 0.0 ? 2.0 * p * r / (p + r) : 0.0; };

    double p1 = safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fp));
    double r1 = safe_div(static_cast<double>(c.tp), static_cast<double>(c.tp + c.fn));
    double p0 = safe_div(static_cast<double>(c.tn), static_cast<double>(c.tn + c.fn));
    double r0 = safe_div(static_cast<double>(c.tn), static_cast<double>(c.tn + c.fp));

    Metrics m;
    m.accuracy = static_cast<double>(c.tp + c.tn) / static_cast<double>(c.total());
    m.macro_precision = 0.5 * (p1 + p0);
    m.macro_recall = 0.5 * (r1 + r0);
    m.macro_f1 = 0.5 * (f1(p1, r1) + f1(p0, r0));
    return m;
}

// Model probabilities over a window set, evaluated in fixed-size batches.
inline std::vector<double> predict_probs(const ModelState& state, const WindowSet& ws, int batch_size = 256) {
    std::vector<double> probs;
    probs.reserve(ws.size());
    std::vector<std::size_t> idx;
    for (std::size_t start = 0; start < ws.size(); start += static_cast<std::size_t>(batch_size)) {
        idx.clear();
        for (std::size_t i = start; i < std::min(ws.size(), start + static_cast<std::size_t>(batch_size)); ++i)
            idx.push_back(i);
        VectorXd p = model_forward(state, make_batch(ws, idx));
        for (Eigen::Index i = 0; i < p.size(); ++i) probs.push_back(p[i]);
    }
    return probs;
}

inline std::vector<std::uint8_t> threshold_probs(const std::vector<double>& probs, double threshold = 0.5) {
    std::vector<std::uint8_t> out(probs.size());
    for (std::size_t i = 0; i < probs.size(); ++i) out[i] = probs[i] >= threshold ? 1 : 0;
    return out;
}

inline Metrics evaluate_model(const ModelState& state, const WindowSet& ws) {
    if (ws.empty()) throw DataError("evaluate_model: empty window set");
    auto preds = threshold_probs(predict_probs(state, ws));
    return macro_metrics(confusion(preds, ws.labels()));
}

namespace detail {

// Regularized incomplete beta I_x(a, b) via the Lentz continued fraction.
inline double betacf(double a, double b, double x) {
    constexpr int kMaxIter = 200;
    constexpr double kEps = 3e-14, kFpMin = 1e-300;
    double qab = a + b, qap = a + 1.0, qam = a - 1.0;
    double c = 1.0, d = 1.0 - qab * x / qap;
    if (std::abs(d) < kFpMin) d = kFpMin;
    d = 1.0 / d;
    double h = d;
    for (int m = 1; m <= kMaxIter; ++m) {
        int m2 = 2 * m;
        double aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        h *= d * c;
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if (std::abs(d) < kFpMin) d = kFpMin;
        c = 1.0 + aa / c;
        if (std::abs(c) < kFpMin) c = kFpMin;
        d = 1.0 / d;
        double del = d * c;
        h *= del;
        if (std::abs(del - 1.0) < kEps) break;
    }
    return h;
}

inline double ibeta(double a, double b, double x) {
    if (x <= 0.0) return 0.0;
    if (x >= 1.0) return 1.0;
    double ln_front = std::lgamma(a + b) - std::lgamma(a) - std::lgamma(b) + a * std::log(x) + b * std::log(1.0 - x);
    double front = std::exp(ln_front);
    if (x < (a + 1.0) / (a + b + 2.0)) return front * betacf(a, b, x) / a;
    return 1.0 - front * betacf(b, a, 1.0 - x) / b;
}

}  // namespace detail

// Two-sided paired t-test. Returns the p-value for the hypothesis that the
// mean of `diffs` is zero. Used to report the effect of the K block on F-1.
inline double paired_t_test_p(const std::vector<double>& diffs) {
    const std::size_t n = diffs.size();
    if (n < 2) throw DataError("paired_t_test_p: need at least 2 paired differences");
    double mean = 0.0;
    for (double d : diffs) mean += d;
    mean /= static_cast<double>(n);
    double ss = 0.0;
    for (double d : diffs) ss += (d - mean) * (d - mean);
    double sd = std::sqrt(ss / static_cast<double>(n - 1));
    if (sd == 0.0) return mean == 0.0 ? 1.0 : 0.0;
    double t = mean / (sd / std::sqrt(static_cast<double>(n)));
    double df = static_cast<double>(n - 1);
    return detail::ibeta(df / 2.0, 0.5, df / (df + t * t));
}

}  // namespace sparsecast
