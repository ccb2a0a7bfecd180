// ADASYN oversampling over flattened window vectors.
#pragma once

#include <algorithm>
#include <cmath>
#include <vector>

#include "sparsecast/common.hpp"
#include "sparsecast/rng.hpp"
#include "sparsecast/windows.hpp"

namespace sparsecast {

struct AdasynConfig {
    int k = 5;
    double beta = 1.0;  // target balance ratio in (0, 1]
    std::uint64_t seed = 0;

    void validate() const {
        if (k < 1) throw ConfigError("adasyn.k must be >= 1");
        if (beta <= 0.0 || beta > 1.0) throw ConfigError("adasyn.beta must be in (0,1]");
    }
};

// Indices of the k nearest `points` to `query` by Euclidean distance,
// nearest first; ties broken by lower index.
inline std::vector<std::size_t> knn(std::span<const double> query, const std::vector<std::span<const double>>& points,
                                    int k) {
    if (k < 1 || static_cast<std::size_t>(k) > points.size())
        throw ConfigError("knn: k must satisfy 1 <= k <= |points|");
    std::vector<std::pair<double, std::size_t>> dist(points.size());
    for (std::size_t i = 0; i < points.size(); ++i) {
        double d2 = 0.0;
        const auto& p = points[i];
        for (std::size_t j = 0; j < query.size(); ++j) {
            double diff = query[j] - p[j];
            d2 += diff * diff;
        }
        dist[i] = {d2, i};
    }
    std::partial_sort(dist.begin(), dist.begin() + k, dist.end());
    std::vector<std::size_t> out(static_cast<std::size_t>(k));
    for (int i = 0; i < k; ++i) out[static_cast<std::size_t>(i)] = dist[static_cast<std::size_t>(i)].second;
    return out;
}

namespace detail {

// Largest-remainder apportionment of `total` across `weights`; ties go to
// the lower index. Returns counts summing exactly to `total`.
inline std::vector<std::size_t> apportion(const std::vector<double>& weights, std::size_t total) {
    double wsum = 0.0;
    for (double w : weights) wsum += w;
    std::vector<std::size_t> counts(weights.size(), 0);
    if (total == 0) return counts;

    std::vector<double> share(weights.size());
    if (wsum <= 0.0) {
        // Degenerate: no majority neighbors anywhere. Fall back to uniform.
        for (auto& s : share) s = static_cast<double>(total) / static_cast<double>(weights.size());
    } else {
        for (std::size_t i = 0; i < weights.size(); ++i) share[i] = weights[i] / wsum * static_cast<double>(total);
    }
    std::size_t assigned = 0;
    std::vector<std::pair<double, std::size_t>> rema(weights.size());
    for (std::size_t i = 0; i < weights.size(); ++i) {
        counts[i] = static_cast<std::size_t>(std::floor(share[i]));
        assigned += counts[i];
        rema[i] = {-(share[i] - std::floor(share[i])), i};  // negated for ascending sort
    }
    std::sort(rema.begin(), rema.end());
    for (std::size_t i = 0; assigned < total && i < rema.size(); ++i, ++assigned) ++counts[rema[i].second];
    return counts;
}

}  // namespace detail

// Balances a two-class window set by generating G = (m_maj - m_min) * beta
// synthetic minority windows. Each minority point receives synthetics in
// proportion to its majority-neighbor ratio r_i among its k nearest
// neighbors; a synthetic sample interpolates between the point and one of
// its k nearest minority neighbors at a uniform random coordinate.
// Original windows are returned unmodified, followed by the synthetics.
inline WindowSet adasyn(const WindowSet& windows, const AdasynConfig& cfg) {
    cfg.validate();
    std::vector<std::size_t> minority, majority;
    for (std::size_t i = 0; i < windows.size(); ++i) (windows.label(i) ? minority : majority).push_back(i);
    bool positive_minority = minority.size() <= majority.size();
    if (!positive_minority) std::swap(minority, majority);

    if (minority.empty() || majority.empty())
        throw DataError("adasyn: both classes must be present in the input");
    if (minority.size() < static_cast<std::size_t>(cfg.k) + 1)
        throw DataError("adasyn: minority class has " + std::to_string(minority.size()) +
                        " samples but k+1 = " + std::to_string(cfg.k + 1) + " are needed; use a smaller k");

    const std::size_t G = static_cast<std::size_t>(
        std::llround(static_cast<double>(majority.size() - minority.size()) * cfg.beta));

    WindowSet out = windows;
    if (G == 0) return out;

    std::vector<std::span<const double>> all(windows.size());
    for (std::size_t i = 0; i < windows.size(); ++i) all[i] = windows.window(i);
    std::vector<std::span<const double>> minority_pts(minority.size());
    for (std::size_t i = 0; i < minority.size(); ++i) minority_pts[i] = windows.window(minority[i]);

    // r_i: fraction of majority samples among the k nearest neighbors of x_i
    // in the full set (self excluded).
    std::vector<double> r(minority.size(), 0.0);
    std::vector<std::vector<std::size_t>> min_neighbors(minority.size());
    for (std::size_t mi = 0; mi < minority.size(); ++mi) {
        auto nn = knn(all[minority[mi]], all, cfg.k + 1);
        int majority_hits = 0, counted = 0;
        for (std::size_t idx : nn) {
            if (idx == minority[mi]) continue;  // self
            if (counted == cfg.k) break;
            ++counted;
            if (windows.label(idx) != windows.label(minority[mi])) ++majority_hits;
        }
        r[mi] = static_cast<double>(majority_hits) / static_cast<double>(cfg.k);

        auto mn = knn(all[minority[mi]], minority_pts, cfg.k + 1);
        for (std::size_t j : mn) {
            if (minority[j] == minority[mi]) continue;
            if (min_neighbors[mi].size() == static_cast<std::size_t>(cfg.k)) break;
            min_neighbors[mi].push_back(minority[j]);
        }
    }

    auto counts = detail::apportion(r, G);

    std::vector<double> buf(static_cast<std::size_t>(windows.window_len()) * windows.n_cols());
    for (std::size_t mi = 0; mi < minority.size(); ++mi) {
        auto xi = windows.window(minority[mi]);
        for (std::size_t j = 0; j < counts[mi]; ++j) {
            // Stream indexed by generation coordinates (i, j): the output is
            // identical no matter how minority points are scheduled.
            Rng rng(derive_seed(cfg.seed, "adasyn-synth", mi * 0x10001ull + j));
            std::size_t zi = min_neighbors[mi][rng.uniform_index(min_neighbors[mi].size())];
            auto xz = windows.window(zi);
            double lambda = rng.uniform01();
            for (std::size_t c = 0; c < buf.size(); ++c) buf[c] = xi[c] + lambda * (xz[c] - xi[c]);
            out.push_window(buf, positive_minority, windows.start_ts(minority[mi]),
                            windows.participant(minority[mi]), kWindowFlagSynthetic);
        }
    }
    return out;
}

}  // namespace sparsecast
