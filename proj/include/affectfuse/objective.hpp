#pragma once

// Concordance correlation coefficient (metric and loss) and Pearson correlation.

#include <cmath>
#include <functional>
#include <iostream>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "affectfuse/tensor.hpp"

namespace affectfuse {

enum class Moments { population, sample };

// Receives degenerate-input warnings; defaults to stderr.
inline std::function<void(std::string_view)>& warning_sink() {
    static std::function<void(std::string_view)> sink = [](std::string_view msg) {
        std::cerr << "warning: " << msg << '\n';
    };
    return sink;
}

inline void warn(std::string_view msg) {
    if (warning_sink()) warning_sink()(msg);
}

struct CccComponents {
    double mean_pred = 0.0;
    double mean_true = 0.0;
    double var_pred = 0.0;
    double var_true = 0.0;
    double cov = 0.0;
    double pearson = 0.0;  // 0 when either variance is 0
    double ccc = 0.0;
    bool degenerate = false;  // denominator was 0
    std::size_t count = 0;
};

namespace detail {

inline std::vector<std::size_t> valid_indices(std::size_t n, std::span<const bool> mask) {
    if (!mask.empty() && mask.size() != n) throw ShapeError("ccc: mask length differs from sequence length");
    std::vector<std::size_t> idx;
    idx.reserve(n);
    for (std::size_t i = 0; i < n; ++i)
        if (mask.empty() || mask[i]) idx.push_back(i);
    return idx;
}

// Exactly constant over idx; such a track has zero variance even when the
// rounded mean leaves tiny deviations.
template <class Get>
bool constant_over(const std::vector<std::size_t>& idx, Get&& get) {
    for (std::size_t i : idx)
        if (get(i) != get(idx.front())) return false;
    return true;
}

}  // namespace detail

inline CccComponents ccc_components(std::span<const double> pred, std::span<const double> truth,
                                    std::span<const bool> mask = {}, Moments moments = Moments::population) {
    if (pred.size() != truth.size())
        throw ShapeError("ccc: prediction length " + std::to_string(pred.size()) + " differs from label length " +
                         std::to_string(truth.size()));
    const auto idx = detail::valid_indices(pred.size(), mask);
    const std::size_t n = idx.size();
    if (n < 2) throw DataError("ccc: need at least 2 valid points, got " + std::to_string(n));
    CccComponents c;
    c.count = n;
    for (std::size_t i : idx) {
        if (!std::isfinite(pred[i]) || !std::isfinite(truth[i])) throw NumericError("ccc: non-finite input");
        c.mean_pred += pred[i];
        c.mean_true += truth[i];
    }
    c.mean_pred /= double(n);
    c.mean_true /= double(n);
    const bool flat_pred = detail::constant_over(idx, [&](std::size_t i) { return pred[i]; });
    const bool flat_true = detail::constant_over(idx, [&](std::size_t i) { return truth[i]; });
    if (flat_pred) c.mean_pred = pred[idx.front()];
    if (flat_true) c.mean_true = truth[idx.front()];
    for (std::size_t i : idx) {
        const double dp = pred[i] - c.mean_pred;
        const double dt = truth[i] - c.mean_true;
        c.var_pred += dp * dp;
        c.var_true += dt * dt;
        c.cov += dp * dt;
    }
    const double norm = moments == Moments::population ? double(n) : double(n - 1);
    c.var_pred /= norm;
    c.var_true /= norm;
    c.cov /= norm;
    if (flat_pred) c.var_pred = c.cov = 0.0;
    if (flat_true) c.var_true = c.cov = 0.0;
    if (c.var_pred > 0 && c.var_true > 0) c.pearson = c.cov / std::sqrt(c.var_pred * c.var_true);
    const double gap = c.mean_pred - c.mean_true;
    const double denom = c.var_pred + c.var_true + gap * gap;
    if (denom > 0) {
        c.ccc = 2.0 * c.cov / denom;
    } else {
        c.degenerate = true;
        c.ccc = 0.0;
    }
    return c;
}

// CCC = 2 cov / (var_pred + var_true + (mean_pred - mean_true)^2) over valid points.
// A zero denominator (both tracks constant with equal means) yields 0 and a warning.
inline double ccc(std::span<const double> pred, std::span<const double> truth, std::span<const bool> mask = {},
                  Moments moments = Moments::population) {
    const auto c = ccc_components(pred, truth, mask, moments);
    if (c.degenerate) warn("ccc: degenerate input (both tracks constant with equal means); defined as 0");
    return c.ccc;
}

inline double pcc(std::span<const double> pred, std::span<const double> truth, std::span<const bool> mask = {}) {
    const auto c = ccc_components(pred, truth, mask);
    if (!(c.var_pred > 0) || !(c.var_true > 0)) throw NumericError("pcc: undefined for a constant input");
    return c.pearson;
}

// 1 - CCC on a tape. pred is an N x 1 node, truth holds N labels; all valid
// points are pooled into one coefficient.
inline Var ccc_loss(const Var& pred, std::span<const double> truth, std::span<const bool> mask = {},
                    Moments moments = Moments::population) {
    if (pred.cols() != 1) throw ShapeError("ccc_loss: predictions must be N x 1, got " + shape_str(pred.value()));
    if (std::size_t(pred.rows()) != truth.size())
        throw ShapeError("ccc_loss: prediction length " + std::to_string(pred.rows()) + " differs from label length " +
                         std::to_string(truth.size()));
    const auto idx = detail::valid_indices(truth.size(), mask);
    const std::size_t n = idx.size();
    if (n < 2) throw DataError("ccc_loss: need at least 2 valid points, got " + std::to_string(n));

    Var p = pred;
    if (n != truth.size()) p = gather_rows(pred, std::vector<Index>(idx.begin(), idx.end()));
    Mat y(Index(n), 1);
    for (std::size_t i = 0; i < n; ++i) y(Index(i), 0) = truth[idx[i]];
    const double mean_true = y.mean();
    Mat dy = y.array() - mean_true;
    const double norm = moments == Moments::population ? double(n) : double(n - 1);
    const double var_true = dy.squaredNorm() / norm;

    const Mat& pv = pred.value();
    const bool flat_pred = detail::constant_over(idx, [&](std::size_t i) { return pv(Index(i), 0); });
    const bool flat_true = detail::constant_over(idx, [&](std::size_t i) { return truth[i]; });
    if (flat_pred && flat_true && pv(Index(idx.front()), 0) == truth[idx.front()]) {
        warn("ccc_loss: degenerate batch (constant predictions and labels with equal means); CCC defined as 0");
        return add_scalar(scale(sum(pred), 0.0), 1.0);
    }

    Tape& tape = *pred.tape();
    Var mu = mean(p);
    Var dp = sub_scalar(p, mu);
    Var var_pred = scale(sum(hadamard(dp, dp)), 1.0 / norm);
    Var cov = scale(sum(hadamard(dp, tape.constant(dy))), 1.0 / norm);
    Var gap = add_scalar(mu, -mean_true);
    Var denom = add(add_scalar(var_pred, var_true), hadamard(gap, gap));
    if (!(denom.value()(0, 0) > 0)) {
        warn("ccc_loss: degenerate batch (constant predictions and labels with equal means); CCC defined as 0");
        return add_scalar(scale(sum(p), 0.0), 1.0);
    }
    Var c = divide(scale(cov, 2.0), denom);
    return add_scalar(scale(c, -1.0), 1.0);
}

// Debug-only squared error loss.
inline Var mse_loss(const Var& pred, std::span<const double> truth, std::span<const bool> mask = {}) {
    const auto idx = detail::valid_indices(truth.size(), mask);
    if (idx.empty()) throw DataError("mse_loss: no valid points");
    Var p = gather_rows(pred, std::vector<Index>(idx.begin(), idx.end()));
    Mat y(Index(idx.size()), 1);
    for (std::size_t i = 0; i < idx.size(); ++i) y(Index(i), 0) = truth[idx[i]];
    Var d = sub(p, pred.tape()->constant(std::move(y)));
    return mean(hadamard(d, d));
}

// A prediction/label pair for one sequence.
struct TrackPair {
    std::vector<double> pred;
    std::vector<double> truth;
};

enum class CccMode { pooled, per_sequence_mean };

// Pooled: one CCC over all sequences concatenated. Per-sequence-mean: average of per-sequence CCCs.
inline double ccc_over(std::span<const TrackPair> tracks, CccMode mode, Moments moments = Moments::population) {
    if (tracks.empty()) throw DataError("ccc: no sequences to score");
    if (mode == CccMode::pooled) {
        std::vector<double> p, y;
        for (const auto& tp : tracks) {
            p.insert(p.end(), tp.pred.begin(), tp.pred.end());
            y.insert(y.end(), tp.truth.begin(), tp.truth.end());
        }
        return ccc(p, y, {}, moments);
    }
    double acc = 0.0;
    for (const auto& tp : tracks) acc += ccc(tp.pred, tp.truth, {}, moments);
    return acc / double(tracks.size());
}

}  // namespace affectfuse
