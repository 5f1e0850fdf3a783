#pragma once

// Central finite-difference check of tape gradients.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <numeric>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "affectfuse/tensor.hpp"

namespace affectfuse {

// Builds a scalar loss from parameters registered with Tape::param.
using LossBuilder = std::function<Var(Tape&)>;

struct GradCheckOptions {
    double eps = 1e-5;
    // Parameters with more coordinates than this are checked on a seeded sample.
    std::size_t full_check_limit = 1000;
    std::size_t sample_size = 2000;
    std::uint64_t seed = 0x5eed;
    // Applied to analytic gradients before comparison; used only to prove the check can fail.
    std::function<void(Mat&)> corrupt;
};

struct GradCheckResult {
    double max_rel_error = 0.0;
    std::size_t checked = 0;
    std::size_t worst_param = 0;
    Index worst_index = 0;
    double worst_analytic = 0.0;
    double worst_numeric = 0.0;
};

inline double relative_error(double a, double b) {
    return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-8});
}

inline double eval_loss(const LossBuilder& f) {
    Tape tape(false);
    Var loss = f(tape);
    if (loss.value().size() != 1) throw ShapeError("grad_check: loss must be scalar");
    const double v = loss.value()(0, 0);
    if (!std::isfinite(v)) throw NumericError("grad_check: loss is not finite");
    return v;
}

namespace detail {

// Coordinates to probe per parameter: everything when the model is small,
// otherwise a proportional sample that never drops a tensor entirely.
inline std::vector<std::vector<Index>> pick_coordinates(std::span<Tensor* const> params, const GradCheckOptions& opt) {
    std::size_t total = 0;
    for (const Tensor* p : params) total += p->size();
    std::vector<std::vector<Index>> picks(params.size());
    std::mt19937_64 rng(opt.seed);
    for (std::size_t k = 0; k < params.size(); ++k) {
        const auto n = Index(params[k]->size());
        std::vector<Index> all(static_cast<std::size_t>(n));
        std::iota(all.begin(), all.end(), Index{0});
        if (total <= opt.full_check_limit) {
            picks[k] = std::move(all);
            continue;
        }
        const double share = double(opt.sample_size) * double(n) / double(total);
        const auto want = std::min<std::size_t>(all.size(), std::max<std::size_t>(16, std::size_t(std::ceil(share))));
        std::shuffle(all.begin(), all.end(), rng);
        all.resize(want);
        std::sort(all.begin(), all.end());
        picks[k] = std::move(all);
    }
    return picks;
}

}  // namespace detail

// Compares tape gradients with (f(θ+eps·e) − f(θ−eps·e)) / (2·eps) coordinate by coordinate.
// Parameters are restored bit-exactly afterwards.
inline GradCheckResult grad_check(const LossBuilder& f, std::span<Tensor* const> params,
                                  const GradCheckOptions& opt = {}) {
    std::vector<Mat> analytic;
    {
        Tape tape;
        Var loss = f(tape);
        if (!std::isfinite(loss.value()(0, 0))) throw NumericError("grad_check: loss is not finite");
        tape.backward(loss);
        for (const Tensor* p : params) analytic.push_back(tape.grad(*p));
    }
    if (opt.corrupt)
        for (Mat& g : analytic) opt.corrupt(g);

    GradCheckResult res;
    const auto picks = detail::pick_coordinates(params, opt);
    for (std::size_t k = 0; k < params.size(); ++k) {
        double* data = params[k]->data();
        for (Index i : picks[k]) {
            const double saved = data[i];
            data[i] = saved + opt.eps;
            const double up = eval_loss(f);
            data[i] = saved - opt.eps;
            const double down = eval_loss(f);
            data[i] = saved;
            const double numeric = (up - down) / (2.0 * opt.eps);
            const double a = analytic[k].data()[i];
            const double err = relative_error(a, numeric);
            ++res.checked;
            if (err > res.max_rel_error || res.checked == 1) {
                res.max_rel_error = std::max(res.max_rel_error, err);
                res.worst_param = k;
                res.worst_index = i;
                res.worst_analytic = a;
                res.worst_numeric = numeric;
            }
        }
    }
    return res;
}

}  // namespace affectfuse
