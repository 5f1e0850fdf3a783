#pragma once

// Finite-difference checks over every layer and the full architectures at toy shapes.

#include <array>
#include <chrono>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "affectfuse/gradcheck.hpp"
#include "affectfuse/layers.hpp"
#include "affectfuse/models.hpp"
#include "affectfuse/objective.hpp"

namespace affectfuse {

struct GradCheckCase {
    std::string module;
    std::string label;  // configuration within the module
    GradCheckResult result;
    double seconds = 0.0;
    bool pass = false;
};

inline const std::vector<std::string>& gradcheck_modules() {
    static const std::vector<std::string> names{"self_attention", "lstm",      "gated_conv", "dense_head", "ccc_loss",
                                                "attn_lstm",      "gcnn_lstm", "plain_lstm", "fusion"};
    return names;
}

namespace detail {

inline Mat uniform_mat(std::mt19937_64& rng, Index rows, Index cols, double scale = 1.0) {
    std::uniform_real_distribution<double> d(-scale, scale);
    Mat m(rows, cols);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = d(rng);
    return m;
}

// Fixed random readout so every output coordinate receives gradient.
inline Var readout(Tape& tape, const Var& y, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    return sum(hadamard(y, tape.constant(uniform_mat(rng, y.rows(), y.cols()))));
}

struct SuiteRunner {
    GradCheckOptions opt;
    double tolerance;
    std::vector<GradCheckCase> out;

    void run(const std::string& module, const std::string& label, const LossBuilder& f,
             const std::vector<Tensor*>& params) {
        const auto t0 = std::chrono::steady_clock::now();
        GradCheckCase c;
        c.module = module;
        c.label = label;
        c.result = grad_check(f, params, opt);
        c.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
        c.pass = c.result.max_rel_error < tolerance;
        out.push_back(std::move(c));
    }

    // Full model with the input as an extra parameter. A linear readout keeps every
    // coordinate's gradient well scaled; CCC is nearly shift-invariant and would leave
    // many gradients near zero, where finite differences are mostly rounding noise.
    void run_model(const std::string& module, const std::string& label, const ModelSpec& spec, Index T,
                   std::uint64_t seed) {
        std::mt19937_64 rng(seed);
        auto model = std::make_shared<SequenceModel>(SequenceModel::create(spec, seed));
        auto x = std::make_shared<Tensor>(Tensor::matrix(uniform_mat(rng, T, Index(spec.input_dim)), true));
        auto params = model->parameters();
        params.push_back(x.get());
        run(module, label, [model, x, seed](Tape& t) { return readout(t, model->forward(t, t.param(*x)), seed); },
            params);
    }
};

}  // namespace detail

// module is "all" or one entry of gradcheck_modules().
inline std::vector<GradCheckCase> run_gradcheck_suite(const std::string& module = "all", GradCheckOptions opt = {},
                                                      double tolerance = 1e-4) {
    bool known = module == "all";
    for (const auto& m : gradcheck_modules()) known = known || m == module;
    if (!known) {
        std::string list;
        for (const auto& m : gradcheck_modules()) list += (list.empty() ? "" : ", ") + m;
        throw ConfigError("gradcheck: unknown module '" + module + "' (expected all, " + list + ")");
    }
    auto want = [&](const char* m) { return module == "all" || module == m; };
    detail::SuiteRunner r{std::move(opt), tolerance, {}};
    constexpr Index T = 6, d = 8;

    if (want("self_attention")) {
        for (std::size_t h : {4u, 8u})
            for (bool proj : {true, false}) {
                Rng rng(10 + h + proj);
                std::mt19937_64 g(h);
                auto p = std::make_shared<AttentionParams>(AttentionParams::init(std::size_t(d), h, proj, !proj, rng));
                auto x = std::make_shared<Tensor>(Tensor::matrix(detail::uniform_mat(g, T, d), true));
                std::vector<Tensor*> ps{x.get(), &p->wq, &p->wk, &p->wv};
                if (proj) ps.push_back(&p->wo);
                r.run("self_attention", "h=" + std::to_string(h) + (proj ? " W_O" : " residual"),
                      [p, x](Tape& t) { return detail::readout(t, self_attention(t, t.param(*x), *p), 1); }, ps);
            }
    }
    if (want("lstm")) {
        for (bool bidir : {false, true}) {
            Rng rng(20 + bidir);
            std::mt19937_64 g(21);
            auto p = std::make_shared<LstmParams>(LstmParams::init(std::size_t(d), 5, bidir, rng));
            auto x = std::make_shared<Tensor>(Tensor::matrix(detail::uniform_mat(g, 2 * T, d), true));
            const SeqLayout layout{std::size_t(T), {std::size_t(T), std::size_t(T) - 2}};
            std::vector<Tensor*> ps{x.get()};
            p->visit("", [&](const std::string&, Tensor& t) { ps.push_back(&t); });
            r.run("lstm", bidir ? "bidirectional, padded batch" : "forward, padded batch",
                  [p, x, layout](Tape& t) { return detail::readout(t, lstm_forward(t, t.param(*x), *p, layout), 2); },
                  ps);
        }
    }
    if (want("gated_conv")) {
        for (std::size_t width : {1u, 3u, 5u}) {
            Rng rng(30 + width);
            std::mt19937_64 g(31);
            auto p = std::make_shared<GatedConvParams>(GatedConvParams::init(std::size_t(d), 6, width, rng));
            p->w_bias.values() = detail::uniform_mat(g, 1, 6, 0.1).reshaped(p->w_bias.values().rows(),
                                                                             p->w_bias.values().cols());
            auto x = std::make_shared<Tensor>(Tensor::matrix(detail::uniform_mat(g, T, d), true));
            std::vector<Tensor*> ps{x.get()};
            p->visit("", [&](const std::string&, Tensor& t) { ps.push_back(&t); });
            r.run("gated_conv", "kernel=" + std::to_string(width),
                  [p, x](Tape& t) { return detail::readout(t, gated_conv_block(t, t.param(*x), *p), 3); }, ps);
        }
    }
    if (want("dense_head")) {
        Rng rng(40);
        std::mt19937_64 g(41);
        auto p = std::make_shared<DenseParams>(DenseParams::init(std::size_t(d), rng));
        auto x = std::make_shared<Tensor>(Tensor::matrix(detail::uniform_mat(g, T, d), true));
        r.run("dense_head", "d=8", [p, x](Tape& t) { return detail::readout(t, dense_head(t, t.param(*x), *p), 4); },
              {x.get(), &p->w, &p->b});
    }
    if (want("ccc_loss")) {
        for (Moments m : {Moments::population, Moments::sample}) {
            std::mt19937_64 g(50);
            auto x = std::make_shared<Tensor>(Tensor::matrix(detail::uniform_mat(g, 2 * T, 1), true));
            const Mat y = detail::uniform_mat(g, 2 * T, 1);
            std::vector<double> labels(y.data(), y.data() + y.size());
            std::array<bool, 12> mask;
            mask.fill(true);
            mask[3] = mask[9] = false;
            r.run("ccc_loss", m == Moments::population ? "population, masked" : "sample, masked",
                  [x, labels, mask, m](Tape& t) { return ccc_loss(t.param(*x), labels, mask, m); },
                  {x.get()});
        }
    }
    if (want("attn_lstm")) {
        for (std::size_t h : {4u, 8u})
            for (std::size_t L : {1u, 2u, 4u}) {
                ModelSpec s;
                s.kind = ModelKind::attn_lstm;
                s.input_dim = std::size_t(d);
                s.attn = AttnSpec{h, L, false, true};
                s.lstm = {8, 2, false};
                r.run_model("attn_lstm", "h=" + std::to_string(h) + " L=" + std::to_string(L), s, T, 60 + h * 10 + L);
            }
    }
    if (want("gcnn_lstm")) {
        for (std::size_t c : {64u, 128u}) {
            ModelSpec s;
            s.kind = ModelKind::gcnn_lstm;
            s.input_dim = std::size_t(d);
            s.gcnn = GcnnSpec{c, 3, 2};
            s.lstm = {8, 1, false};
            r.run_model("gcnn_lstm", "channels=" + std::to_string(c), s, T, 70 + c);
        }
    }
    if (want("plain_lstm")) {
        ModelSpec s;
        s.kind = ModelKind::plain_lstm;
        s.input_dim = 3;
        s.lstm = {8, 2, false};
        r.run_model("plain_lstm", "bio d=3", s, T, 80);
    }
    if (want("fusion")) {
        for (std::size_t k : {stress_fusion_arity, physio_fusion_arity})
            r.run_model("fusion", std::to_string(k) + " tracks", ModelSpec::fusion(k), T, 90 + k);
    }
    return r.out;
}

}  // namespace affectfuse
