#pragma once

// Differentiable building blocks: multi-head self-attention, (bi)directional
// LSTM, gated temporal convolution and the scalar regression head.
//
// All layers consume a stacked batch (rows = segments * steps) described by a
// SeqLayout and leave padding rows at zero, so results on valid rows never
// depend on how much padding a window carries.

#include <cmath>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "affectfuse/tensor.hpp"

namespace affectfuse {

using Rng = std::mt19937_64;

// Fills a tensor with uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)).
inline void init_uniform(Tensor& t, std::size_t fan_in, Rng& rng) {
    const double bound = 1.0 / std::sqrt(double(std::max<std::size_t>(fan_in, 1)));
    std::uniform_real_distribution<double> dist(-bound, bound);
    double* p = t.data();
    for (std::size_t i = 0; i < t.size(); ++i) p[i] = dist(rng);
}

inline Tensor make_param(Shape shape) { return Tensor(std::move(shape), true); }

// ---------------------------------------------------------------- self-attention

// Head i uses columns [i*d_k, (i+1)*d_k) of wq, wk and wv as its d x d_k
// projections, so the h per-head matrices are stored side by side.
struct AttentionParams {
    std::size_t heads = 1;
    std::size_t model_dim = 0;
    bool output_proj = true;
    bool residual = false;
    Tensor wq, wk, wv, wo;

    std::size_t head_dim() const { return model_dim / heads; }

    static AttentionParams init(std::size_t model_dim, std::size_t heads, bool output_proj, bool residual, Rng& rng) {
        if (heads == 0 || model_dim % heads != 0)
            throw ConfigError("attention: heads (" + std::to_string(heads) + ") must divide model_dim (" +
                              std::to_string(model_dim) + ")");
        AttentionParams p;
        p.heads = heads;
        p.model_dim = model_dim;
        p.output_proj = output_proj;
        p.residual = residual;
        for (Tensor* w : {&p.wq, &p.wk, &p.wv, &p.wo}) {
            *w = make_param({model_dim, model_dim});
            init_uniform(*w, model_dim, rng);
        }
        if (!output_proj) p.wo = Tensor();
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".wq", wq);
        f(prefix + ".wk", wk);
        f(prefix + ".wv", wv);
        if (output_proj) f(prefix + ".wo", wo);
    }
};

// softmax(Q_i K_i^T / sqrt(d_k)) V_i per head and per segment, heads
// concatenated, then projected by W_O. If `weights` is non-null the attention
// matrices are appended to it (segment-major, then head).
inline Var self_attention(Tape& tape, const Var& x, const AttentionParams& p, const SeqLayout& layout,
                          std::vector<Mat>* weights = nullptr) {
    if (p.heads == 0 || p.model_dim % p.heads != 0)
        throw ConfigError("self_attention: heads must divide model_dim");
    if (std::size_t(x.cols()) != p.model_dim)
        throw ShapeError("self_attention: input " + shape_str(x.value()) + " does not match model_dim " +
                         std::to_string(p.model_dim));
    detail::check_layout("self_attention", x, layout);
    const Index dk = Index(p.head_dim());
    const Index steps = Index(layout.steps);
    const double inv_scale = 1.0 / std::sqrt(double(dk));

    Var q = matmul(x, tape.param(p.wq));
    Var k = matmul(x, tape.param(p.wk));
    Var v = matmul(x, tape.param(p.wv));

    std::vector<Var> segments;
    for (std::size_t b = 0; b < layout.batch(); ++b) {
        const Index len = Index(layout.lengths[b]);
        const Index r0 = Index(b) * steps;
        std::vector<Var> heads;
        if (len > 0) {
            for (std::size_t h = 0; h < p.heads; ++h) {
                const Index c0 = Index(h) * dk;
                Var qh = slice(q, r0, len, c0, dk);
                Var kh = slice(k, r0, len, c0, dk);
                Var vh = slice(v, r0, len, c0, dk);
                Var attn = softmax_rows(scale(matmul_nt(qh, kh), inv_scale));
                if (weights) weights->push_back(attn.value());
                heads.push_back(matmul(attn, vh));
            }
        }
        std::vector<Var> rows;
        if (len > 0) rows.push_back(concat_cols(heads));
        if (len < steps) rows.push_back(tape.constant(Mat::Zero(steps - len, Index(p.model_dim))));
        segments.push_back(concat_rows(rows));
    }
    Var c = concat_rows(segments);
    if (p.output_proj) c = matmul(c, tape.param(p.wo));
    if (p.residual) c = add(c, x);
    return c;
}

inline Var self_attention(Tape& tape, const Var& x, const AttentionParams& p) {
    return self_attention(tape, x, p, SeqLayout::single(std::size_t(x.rows())));
}

// ---------------------------------------------------------------- LSTM

// Gate blocks along the 4h axis are [input, forget, candidate, output].
struct LstmCell {
    Tensor wx;  // d_in x 4h
    Tensor wh;  // h x 4h
    Tensor b;   // 1 x 4h

    static LstmCell init(std::size_t input_dim, std::size_t hidden, Rng& rng) {
        LstmCell c;
        c.wx = make_param({input_dim, 4 * hidden});
        c.wh = make_param({hidden, 4 * hidden});
        c.b = make_param({1, 4 * hidden});
        init_uniform(c.wx, input_dim, rng);
        init_uniform(c.wh, hidden, rng);
        c.b.values().middleCols(Index(hidden), Index(hidden)).setOnes();
        return c;
    }
};

struct LstmParams {
    std::size_t input_dim = 0;
    std::size_t hidden = 0;
    bool bidirectional = false;
    LstmCell fwd;
    LstmCell bwd;  // only when bidirectional

    std::size_t output_dim() const { return bidirectional ? 2 * hidden : hidden; }

    static LstmParams init(std::size_t input_dim, std::size_t hidden, bool bidirectional, Rng& rng) {
        if (input_dim == 0 || hidden == 0) throw ConfigError("lstm: input_dim and hidden must be positive");
        LstmParams p;
        p.input_dim = input_dim;
        p.hidden = hidden;
        p.bidirectional = bidirectional;
        p.fwd = LstmCell::init(input_dim, hidden, rng);
        if (bidirectional) p.bwd = LstmCell::init(input_dim, hidden, rng);
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".fwd.wx", fwd.wx);
        f(prefix + ".fwd.wh", fwd.wh);
        f(prefix + ".fwd.b", fwd.b);
        if (bidirectional) {
            f(prefix + ".bwd.wx", bwd.wx);
            f(prefix + ".bwd.wh", bwd.wh);
            f(prefix + ".bwd.b", bwd.b);
        }
    }
};

namespace detail {

inline Mat sigm(const Mat& x) {
    return x.unaryExpr([](double v) {
        if (v >= 0) return 1.0 / (1.0 + std::exp(-v));
        const double e = std::exp(v);
        return e / (1.0 + e);
    });
}

struct LstmTrace {
    std::vector<Mat> gates;   // per processed step, B x 4h (activated)
    std::vector<Mat> cells;   // B x h
    std::vector<Mat> tanh_c;  // B x h
    std::vector<Mat> hidden;  // B x h
    std::vector<Eigen::VectorXd> mask;
};

}  // namespace detail

// One LSTM direction over a stacked batch, zero initial state per segment.
// The reverse direction starts at each segment's last valid step. States at
// padding rows are held at zero.
inline Var lstm_sequence(const Var& x, const Var& wx, const Var& wh, const Var& bias, const SeqLayout& layout,
                         bool reverse) {
    detail::check_layout("lstm", x, layout);
    const Index hidden = wh.rows();
    if (wx.rows() != x.cols() || wx.cols() != 4 * hidden || wh.cols() != 4 * hidden || bias.rows() != 1 ||
        bias.cols() != 4 * hidden)
        throw ShapeError("lstm: parameter shapes " + shape_str(wx.value()) + ", " + shape_str(wh.value()) + ", " +
                         shape_str(bias.value()) + " do not fit input " + shape_str(x.value()));
    const Index batch = Index(layout.batch());
    const Index steps = Index(layout.steps);
    const Index h = hidden;

    Mat pre_x = x.value() * wx.value();
    pre_x.rowwise() += bias.value().row(0);

    auto trace = std::make_shared<detail::LstmTrace>();
    trace->gates.reserve(std::size_t(steps));
    Mat out = Mat::Zero(x.rows(), h);
    Mat hs = Mat::Zero(batch, h);
    Mat cs = Mat::Zero(batch, h);
    Mat pre(batch, 4 * h);
    for (Index s = 0; s < steps; ++s) {
        const Index t = reverse ? steps - 1 - s : s;
        Eigen::VectorXd m(batch);
        for (Index b = 0; b < batch; ++b) {
            pre.row(b) = pre_x.row(b * steps + t);
            m(b) = layout.valid(std::size_t(b), std::size_t(t)) ? 1.0 : 0.0;
        }
        pre.noalias() += hs * wh.value();
        Mat gates(batch, 4 * h);
        gates.leftCols(2 * h) = detail::sigm(pre.leftCols(2 * h));
        gates.middleCols(2 * h, h) = pre.middleCols(2 * h, h).array().tanh();
        gates.rightCols(h) = detail::sigm(pre.rightCols(h));
        Mat c = gates.leftCols(h).cwiseProduct(gates.middleCols(2 * h, h)) +
                gates.middleCols(h, h).cwiseProduct(cs);
        c = c.array().colwise() * m.array();
        Mat tc = c.array().tanh();
        Mat hn = gates.rightCols(h).cwiseProduct(tc);
        for (Index b = 0; b < batch; ++b) out.row(b * steps + t) = hn.row(b);
        trace->gates.push_back(std::move(gates));
        trace->tanh_c.push_back(std::move(tc));
        trace->cells.push_back(c);
        trace->hidden.push_back(hn);
        trace->mask.push_back(std::move(m));
        cs = std::move(c);
        hs = std::move(hn);
    }

    return x.tape()->record(
        reverse ? "lstm_reverse" : "lstm", std::move(out), {x, wx, wh, bias},
        [ix = x.id(), iwx = wx.id(), iwh = wh.id(), ib = bias.id(), trace, batch, steps, h, reverse](
            Tape& t, const Mat& g, std::size_t) {
            const Mat& whv = t.value(iwh);
            Mat dpre_x = Mat::Zero(batch * steps, 4 * h);
            Mat dwh = Mat::Zero(h, 4 * h);
            Mat dh_next = Mat::Zero(batch, h);
            Mat dc_next = Mat::Zero(batch, h);
            Mat dpre(batch, 4 * h);
            for (Index s = steps; s-- > 0;) {
                const Index tt = reverse ? steps - 1 - s : s;
                const auto us = std::size_t(s);
                const Mat& gates = trace->gates[us];
                const Eigen::VectorXd& m = trace->mask[us];
                Mat dh = dh_next;
                for (Index b = 0; b < batch; ++b) dh.row(b) += g.row(b * steps + tt);
                dh = dh.array().colwise() * m.array();
                const auto gi = gates.leftCols(h).array();
                const auto gf = gates.middleCols(h, h).array();
                const auto gg = gates.middleCols(2 * h, h).array();
                const auto go = gates.rightCols(h).array();
                const auto tc = trace->tanh_c[us].array();
                Mat dc = dc_next.array() + dh.array() * go * (1.0 - tc.square());
                dc = dc.array().colwise() * m.array();
                Mat c_prev = s > 0 ? trace->cells[us - 1] : Mat::Zero(batch, h);
                dpre.leftCols(h) = (dc.array() * gg * gi * (1.0 - gi)).matrix();
                dpre.middleCols(h, h) = (dc.array() * c_prev.array() * gf * (1.0 - gf)).matrix();
                dpre.middleCols(2 * h, h) = (dc.array() * gi * (1.0 - gg.square())).matrix();
                dpre.rightCols(h) = (dh.array() * tc * go * (1.0 - go)).matrix();
                for (Index b = 0; b < batch; ++b) dpre_x.row(b * steps + tt) = dpre.row(b);
                if (s > 0) dwh.noalias() += trace->hidden[us - 1].transpose() * dpre;
                dh_next.noalias() = dpre * whv.transpose();
                dc_next = (dc.array() * gf).matrix();
            }
            if (t.requires_grad(iwh)) t.accumulate(iwh, dwh);
            if (t.requires_grad(iwx)) t.accumulate(iwx, t.value(ix).transpose() * dpre_x);
            if (t.requires_grad(ib)) t.accumulate(ib, dpre_x.colwise().sum());
            if (t.requires_grad(ix)) t.accumulate(ix, dpre_x * t.value(iwx).transpose());
        });
}

// One (bi)directional LSTM layer; bidirectional output is [forward | reverse] per step.
inline Var lstm_forward(Tape& tape, const Var& x, const LstmParams& p, const SeqLayout& layout) {
    if (std::size_t(x.cols()) != p.input_dim)
        throw ShapeError("lstm_forward: input " + shape_str(x.value()) + " does not match input_dim " +
                         std::to_string(p.input_dim));
    Var f = lstm_sequence(x, tape.param(p.fwd.wx), tape.param(p.fwd.wh), tape.param(p.fwd.b), layout, false);
    if (!p.bidirectional) return f;
    Var r = lstm_sequence(x, tape.param(p.bwd.wx), tape.param(p.bwd.wh), tape.param(p.bwd.b), layout, true);
    return concat_cols({f, r});
}

inline Var lstm_forward(Tape& tape, const Var& x, const LstmParams& p) {
    return lstm_forward(tape, x, p, SeqLayout::single(std::size_t(x.rows())));
}

// ---------------------------------------------------------------- gated convolution

struct GatedConvParams {
    std::size_t input_dim = 0;
    std::size_t channels = 0;
    std::size_t width = 3;
    Tensor w_kernel, w_bias;  // linear path: {width, input_dim, channels}, {channels}
    Tensor z_kernel, z_bias;  // gate path, same shapes

    static GatedConvParams init(std::size_t input_dim, std::size_t channels, std::size_t width, Rng& rng) {
        if (width % 2 == 0) throw ConfigError("gated conv: kernel width must be odd, got " + std::to_string(width));
        if (input_dim == 0 || channels == 0) throw ConfigError("gated conv: dimensions must be positive");
        GatedConvParams p;
        p.input_dim = input_dim;
        p.channels = channels;
        p.width = width;
        p.w_kernel = make_param({width, input_dim, channels});
        p.z_kernel = make_param({width, input_dim, channels});
        p.w_bias = make_param({channels});
        p.z_bias = make_param({channels});
        init_uniform(p.w_kernel, width * input_dim, rng);
        init_uniform(p.z_kernel, width * input_dim, rng);
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".w_kernel", w_kernel);
        f(prefix + ".w_bias", w_bias);
        f(prefix + ".z_kernel", z_kernel);
        f(prefix + ".z_bias", z_bias);
    }
};

// conv(X, W) ⊙ sigmoid(conv(X, Z))
inline Var gated_conv_block(Tape& tape, const Var& x, const GatedConvParams& p, const SeqLayout& layout) {
    if (std::size_t(x.cols()) != p.input_dim)
        throw ShapeError("gated_conv_block: input " + shape_str(x.value()) + " does not match input_dim " +
                         std::to_string(p.input_dim));
    Var lin = conv1d_same(x, tape.param(p.w_kernel), tape.param(p.w_bias), p.width, layout);
    Var gate = conv1d_same(x, tape.param(p.z_kernel), tape.param(p.z_bias), p.width, layout);
    return hadamard(lin, sigmoid(gate));
}

inline Var gated_conv_block(Tape& tape, const Var& x, const GatedConvParams& p) {
    return gated_conv_block(tape, x, p, SeqLayout::single(std::size_t(x.rows())));
}

// ---------------------------------------------------------------- regression head

struct DenseParams {
    Tensor w;  // h x 1
    Tensor b;  // 1 x 1

    std::size_t input_dim() const { return w.shape().front(); }

    static DenseParams init(std::size_t input_dim, Rng& rng) {
        DenseParams p;
        p.w = make_param({input_dim, 1});
        p.b = make_param({1, 1});
        init_uniform(p.w, input_dim, rng);
        return p;
    }

    template <class F>
    void visit(const std::string& prefix, F&& f) {
        f(prefix + ".w", w);
        f(prefix + ".b", b);
    }
};

// H W + b per timestep, no output activation.
inline Var dense_head(Tape& tape, const Var& h, const DenseParams& p) {
    if (std::size_t(h.cols()) != p.input_dim())
        throw ShapeError("dense_head: input " + shape_str(h.value()) + " does not match weight " +
                         shape_str(p.w.shape()));
    return add_row(matmul(h, tape.param(p.w)), tape.param(p.b));
}

}  // namespace affectfuse
