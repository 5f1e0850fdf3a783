#pragma once

// The unimodal architectures and the late-fusion regressor.
//
//   attn_lstm   L x self-attention -> stacked LSTM -> dense head
//   gcnn_lstm   B x gated conv block -> stacked LSTM -> dense head
//   plain_lstm  stacked LSTM -> dense head (bio-signals, concatenated first)
//   fusion      prediction tracks -> Bi-LSTM (32 per direction) -> dense head

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "json.hpp"

#include "affectfuse/checkpoint.hpp"
#include "affectfuse/layers.hpp"
#include "affectfuse/tensor.hpp"

namespace affectfuse {

enum class ModelKind { attn_lstm, gcnn_lstm, plain_lstm, fusion };

inline std::string to_string(ModelKind k) {
    switch (k) {
        case ModelKind::attn_lstm: return "attn_lstm";
        case ModelKind::gcnn_lstm: return "gcnn_lstm";
        case ModelKind::plain_lstm: return "plain_lstm";
        case ModelKind::fusion: return "fusion";
    }
    return "?";
}

inline ModelKind parse_model_kind(const std::string& s) {
    if (s == "attn_lstm") return ModelKind::attn_lstm;
    if (s == "gcnn_lstm") return ModelKind::gcnn_lstm;
    if (s == "plain_lstm") return ModelKind::plain_lstm;
    if (s == "fusion") return ModelKind::fusion;
    throw ConfigError("unknown model kind '" + s + "' (expected attn_lstm, gcnn_lstm, plain_lstm or fusion)");
}

struct AttnSpec {
    std::size_t heads = 4;
    std::size_t layers = 1;
    bool residual = false;
    bool output_proj = true;
};

struct GcnnSpec {
    std::size_t channels = 64;
    std::size_t kernel = 3;
    std::size_t blocks = 2;
};

struct LstmSpec {
    std::size_t hidden = 64;
    std::size_t layers = 1;
    bool bidirectional = false;
};

// Fusion arity for the two wirings: (audio, video, bio) and
// (gcnn audio, gcnn video, attn audio, attn video, bio).
inline constexpr std::size_t stress_fusion_arity = 3;
inline constexpr std::size_t physio_fusion_arity = 5;

struct ModelSpec {
    ModelKind kind = ModelKind::attn_lstm;
    std::size_t input_dim = 0;
    std::optional<AttnSpec> attn;
    std::optional<GcnnSpec> gcnn;
    LstmSpec lstm;

    static ModelSpec fusion(std::size_t tracks, bool bidirectional = true, std::size_t hidden = 32) {
        ModelSpec s;
        s.kind = ModelKind::fusion;
        s.input_dim = tracks;
        s.lstm = {hidden, 1, bidirectional};
        return s;
    }

    void validate() const {
        if (input_dim == 0) throw ConfigError("model spec: input_dim must be positive");
        if (lstm.hidden == 0 || lstm.layers == 0) throw ConfigError("model spec: lstm hidden and layers must be positive");
        const bool wants_attn = kind == ModelKind::attn_lstm;
        const bool wants_gcnn = kind == ModelKind::gcnn_lstm;
        if (wants_attn != attn.has_value())
            throw ConfigError("model spec: " + to_string(kind) + (wants_attn ? " requires" : " must not have") +
                              " an attention group");
        if (wants_gcnn != gcnn.has_value())
            throw ConfigError("model spec: " + to_string(kind) + (wants_gcnn ? " requires" : " must not have") +
                              " a gated-conv group");
        if (attn) {
            if (attn->heads == 0 || input_dim % attn->heads != 0)
                throw ConfigError("model spec: attention heads (" + std::to_string(attn->heads) +
                                  ") must divide the feature dimension (" + std::to_string(input_dim) + ")");
            if (attn->layers == 0) throw ConfigError("model spec: attention layers must be positive");
        }
        if (gcnn) {
            if (gcnn->blocks < 1 || gcnn->blocks > 3) throw ConfigError("model spec: gcnn.blocks must be 1, 2 or 3");
            if (gcnn->kernel % 2 == 0) throw ConfigError("model spec: gcnn.kernel must be odd");
            if (gcnn->channels == 0) throw ConfigError("model spec: gcnn.channels must be positive");
        }
        if (kind == ModelKind::fusion && input_dim != stress_fusion_arity && input_dim != physio_fusion_arity)
            throw ConfigError("model spec: fusion takes 3 (stress) or 5 (physio) prediction tracks, got " +
                              std::to_string(input_dim));
    }
};

inline json to_json(const ModelSpec& s) {
    json j;
    j["kind"] = to_string(s.kind);
    j["input_dim"] = s.input_dim;
    if (s.attn)
        j["attn"] = {{"heads", s.attn->heads},
                     {"layers", s.attn->layers},
                     {"residual", s.attn->residual},
                     {"output_proj", s.attn->output_proj}};
    if (s.gcnn) j["gcnn"] = {{"channels", s.gcnn->channels}, {"kernel", s.gcnn->kernel}, {"blocks", s.gcnn->blocks}};
    j["lstm"] = {{"hidden", s.lstm.hidden}, {"layers", s.lstm.layers}, {"bidirectional", s.lstm.bidirectional}};
    return j;
}

inline ModelSpec model_spec_from_json(const json& j) {
    ModelSpec s;
    s.kind = parse_model_kind(j.at("kind").get<std::string>());
    s.input_dim = j.at("input_dim").get<std::size_t>();
    if (j.contains("attn")) {
        const auto& a = j["attn"];
        s.attn = AttnSpec{a.at("heads").get<std::size_t>(), a.at("layers").get<std::size_t>(),
                          a.value("residual", false), a.value("output_proj", true)};
    }
    if (j.contains("gcnn")) {
        const auto& g = j["gcnn"];
        s.gcnn = GcnnSpec{g.at("channels").get<std::size_t>(), g.at("kernel").get<std::size_t>(),
                          g.at("blocks").get<std::size_t>()};
    }
    const auto& l = j.at("lstm");
    s.lstm = LstmSpec{l.at("hidden").get<std::size_t>(), l.at("layers").get<std::size_t>(),
                      l.value("bidirectional", false)};
    s.validate();
    return s;
}

class SequenceModel {
public:
    SequenceModel() = default;

    static SequenceModel create(const ModelSpec& spec, std::uint64_t seed) {
        spec.validate();
        Rng rng(seed);
        SequenceModel m;
        m.spec_ = spec;
        std::size_t dim = spec.input_dim;
        if (spec.attn)
            for (std::size_t i = 0; i < spec.attn->layers; ++i)
                m.attn_.push_back(AttentionParams::init(dim, spec.attn->heads, spec.attn->output_proj,
                                                        spec.attn->residual, rng));
        if (spec.gcnn)
            for (std::size_t i = 0; i < spec.gcnn->blocks; ++i) {
                m.gcnn_.push_back(GatedConvParams::init(dim, spec.gcnn->channels, spec.gcnn->kernel, rng));
                dim = spec.gcnn->channels;
            }
        for (std::size_t i = 0; i < spec.lstm.layers; ++i) {
            m.lstm_.push_back(LstmParams::init(dim, spec.lstm.hidden, spec.lstm.bidirectional, rng));
            dim = m.lstm_.back().output_dim();
        }
        m.head_ = DenseParams::init(dim, rng);
        return m;
    }

    const ModelSpec& spec() const { return spec_; }

    // x is a stacked batch (layout.rows() x input_dim); returns layout.rows() x 1.
    Var forward(Tape& tape, const Var& x, const SeqLayout& layout) const {
        if (std::size_t(x.cols()) != spec_.input_dim)
            throw ShapeError(to_string(spec_.kind) + ": input " + shape_str(x.value()) + " does not match input_dim " +
                             std::to_string(spec_.input_dim));
        Var h = x;
        for (const auto& a : attn_) h = self_attention(tape, h, a, layout);
        for (const auto& g : gcnn_) h = gated_conv_block(tape, h, g, layout);
        for (const auto& l : lstm_) h = lstm_forward(tape, h, l, layout);
        return dense_head(tape, h, head_);
    }

    Var forward(Tape& tape, const Var& x) const {
        return forward(tape, x, SeqLayout::single(std::size_t(x.rows())));
    }

    // Inference on one full sequence; returns T predictions.
    std::vector<double> predict(const Mat& x) const {
        Tape tape(false);
        Var y = forward(tape, tape.constant(x));
        return std::vector<double>(y.value().data(), y.value().data() + y.value().size());
    }

    template <class F>
    void visit(F&& f) {
        for (std::size_t i = 0; i < attn_.size(); ++i) attn_[i].visit("attn" + std::to_string(i), f);
        for (std::size_t i = 0; i < gcnn_.size(); ++i) gcnn_[i].visit("gcnn" + std::to_string(i), f);
        for (std::size_t i = 0; i < lstm_.size(); ++i) lstm_[i].visit("lstm" + std::to_string(i), f);
        head_.visit("head", f);
    }

    template <class F>
    void visit(F&& f) const {
        const_cast<SequenceModel*>(this)->visit([&](const std::string& name, Tensor& t) { f(name, std::as_const(t)); });
    }

    std::vector<Tensor*> parameters() {
        std::vector<Tensor*> out;
        visit([&](const std::string&, Tensor& t) { out.push_back(&t); });
        return out;
    }

    std::vector<std::string> parameter_names() const {
        std::vector<std::string> out;
        visit([&](const std::string& n, const Tensor&) { out.push_back(n); });
        return out;
    }

    std::size_t parameter_count() const {
        std::size_t n = 0;
        visit([&](const std::string&, const Tensor& t) { n += t.size(); });
        return n;
    }

    std::vector<AttentionParams>& attention_layers() { return attn_; }
    std::vector<GatedConvParams>& gcnn_blocks() { return gcnn_; }
    std::vector<LstmParams>& lstm_layers() { return lstm_; }
    DenseParams& head() { return head_; }

    Checkpoint to_checkpoint(json meta = json::object()) const {
        Checkpoint ck;
        meta["model"] = to_json(spec_);
        ck.meta = std::move(meta);
        visit([&](const std::string& n, const Tensor& t) { ck.tensors.push_back({n, t}); });
        return ck;
    }

    static SequenceModel from_checkpoint(const Checkpoint& ck) {
        if (!ck.meta.contains("model")) throw ParseError("checkpoint has no model spec");
        SequenceModel m = create(model_spec_from_json(ck.meta["model"]), 0);
        m.visit([&](const std::string& n, Tensor& t) {
            const Tensor* src = ck.find(n);
            if (!src) throw ParseError("checkpoint is missing tensor " + n);
            if (src->shape() != t.shape())
                throw ParseError("checkpoint tensor " + n + " has shape " + shape_str(src->shape()) + ", expected " +
                                 shape_str(t.shape()));
            t.values() = src->values();
        });
        return m;
    }

    void save(const std::filesystem::path& path, json meta = json::object()) const {
        save_checkpoint(path, to_checkpoint(std::move(meta)));
    }

    static SequenceModel load(const std::filesystem::path& path) { return from_checkpoint(load_checkpoint(path)); }

private:
    ModelSpec spec_;
    std::vector<AttentionParams> attn_;
    std::vector<GatedConvParams> gcnn_;
    std::vector<LstmParams> lstm_;
    DenseParams head_;
};

namespace detail {

inline void require_kind(const SequenceModel& m, ModelKind k) {
    if (m.spec().kind != k)
        throw ConfigError("model is " + to_string(m.spec().kind) + ", expected " + to_string(k));
}

}  // namespace detail

inline Var attn_lstm_forward(Tape& tape, const Var& x, const SequenceModel& m) {
    detail::require_kind(m, ModelKind::attn_lstm);
    return m.forward(tape, x);
}

inline Var gcnn_lstm_forward(Tape& tape, const Var& x, const SequenceModel& m) {
    detail::require_kind(m, ModelKind::gcnn_lstm);
    return m.forward(tape, x);
}

// ECG, RESP and BPM streams concatenated on the feature axis, then LSTM and head.
inline Var biosignal_forward(Tape& tape, const Var& ecg, const Var& resp, const Var& bpm, const SequenceModel& m) {
    detail::require_kind(m, ModelKind::plain_lstm);
    if (ecg.rows() != resp.rows() || ecg.rows() != bpm.rows())
        throw ShapeError("biosignal_forward: bio streams differ in length (" + std::to_string(ecg.rows()) + ", " +
                         std::to_string(resp.rows()) + ", " + std::to_string(bpm.rows()) + ")");
    return m.forward(tape, concat_features({ecg, resp, bpm}));
}

// Column-concatenates the prediction tracks in the given order and regresses the fused track.
inline Var late_fusion_forward(Tape& tape, const std::vector<Var>& tracks, const SequenceModel& m) {
    detail::require_kind(m, ModelKind::fusion);
    if (tracks.size() != m.spec().input_dim)
        throw ConfigError("late fusion expects " + std::to_string(m.spec().input_dim) + " tracks, got " +
                          std::to_string(tracks.size()));
    for (const Var& t : tracks) {
        if (t.cols() != 1) throw ShapeError("late fusion: tracks must be T x 1, got " + shape_str(t.value()));
        if (t.rows() != tracks.front().rows()) throw ShapeError("late fusion: tracks differ in length");
    }
    return m.forward(tape, concat_features(tracks));
}

// Per-timestep predictions for one target, on the 500 ms grid.
struct PredictionTrack {
    std::string participant;
    std::string target;
    std::vector<std::int64_t> timestamps;
    std::vector<double> values;

    void validate() const {
        if (timestamps.size() != values.size()) throw DataError("prediction track: timestamp/value count mismatch");
        for (std::size_t i = 1; i < timestamps.size(); ++i)
            if (timestamps[i] - timestamps[i - 1] != 500)
                throw DataError("prediction track: timestamps must advance in 500 ms steps");
    }
};

}  // namespace affectfuse
