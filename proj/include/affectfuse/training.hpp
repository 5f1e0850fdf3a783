#pragma once

// Adam, the plateau learning-rate schedule, windowed mini-batch training with
// dev-CCC model selection, two-stage late fusion, retraining on train+dev and
// grid expansion.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <functional>
#include <limits>
#include <mutex>
#include <numeric>
#include <optional>
#include <random>
#include <set>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "affectfuse/data.hpp"
#include "affectfuse/models.hpp"
#include "affectfuse/objective.hpp"
#include "affectfuse/tensor.hpp"

namespace affectfuse {

// ---------------------------------------------------------------------------
// Adam

struct OptimState {
    std::vector<Mat> m;
    std::vector<Mat> v;
    std::size_t t = 0;
    double lr = 0.001;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;

    static OptimState init(std::span<Tensor* const> params, double lr) {
        OptimState s;
        s.lr = lr;
        for (Tensor* p : params) {
            s.m.push_back(Mat::Zero(p->values().rows(), p->values().cols()));
            s.v.push_back(Mat::Zero(p->values().rows(), p->values().cols()));
        }
        return s;
    }
};

// Rescales grads in place so their global L2 norm is at most max_norm.
inline double clip_by_global_norm(std::vector<Mat>& grads, double max_norm) {
    double sq = 0;
    for (const Mat& g : grads) sq += g.squaredNorm();
    const double norm = std::sqrt(sq);
    if (norm > max_norm)
        for (Mat& g : grads) g *= max_norm / norm;
    return norm;
}

inline void adam_step(std::span<Tensor* const> params, std::span<const Mat> grads, OptimState& s,
                      std::span<const std::string> names = {}) {
    if (params.size() != grads.size() || params.size() != s.m.size())
        throw ShapeError("adam_step: parameter, gradient and state counts differ");
    for (std::size_t i = 0; i < params.size(); ++i) {
        const std::string name = i < names.size() ? names[i] : "#" + std::to_string(i);
        if (grads[i].rows() != params[i]->values().rows() || grads[i].cols() != params[i]->values().cols() ||
            s.m[i].rows() != grads[i].rows() || s.m[i].cols() != grads[i].cols())
            throw ShapeError("adam_step: gradient shape mismatch for parameter " + name);
        if (!grads[i].allFinite()) throw NumericError("adam_step: non-finite gradient for parameter " + name);
    }
    ++s.t;
    const double c1 = 1.0 - std::pow(s.beta1, double(s.t));
    const double c2 = 1.0 - std::pow(s.beta2, double(s.t));
    for (std::size_t i = 0; i < params.size(); ++i) {
        s.m[i] = s.beta1 * s.m[i] + (1.0 - s.beta1) * grads[i];
        s.v[i] = s.beta2 * s.v[i] + (1.0 - s.beta2) * grads[i].cwiseProduct(grads[i]);
        params[i]->values().array() -=
            s.lr * (s.m[i].array() / c1) / ((s.v[i].array() / c2).sqrt() + s.eps);
    }
}

// ---------------------------------------------------------------------------
// Plateau schedule

// Counts epochs without a new minimum of the monitored loss. The first epoch
// has no earlier minimum to beat and counts as stagnant. When the count
// reaches patience the learning rate is multiplied by factor and the count
// restarts.
struct LrSchedule {
    std::size_t patience = 15;
    double factor = 0.5;
    double best = std::numeric_limits<double>::infinity();
    std::size_t stagnant = 0;
    std::size_t epoch = 0;
    std::vector<std::size_t> halvings;  // epochs (1-based) at which lr changed

    bool update(double loss, double& lr) {
        ++epoch;
        if (epoch > 1 && loss < best) {
            stagnant = 0;
        } else {
            ++stagnant;
        }
        best = std::min(best, loss);
        if (stagnant >= patience) {
            lr *= factor;
            stagnant = 0;
            halvings.push_back(epoch);
            return true;
        }
        return false;
    }
};

// ---------------------------------------------------------------------------
// Sequences, batches, prediction

// One full sequence: inputs, and labels when available.
struct SequenceData {
    std::string participant;
    std::vector<std::int64_t> timestamps;
    Mat x;
    std::vector<double> y;
};

inline std::vector<SequenceData> make_sequences(const Dataset& ds, Partition part, const FeatureSet& features,
                                                const std::string& target, bool require_labels = true) {
    std::vector<SequenceData> out;
    for (const auto* s : ds.partition(part)) {
        SequenceData d{s->participant, s->timestamps, feature_matrix(*s, features), {}};
        if (auto it = s->labels.find(target); it != s->labels.end()) {
            d.y = it->second;
        } else if (require_labels) {
            throw DataError("participant " + s->participant + " (" + to_string(part) + ") has no '" + target +
                            "' labels");
        }
        out.push_back(std::move(d));
    }
    return out;
}

struct Batch {
    Mat x;
    SeqLayout layout;
    std::vector<double> y;
    std::unique_ptr<bool[]> mask;
    std::size_t valid = 0;

    std::span<const bool> mask_span() const { return {mask.get(), y.size()}; }
};

struct WindowRef {
    std::size_t seq = 0;
    Window window;
};

// Stacks windows into one padded batch trimmed to the longest valid length.
inline Batch make_batch(std::span<const SequenceData> seqs, std::span<const WindowRef> refs) {
    Batch b;
    std::size_t steps = 0;
    for (const auto& r : refs) steps = std::max(steps, r.window.valid);
    const Index d = seqs[refs.front().seq].x.cols();
    b.layout.steps = steps;
    b.x = Mat::Zero(Index(steps * refs.size()), d);
    b.y.assign(steps * refs.size(), 0.0);
    b.mask.reset(new bool[b.y.size()]());
    for (std::size_t i = 0; i < refs.size(); ++i) {
        const auto& s = seqs[refs[i].seq];
        const auto& w = refs[i].window;
        b.layout.lengths.push_back(w.valid);
        b.x.middleRows(Index(i * steps), Index(w.valid)) = s.x.middleRows(Index(w.start), Index(w.valid));
        for (std::size_t t = 0; t < w.valid; ++t) {
            b.y[i * steps + t] = s.y[w.start + t];
            b.mask[i * steps + t] = true;
        }
        b.valid += w.valid;
    }
    return b;
}

// Full-sequence inference, or windowed and stitched when eval_win is set and shorter than T.
inline std::vector<double> predict_sequence(const SequenceModel& model, const Mat& x, std::size_t eval_win = 0,
                                            std::size_t eval_hop = 0) {
    const std::size_t T = std::size_t(x.rows());
    if (eval_win == 0 || T <= eval_win) return model.predict(x);
    const auto ws = window_sequence(T, eval_win, eval_hop ? eval_hop : eval_win);
    std::vector<std::vector<double>> outs;
    for (const auto& w : ws) outs.push_back(model.predict(x.middleRows(Index(w.start), Index(w.valid))));
    return stitch_predictions(T, ws, outs);
}

struct EvalOptions {
    CccMode mode = CccMode::pooled;
    Moments moments = Moments::population;
    std::size_t eval_win = 0;
    std::size_t eval_hop = 0;
};

inline std::vector<TrackPair> predict_pairs(const SequenceModel& model, std::span<const SequenceData> seqs,
                                            const EvalOptions& opt = {}) {
    std::vector<TrackPair> out;
    for (const auto& s : seqs) {
        if (s.y.empty()) throw DataError("evaluate: participant " + s.participant + " has no labels");
        out.push_back({predict_sequence(model, s.x, opt.eval_win, opt.eval_hop), s.y});
    }
    return out;
}

inline double evaluate(const SequenceModel& model, std::span<const SequenceData> seqs, const EvalOptions& opt = {}) {
    if (seqs.empty()) throw DataError("evaluate: no sequences in partition");
    const auto pairs = predict_pairs(model, seqs, opt);
    return ccc_over(pairs, opt.mode, opt.moments);
}

// ---------------------------------------------------------------------------
// Training loop

enum class Monitor { train, dev };
enum class Selection { best_dev, last };

struct TrainConfig {
    double lr = 0.001;
    std::size_t batch = 64;
    std::size_t epochs = 100;
    std::size_t win = 300;
    std::size_t hop = 50;
    std::size_t patience = 15;
    double lr_factor = 0.5;
    Monitor monitor = Monitor::train;
    Selection selection = Selection::best_dev;
    std::optional<double> clip_norm;
    bool mse_loss = false;  // debug only
    Moments moments = Moments::population;
    EvalOptions eval;
    std::uint64_t seed = 0;
    bool track_train_ccc = false;
    std::optional<double> stop_at_train_ccc;  // stop once full-sequence train CCC reaches this
};

struct EpochRecord {
    std::size_t epoch = 0;
    double train_loss = 0;
    double dev_ccc = std::numeric_limits<double>::quiet_NaN();
    double train_ccc = std::numeric_limits<double>::quiet_NaN();
    double lr = 0;  // learning rate used during this epoch
};

struct TrainResult {
    SequenceModel model;  // selected parameters
    std::size_t best_epoch = 0;
    double best_dev_ccc = std::numeric_limits<double>::quiet_NaN();
    std::vector<EpochRecord> history;
    std::vector<std::size_t> halvings;
    double final_lr = 0;
};

inline std::string format_epoch(const EpochRecord& r) {
    auto fmt = [](double v, int prec) {
        if (std::isnan(v)) return std::string("nan");
        char buf[64];
        std::snprintf(buf, sizeof buf, "%.*f", prec, v);
        return std::string(buf);
    };
    return "epoch " + std::to_string(r.epoch) + " train_loss " + fmt(r.train_loss, 6) + " dev_ccc " +
           fmt(r.dev_ccc, 4) + " lr " + format_double(r.lr);
}

// Trains model in place from its current parameters. Each epoch shuffles the
// training windows (seeded per epoch), takes one Adam step per mini-batch on
// the batch-pooled CCC loss, then scores full dev sequences.
inline TrainResult train_model(SequenceModel model, std::span<const SequenceData> train,
                               std::span<const SequenceData> dev, const TrainConfig& cfg,
                               const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    if (train.empty()) throw DataError("train: no training sequences");
    if (cfg.batch == 0 || cfg.epochs == 0) throw ConfigError("train: batch and epochs must be positive");
    if (!(cfg.lr > 0)) throw ConfigError("train: learning rate must be positive");
    for (const auto& s : train)
        if (s.y.size() != std::size_t(s.x.rows()))
            throw DataError("train: participant " + s.participant + " has " + std::to_string(s.y.size()) +
                            " labels for " + std::to_string(s.x.rows()) + " frames");

    std::vector<WindowRef> refs;
    for (std::size_t i = 0; i < train.size(); ++i)
        for (const auto& w : window_sequence(std::size_t(train[i].x.rows()), cfg.win, std::min(cfg.hop, cfg.win)))
            refs.push_back({i, w});

    const auto params = model.parameters();
    const auto names = model.parameter_names();
    OptimState opt = OptimState::init(params, cfg.lr);
    LrSchedule sched{cfg.patience, cfg.lr_factor};
    TrainResult res;
    std::vector<Mat> best;
    const bool use_dev = !dev.empty() && cfg.selection == Selection::best_dev;

    for (std::size_t epoch = 1; epoch <= cfg.epochs; ++epoch) {
        std::mt19937_64 rng(detail::derive_seed(cfg.seed, 100, epoch));
        std::vector<WindowRef> order = refs;
        std::shuffle(order.begin(), order.end(), rng);
        EpochRecord rec;
        rec.epoch = epoch;
        rec.lr = opt.lr;
        double loss_sum = 0;
        std::size_t loss_weight = 0;
        for (std::size_t start = 0, bi = 0; start < order.size(); start += cfg.batch, ++bi) {
            const std::size_t n = std::min(cfg.batch, order.size() - start);
            Batch b = make_batch(train, std::span<const WindowRef>(order.data() + start, n));
            if (b.valid < 2) continue;
            double lv = 0;
            try {
                Tape tape;
                Var pred = model.forward(tape, tape.constant(b.x), b.layout);
                Var loss = cfg.mse_loss ? mse_loss(pred, b.y, b.mask_span())
                                        : ccc_loss(pred, b.y, b.mask_span(), cfg.moments);
                lv = loss.value()(0, 0);
                if (!std::isfinite(lv)) throw NumericError("train: non-finite loss");
                std::vector<Mat> grads;
                if (loss.requires_grad()) {
                    tape.backward(loss);
                    for (Tensor* p : params) grads.push_back(tape.grad(*p));
                } else {
                    for (Tensor* p : params) grads.push_back(Mat::Zero(p->values().rows(), p->values().cols()));
                }
                if (cfg.clip_norm) clip_by_global_norm(grads, *cfg.clip_norm);
                adam_step(params, grads, opt, names);
            } catch (const NumericError& e) {
                throw NumericError(std::string(e.what()) + " (epoch " + std::to_string(epoch) + ", batch " +
                                   std::to_string(bi) + ")");
            }
            loss_sum += lv * double(b.valid);
            loss_weight += b.valid;
        }
        rec.train_loss = loss_weight ? loss_sum / double(loss_weight) : 0.0;
        if (!dev.empty()) rec.dev_ccc = evaluate(model, dev, cfg.eval);
        if (cfg.track_train_ccc || cfg.stop_at_train_ccc) rec.train_ccc = evaluate(model, train, cfg.eval);

        if (use_dev && (best.empty() || rec.dev_ccc > res.best_dev_ccc)) {
            res.best_dev_ccc = rec.dev_ccc;
            res.best_epoch = epoch;
            best.clear();
            for (Tensor* p : params) best.push_back(p->values());
        }
        res.history.push_back(rec);
        if (on_epoch) on_epoch(rec);

        const double monitored = cfg.monitor == Monitor::dev && !dev.empty() ? 1.0 - rec.dev_ccc : rec.train_loss;
        sched.update(monitored, opt.lr);
        if (cfg.stop_at_train_ccc && rec.train_ccc >= *cfg.stop_at_train_ccc) break;
    }
    if (use_dev) {
        for (std::size_t i = 0; i < params.size(); ++i) params[i]->values() = best[i];
    } else {
        res.best_epoch = res.history.back().epoch;
        if (!dev.empty()) res.best_dev_ccc = res.history.back().dev_ccc;
    }
    res.halvings = sched.halvings;
    res.final_lr = opt.lr;
    res.model = std::move(model);
    return res;
}

// ---------------------------------------------------------------------------
// Unimodal models and hyperparameters

struct Hyper {
    std::size_t heads = 4;
    std::size_t attn_layers = 1;
    std::size_t hidden = 64;
    std::size_t lstm_layers = 2;
    std::size_t channels = 64;
    std::size_t kernel = 3;
    std::size_t blocks = 2;
    double lr = 0.001;
    std::size_t batch = 64;
};

inline json to_json(const Hyper& h) {
    return {{"heads", h.heads},       {"attn_layers", h.attn_layers}, {"hidden", h.hidden},
            {"lstm_layers", h.lstm_layers}, {"channels", h.channels}, {"kernel", h.kernel},
            {"blocks", h.blocks},     {"lr", h.lr},                   {"batch", h.batch}};
}

inline ModelSpec unimodal_spec(ModelKind kind, std::size_t input_dim, const Hyper& h, bool attn_residual = false,
                               bool attn_output_proj = true) {
    ModelSpec s;
    s.kind = kind;
    s.input_dim = input_dim;
    s.lstm = {h.hidden, h.lstm_layers, false};
    if (kind == ModelKind::attn_lstm) s.attn = AttnSpec{h.heads, h.attn_layers, attn_residual, attn_output_proj};
    if (kind == ModelKind::gcnn_lstm) s.gcnn = GcnnSpec{h.channels, h.kernel, h.blocks};
    if (kind == ModelKind::fusion) throw ConfigError("unimodal_spec: fusion models are built by train_fusion");
    s.validate();
    return s;
}

inline bool is_physio_target(const std::string& target) { return target == "anno12_EDA"; }

// Confines hyperparameters to the published search sets.
inline void check_strict_grid(ModelKind kind, const Hyper& h, const std::string& target) {
    auto in = [](auto v, std::initializer_list<decltype(v)> set) {
        return std::find(set.begin(), set.end(), v) != set.end();
    };
    auto fail = [](const std::string& what) { throw ConfigError("strict_grid: " + what); };
    if (!in(h.batch, {std::size_t(64), std::size_t(128), std::size_t(256)}))
        fail("batch " + std::to_string(h.batch) + " not in {64, 128, 256}");
    if (!in(h.lr, {0.0002, 0.001, 0.002, 0.005}))
        fail("lr " + format_double(h.lr) + " not in {0.0002, 0.001, 0.002, 0.005}");
    if (is_physio_target(target)) {
        if (!in(h.hidden, {std::size_t(128), std::size_t(256), std::size_t(1024)}))
            fail("hidden " + std::to_string(h.hidden) + " not in {128, 256, 1024} for " + target);
    } else if (!in(h.hidden, {std::size_t(64), std::size_t(128), std::size_t(256)})) {
        fail("hidden " + std::to_string(h.hidden) + " not in {64, 128, 256} for " + target);
    }
    if (kind == ModelKind::attn_lstm) {
        if (!in(h.heads, {std::size_t(4), std::size_t(8)})) fail("heads " + std::to_string(h.heads) + " not in {4, 8}");
        if (!in(h.attn_layers, {std::size_t(1), std::size_t(2), std::size_t(4)}))
            fail("attention layers " + std::to_string(h.attn_layers) + " not in {1, 2, 4}");
    }
    if (kind == ModelKind::gcnn_lstm && !in(h.channels, {std::size_t(64), std::size_t(128)}))
        fail("channels " + std::to_string(h.channels) + " not in {64, 128}");
    if (kind == ModelKind::fusion) return;
    if (is_physio_target(target)) {
        if (!in(h.lstm_layers, {std::size_t(1), std::size_t(2), std::size_t(4)}))
            fail("lstm layers " + std::to_string(h.lstm_layers) + " not in {1, 2, 4} for " + target);
    } else if (!in(h.lstm_layers, {std::size_t(2), std::size_t(4)})) {
        fail("lstm layers " + std::to_string(h.lstm_layers) + " not in {2, 4} for " + target);
    }
}

// Lists of candidate values; the grid is their cartesian product.
struct GridSpec {
    std::vector<std::size_t> heads{4};
    std::vector<std::size_t> attn_layers{1};
    std::vector<std::size_t> hidden{64};
    std::vector<std::size_t> lstm_layers{2};
    std::vector<std::size_t> channels{64};
    std::vector<std::size_t> kernel{3};
    std::vector<std::size_t> blocks{2};
    std::vector<double> lr{0.001};
    std::vector<std::size_t> batch{64};
};

// Axes irrelevant to the model kind collapse to their first value.
inline std::vector<Hyper> expand_grid(const GridSpec& g, ModelKind kind) {
    auto axis = [](const auto& v, bool used) {
        if (v.empty()) throw ConfigError("grid axis with no values");
        return used ? v : std::decay_t<decltype(v)>{v.front()};
    };
    const bool attn = kind == ModelKind::attn_lstm, gcnn = kind == ModelKind::gcnn_lstm;
    std::vector<Hyper> out;
    for (auto heads : axis(g.heads, attn))
        for (auto al : axis(g.attn_layers, attn))
            for (auto ch : axis(g.channels, gcnn))
                for (auto k : axis(g.kernel, gcnn))
                    for (auto bl : axis(g.blocks, gcnn))
                        for (auto hid : axis(g.hidden, true))
                            for (auto ll : axis(g.lstm_layers, true))
                                for (auto lr : axis(g.lr, true))
                                    for (auto b : axis(g.batch, true))
                                        out.push_back(Hyper{heads, al, hid, ll, ch, k, bl, lr, b});
    return out;
}

inline TrainConfig with_hyper(TrainConfig cfg, const Hyper& h) {
    cfg.lr = h.lr;
    cfg.batch = h.batch;
    return cfg;
}

inline TrainResult train_unimodal(ModelKind kind, const Hyper& h, std::span<const SequenceData> train,
                                  std::span<const SequenceData> dev, const TrainConfig& cfg,
                                  const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    if (train.empty()) throw DataError("train: no training sequences");
    auto model = SequenceModel::create(unimodal_spec(kind, std::size_t(train.front().x.cols()), h), cfg.seed);
    return train_model(std::move(model), train, dev, with_hyper(cfg, h), on_epoch);
}

// Fixed-budget retraining on train and dev pooled; no selection.
inline TrainResult retrain_with_dev(const ModelSpec& spec, std::span<const SequenceData> train,
                                    std::span<const SequenceData> dev, std::size_t epochs, TrainConfig cfg) {
    if (epochs == 0) throw ConfigError("retrain: epoch budget must be positive");
    std::vector<SequenceData> pool(train.begin(), train.end());
    pool.insert(pool.end(), dev.begin(), dev.end());
    cfg.epochs = epochs;
    cfg.selection = Selection::last;
    cfg.stop_at_train_ccc.reset();
    if (cfg.monitor == Monitor::dev) cfg.monitor = Monitor::train;
    return train_model(SequenceModel::create(spec, cfg.seed), pool, {}, cfg);
}

// Runs fn(i) for i in [0, n) on up to jobs threads. Results must be written
// to per-index slots; the first exception is rethrown.
inline void parallel_for(std::size_t n, std::size_t jobs, const std::function<void(std::size_t)>& fn) {
    jobs = std::max<std::size_t>(1, std::min(jobs, n));
    if (jobs == 1) {
        for (std::size_t i = 0; i < n; ++i) fn(i);
        return;
    }
    std::mutex mu;
    std::size_t next = 0;
    std::exception_ptr err;
    std::vector<std::thread> pool;
    for (std::size_t j = 0; j < jobs; ++j)
        pool.emplace_back([&] {
            while (true) {
                std::size_t i;
                {
                    std::lock_guard lock(mu);
                    if (next >= n || err) return;
                    i = next++;
                }
                try {
                    fn(i);
                } catch (...) {
                    std::lock_guard lock(mu);
                    if (!err) err = std::current_exception();
                }
            }
        });
    for (auto& t : pool) t.join();
    if (err) std::rethrow_exception(err);
}

// ---------------------------------------------------------------------------
// Late fusion

// A frozen unimodal model and the features it reads.
struct FusionMember {
    const SequenceModel* model = nullptr;
    FeatureSet features;
    std::string target;
};

// Per-sequence fusion inputs: one column per member prediction, in member order.
inline std::vector<SequenceData> fusion_inputs(std::span<const FusionMember> members, const Dataset& ds, Partition part,
                                               const std::string& target, const EvalOptions& eval = {},
                                               bool require_labels = true) {
    if (members.size() != stress_fusion_arity && members.size() != physio_fusion_arity)
        throw ConfigError("fusion expects 3 (stress) or 5 (physio) member runs, got " + std::to_string(members.size()));
    for (const auto& m : members)
        if (m.target != target)
            throw ConfigError("fusion members must share one target: got '" + m.target + "' and '" + target + "'");
    std::vector<SequenceData> out;
    for (const auto* s : ds.partition(part)) {
        SequenceData d{s->participant, s->timestamps, Mat(Index(s->steps()), Index(members.size())), {}};
        for (std::size_t k = 0; k < members.size(); ++k) {
            const auto p = predict_sequence(*members[k].model, feature_matrix(*s, members[k].features), eval.eval_win,
                                            eval.eval_hop);
            for (std::size_t t = 0; t < p.size(); ++t) d.x(Index(t), Index(k)) = p[t];
        }
        if (auto it = s->labels.find(target); it != s->labels.end())
            d.y = it->second;
        else if (require_labels)
            throw DataError("participant " + s->participant + " has no '" + target + "' labels");
        out.push_back(std::move(d));
    }
    return out;
}

struct FusionConfig {
    bool bidirectional = true;
    std::size_t hidden = 32;
    TrainConfig train = [] {
        TrainConfig c;
        c.lr = 0.001;
        c.batch = 64;
        c.epochs = 20;
        c.win = 60;
        c.hop = 2;
        return c;
    }();
};

// Stage two: trains only the fusion regressor on member predictions.
inline TrainResult train_fusion(std::span<const FusionMember> members, const Dataset& ds, const std::string& target,
                                const FusionConfig& cfg, const std::function<void(const EpochRecord&)>& on_epoch = {}) {
    if (cfg.train.epochs > 20) throw ConfigError("fusion training is limited to 20 epochs");
    const auto train = fusion_inputs(members, ds, Partition::train, target, cfg.train.eval);
    const auto dev = fusion_inputs(members, ds, Partition::devel, target, cfg.train.eval);
    auto model = SequenceModel::create(ModelSpec::fusion(members.size(), cfg.bidirectional, cfg.hidden), cfg.train.seed);
    return train_model(std::move(model), train, dev, cfg.train, on_epoch);
}

}  // namespace affectfuse
