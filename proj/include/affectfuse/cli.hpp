#pragma once

// Command-line front end: synth, train, fuse, evaluate, predict, gradcheck.
//
// Settings resolve as built-in defaults < JSON config file (--config) < flags.
// The seed falls back to AFFECTFUSE_SEED, then 0, when neither sets it.
//
// A run directory holds config.json (the resolved config; re-running it
// reproduces the run), checkpoint.afck, manifest.json (what evaluate and
// predict need to rebuild the predictor), train.log and summary.json.

#include <cstdio>
#include <cstdlib>
#include <deque>
#include <filesystem>
#include <functional>
#include <iomanip>
#include <iostream>
#include <map>
#include <mutex>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "affectfuse/data.hpp"
#include "affectfuse/gradcheck_suite.hpp"
#include "affectfuse/models.hpp"
#include "affectfuse/training.hpp"

namespace affectfuse::cli {

namespace fs = std::filesystem;

enum ExitCode : int { exit_ok = 0, exit_usage = 1, exit_numeric = 2, exit_acceptance = 3 };

// Test seams.
struct Hooks {
    std::function<void(Mat&)> gradcheck_corrupt;
};

inline std::string fmt4(double v) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%.4f", v);
    return buf;
}

// FNV-1a, 64 bit.
inline std::uint64_t fnv1a(std::string_view bytes) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : bytes) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hex64(std::uint64_t v) {
    std::ostringstream os;
    os << std::hex << std::setw(16) << std::setfill('0') << v;
    return os.str();
}

inline std::string file_checksum(const fs::path& p) { return hex64(fnv1a(detail::read_file(p))); }

// ---------------------------------------------------------------------------
// Config plumbing

namespace detail {

using json_pointer = json::json_pointer;

inline json read_json(const fs::path& p) {
    try {
        return json::parse(affectfuse::detail::read_file(p));
    } catch (const json::parse_error& e) {
        throw ParseError(p.string() + ": " + e.what());
    }
}

inline void write_json(const fs::path& p, const json& j) { affectfuse::detail::write_file(p, j.dump(2) + "\n"); }

template <class T>
T get(const json& cfg, const std::string& ptr) {
    try {
        return cfg.at(json_pointer(ptr)).get<T>();
    } catch (const json::exception& e) {
        throw ConfigError("config " + ptr + ": " + e.what());
    }
}

inline bool is_count(const json& v) { return v.is_number_integer() && v.get<std::int64_t>() >= 0; }

inline std::size_t get_count(const json& cfg, const std::string& ptr) {
    const json& v = cfg.at(json_pointer(ptr));
    if (!is_count(v)) throw ConfigError("config " + ptr + ": expected a non-negative integer, got " + v.dump());
    return v.get<std::size_t>();
}

template <class T>
std::vector<T> get_list(const json& cfg, const std::string& ptr) {
    const json& v = cfg.at(json_pointer(ptr));
    std::vector<T> out;
    auto one = [&](const json& e) {
        if constexpr (std::is_integral_v<T>) {
            if (!is_count(e))
                throw ConfigError("config " + ptr + ": expected non-negative integers, got " + e.dump());
        } else if (!e.is_number()) {
            throw ConfigError("config " + ptr + ": expected numbers, got " + e.dump());
        }
        out.push_back(e.get<T>());
    };
    if (v.is_array())
        for (const auto& e : v) one(e);
    else
        one(v);
    if (out.empty()) throw ConfigError("config " + ptr + ": empty list");
    return out;
}

// Scalars in grid positions become one-element lists so configs compare and hash uniformly.
inline void listify(json& cfg, const std::vector<std::string>& ptrs) {
    for (const auto& p : ptrs) {
        json& v = cfg[json_pointer(p)];
        if (!v.is_array()) v = json::array({v});
    }
}

inline std::string config_hash(json cfg) {
    for (const char* k : {"out", "jobs", "retrain_with_dev"}) cfg.erase(k);
    return hex64(fnv1a(cfg.dump()));
}

inline std::uint64_t parse_count(const std::string& s, const std::string& what) {
    std::size_t pos = 0;
    unsigned long long v = 0;
    try {
        v = std::stoull(s, &pos);
    } catch (const std::exception&) {
        pos = 0;
    }
    if (pos == 0 || pos != s.size() || s.front() == '-')
        throw ConfigError(what + ": '" + s + "' is not a non-negative integer");
    return v;
}

inline void resolve_seed(json& cfg) {
    if (cfg.contains("seed") && !cfg["seed"].is_null()) {
        if (!is_count(cfg["seed"])) throw ConfigError("config /seed: expected a non-negative integer");
        return;
    }
    const char* env = std::getenv("AFFECTFUSE_SEED");
    cfg["seed"] = env && *env ? parse_count(env, "AFFECTFUSE_SEED") : std::uint64_t{0};
}

// Flags that write into the config at a JSON pointer when given on the command line.
class FlagTable {
public:
    enum class Kind { text, count, real, text_list, count_list, real_list, constant };

    void add(CLI::App* app, const std::string& names, const std::string& ptr, Kind kind, const std::string& help) {
        auto& b = items_.emplace_back();
        b.ptr = ptr;
        b.kind = kind;
        if (kind == Kind::text_list || kind == Kind::count_list || kind == Kind::real_list)
            b.opt = app->add_option(names, b.values, help)->delimiter(',')->expected(1, -1);
        else
            b.opt = app->add_option(names, b.text, help);
    }

    void add_flag(CLI::App* app, const std::string& names, const std::string& ptr, json value,
                  const std::string& help) {
        auto& b = items_.emplace_back();
        b.ptr = ptr;
        b.kind = Kind::constant;
        b.constant = std::move(value);
        b.opt = app->add_flag(names, help);
    }

    void apply(json& cfg) const {
        for (const auto& b : items_) {
            if (b.opt->count() == 0) continue;
            json& dst = cfg[json_pointer(b.ptr)];
            const std::string flag = b.opt->get_name();
            switch (b.kind) {
                case Kind::text: dst = b.text; break;
                case Kind::count: dst = to_count(b.text, flag); break;
                case Kind::real: dst = to_real(b.text, flag); break;
                case Kind::constant: dst = b.constant; break;
                case Kind::text_list: dst = b.values; break;
                case Kind::count_list:
                    dst = json::array();
                    for (const auto& v : b.values) dst.push_back(to_count(v, flag));
                    break;
                case Kind::real_list:
                    dst = json::array();
                    for (const auto& v : b.values) dst.push_back(to_real(v, flag));
                    break;
            }
        }
    }

private:
    struct Binding {
        std::string ptr;
        Kind kind = Kind::text;
        std::string text;
        std::vector<std::string> values;
        json constant;
        CLI::Option* opt = nullptr;
    };

    static std::uint64_t to_count(const std::string& s, const std::string& flag) { return parse_count(s, flag); }

    static double to_real(const std::string& s, const std::string& flag) {
        std::size_t pos = 0;
        double v = 0;
        try {
            v = std::stod(s, &pos);
        } catch (const std::exception&) {
            pos = 0;
        }
        if (pos == 0 || pos != s.size()) throw ConfigError(flag + ": '" + s + "' is not a number");
        return v;
    }

    std::deque<Binding> items_;
};

// Recursive object merge; unlike a JSON merge patch, null is kept as a value.
inline void overlay(json& base, const json& patch) {
    if (!patch.is_object() || !base.is_object()) {
        base = patch;
        return;
    }
    for (const auto& [k, v] : patch.items()) overlay(base[k], v);
}

// Defaults < config file < flags; then the seed fallback.
inline json resolve(json defaults, const std::string& config_path, const FlagTable& flags) {
    if (!config_path.empty()) {
        const json file = read_json(config_path);
        if (!file.is_object()) throw ConfigError(config_path + ": config must be a JSON object");
        overlay(defaults, file);
    }
    flags.apply(defaults);
    resolve_seed(defaults);
    return defaults;
}

inline void prepare_out_dir(const fs::path& dir, bool force) {
    if (fs::exists(dir)) {
        if (!fs::is_directory(dir)) throw ConfigError("output path " + dir.string() + " is not a directory");
        if (!fs::is_empty(dir)) {
            if (!force) throw ConfigError("output directory " + dir.string() + " is not empty (use --force to overwrite)");
            for (const auto& e : fs::directory_iterator(dir)) fs::remove_all(e.path());
        }
    }
    fs::create_directories(dir);
}

inline fs::path absolute_path(const fs::path& p) { return fs::absolute(p).lexically_normal(); }

inline Moments parse_moments(const std::string& s) {
    if (s == "population") return Moments::population;
    if (s == "sample") return Moments::sample;
    throw ConfigError("moments must be population or sample, got '" + s + "'");
}

inline std::string to_string(Moments m) { return m == Moments::population ? "population" : "sample"; }

inline CccMode parse_mode(const std::string& s) {
    if (s == "pooled") return CccMode::pooled;
    if (s == "per-sequence-mean" || s == "per_sequence_mean") return CccMode::per_sequence_mean;
    throw ConfigError("mode must be pooled or per-sequence-mean, got '" + s + "'");
}

inline std::string to_string(CccMode m) { return m == CccMode::pooled ? "pooled" : "per-sequence-mean"; }

inline Monitor parse_monitor(const std::string& s) {
    if (s == "train") return Monitor::train;
    if (s == "dev") return Monitor::dev;
    throw ConfigError("schedule.monitor must be train or dev, got '" + s + "'");
}

inline json eval_json(const EvalOptions& e) {
    return {{"mode", to_string(e.mode)}, {"moments", to_string(e.moments)}, {"win", e.eval_win}, {"hop", e.eval_hop}};
}

inline EvalOptions eval_from_json(const json& j) {
    EvalOptions e;
    e.mode = parse_mode(j.at("mode").get<std::string>());
    e.moments = parse_moments(j.at("moments").get<std::string>());
    e.eval_win = j.at("win").get<std::size_t>();
    e.eval_hop = j.at("hop").get<std::size_t>();
    return e;
}

inline std::string history_log(const TrainResult& r) {
    std::string log;
    for (const auto& e : r.history) log += format_epoch(e) + "\n";
    for (std::size_t h : r.halvings) log += "lr halved after epoch " + std::to_string(h) + "\n";
    log += "best_epoch " + std::to_string(r.best_epoch) + " dev_ccc " + fmt4(r.best_dev_ccc) + "\n";
    return log;
}

inline json history_json(const TrainResult& r) {
    json h = json::array();
    for (const auto& e : r.history) {
        json row = {{"epoch", e.epoch}, {"train_loss", e.train_loss}, {"lr", e.lr}};
        row["dev_ccc"] = std::isnan(e.dev_ccc) ? json() : json(e.dev_ccc);
        h.push_back(row);
    }
    return h;
}

}  // namespace detail

// ---------------------------------------------------------------------------
// Default configs

inline json default_train_config() {
    return {
        {"features", "audio"},
        {"model",
         {{"kind", "attn_lstm"},
          {"attn",
           {{"heads", json::array({4})}, {"layers", json::array({1})}, {"residual", false}, {"output_proj", true}}},
          {"gcnn", {{"channels", json::array({64})}, {"kernel", json::array({3})}, {"blocks", json::array({2})}}},
          {"lstm", {{"hidden", json::array({64})}, {"layers", json::array({2})}}}}},
        {"optimizer", {{"lr", json::array({0.001})}, {"batch", json::array({64})}, {"clip_norm", nullptr}}},
        {"schedule", {{"epochs", 100}, {"patience", 15}, {"factor", 0.5}, {"monitor", "train"}}},
        {"window", {{"win", 300}, {"hop", 50}, {"eval_win", 0}, {"eval_hop", 0}}},
        {"eval", {{"mode", "pooled"}, {"moments", "population"}}},
        {"strict_grid", false},
        {"retrain_with_dev", false},
        {"allow_unlabeled_test", false},
        {"jobs", 1},
    };
}

inline json default_fuse_config() {
    const FusionConfig fc;
    return {
        {"fusion",
         {{"runs", json::array()},
          {"epochs", fc.train.epochs},
          {"lr", fc.train.lr},
          {"batch", fc.train.batch},
          {"hidden", fc.hidden},
          {"bidirectional", fc.bidirectional},
          {"win", fc.train.win},
          {"hop", fc.train.hop},
          {"eval_win", 0},
          {"eval_hop", 0},
          {"patience", fc.train.patience},
          {"factor", fc.train.lr_factor},
          {"monitor", "train"},
          {"clip_norm", nullptr}}},
        {"eval", {{"mode", "pooled"}, {"moments", "population"}}},
    };
}

inline const std::vector<std::string>& grid_pointers() {
    static const std::vector<std::string> p{"/model/attn/heads",  "/model/attn/layers", "/model/gcnn/channels",
                                            "/model/gcnn/kernel", "/model/gcnn/blocks", "/model/lstm/hidden",
                                            "/model/lstm/layers", "/optimizer/lr",      "/optimizer/batch"};
    return p;
}

// ---------------------------------------------------------------------------
// Typed views of a resolved config

struct TrainPlan {
    fs::path manifest;
    std::string target;
    ModelKind kind = ModelKind::attn_lstm;
    FeatureSet features;
    GridSpec grid;
    bool residual = false;
    bool output_proj = true;
    TrainConfig train;
    bool strict_grid = false;
    bool retrain = false;
    bool allow_unlabeled_test = false;
    std::size_t jobs = 1;
    fs::path out;
};

inline TrainPlan train_plan(const json& cfg) {
    using namespace detail;
    TrainPlan p;
    if (!cfg.contains("manifest") || cfg["manifest"].is_null())
        throw ConfigError("train: a dataset manifest is required (--manifest or \"manifest\" in the config)");
    if (!cfg.contains("target") || cfg["target"].is_null())
        throw ConfigError("train: a target is required (--target or \"target\" in the config)");
    p.manifest = get<std::string>(cfg, "/manifest");
    p.target = get<std::string>(cfg, "/target");
    p.kind = parse_model_kind(get<std::string>(cfg, "/model/kind"));
    if (p.kind == ModelKind::fusion) throw ConfigError("train: fusion models are trained with the fuse command");
    p.features = parse_feature_set(get<std::string>(cfg, "/features"));
    p.grid.heads = get_list<std::size_t>(cfg, "/model/attn/heads");
    p.grid.attn_layers = get_list<std::size_t>(cfg, "/model/attn/layers");
    p.grid.channels = get_list<std::size_t>(cfg, "/model/gcnn/channels");
    p.grid.kernel = get_list<std::size_t>(cfg, "/model/gcnn/kernel");
    p.grid.blocks = get_list<std::size_t>(cfg, "/model/gcnn/blocks");
    p.grid.hidden = get_list<std::size_t>(cfg, "/model/lstm/hidden");
    p.grid.lstm_layers = get_list<std::size_t>(cfg, "/model/lstm/layers");
    p.grid.lr = get_list<double>(cfg, "/optimizer/lr");
    p.grid.batch = get_list<std::size_t>(cfg, "/optimizer/batch");
    p.residual = get<bool>(cfg, "/model/attn/residual");
    p.output_proj = get<bool>(cfg, "/model/attn/output_proj");
    auto& t = p.train;
    t.epochs = get_count(cfg, "/schedule/epochs");
    t.patience = get_count(cfg, "/schedule/patience");
    t.lr_factor = get<double>(cfg, "/schedule/factor");
    t.monitor = parse_monitor(get<std::string>(cfg, "/schedule/monitor"));
    t.win = get_count(cfg, "/window/win");
    t.hop = get_count(cfg, "/window/hop");
    t.eval.eval_win = get_count(cfg, "/window/eval_win");
    t.eval.eval_hop = get_count(cfg, "/window/eval_hop");
    t.eval.mode = parse_mode(get<std::string>(cfg, "/eval/mode"));
    t.moments = t.eval.moments = parse_moments(get<std::string>(cfg, "/eval/moments"));
    if (cfg.contains(json_pointer("/optimizer/clip_norm")) && !cfg.at(json_pointer("/optimizer/clip_norm")).is_null())
        t.clip_norm = get<double>(cfg, "/optimizer/clip_norm");
    t.seed = get<std::uint64_t>(cfg, "/seed");
    if (t.win == 0 || t.hop == 0 || t.hop > t.win) throw ConfigError("window: need win >= 1 and 1 <= hop <= win");
    if (!(t.lr_factor > 0 && t.lr_factor < 1)) throw ConfigError("schedule.factor must lie in (0, 1)");
    p.strict_grid = get<bool>(cfg, "/strict_grid");
    p.retrain = get<bool>(cfg, "/retrain_with_dev");
    p.allow_unlabeled_test = get<bool>(cfg, "/allow_unlabeled_test");
    p.jobs = std::max<std::size_t>(1, get_count(cfg, "/jobs"));
    p.out = cfg.contains("out") && !cfg["out"].is_null()
                ? fs::path(get<std::string>(cfg, "/out"))
                : fs::path("runs") / (p.target + "_" + to_string(p.kind) + "_" + p.features.name);
    return p;
}

// The config that reproduces one grid point on its own.
inline json point_config(json cfg, const Hyper& h, const fs::path& out) {
    cfg["model"]["attn"]["heads"] = json::array({h.heads});
    cfg["model"]["attn"]["layers"] = json::array({h.attn_layers});
    cfg["model"]["gcnn"]["channels"] = json::array({h.channels});
    cfg["model"]["gcnn"]["kernel"] = json::array({h.kernel});
    cfg["model"]["gcnn"]["blocks"] = json::array({h.blocks});
    cfg["model"]["lstm"]["hidden"] = json::array({h.hidden});
    cfg["model"]["lstm"]["layers"] = json::array({h.lstm_layers});
    cfg["optimizer"]["lr"] = json::array({h.lr});
    cfg["optimizer"]["batch"] = json::array({h.batch});
    cfg["out"] = out.string();
    cfg["jobs"] = 1;
    cfg["retrain_with_dev"] = false;
    return cfg;
}

// ---------------------------------------------------------------------------
// Loading a finished run back as a predictor

struct LoadedRun {
    fs::path dir;
    json manifest;
    SequenceModel model;
    std::string target;
    FeatureSet features;  // unimodal runs
    EvalOptions eval;
    std::vector<LoadedRun> members;  // fusion runs

    bool is_fusion() const { return manifest.at("kind") == "fusion"; }

    std::set<std::string> modalities() const {
        std::set<std::string> out(features.modalities.begin(), features.modalities.end());
        for (const auto& m : members)
            for (const auto& x : m.modalities()) out.insert(x);
        return out;
    }

    fs::path dataset() const { return manifest.at("dataset").get<std::string>(); }

    std::vector<SequenceData> inputs(const Dataset& ds, Partition part, bool require_labels) const {
        if (!is_fusion()) return make_sequences(ds, part, features, target, require_labels);
        std::vector<FusionMember> fm;
        for (const auto& m : members) fm.push_back({&m.model, m.features, m.target});
        return fusion_inputs(fm, ds, part, target, eval, require_labels);
    }

    std::vector<double> predict(const SequenceData& s) const {
        return predict_sequence(model, s.x, eval.eval_win, eval.eval_hop);
    }
};

inline LoadedRun load_run(const fs::path& dir) {
    LoadedRun r;
    r.dir = detail::absolute_path(dir);
    const auto mpath = r.dir / "manifest.json";
    if (!fs::exists(mpath)) throw DataError("run " + r.dir.string() + " has no manifest.json");
    r.manifest = detail::read_json(mpath);
    const auto ck = r.dir / r.manifest.value("checkpoint", "checkpoint.afck");
    if (!fs::exists(ck)) throw DataError("run " + r.dir.string() + " has no checkpoint " + ck.filename().string());
    r.model = SequenceModel::load(ck);
    r.target = r.manifest.at("target").get<std::string>();
    r.eval = detail::eval_from_json(r.manifest.at("eval"));
    if (r.is_fusion()) {
        for (const auto& m : r.manifest.at("members")) {
            r.members.push_back(load_run(m.at("run").get<std::string>()));
            if (r.members.back().is_fusion()) throw DataError("fusion members must be unimodal runs");
        }
    } else {
        r.features = parse_feature_set(r.manifest.at("features").get<std::string>());
    }
    return r;
}

inline Dataset load_run_dataset(const LoadedRun& run, const fs::path& manifest_override, bool allow_unlabeled_test) {
    ManifestOptions opt;
    opt.allow_unlabeled_test = allow_unlabeled_test;
    opt.modalities = run.modalities();
    opt.targets = std::set<std::string>{run.target};
    return load_manifest(manifest_override.empty() ? run.dataset() : manifest_override, opt);
}

// CCC of a saved run on one partition.
inline double evaluate_run(const LoadedRun& run, const Dataset& ds, Partition part, CccMode mode) {
    const auto seqs = run.inputs(ds, part, true);
    if (seqs.empty()) throw DataError("evaluate: partition " + to_string(part) + " is empty");
    std::vector<TrackPair> pairs;
    for (const auto& s : seqs) pairs.push_back({run.predict(s), s.y});
    return ccc_over(pairs, mode, run.eval.moments);
}

inline double evaluate_run(const fs::path& dir, Partition part, std::optional<CccMode> mode = {},
                           const fs::path& manifest_override = {}) {
    const auto run = load_run(dir);
    const auto ds = load_run_dataset(run, manifest_override, true);
    return evaluate_run(run, ds, part, mode.value_or(run.eval.mode));
}

// ---------------------------------------------------------------------------
// Commands

inline int cmd_synth(const json& cfg, bool force, std::ostream& out) {
    using namespace detail;
    SynthConfig sc;
    if (!cfg.contains("out") || cfg["out"].is_null()) throw ConfigError("synth: --out is required");
    const fs::path dir = get<std::string>(cfg, "/out");
    sc.seed = get<std::uint64_t>(cfg, "/seed");
    if (cfg.contains("t")) sc.steps = get_count(cfg, "/t");
    if (cfg.contains("n_train")) sc.n_train = get_count(cfg, "/n_train");
    if (cfg.contains("n_devel")) sc.n_devel = get_count(cfg, "/n_devel");
    if (cfg.contains("n_test")) sc.n_test = get_count(cfg, "/n_test");
    if (cfg.contains("ridge_lambda")) sc.ridge_lambda = get<double>(cfg, "/ridge_lambda");
    if (cfg.contains("targets")) sc.targets = get<std::vector<std::string>>(cfg, "/targets");
    if (cfg.contains("modalities")) {
        sc.modalities.clear();
        for (const auto& m : cfg["modalities"])
            sc.modalities.push_back({m.at("name").get<std::string>(), m.at("dim").get<std::size_t>(),
                                     m.value("snr_db", 0.0), m.value("lag", std::size_t{0})});
    }
    sc.validate();
    prepare_out_dir(dir, force);
    const auto res = synthesize_dataset(sc, dir);
    out << "manifest " << res.manifest.string() << "\n";
    out << "participants train " << sc.n_train << " devel " << sc.n_devel << " test " << sc.n_test << ", " << sc.steps
        << " steps\n";
    out << "ridge complementarity (devel CCC):\n";
    for (const auto& tgt : sc.targets) {
        const auto& r = res.report["ridge_dev_ccc"][tgt];
        out << "  " << tgt << ": best single " << fmt4(r["best_single"].get<double>()) << ", best pair "
            << fmt4(r["best_pair"].get<double>()) << (r["complementary"].get<bool>() ? "" : " (not complementary)")
            << "\n";
    }
    return exit_ok;
}

struct RunOutcome {
    std::string name;
    Hyper hyper;
    double dev_ccc = 0;
    std::size_t best_epoch = 0;
};

// Trains one grid point into `dir`.
inline RunOutcome train_point(const TrainPlan& plan, const json& point_cfg, const Hyper& h,
                              std::span<const SequenceData> train, std::span<const SequenceData> dev,
                              const fs::path& dir, std::ostream* live) {
    using namespace detail;
    fs::create_directories(dir);
    write_json(dir / "config.json", point_cfg);
    const std::string hash = config_hash(point_cfg);
    const auto spec = unimodal_spec(plan.kind, std::size_t(train.front().x.cols()), h, plan.residual, plan.output_proj);
    auto res = train_model(SequenceModel::create(spec, plan.train.seed), train, dev, with_hyper(plan.train, h),
                           [&](const EpochRecord& e) {
                               if (live) *live << format_epoch(e) << "\n";
                           });
    json meta = {{"target", plan.target},
                 {"features", plan.features.name},
                 {"hyper", to_json(h)},
                 {"config_hash", hash},
                 {"best_epoch", res.best_epoch},
                 {"dev_ccc", res.best_dev_ccc}};
    res.model.save(dir / "checkpoint.afck", meta);
    affectfuse::detail::write_file(dir / "train.log", history_log(res));
    write_json(dir / "manifest.json", {{"kind", "unimodal"},
                                       {"model", to_json(spec)},
                                       {"features", plan.features.name},
                                       {"target", plan.target},
                                       {"dataset", absolute_path(plan.manifest).string()},
                                       {"checkpoint", "checkpoint.afck"},
                                       {"config_hash", hash},
                                       {"eval", eval_json(plan.train.eval)},
                                       {"best_epoch", res.best_epoch},
                                       {"dev_ccc", res.best_dev_ccc}});
    write_json(dir / "summary.json", {{"dev_ccc", res.best_dev_ccc},
                                      {"dev_ccc_4dp", fmt4(res.best_dev_ccc)},
                                      {"best_epoch", res.best_epoch},
                                      {"epochs_run", res.history.size()},
                                      {"halvings", res.halvings},
                                      {"final_lr", res.final_lr},
                                      {"hyper", to_json(h)},
                                      {"config_hash", hash},
                                      {"history", history_json(res)}});
    return {dir.filename().string(), h, res.best_dev_ccc, res.best_epoch};
}

inline int cmd_train(const json& cfg_in, bool force, std::ostream& out) {
    using namespace detail;
    json cfg = cfg_in;
    listify(cfg, grid_pointers());
    if (cfg.contains("manifest") && cfg["manifest"].is_string())
        cfg["manifest"] = absolute_path(cfg["manifest"].get<std::string>()).string();
    const TrainPlan plan = train_plan(cfg);
    const auto grid = expand_grid(plan.grid, plan.kind);
    if (plan.strict_grid)
        for (const auto& h : grid) check_strict_grid(plan.kind, h, plan.target);

    ManifestOptions mopt;
    mopt.allow_unlabeled_test = plan.allow_unlabeled_test;
    mopt.modalities = std::set<std::string>(plan.features.modalities.begin(), plan.features.modalities.end());
    mopt.targets = std::set<std::string>{plan.target};
    const Dataset ds = load_manifest(plan.manifest, mopt);
    const auto train = make_sequences(ds, Partition::train, plan.features, plan.target);
    const auto dev = make_sequences(ds, Partition::devel, plan.features, plan.target);
    if (train.empty()) throw DataError("train: the manifest has no train participants");
    for (const auto& h : grid)
        unimodal_spec(plan.kind, std::size_t(train.front().x.cols()), h, plan.residual, plan.output_proj);

    prepare_out_dir(plan.out, force);
    const bool single = grid.size() == 1;
    std::vector<RunOutcome> outcomes(grid.size());
    out << "train " << to_string(plan.kind) << " on " << plan.features.name << " -> " << plan.target << ", "
        << grid.size() << " grid point" << (single ? "" : "s") << "\n";
    std::mutex mu;
    parallel_for(grid.size(), plan.jobs, [&](std::size_t i) {
        std::string name = std::to_string(i);
        name = "g" + std::string(name.size() < 3 ? 3 - name.size() : 0, '0') + name;
        const fs::path dir = single ? plan.out : plan.out / name;
        outcomes[i] = train_point(plan, point_config(cfg, grid[i], absolute_path(dir)), grid[i], train, dev, dir,
                                  single ? &out : nullptr);
        if (!single) {
            std::lock_guard lock(mu);
            out << name << " done, dev CCC " << fmt4(outcomes[i].dev_ccc) << "\n";
        }
    });

    std::size_t best = 0;
    for (std::size_t i = 1; i < outcomes.size(); ++i)
        if (outcomes[i].dev_ccc > outcomes[best].dev_ccc) best = i;
    if (!single) {
        write_json(plan.out / "config.json", cfg);
        json runs = json::array();
        out << "run   dev_ccc  best_epoch  hyper\n";
        for (const auto& o : outcomes) {
            runs.push_back({{"run", o.name}, {"dev_ccc", o.dev_ccc}, {"best_epoch", o.best_epoch}, {"hyper", to_json(o.hyper)}});
            out << o.name << "  " << fmt4(o.dev_ccc) << "   " << std::setw(10) << o.best_epoch << "  "
                << to_json(o.hyper).dump() << "\n";
        }
        write_json(plan.out / "summary.json", {{"runs", runs},
                                               {"best_run", outcomes[best].name},
                                               {"best_dev_ccc", outcomes[best].dev_ccc},
                                               {"target", plan.target},
                                               {"model", to_string(plan.kind)},
                                               {"features", plan.features.name}});
    }
    const fs::path best_dir = single ? plan.out : plan.out / outcomes[best].name;
    out << "best dev CCC " << fmt4(outcomes[best].dev_ccc) << " (epoch " << outcomes[best].best_epoch << ") in "
        << best_dir.string() << "\n";

    if (plan.retrain) {
        const auto& o = outcomes[best];
        const auto spec =
            unimodal_spec(plan.kind, std::size_t(train.front().x.cols()), o.hyper, plan.residual, plan.output_proj);
        const auto rdir = plan.out / "retrain";
        auto res = retrain_with_dev(spec, train, dev, std::max<std::size_t>(1, o.best_epoch), with_hyper(plan.train, o.hyper));
        fs::create_directories(rdir);
        res.model.save(rdir / "checkpoint.afck", {{"target", plan.target},
                                                  {"features", plan.features.name},
                                                  {"hyper", to_json(o.hyper)},
                                                  {"epochs", o.best_epoch},
                                                  {"pool", "train+devel"}});
        affectfuse::detail::write_file(rdir / "train.log", history_log(res));
        write_json(rdir / "manifest.json", {{"kind", "unimodal"},
                                            {"model", to_json(spec)},
                                            {"features", plan.features.name},
                                            {"target", plan.target},
                                            {"dataset", absolute_path(plan.manifest).string()},
                                            {"checkpoint", "checkpoint.afck"},
                                            {"eval", eval_json(plan.train.eval)},
                                            {"retrained_from", best_dir.string()}});
        write_json(rdir / "summary.json", {{"epochs", o.best_epoch}, {"pool", "train+devel"}, {"hyper", to_json(o.hyper)}});
        out << "retrained on train+devel for " << o.best_epoch << " epochs in " << rdir.string() << "\n";
    }
    return exit_ok;
}

inline int cmd_fuse(const json& cfg, bool force, std::ostream& out) {
    using namespace detail;
    const auto runs = get<std::vector<std::string>>(cfg, "/fusion/runs");
    if (runs.size() != stress_fusion_arity && runs.size() != physio_fusion_arity)
        throw ConfigError("fuse: expected 3 (stress: audio, video, bio) or 5 (physio) runs, got " +
                          std::to_string(runs.size()));
    std::vector<LoadedRun> members;
    for (const auto& r : runs) {
        members.push_back(load_run(r));
        if (members.back().is_fusion()) throw ConfigError("fuse: " + r + " is a fusion run; members must be unimodal");
    }
    const std::string target = members.front().target;
    for (const auto& m : members)
        if (m.target != target)
            throw ConfigError("fuse: runs disagree on target ('" + target + "' vs '" + m.target + "' in " +
                              m.dir.string() + ")");
    json member_info = json::array();
    for (const auto& m : members)
        member_info.push_back({{"run", m.dir.string()},
                               {"features", m.features.name},
                               {"model", m.manifest.at("model").at("kind")},
                               {"checkpoint", "checkpoint.afck"},
                               {"checksum", file_checksum(m.dir / "checkpoint.afck")},
                               {"dev_ccc", m.manifest.value("dev_ccc", json())}});

    FusionConfig fc;
    fc.hidden = get_count(cfg, "/fusion/hidden");
    fc.bidirectional = get<bool>(cfg, "/fusion/bidirectional");
    auto& t = fc.train;
    t.epochs = get_count(cfg, "/fusion/epochs");
    t.lr = get<double>(cfg, "/fusion/lr");
    t.batch = get_count(cfg, "/fusion/batch");
    t.win = get_count(cfg, "/fusion/win");
    t.hop = get_count(cfg, "/fusion/hop");
    t.patience = get_count(cfg, "/fusion/patience");
    t.lr_factor = get<double>(cfg, "/fusion/factor");
    t.monitor = parse_monitor(get<std::string>(cfg, "/fusion/monitor"));
    t.eval.eval_win = get_count(cfg, "/fusion/eval_win");
    t.eval.eval_hop = get_count(cfg, "/fusion/eval_hop");
    t.eval.mode = parse_mode(get<std::string>(cfg, "/eval/mode"));
    t.moments = t.eval.moments = parse_moments(get<std::string>(cfg, "/eval/moments"));
    if (!cfg.at(json_pointer("/fusion/clip_norm")).is_null()) t.clip_norm = get<double>(cfg, "/fusion/clip_norm");
    t.seed = get<std::uint64_t>(cfg, "/seed");
    if (t.win == 0 || t.hop == 0 || t.hop > t.win) throw ConfigError("fusion window: need win >= 1 and 1 <= hop <= win");

    const fs::path manifest = cfg.contains("manifest") && !cfg["manifest"].is_null()
                                  ? fs::path(get<std::string>(cfg, "/manifest"))
                                  : members.front().dataset();
    ManifestOptions mopt;
    for (const auto& m : members)
        for (const auto& x : m.modalities()) {
            if (!mopt.modalities) mopt.modalities.emplace();
            mopt.modalities->insert(x);
        }
    mopt.targets = std::set<std::string>{target};
    mopt.allow_unlabeled_test = cfg.value("allow_unlabeled_test", false);
    const Dataset ds = load_manifest(manifest, mopt);

    const fs::path dir = cfg.contains("out") && !cfg["out"].is_null() ? fs::path(get<std::string>(cfg, "/out"))
                                                                       : fs::path("runs") / ("fusion_" + target);
    for (const auto& m : members)
        if (absolute_path(dir) == m.dir) throw ConfigError("fuse: output directory is a member run");
    prepare_out_dir(dir, force);
    json echo = cfg;
    echo["out"] = absolute_path(dir).string();
    echo["manifest"] = absolute_path(manifest).string();
    echo["fusion"]["runs"] = json::array();
    for (const auto& m : members) echo["fusion"]["runs"].push_back(m.dir.string());
    write_json(dir / "config.json", echo);
    const std::string hash = config_hash(echo);

    std::vector<FusionMember> fm;
    for (const auto& m : members) fm.push_back({&m.model, m.features, m.target});
    out << "fuse " << members.size() << " runs -> " << target << "\n";
    auto res = train_fusion(fm, ds, target, fc, [&](const EpochRecord& e) { out << format_epoch(e) << "\n"; });

    const auto spec = ModelSpec::fusion(members.size(), fc.bidirectional, fc.hidden);
    res.model.save(dir / "checkpoint.afck",
                   {{"target", target}, {"config_hash", hash}, {"best_epoch", res.best_epoch}, {"dev_ccc", res.best_dev_ccc}});
    affectfuse::detail::write_file(dir / "train.log", history_log(res));
    write_json(dir / "manifest.json", {{"kind", "fusion"},
                                       {"model", to_json(spec)},
                                       {"target", target},
                                       {"members", member_info},
                                       {"dataset", absolute_path(manifest).string()},
                                       {"checkpoint", "checkpoint.afck"},
                                       {"config_hash", hash},
                                       {"eval", eval_json(t.eval)},
                                       {"best_epoch", res.best_epoch},
                                       {"dev_ccc", res.best_dev_ccc}});
    write_json(dir / "summary.json", {{"dev_ccc", res.best_dev_ccc},
                                      {"dev_ccc_4dp", fmt4(res.best_dev_ccc)},
                                      {"best_epoch", res.best_epoch},
                                      {"epochs_run", res.history.size()},
                                      {"members", member_info},
                                      {"config_hash", hash},
                                      {"history", history_json(res)}});
    for (const auto& m : member_info) {
        out << "  member " << m["run"].get<std::string>() << " dev CCC "
            << (m["dev_ccc"].is_number() ? fmt4(m["dev_ccc"].get<double>()) : std::string("n/a")) << "\n";
        if (file_checksum(fs::path(m["run"].get<std::string>()) / "checkpoint.afck") != m["checksum"])
            throw DataError("fuse: member checkpoint " + m["run"].get<std::string>() + " changed during fusion");
    }
    out << "fusion dev CCC " << fmt4(res.best_dev_ccc) << " (epoch " << res.best_epoch << ") in " << dir.string()
        << "\n";
    return exit_ok;
}

inline int cmd_evaluate(const std::string& run_dir, const std::string& partition, const std::string& mode,
                        const std::string& manifest, std::ostream& out) {
    const auto run = load_run(run_dir);
    const Partition part = parse_partition(partition);
    const auto ds = load_run_dataset(run, manifest, true);
    std::vector<CccMode> modes;
    if (mode.empty())
        modes = {run.eval.mode};
    else if (mode == "both")
        modes = {CccMode::pooled, CccMode::per_sequence_mean};
    else
        modes = {detail::parse_mode(mode)};
    const auto seqs = run.inputs(ds, part, true);
    if (seqs.empty()) throw DataError("evaluate: partition " + to_string(part) + " is empty");
    std::vector<TrackPair> pairs;
    for (const auto& s : seqs) pairs.push_back({run.predict(s), s.y});
    for (CccMode m : modes)
        out << run.target << " " << to_string(part) << " " << detail::to_string(m) << " CCC "
            << fmt4(ccc_over(pairs, m, run.eval.moments)) << "\n";
    return exit_ok;
}

inline int cmd_predict(const std::string& run_dir, const std::string& partition, const std::string& out_dir,
                       const std::string& manifest, std::ostream& out) {
    const auto run = load_run(run_dir);
    const Partition part = parse_partition(partition);
    const auto ds = load_run_dataset(run, manifest, true);
    const fs::path dir = out_dir.empty() ? run.dir / "predictions" / to_string(part) : fs::path(out_dir);
    const auto seqs = run.inputs(ds, part, false);
    for (const auto& s : seqs) {
        PredictionTrack track{s.participant, run.target, s.timestamps, run.predict(s)};
        track.validate();
        write_label_csv(dir / (s.participant + "_" + run.target + ".csv"), track.timestamps, track.values);
    }
    out << "wrote " << seqs.size() << " " << run.target << " tracks for " << to_string(part) << " to " << dir.string()
        << "\n";
    return exit_ok;
}

inline int cmd_gradcheck(const std::string& module, const Hooks& hooks, std::ostream& out) {
    GradCheckOptions opt;
    opt.corrupt = hooks.gradcheck_corrupt;
    const auto t0 = std::chrono::steady_clock::now();
    const auto cases = run_gradcheck_suite(module, opt);
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
    std::size_t passed = 0;
    out << std::left << std::setw(16) << "module" << std::setw(30) << "case" << std::setw(14) << "max_rel_err"
        << std::setw(9) << "checked"
        << "result\n";
    for (const auto& c : cases) {
        char err[32];
        std::snprintf(err, sizeof err, "%.3e", c.result.max_rel_error);
        out << std::setw(16) << c.module << std::setw(30) << c.label << std::setw(14) << err << std::setw(9)
            << c.result.checked << (c.pass ? "PASS" : "FAIL") << "\n";
        passed += c.pass;
    }
    out << std::right << "gradcheck: " << passed << "/" << cases.size() << " passed in " << std::fixed
        << std::setprecision(2) << secs << " s\n"
        << std::defaultfloat;
    return passed == cases.size() ? exit_ok : exit_acceptance;
}

// ---------------------------------------------------------------------------
// Entry point

inline int run(int argc, const char* const* argv, std::ostream& out = std::cout, std::ostream& err = std::cerr,
               const Hooks& hooks = {}) {
    using Kind = detail::FlagTable::Kind;
    CLI::App app{"affectfuse: multimodal continuous emotion regression with late fusion"};
    app.name("affectfuse");
    app.require_subcommand(1);

    // synth
    auto* synth = app.add_subcommand("synth", "Generate the seeded synthetic multimodal dataset");
    std::string synth_config;
    bool synth_force = false;
    detail::FlagTable synth_flags;
    synth->add_option("--config", synth_config, "JSON config file");
    synth->add_flag("--force", synth_force, "Overwrite a non-empty output directory");
    synth_flags.add(synth, "--out", "/out", Kind::text, "Output directory");
    synth_flags.add(synth, "--seed", "/seed", Kind::count, "Seed (default: AFFECTFUSE_SEED, then 0)");
    synth_flags.add(synth, "--t", "/t", Kind::count, "Steps per sequence (default 200)");
    synth_flags.add(synth, "--n-train", "/n_train", Kind::count, "Train participants (default 41)");
    synth_flags.add(synth, "--n-devel", "/n_devel", Kind::count, "Devel participants (default 14)");
    synth_flags.add(synth, "--n-test", "/n_test", Kind::count, "Test participants (default 14)");

    // train
    auto* train = app.add_subcommand("train", "Train unimodal models over a hyperparameter grid");
    std::string train_config;
    bool train_force = false;
    detail::FlagTable tf;
    train->add_option("--config", train_config, "JSON config file");
    train->add_flag("--force", train_force, "Overwrite a non-empty output directory");
    tf.add(train, "--manifest", "/manifest", Kind::text, "Dataset manifest");
    tf.add(train, "--target", "/target", Kind::text, "arousal, valence or anno12_EDA");
    tf.add(train, "--model", "/model/kind", Kind::text, "attn_lstm, gcnn_lstm or plain_lstm");
    tf.add(train, "--feature,--features", "/features", Kind::text, "Feature set: audio, video, bio or a+b");
    tf.add(train, "--heads", "/model/attn/heads", Kind::count_list, "Attention heads (list)");
    tf.add(train, "--attn-layers", "/model/attn/layers", Kind::count_list, "Attention layers (list)");
    tf.add_flag(train, "--residual", "/model/attn/residual", true, "Residual connection around attention");
    tf.add_flag(train, "--no-output-proj", "/model/attn/output_proj", false, "Drop the attention output projection");
    tf.add(train, "--channels", "/model/gcnn/channels", Kind::count_list, "Gated conv channels (list)");
    tf.add(train, "--kernel", "/model/gcnn/kernel", Kind::count_list, "Gated conv kernel width (list)");
    tf.add(train, "--blocks", "/model/gcnn/blocks", Kind::count_list, "Gated conv blocks, 1 to 3 (list)");
    tf.add(train, "--hidden", "/model/lstm/hidden", Kind::count_list, "LSTM hidden size (list)");
    tf.add(train, "--lstm-layers", "/model/lstm/layers", Kind::count_list, "Stacked LSTM layers (list)");
    tf.add(train, "--lr", "/optimizer/lr", Kind::real_list, "Learning rate (list)");
    tf.add(train, "--batch", "/optimizer/batch", Kind::count_list, "Batch size in windows (list)");
    tf.add(train, "--clip-norm", "/optimizer/clip_norm", Kind::real, "Clip gradients to this global norm");
    tf.add(train, "--epochs", "/schedule/epochs", Kind::count, "Epochs (default 100)");
    tf.add(train, "--patience", "/schedule/patience", Kind::count, "Stagnant epochs before halving lr (default 15)");
    tf.add(train, "--lr-factor", "/schedule/factor", Kind::real, "lr multiplier on stagnation (default 0.5)");
    tf.add(train, "--monitor", "/schedule/monitor", Kind::text, "Loss the schedule watches: train or dev");
    tf.add(train, "--win", "/window/win", Kind::count, "Training window length in steps (default 300)");
    tf.add(train, "--hop", "/window/hop", Kind::count, "Training window hop (default 50)");
    tf.add(train, "--eval-win", "/window/eval_win", Kind::count, "Evaluation window; 0 = full sequence");
    tf.add(train, "--eval-hop", "/window/eval_hop", Kind::count, "Evaluation hop");
    tf.add(train, "--mode", "/eval/mode", Kind::text, "Dev CCC: pooled or per-sequence-mean");
    tf.add(train, "--moments", "/eval/moments", Kind::text, "population or sample");
    tf.add_flag(train, "--strict-grid", "/strict_grid", true, "Restrict hyperparameters to the published grid");
    tf.add_flag(train, "--retrain-with-dev", "/retrain_with_dev", true, "Retrain the best point on train+devel");
    tf.add_flag(train, "--allow-unlabeled-test", "/allow_unlabeled_test", true, "Tolerate missing test labels");
    tf.add(train, "--jobs", "/jobs", Kind::count, "Grid points trained in parallel");
    tf.add(train, "--seed", "/seed", Kind::count, "Seed (default: AFFECTFUSE_SEED, then 0)");
    tf.add(train, "--out", "/out", Kind::text, "Run directory");

    // fuse
    auto* fuse = app.add_subcommand("fuse", "Train the late-fusion model on frozen unimodal runs");
    std::string fuse_config;
    bool fuse_force = false;
    detail::FlagTable ff;
    fuse->add_option("--config", fuse_config, "JSON config file");
    fuse->add_flag("--force", fuse_force, "Overwrite a non-empty output directory");
    ff.add(fuse, "runs", "/fusion/runs", Kind::text_list, "Unimodal run directories, in fusion order");
    ff.add(fuse, "--manifest", "/manifest", Kind::text, "Dataset manifest (default: the first run's)");
    ff.add(fuse, "--epochs", "/fusion/epochs", Kind::count, "Epochs, at most 20 (default 20)");
    ff.add(fuse, "--lr", "/fusion/lr", Kind::real, "Learning rate (default 0.001)");
    ff.add(fuse, "--batch", "/fusion/batch", Kind::count, "Batch size (default 64)");
    ff.add(fuse, "--hidden", "/fusion/hidden", Kind::count, "Bi-LSTM cells per direction (default 32)");
    ff.add_flag(fuse, "--unidirectional", "/fusion/bidirectional", false, "Forward-only fusion LSTM");
    ff.add(fuse, "--win", "/fusion/win", Kind::count, "Training window (default 60)");
    ff.add(fuse, "--hop", "/fusion/hop", Kind::count, "Training hop (default 2)");
    ff.add(fuse, "--eval-win", "/fusion/eval_win", Kind::count, "Evaluation window; 0 = full sequence");
    ff.add(fuse, "--eval-hop", "/fusion/eval_hop", Kind::count, "Evaluation hop");
    ff.add(fuse, "--clip-norm", "/fusion/clip_norm", Kind::real, "Clip gradients to this global norm");
    ff.add(fuse, "--mode", "/eval/mode", Kind::text, "Dev CCC: pooled or per-sequence-mean");
    ff.add(fuse, "--seed", "/seed", Kind::count, "Seed (default: AFFECTFUSE_SEED, then 0)");
    ff.add(fuse, "--out", "/out", Kind::text, "Fusion run directory");

    // evaluate / predict
    auto* evaluate = app.add_subcommand("evaluate", "Score a saved run on one partition");
    std::string eval_run, eval_part = "devel", eval_mode, eval_manifest;
    evaluate->add_option("run", eval_run, "Run directory")->required();
    evaluate->add_option("--partition", eval_part, "train, devel or test (default devel)");
    evaluate->add_option("--mode", eval_mode, "pooled, per-sequence-mean or both (default: the run's mode)");
    evaluate->add_option("--manifest", eval_manifest, "Dataset manifest (default: the run's)");

    auto* predict = app.add_subcommand("predict", "Write per-participant prediction tracks");
    std::string pred_run, pred_part = "test", pred_out, pred_manifest;
    predict->add_option("run", pred_run, "Run directory")->required();
    predict->add_option("--partition", pred_part, "train, devel or test (default test)");
    predict->add_option("--out", pred_out, "Output directory (default: <run>/predictions/<partition>)");
    predict->add_option("--manifest", pred_manifest, "Dataset manifest (default: the run's)");

    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference check of every layer and model");
    std::string gc_module = "all";
    gradcheck->add_option("--module", gc_module, "all or one module name");

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        app.exit(e, out, err);
        return exit_ok;
    } catch (const CLI::CallForAllHelp& e) {
        app.exit(e, out, err);
        return exit_ok;
    } catch (const CLI::ParseError& e) {
        err << "error: " << e.what() << "\nRun with --help for usage.\n";
        return exit_usage;
    }

    try {
        if (synth->parsed()) return cmd_synth(detail::resolve(json::object(), synth_config, synth_flags), synth_force, out);
        if (train->parsed()) return cmd_train(detail::resolve(default_train_config(), train_config, tf), train_force, out);
        if (fuse->parsed()) return cmd_fuse(detail::resolve(default_fuse_config(), fuse_config, ff), fuse_force, out);
        if (evaluate->parsed()) return cmd_evaluate(eval_run, eval_part, eval_mode, eval_manifest, out);
        if (predict->parsed()) return cmd_predict(pred_run, pred_part, pred_out, pred_manifest, out);
        if (gradcheck->parsed()) return cmd_gradcheck(gc_module, hooks, out);
    } catch (const NumericError& e) {
        err << "error: " << e.what() << "\n";
        return exit_numeric;
    } catch (const Error& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const json::exception& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    } catch (const fs::filesystem_error& e) {
        err << "error: " << e.what() << "\n";
        return exit_usage;
    }
    return exit_usage;
}

}  // namespace affectfuse::cli
