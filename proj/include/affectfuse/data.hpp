#pragma once

// Feature streams on the 2 Hz grid: CSV ingestion, alignment, windowing,
// stitching, manifests, and a seeded synthetic multimodal dataset.
//
// Feature CSV:  timestamp,f1,...,fd   (integer milliseconds)
// Label CSV:    timestamp,value
// Manifest:     JSON, {"participants": [{"participant", "partition",
//               "features.<modality>": path, "labels.<target>": path}, ...]}
//               with paths relative to the manifest's directory.

#include <algorithm>
#include <charconv>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "json.hpp"

#include "affectfuse/errors.hpp"
#include "affectfuse/objective.hpp"
#include "affectfuse/tensor.hpp"

namespace affectfuse {

using json = nlohmann::json;

inline constexpr std::int64_t frame_step_ms = 500;

struct FeatureStream {
    std::string participant;
    std::string modality;
    std::vector<std::int64_t> timestamps;
    Mat values;  // T x d

    std::size_t steps() const { return timestamps.size(); }
    std::size_t dim() const { return std::size_t(values.cols()); }
};

struct LabelTrack {
    std::string participant;
    std::string target;
    std::vector<std::int64_t> timestamps;
    std::vector<double> values;

    std::size_t steps() const { return timestamps.size(); }
};

// ---------------------------------------------------------------------------
// Number formatting and CSV parsing

inline std::string format_double(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v);
    return std::string(buf, r.ptr);
}

namespace detail {

inline std::string read_file(const std::filesystem::path& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw DataError("cannot open " + path.string());
    std::ostringstream ss;
    ss << is.rdbuf();
    return ss.str();
}

inline void write_file(const std::filesystem::path& path, const std::string& text) {
    if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
    std::ofstream os(path, std::ios::binary | std::ios::trunc);
    if (!os) throw DataError("cannot write " + path.string());
    os.write(text.data(), std::streamsize(text.size()));
    if (!os) throw DataError("write failed for " + path.string());
}

inline std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        const auto pos = line.find(',', start);
        out.push_back(line.substr(start, pos == std::string_view::npos ? std::string_view::npos : pos - start));
        if (pos == std::string_view::npos) break;
        start = pos + 1;
    }
    return out;
}

template <class T>
T parse_cell(std::string_view cell, const std::filesystem::path& path, std::size_t line_no) {
    T v{};
    const char* end = cell.data() + cell.size();
    auto r = std::from_chars(cell.data(), end, v);
    if (r.ec != std::errc() || r.ptr != end)
        throw ParseError(path.string() + ":" + std::to_string(line_no) + ": non-numeric cell '" + std::string(cell) +
                         "'");
    return v;
}

struct CsvTable {
    std::vector<std::string> header;
    std::vector<std::int64_t> timestamps;
    std::vector<double> cells;  // row-major, header.size() - 1 per row
};

inline CsvTable read_timestamped_csv(const std::filesystem::path& path) {
    const std::string text = read_file(path);
    std::string_view rest(text);
    CsvTable t;
    std::size_t line_no = 0;
    std::size_t width = 0;
    while (!rest.empty()) {
        auto nl = rest.find('\n');
        std::string_view line = rest.substr(0, nl);
        rest = nl == std::string_view::npos ? std::string_view{} : rest.substr(nl + 1);
        ++line_no;
        if (!line.empty() && line.back() == '\r') line.remove_suffix(1);
        if (line.empty()) continue;
        auto cells = split_commas(line);
        if (t.header.empty()) {
            for (auto c : cells) t.header.emplace_back(c);
            if (t.header.size() < 2 || t.header[0] != "timestamp")
                throw ParseError(path.string() + ":1: header must start with 'timestamp' and name at least one column");
            width = t.header.size();
            continue;
        }
        if (cells.size() != width)
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": expected " + std::to_string(width) +
                             " cells, got " + std::to_string(cells.size()));
        const auto ts = parse_cell<std::int64_t>(cells[0], path, line_no);
        if (!t.timestamps.empty() && ts <= t.timestamps.back())
            throw ParseError(path.string() + ":" + std::to_string(line_no) + ": timestamps must increase");
        t.timestamps.push_back(ts);
        for (std::size_t i = 1; i < width; ++i) {
            const double v = parse_cell<double>(cells[i], path, line_no);
            if (!std::isfinite(v))
                throw ParseError(path.string() + ":" + std::to_string(line_no) + ": non-finite value");
            t.cells.push_back(v);
        }
    }
    if (t.header.empty()) throw ParseError(path.string() + ": empty file (missing header)");
    return t;
}

}  // namespace detail

inline FeatureStream load_feature_csv(const std::filesystem::path& path, std::string participant = {},
                                      std::string modality = {}) {
    auto t = detail::read_timestamped_csv(path);
    FeatureStream s;
    s.participant = std::move(participant);
    s.modality = std::move(modality);
    const Index d = Index(t.header.size() - 1);
    s.values = Mat(Index(t.timestamps.size()), d);
    std::copy(t.cells.begin(), t.cells.end(), s.values.data());
    s.timestamps = std::move(t.timestamps);
    return s;
}

inline LabelTrack load_label_csv(const std::filesystem::path& path, std::string participant = {},
                                 std::string target = {}) {
    auto t = detail::read_timestamped_csv(path);
    if (t.header.size() != 2) throw ParseError(path.string() + ":1: label file must have columns timestamp,value");
    return LabelTrack{std::move(participant), std::move(target), std::move(t.timestamps), std::move(t.cells)};
}

inline std::string feature_csv_text(const std::vector<std::int64_t>& ts, const Mat& values) {
    std::string out = "timestamp";
    for (Index j = 0; j < values.cols(); ++j) out += ",f" + std::to_string(j + 1);
    out += '\n';
    for (Index i = 0; i < values.rows(); ++i) {
        out += std::to_string(ts[std::size_t(i)]);
        for (Index j = 0; j < values.cols(); ++j) {
            out += ',';
            out += format_double(values(i, j));
        }
        out += '\n';
    }
    return out;
}

inline std::string label_csv_text(const std::vector<std::int64_t>& ts, const std::vector<double>& values) {
    std::string out = "timestamp,value\n";
    for (std::size_t i = 0; i < values.size(); ++i) out += std::to_string(ts[i]) + "," + format_double(values[i]) + "\n";
    return out;
}

inline void write_feature_csv(const std::filesystem::path& path, const FeatureStream& s) {
    detail::write_file(path, feature_csv_text(s.timestamps, s.values));
}

inline void write_label_csv(const std::filesystem::path& path, const std::vector<std::int64_t>& ts,
                            const std::vector<double>& values) {
    if (ts.size() != values.size()) throw DataError("label track: timestamp/value count mismatch");
    detail::write_file(path, label_csv_text(ts, values));
}

// ---------------------------------------------------------------------------
// Alignment

enum class Partition { train, devel, test };

inline std::string to_string(Partition p) {
    switch (p) {
        case Partition::train: return "train";
        case Partition::devel: return "devel";
        case Partition::test: return "test";
    }
    return "?";
}

inline Partition parse_partition(const std::string& s) {
    if (s == "train") return Partition::train;
    if (s == "devel" || s == "dev") return Partition::devel;
    if (s == "test") return Partition::test;
    throw ConfigError("unknown partition '" + s + "' (expected train, devel or test)");
}

struct LabeledSequence {
    std::string participant;
    Partition partition = Partition::train;
    std::vector<std::int64_t> timestamps;
    std::map<std::string, Mat> features;
    std::map<std::string, std::vector<double>> labels;
    std::map<std::string, std::size_t> dropped;  // rows truncated per stream

    std::size_t steps() const { return timestamps.size(); }
    bool has_label(const std::string& target) const { return labels.count(target) != 0; }
};

namespace detail {

inline void check_grid(const std::vector<std::int64_t>& ts, const std::string& what) {
    if (ts.empty()) throw DataError(what + ": stream is empty");
    for (std::size_t i = 1; i < ts.size(); ++i) {
        const auto step = ts[i] - ts[i - 1];
        if (step == frame_step_ms) continue;
        std::string msg = what + ": timestamp step " + std::to_string(step) + " ms at row " + std::to_string(i + 1) +
                          ", expected 500 ms (2 Hz)";
        if (step < frame_step_ms) msg += "; resample the raw signal to the 2 Hz feature grid first";
        throw DataError(msg);
    }
}

}  // namespace detail

// Truncates every stream and label track to the common time range.
inline LabeledSequence align_streams(const std::string& participant, const std::vector<FeatureStream>& streams,
                                     const std::vector<LabelTrack>& labels) {
    if (streams.empty() && labels.empty()) throw DataError("align " + participant + ": nothing to align");
    std::int64_t lo = INT64_MIN, hi = INT64_MAX;
    std::optional<std::int64_t> phase;
    auto visit = [&](const std::vector<std::int64_t>& ts, const std::string& name) {
        detail::check_grid(ts, "align " + participant + "/" + name);
        const auto ph = ((ts.front() % frame_step_ms) + frame_step_ms) % frame_step_ms;
        if (phase && *phase != ph)
            throw DataError("align " + participant + "/" + name + ": timestamps are off the shared 500 ms grid");
        phase = ph;
        lo = std::max(lo, ts.front());
        hi = std::min(hi, ts.back());
    };
    for (const auto& s : streams) {
        if (std::size_t(s.values.rows()) != s.timestamps.size())
            throw DataError("align " + participant + "/" + s.modality + ": row count mismatch");
        visit(s.timestamps, s.modality);
    }
    for (const auto& l : labels) {
        if (l.values.size() != l.timestamps.size())
            throw DataError("align " + participant + "/" + l.target + ": row count mismatch");
        visit(l.timestamps, l.target);
    }
    if (lo > hi) throw DataError("align " + participant + ": streams have no overlapping time range");

    LabeledSequence seq;
    seq.participant = participant;
    for (std::int64_t t = lo; t <= hi; t += frame_step_ms) seq.timestamps.push_back(t);
    const Index n = Index(seq.timestamps.size());
    for (const auto& s : streams) {
        const Index off = Index((lo - s.timestamps.front()) / frame_step_ms);
        if (seq.features.count(s.modality)) throw DataError("align " + participant + ": duplicate modality " + s.modality);
        seq.features[s.modality] = s.values.middleRows(off, n);
        seq.dropped[s.modality] = s.timestamps.size() - std::size_t(n);
    }
    for (const auto& l : labels) {
        const auto off = std::size_t((lo - l.timestamps.front()) / frame_step_ms);
        if (seq.labels.count(l.target)) throw DataError("align " + participant + ": duplicate target " + l.target);
        seq.labels[l.target].assign(l.values.begin() + std::ptrdiff_t(off),
                                    l.values.begin() + std::ptrdiff_t(off) + n);
        seq.dropped[l.target] = l.timestamps.size() - std::size_t(n);
    }
    return seq;
}

// ---------------------------------------------------------------------------
// Windowing

struct Window {
    std::size_t start = 0;
    std::size_t length = 0;  // window length including padding
    std::size_t valid = 0;   // positions [0, valid) are real steps

    bool masked(std::size_t i) const { return i >= valid; }
};

// Starts at 0, hop, 2*hop, ...; if the tiling leaves a tail, a final window
// starts at max(0, T - win). A sequence shorter than win gets one padded window.
inline std::vector<Window> window_sequence(std::size_t T, std::size_t win, std::size_t hop) {
    if (T == 0) throw DataError("window_sequence: empty sequence");
    if (win < 1 || hop < 1 || hop > win)
        throw ConfigError("window_sequence: need win >= 1 and 1 <= hop <= win (win " + std::to_string(win) + ", hop " +
                          std::to_string(hop) + ")");
    std::vector<Window> out;
    for (std::size_t s = 0;; s += hop) {
        const std::size_t start = s + win > T ? (T > win ? T - win : 0) : s;
        out.push_back({start, win, std::min(win, T - start)});
        if (s + win >= T) break;
    }
    return out;
}

// Per-step mean over covering windows; padded positions are ignored.
inline std::vector<double> stitch_predictions(std::size_t T, const std::vector<Window>& windows,
                                              const std::vector<std::vector<double>>& outputs) {
    if (windows.size() != outputs.size()) throw DataError("stitch: window and output counts differ");
    std::vector<double> first(T, 0.0), dev(T, 0.0);
    std::vector<std::size_t> count(T, 0);
    for (std::size_t w = 0; w < windows.size(); ++w) {
        const auto& win = windows[w];
        if (outputs[w].size() < win.valid) throw DataError("stitch: window output shorter than its valid length");
        if (win.start + win.valid > T) throw DataError("stitch: window extends past the sequence");
        for (std::size_t i = 0; i < win.valid; ++i) {
            const std::size_t t = win.start + i;
            if (count[t]++ == 0)
                first[t] = outputs[w][i];
            else
                dev[t] += outputs[w][i] - first[t];
        }
    }
    std::vector<double> out(T);
    for (std::size_t t = 0; t < T; ++t) {
        if (count[t] == 0) throw DataError("stitch: step " + std::to_string(t) + " is not covered by any window");
        out[t] = first[t] + dev[t] / double(count[t]);
    }
    return out;
}

// ---------------------------------------------------------------------------
// Feature sets

struct FeatureSet {
    std::string name;
    std::vector<std::string> modalities;
};

// "audio", "video", "bio" (= ecg, resp, bpm) or a '+'/','-separated modality list.
inline FeatureSet parse_feature_set(const std::string& s) {
    if (s == "bio") return {"bio", {"ecg", "resp", "bpm"}};
    FeatureSet f{s, {}};
    std::string cur;
    for (char c : s + ",") {
        if (c == ',' || c == '+') {
            if (cur.empty()) throw ConfigError("empty modality name in feature set '" + s + "'");
            f.modalities.push_back(cur);
            cur.clear();
        } else {
            cur += c;
        }
    }
    return f;
}

inline Mat feature_matrix(const LabeledSequence& seq, const FeatureSet& fs) {
    std::vector<const Mat*> parts;
    Index cols = 0;
    for (const auto& m : fs.modalities) {
        auto it = seq.features.find(m);
        if (it == seq.features.end())
            throw DataError("participant " + seq.participant + " has no '" + m + "' features");
        parts.push_back(&it->second);
        cols += it->second.cols();
    }
    Mat x(Index(seq.steps()), cols);
    Index c = 0;
    for (const Mat* p : parts) {
        x.middleCols(c, p->cols()) = *p;
        c += p->cols();
    }
    return x;
}

// ---------------------------------------------------------------------------
// Manifest

struct Dataset {
    std::filesystem::path root;
    std::vector<LabeledSequence> sequences;
    json synthetic;  // generation report, present for synthetic datasets

    std::vector<const LabeledSequence*> partition(Partition p) const {
        std::vector<const LabeledSequence*> out;
        for (const auto& s : sequences)
            if (s.partition == p) out.push_back(&s);
        return out;
    }

    std::size_t count(Partition p) const { return partition(p).size(); }
};

struct ManifestOptions {
    bool allow_unlabeled_test = false;
    std::optional<std::set<std::string>> modalities;  // load only these, when set
    std::optional<std::set<std::string>> targets;
};

inline Dataset load_manifest(const std::filesystem::path& path, const ManifestOptions& opt = {}) {
    json doc;
    try {
        doc = json::parse(detail::read_file(path));
    } catch (const json::parse_error& e) {
        throw ParseError("manifest " + path.string() + ": " + e.what());
    }
    if (!doc.contains("participants") || !doc["participants"].is_array())
        throw ParseError("manifest " + path.string() + ": missing 'participants' list");
    Dataset ds;
    ds.root = path.parent_path();
    ds.synthetic = doc.value("synthetic", json());
    std::set<std::string> seen;
    std::set<std::string> all_targets;
    for (const auto& e : doc["participants"])
        for (auto it = e.begin(); it != e.end(); ++it)
            if (it.key().rfind("labels.", 0) == 0) all_targets.insert(it.key().substr(7));

    for (const auto& e : doc["participants"]) {
        const std::string pid = e.at("participant").get<std::string>();
        if (!seen.insert(pid).second)
            throw DataError("manifest: participant " + pid + " is listed more than once (partitions must be disjoint)");
        const Partition part = parse_partition(e.at("partition").get<std::string>());
        std::vector<FeatureStream> streams;
        std::vector<LabelTrack> labels;
        std::set<std::string> have_targets;
        for (auto it = e.begin(); it != e.end(); ++it) {
            const std::string& key = it.key();
            const auto resolve = [&] { return ds.root / it.value().get<std::string>(); };
            if (key.rfind("features.", 0) == 0) {
                const std::string mod = key.substr(9);
                if (opt.modalities && !opt.modalities->count(mod)) continue;
                const auto file = resolve();
                if (!std::filesystem::exists(file)) throw DataError("manifest: missing feature file " + file.string());
                streams.push_back(load_feature_csv(file, pid, mod));
            } else if (key.rfind("labels.", 0) == 0) {
                const std::string tgt = key.substr(7);
                if (opt.targets && !opt.targets->count(tgt)) continue;
                const auto file = resolve();
                if (!std::filesystem::exists(file)) {
                    if (part == Partition::test && opt.allow_unlabeled_test) continue;
                    throw DataError("manifest: missing label file " + file.string());
                }
                labels.push_back(load_label_csv(file, pid, tgt));
                have_targets.insert(tgt);
            }
        }
        for (const auto& tgt : all_targets) {
            if (opt.targets && !opt.targets->count(tgt)) continue;
            if (have_targets.count(tgt)) continue;
            if (part == Partition::test && opt.allow_unlabeled_test) continue;
            throw DataError("manifest: participant " + pid + " (" + to_string(part) + ") has no '" + tgt + "' labels");
        }
        LabeledSequence seq = align_streams(pid, streams, labels);
        seq.partition = part;
        // All modalities share one grid.
        for (const auto& [m, x] : seq.features)
            if (std::size_t(x.rows()) != seq.steps()) throw DataError("manifest: misaligned stream " + pid + "/" + m);
        ds.sequences.push_back(std::move(seq));
    }
    // Fixed feature dimension per modality.
    std::map<std::string, Index> dims;
    for (const auto& s : ds.sequences)
        for (const auto& [m, x] : s.features) {
            auto [it, fresh] = dims.emplace(m, x.cols());
            if (!fresh && it->second != x.cols())
                throw DataError("manifest: modality " + m + " has dimension " + std::to_string(x.cols()) + " for " +
                                s.participant + ", expected " + std::to_string(it->second));
        }
    return ds;
}

// ---------------------------------------------------------------------------
// Synthetic dataset

struct SynthModality {
    std::string name;
    std::size_t dim = 1;
    double snr_db = 0.0;
    std::size_t lag = 0;  // steps
};

struct SynthConfig {
    std::size_t n_train = 41;
    std::size_t n_devel = 14;
    std::size_t n_test = 14;
    std::size_t steps = 200;
    std::vector<SynthModality> modalities = {
        {"audio", 88, -12.0, 2}, {"video", 512, -20.0, 6}, {"ecg", 1, 6.0, 0}, {"resp", 1, 6.0, 4}, {"bpm", 1, 6.0, 8},
    };
    std::vector<std::string> targets = {"arousal", "valence", "anno12_EDA"};
    std::uint64_t seed = 0;
    double ridge_lambda = 1.0;

    void validate() const {
        if (n_train + n_devel + n_test == 0) throw ConfigError("synth: no participants requested");
        if (n_train < 1 || n_devel < 1) throw ConfigError("synth: need at least one train and one devel participant");
        if (steps < 2) throw ConfigError("synth: sequence length must be at least 2");
        if (modalities.empty()) throw ConfigError("synth: no modalities");
        if (targets.empty()) throw ConfigError("synth: no targets");
        std::set<std::string> names;
        for (const auto& m : modalities) {
            if (m.dim == 0) throw ConfigError("synth: modality " + m.name + " needs a positive dimension");
            if (!names.insert(m.name).second) throw ConfigError("synth: duplicate modality " + m.name);
        }
    }
};

namespace detail {

inline std::uint64_t splitmix(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

inline std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t a, std::uint64_t b = 0) {
    return splitmix(splitmix(splitmix(seed) ^ a) ^ (b * 0x632be59bd9b4e019ULL));
}

// Rounded to the 8 significant digits the CSV files carry.
inline double quantize(double v) {
    char buf[32];
    auto r = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 8);
    double out = 0;
    std::from_chars(buf, r.ptr, out);
    return out;
}

// Sum of three random-phase sinusoids with periods in [20, 200] steps,
// scaled so max |z| over the generated range is 0.8. Index 0 is step -history.
inline std::vector<double> synth_latent(std::mt19937_64& rng, std::size_t total) {
    std::uniform_real_distribution<double> period(20.0, 200.0), phase(0.0, 2 * M_PI), amp(0.5, 1.0);
    double p[3], ph[3], a[3];
    for (int k = 0; k < 3; ++k) p[k] = period(rng), ph[k] = phase(rng), a[k] = amp(rng);
    std::vector<double> z(total);
    double peak = 0;
    for (std::size_t t = 0; t < total; ++t) {
        double v = 0;
        for (int k = 0; k < 3; ++k) v += a[k] * std::sin(2 * M_PI * double(t) / p[k] + ph[k]);
        z[t] = v;
        peak = std::max(peak, std::abs(v));
    }
    for (auto& v : z) v = quantize(0.8 * v / peak);
    return z;
}

}  // namespace detail

struct SynthResult {
    std::filesystem::path manifest;
    json report;
};

// Ridge regression from single frames to each target, fit on train and scored
// on devel, for every single modality and every modality pair.
inline json ridge_complementarity(const Dataset& ds, const std::vector<std::string>& modalities,
                                  const std::vector<std::string>& targets, double lambda) {
    auto stack = [&](Partition p, Mat& x, Mat& y) {
        const auto seqs = ds.partition(p);
        Index rows = 0, cols = 0;
        for (const auto& m : modalities) cols += seqs.front()->features.at(m).cols();
        for (auto* s : seqs) rows += Index(s->steps());
        x.resize(rows, cols);
        y.resize(rows, Index(targets.size()));
        Index r = 0;
        for (auto* s : seqs) {
            Index c = 0;
            for (const auto& m : modalities) {
                const Mat& f = s->features.at(m);
                x.block(r, c, f.rows(), f.cols()) = f;
                c += f.cols();
            }
            for (std::size_t k = 0; k < targets.size(); ++k)
                for (std::size_t t = 0; t < s->steps(); ++t) y(r + Index(t), Index(k)) = s->labels.at(targets[k])[t];
            r += Index(s->steps());
        }
    };
    Mat xtr, ytr, xdv, ydv;
    stack(Partition::train, xtr, ytr);
    stack(Partition::devel, xdv, ydv);
    const Eigen::RowVectorXd xmean = xtr.colwise().mean();
    const Eigen::RowVectorXd ymean = ytr.colwise().mean();
    xtr.rowwise() -= xmean;
    ytr.rowwise() -= ymean;
    xdv.rowwise() -= xmean;
    const Eigen::MatrixXd gram = xtr.transpose() * xtr;
    const Eigen::MatrixXd xty = xtr.transpose() * ytr;

    std::vector<std::pair<Index, Index>> span;  // column offset and width per modality
    Index off = 0;
    for (const auto& m : modalities) {
        const Index w = ds.partition(Partition::train).front()->features.at(m).cols();
        span.emplace_back(off, w);
        off += w;
    }
    auto score = [&](const std::vector<std::size_t>& use) {
        std::vector<Index> cols;
        for (auto u : use)
            for (Index j = 0; j < span[u].second; ++j) cols.push_back(span[u].first + j);
        const Index n = Index(cols.size());
        Eigen::MatrixXd g(n, n), b(n, Index(targets.size()));
        Mat xs(xdv.rows(), n);
        for (Index i = 0; i < n; ++i) {
            for (Index j = 0; j < n; ++j) g(i, j) = gram(cols[std::size_t(i)], cols[std::size_t(j)]);
            g(i, i) += lambda;
            b.row(i) = xty.row(cols[std::size_t(i)]);
            xs.col(i) = xdv.col(cols[std::size_t(i)]);
        }
        const Eigen::MatrixXd w = g.ldlt().solve(b);
        const Eigen::MatrixXd pred = xs * w;
        std::vector<double> out;
        for (std::size_t k = 0; k < targets.size(); ++k) {
            std::vector<double> p(std::size_t(pred.rows())), y(std::size_t(pred.rows()));
            for (Index r = 0; r < pred.rows(); ++r) {
                p[std::size_t(r)] = pred(r, Index(k)) + ymean(Index(k));
                y[std::size_t(r)] = ydv(r, Index(k));
            }
            out.push_back(ccc(p, y));
        }
        return out;
    };

    json report = json::object();
    std::vector<std::vector<double>> single(modalities.size());
    for (std::size_t m = 0; m < modalities.size(); ++m) single[m] = score({m});
    std::map<std::string, std::vector<double>> pairs;
    for (std::size_t a = 0; a < modalities.size(); ++a)
        for (std::size_t b = a + 1; b < modalities.size(); ++b)
            pairs[modalities[a] + "+" + modalities[b]] = score({a, b});
    for (std::size_t k = 0; k < targets.size(); ++k) {
        json t;
        double best_single = -1, best_pair = -1;
        for (std::size_t m = 0; m < modalities.size(); ++m) {
            t["single"][modalities[m]] = single[m][k];
            best_single = std::max(best_single, single[m][k]);
        }
        for (const auto& [name, v] : pairs) {
            t["pair"][name] = v[k];
            best_pair = std::max(best_pair, v[k]);
        }
        t["best_single"] = best_single;
        t["best_pair"] = best_pair;
        t["complementary"] = best_pair > best_single;
        report[targets[k]] = t;
    }
    return report;
}

// Writes features/<modality>/<pid>.csv, labels/<target>/<pid>.csv and
// manifest.json under out_dir. Each target has its own latent trajectory;
// each modality is a fixed random linear lift of [z_k(t), z_k(t - lag)] over
// all targets k, plus white noise at the modality's SNR.
inline SynthResult synthesize_dataset(const SynthConfig& cfg, const std::filesystem::path& out_dir) {
    cfg.validate();
    std::size_t history = 0;
    for (const auto& m : cfg.modalities) history = std::max(history, m.lag);
    const std::size_t K = cfg.targets.size();

    // Lift matrices shared by all participants: (2K) x d.
    std::vector<Mat> lift;
    for (std::size_t mi = 0; mi < cfg.modalities.size(); ++mi) {
        std::mt19937_64 rng(detail::derive_seed(cfg.seed, 1, mi));
        std::normal_distribution<double> nd(0.0, 1.0);
        Mat a(Index(2 * K), Index(cfg.modalities[mi].dim));
        for (Index i = 0; i < a.size(); ++i) a.data()[i] = nd(rng);
        lift.push_back(std::move(a));
    }

    Dataset ds;
    ds.root = out_dir;
    json participants = json::array();
    const std::size_t total = cfg.n_train + cfg.n_devel + cfg.n_test;
    std::vector<std::int64_t> ts(cfg.steps);
    for (std::size_t t = 0; t < cfg.steps; ++t) ts[t] = std::int64_t(t) * frame_step_ms;

    for (std::size_t p = 0; p < total; ++p) {
        std::string pid = std::to_string(p);
        pid = "p" + std::string(pid.size() < 3 ? 3 - pid.size() : 0, '0') + pid;
        const Partition part = p < cfg.n_train ? Partition::train
                               : p < cfg.n_train + cfg.n_devel ? Partition::devel
                                                               : Partition::test;
        LabeledSequence seq;
        seq.participant = pid;
        seq.partition = part;
        seq.timestamps = ts;

        std::vector<std::vector<double>> z(K);
        for (std::size_t k = 0; k < K; ++k) {
            std::mt19937_64 rng(detail::derive_seed(cfg.seed, 2, p * 64 + k));
            z[k] = detail::synth_latent(rng, cfg.steps + history);
            seq.labels[cfg.targets[k]].assign(z[k].begin() + std::ptrdiff_t(history), z[k].end());
        }
        json entry = {{"participant", pid}, {"partition", to_string(part)}};
        for (std::size_t mi = 0; mi < cfg.modalities.size(); ++mi) {
            const auto& mod = cfg.modalities[mi];
            Mat u(Index(cfg.steps), Index(2 * K));
            for (std::size_t t = 0; t < cfg.steps; ++t)
                for (std::size_t k = 0; k < K; ++k) {
                    u(Index(t), Index(2 * k)) = z[k][t + history];
                    u(Index(t), Index(2 * k + 1)) = z[k][t + history - mod.lag];
                }
            Mat x = u * lift[mi];
            const double signal_var = (x.array() - x.mean()).square().mean();
            const double noise_sd = std::sqrt(signal_var / std::pow(10.0, mod.snr_db / 10.0));
            std::mt19937_64 rng(detail::derive_seed(cfg.seed, 3, p * 64 + mi));
            std::normal_distribution<double> nd(0.0, noise_sd);
            for (Index i = 0; i < x.size(); ++i) x.data()[i] = detail::quantize(x.data()[i] + nd(rng));
            const std::string rel = "features/" + mod.name + "/" + pid + ".csv";
            detail::write_file(out_dir / rel, feature_csv_text(ts, x));
            entry["features." + mod.name] = rel;
            seq.features[mod.name] = std::move(x);
        }
        for (const auto& tgt : cfg.targets) {
            const std::string rel = "labels/" + tgt + "/" + pid + ".csv";
            detail::write_file(out_dir / rel, label_csv_text(ts, seq.labels[tgt]));
            entry["labels." + tgt] = rel;
        }
        participants.push_back(std::move(entry));
        ds.sequences.push_back(std::move(seq));
    }

    std::vector<std::string> mod_names;
    json mods = json::array();
    for (const auto& m : cfg.modalities) {
        mod_names.push_back(m.name);
        mods.push_back({{"name", m.name}, {"dim", m.dim}, {"snr_db", m.snr_db}, {"lag", m.lag}});
    }
    json report;
    report["seed"] = cfg.seed;
    report["steps"] = cfg.steps;
    report["partitions"] = {{"train", cfg.n_train}, {"devel", cfg.n_devel}, {"test", cfg.n_test}};
    report["modalities"] = mods;
    report["targets"] = cfg.targets;
    report["ridge_lambda"] = cfg.ridge_lambda;
    report["ridge_dev_ccc"] = ridge_complementarity(ds, mod_names, cfg.targets, cfg.ridge_lambda);

    json manifest;
    manifest["format"] = "affectfuse-manifest-1";
    manifest["participants"] = std::move(participants);
    manifest["synthetic"] = report;
    const auto mpath = out_dir / "manifest.json";
    detail::write_file(mpath, manifest.dump(2) + "\n");
    return {mpath, report};
}

}  // namespace affectfuse
