#include <gtest/gtest.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unistd.h>

#include "affectfuse/cli.hpp"

using namespace affectfuse;
namespace fs = std::filesystem;

namespace {

struct CliResult {
    int code = 0;
    std::string out, err;
};

CliResult invoke(std::vector<std::string> args, const cli::Hooks& hooks = {}) {
    args.insert(args.begin(), "affectfuse");
    std::vector<const char*> argv;
    for (const auto& a : args) argv.push_back(a.c_str());
    std::ostringstream out, err;
    CliResult r;
    r.code = cli::run(int(argv.size()), argv.data(), out, err, hooks);
    r.out = out.str();
    r.err = err.str();
    return r;
}

std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

json read_json(const fs::path& p) { return json::parse(slurp(p)); }

std::map<std::string, std::string> tree_contents(const fs::path& root) {
    std::map<std::string, std::string> out;
    for (const auto& e : fs::recursive_directory_iterator(root))
        if (e.is_regular_file()) out[fs::relative(e.path(), root).string()] = slurp(e.path());
    return out;
}

class Cli : public ::testing::Test {
protected:
    static inline fs::path root;
    static inline fs::path manifest;

    static void SetUpTestSuite() {
        root = fs::temp_directory_path() / ("affectfuse_cli_" + std::to_string(::getpid()));
        fs::remove_all(root);
        fs::create_directories(root);
        auto r = invoke({"synth", "--out", (root / "data").string(), "--t", "48", "--n-train", "6", "--n-devel", "3",
                      "--n-test", "2", "--seed", "5"});
        ASSERT_EQ(r.code, 0) << r.err;
        manifest = root / "data" / "manifest.json";
    }

    static void TearDownTestSuite() { fs::remove_all(root); }

    static std::vector<std::string> quick_train(const std::string& out, const std::string& model,
                                                const std::string& feature, const std::string& target = "arousal") {
        return {"train", "--manifest", manifest.string(), "--target", target, "--model", model, "--feature", feature,
                "--hidden", "8", "--lstm-layers", "1", "--channels", "8", "--epochs", "3", "--win", "24", "--hop",
                "12", "--out", (root / out).string()};
    }

    // Replaces the values of a flag already present in args, or appends it.
    static void set_flag(std::vector<std::string>& args, const std::string& flag,
                         const std::vector<std::string>& values) {
        auto it = std::find(args.begin(), args.end(), flag);
        if (it == args.end()) {
            args.push_back(flag);
            args.insert(args.end(), values.begin(), values.end());
            return;
        }
        auto end = std::find_if(it + 1, args.end(), [](const std::string& a) { return a.rfind("--", 0) == 0; });
        it = args.erase(it + 1, end);
        args.insert(it, values.begin(), values.end());
    }
};

}  // namespace

TEST_F(Cli, HelpExitsZero) {
    EXPECT_EQ(invoke({"--help"}).code, 0);
    EXPECT_EQ(invoke({"train", "--help"}).code, 0);
}

TEST_F(Cli, UsageErrorsExitOne) {
    EXPECT_EQ(invoke({}).code, 1);
    EXPECT_EQ(invoke({"bogus"}).code, 1);
    EXPECT_EQ(invoke({"train", "--epochs", "many"}).code, 1);
    auto r = invoke({"train", "--target", "arousal"});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("manifest"), std::string::npos);
}

TEST_F(Cli, SynthIsDeterministic) {
    const auto a = root / "synth_a", b = root / "synth_b";
    ASSERT_EQ(invoke({"synth", "--seed", "7", "--out", a.string(), "--t", "20", "--n-train", "2", "--n-devel", "1",
                   "--n-test", "1"})
                  .code,
              0);
    ASSERT_EQ(invoke({"synth", "--seed", "7", "--out", b.string(), "--t", "20", "--n-train", "2", "--n-devel", "1",
                   "--n-test", "1"})
                  .code,
              0);
    EXPECT_TRUE(tree_contents(a) == tree_contents(b));
}

TEST_F(Cli, SynthRefusesNonEmptyDirWithoutForce) {
    const auto d = root / "synth_force";
    const std::vector<std::string> args{"synth", "--out", d.string(), "--t", "10", "--n-train", "1", "--n-devel", "1",
                                        "--n-test", "0"};
    ASSERT_EQ(invoke(args).code, 0);
    auto r = invoke(args);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("--force"), std::string::npos);
    auto forced = args;
    forced.push_back("--force");
    EXPECT_EQ(invoke(forced).code, 0);
}

TEST_F(Cli, SynthMicroDatasetShape) {
    const auto ds = load_manifest(manifest);
    EXPECT_EQ(ds.count(Partition::train), 6u);
    EXPECT_EQ(ds.count(Partition::devel), 3u);
    EXPECT_EQ(ds.count(Partition::test), 2u);
    EXPECT_EQ(ds.sequences.front().steps(), 48u);
}

TEST_F(Cli, SynthDefaultPartitionSizes) {
    const auto d = root / "synth_default";
    auto r = invoke({"synth", "--out", d.string(), "--t", "8"});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ds = load_manifest(d / "manifest.json");
    EXPECT_EQ(ds.count(Partition::train), 41u);
    EXPECT_EQ(ds.count(Partition::devel), 14u);
    EXPECT_EQ(ds.count(Partition::test), 14u);
    fs::remove_all(d);
}

TEST_F(Cli, TrainWritesRunDirectory) {
    auto r = invoke(quick_train("run_attn", "attn_lstm", "audio", "valence"));
    ASSERT_EQ(r.code, 0) << r.err;
    for (const char* f : {"config.json", "checkpoint.afck", "manifest.json", "train.log", "summary.json"})
        EXPECT_TRUE(fs::exists(root / "run_attn" / f)) << f;
    EXPECT_NE(r.out.find("epoch 3 train_loss"), std::string::npos);
    const auto m = read_json(root / "run_attn" / "manifest.json");
    EXPECT_EQ(m["target"], "valence");
    EXPECT_EQ(m["features"], "audio");
    EXPECT_EQ(m["model"]["kind"], "attn_lstm");
}

TEST_F(Cli, TrainOtherArchitecturesAndTargets) {
    EXPECT_EQ(invoke(quick_train("run_gcnn_eda", "gcnn_lstm", "audio", "anno12_EDA")).code, 0);
    auto r = invoke(quick_train("run_bio", "plain_lstm", "bio"));
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_json(root / "run_bio" / "manifest.json")["model"]["input_dim"], 3);
}

TEST_F(Cli, IdenticalConfigsGiveIdenticalCheckpoints) {
    auto a = quick_train("det_a", "attn_lstm", "audio"), b = quick_train("det_b", "attn_lstm", "audio");
    ASSERT_EQ(invoke(a).code, 0);
    ASSERT_EQ(invoke(b).code, 0);
    EXPECT_TRUE(slurp(root / "det_a" / "checkpoint.afck") == slurp(root / "det_b" / "checkpoint.afck"));
    EXPECT_EQ(read_json(root / "det_a" / "summary.json")["dev_ccc_4dp"],
              read_json(root / "det_b" / "summary.json")["dev_ccc_4dp"]);
}

TEST_F(Cli, EchoedConfigReproducesRun) {
    ASSERT_EQ(invoke(quick_train("echo_src", "gcnn_lstm", "video")).code, 0);
    auto r = invoke({"train", "--config", (root / "echo_src" / "config.json").string(), "--out",
                  (root / "echo_dst").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_TRUE(slurp(root / "echo_src" / "checkpoint.afck") == slurp(root / "echo_dst" / "checkpoint.afck"));
}

TEST_F(Cli, FlagsOverrideConfigFile) {
    const auto cfg_path = root / "override.json";
    std::ofstream(cfg_path) << json{{"manifest", manifest.string()},
                                    {"target", "arousal"},
                                    {"model", {{"kind", "plain_lstm"}, {"lstm", {{"hidden", 8}, {"layers", 1}}}}},
                                    {"features", "bio"},
                                    {"schedule", {{"epochs", 3}}},
                                    {"window", {{"win", 24}, {"hop", 12}}}}
                                  .dump();
    auto r = invoke({"train", "--config", cfg_path.string(), "--epochs", "2", "--out", (root / "override").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto echoed = read_json(root / "override" / "config.json");
    EXPECT_EQ(echoed["schedule"]["epochs"], 2);
    EXPECT_EQ(echoed["schedule"]["patience"], 15);
    EXPECT_EQ(echoed["model"]["lstm"]["hidden"], json::array({8}));
    EXPECT_EQ(read_json(root / "override" / "summary.json")["epochs_run"], 2);
}

TEST_F(Cli, SeedFallsBackToEnvironment) {
    ::setenv("AFFECTFUSE_SEED", "41", 1);
    auto r = invoke(quick_train("env_seed", "plain_lstm", "bio"));
    auto flagged = quick_train("flag_seed", "plain_lstm", "bio");
    flagged.insert(flagged.end(), {"--seed", "3"});
    auto r2 = invoke(flagged);
    ::unsetenv("AFFECTFUSE_SEED");
    ASSERT_EQ(r.code, 0) << r.err;
    ASSERT_EQ(r2.code, 0) << r2.err;
    EXPECT_EQ(read_json(root / "env_seed" / "config.json")["seed"], 41);
    EXPECT_EQ(read_json(root / "flag_seed" / "config.json")["seed"], 3);
    ::setenv("AFFECTFUSE_SEED", "x1", 1);
    EXPECT_EQ(invoke(quick_train("bad_seed", "plain_lstm", "bio")).code, 1);
    ::unsetenv("AFFECTFUSE_SEED");
}

TEST_F(Cli, StrictGridBatches) {
    for (const char* b : {"64", "128", "256"}) {
        auto args = quick_train(std::string("strict_") + b, "plain_lstm", "bio");
        set_flag(args, "--hidden", {"64"});
        set_flag(args, "--lstm-layers", {"2"});
        set_flag(args, "--epochs", {"1"});
        args.insert(args.end(), {"--strict-grid", "--batch", b});
        EXPECT_EQ(invoke(args).code, 0) << b;
    }
    auto args = quick_train("strict_100", "plain_lstm", "bio");
    set_flag(args, "--hidden", {"64"});
    set_flag(args, "--lstm-layers", {"2"});
    args.insert(args.end(), {"--strict-grid", "--batch", "100"});
    auto r = invoke(args);
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("batch 100"), std::string::npos);
    EXPECT_FALSE(fs::exists(root / "strict_100"));
}

TEST_F(Cli, GridRunsInParallel) {
    auto args = quick_train("grid", "plain_lstm", "bio");
    set_flag(args, "--hidden", {"4,8"});
    args.insert(args.end(), {"--lr", "0.001", "0.002", "--jobs", "2"});
    auto r = invoke(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto s = read_json(root / "grid" / "summary.json");
    ASSERT_EQ(s["runs"].size(), 4u);
    // Each point matches a sequential single run of the echoed config.
    auto single = invoke({"train", "--config", (root / "grid" / "g003" / "config.json").string(), "--out",
                       (root / "grid_g003").string()});
    ASSERT_EQ(single.code, 0) << single.err;
    EXPECT_TRUE(slurp(root / "grid" / "g003" / "checkpoint.afck") == slurp(root / "grid_g003" / "checkpoint.afck"));
}

TEST_F(Cli, EvaluateMatchesSummary) {
    ASSERT_EQ(invoke(quick_train("eval_run", "attn_lstm", "audio")).code, 0);
    const double summary = read_json(root / "eval_run" / "summary.json")["dev_ccc"].get<double>();
    EXPECT_NEAR(cli::evaluate_run(root / "eval_run", Partition::devel), summary, 1e-12);
    auto r = invoke({"evaluate", (root / "eval_run").string()});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("devel pooled CCC " + cli::fmt4(summary)), std::string::npos);
}

TEST_F(Cli, EvaluateBothModes) {
    ASSERT_EQ(invoke(quick_train("both_run", "plain_lstm", "bio")).code, 0);
    auto r = invoke({"evaluate", (root / "both_run").string(), "--mode", "both"});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_NE(r.out.find("pooled CCC"), std::string::npos);
    EXPECT_NE(r.out.find("per-sequence-mean CCC"), std::string::npos);
    EXPECT_EQ(invoke({"evaluate", (root / "both_run").string(), "--mode", "median"}).code, 1);
}

TEST_F(Cli, EvaluateMissingCheckpointFails) {
    fs::create_directories(root / "empty_run");
    auto r = invoke({"evaluate", (root / "empty_run").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("manifest.json"), std::string::npos);
}

TEST_F(Cli, PredictOnUnlabeledTest) {
    // Manifest copy without test labels.
    auto doc = read_json(manifest);
    for (auto& p : doc["participants"])
        if (p["partition"] == "test")
            for (const char* t : {"labels.arousal", "labels.valence", "labels.anno12_EDA"}) p.erase(t);
    for (auto& p : doc["participants"])
        for (auto& [k, v] : p.items())
            if (k.rfind("features.", 0) == 0 || k.rfind("labels.", 0) == 0)
                v = (manifest.parent_path() / v.get<std::string>()).string();
    const auto unlabeled = root / "unlabeled_manifest.json";
    std::ofstream(unlabeled) << doc.dump();

    auto args = quick_train("unlabeled_run", "plain_lstm", "bio");
    args[2] = unlabeled.string();
    EXPECT_EQ(invoke(args).code, 1);  // test labels missing and not allowed
    args.push_back("--allow-unlabeled-test");
    auto r = invoke(args);
    ASSERT_EQ(r.code, 0) << r.err;
    const auto out = root / "unlabeled_pred";
    r = invoke({"predict", (root / "unlabeled_run").string(), "--partition", "test", "--out", out.string()});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto ds = load_manifest(unlabeled, {true});
    for (const auto* s : ds.partition(Partition::test)) {
        const auto track = load_label_csv(out / (s->participant + "_arousal.csv"));
        EXPECT_EQ(track.timestamps, s->timestamps);
    }
    EXPECT_EQ(invoke({"evaluate", (root / "unlabeled_run").string(), "--partition", "test"}).code, 1);
}

TEST_F(Cli, FuseThreeAndFiveRuns) {
    ASSERT_EQ(invoke(quick_train("m_audio", "attn_lstm", "audio")).code, 0);
    ASSERT_EQ(invoke(quick_train("m_video", "gcnn_lstm", "video")).code, 0);
    ASSERT_EQ(invoke(quick_train("m_bio", "plain_lstm", "bio")).code, 0);
    ASSERT_EQ(invoke(quick_train("m_gaudio", "gcnn_lstm", "audio")).code, 0);
    ASSERT_EQ(invoke(quick_train("m_avideo", "attn_lstm", "video")).code, 0);
    auto p = [](const char* n) { return (root / n).string(); };
    std::map<std::string, std::string> before;
    for (const char* n : {"m_audio", "m_video", "m_bio", "m_gaudio", "m_avideo"})
        before[n] = slurp(root / n / "checkpoint.afck");

    auto r = invoke({"fuse", p("m_audio"), p("m_video"), p("m_bio"), "--epochs", "2", "--out", p("fuse3")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_json(root / "fuse3" / "manifest.json")["model"]["input_dim"], 3);
    r = invoke({"fuse", p("m_gaudio"), p("m_avideo"), p("m_audio"), p("m_video"), p("m_bio"), "--epochs", "2", "--out",
             p("fuse5")});
    ASSERT_EQ(r.code, 0) << r.err;
    EXPECT_EQ(read_json(root / "fuse5" / "manifest.json")["model"]["input_dim"], 5);
    for (const auto& [n, bytes] : before) EXPECT_TRUE(slurp(root / n / "checkpoint.afck") == bytes) << n;

    const double summary = read_json(root / "fuse3" / "summary.json")["dev_ccc"].get<double>();
    EXPECT_NEAR(cli::evaluate_run(root / "fuse3", Partition::devel), summary, 1e-12);
    EXPECT_EQ(invoke({"predict", p("fuse3"), "--partition", "devel"}).code, 0);

    r = invoke({"fuse", p("m_audio"), p("m_video"), p("m_bio"), p("m_gaudio"), "--out", p("fuse4")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("expected 3"), std::string::npos);
    EXPECT_FALSE(fs::exists(root / "fuse4"));
    EXPECT_EQ(invoke({"fuse", p("m_audio"), p("m_video"), p("m_bio"), "--epochs", "21", "--out", p("fuse21")}).code, 1);
}

TEST_F(Cli, FuseRejectsMixedTargets) {
    ASSERT_EQ(invoke(quick_train("t_a", "plain_lstm", "bio", "arousal")).code, 0);
    ASSERT_EQ(invoke(quick_train("t_v", "plain_lstm", "bio", "valence")).code, 0);
    auto r = invoke({"fuse", (root / "t_a").string(), (root / "t_a").string(), (root / "t_v").string(), "--out",
                  (root / "t_mix").string()});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("target"), std::string::npos);
}

TEST_F(Cli, DivergenceExitsTwo) {
    auto args = quick_train("diverge", "plain_lstm", "bio");
    args.insert(args.end(), {"--lr", "1e300"});
    auto r = invoke(args);
    EXPECT_EQ(r.code, 2) << r.err;
    EXPECT_NE(r.err.find("epoch"), std::string::npos);
}

TEST_F(Cli, GradcheckAllPasses) {
    auto r = invoke({"gradcheck", "--module", "all"});
    EXPECT_EQ(r.code, 0) << r.out;
    EXPECT_EQ(r.out.find("FAIL"), std::string::npos);
}

TEST_F(Cli, GradcheckSingleModule) {
    auto r = invoke({"gradcheck", "--module", "self_attention"});
    ASSERT_EQ(r.code, 0);
    EXPECT_NE(r.out.find("self_attention"), std::string::npos);
    EXPECT_EQ(r.out.find("gcnn_lstm"), std::string::npos);
}

TEST_F(Cli, GradcheckCorruptedBackwardFails) {
    cli::Hooks hooks;
    hooks.gradcheck_corrupt = [](Mat& g) { g *= 1.01; };
    auto r = invoke({"gradcheck", "--module", "gated_conv"}, hooks);
    EXPECT_EQ(r.code, 3);
    EXPECT_NE(r.out.find("FAIL"), std::string::npos);
}
