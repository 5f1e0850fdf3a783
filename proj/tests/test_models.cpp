#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <random>
#include <unistd.h>

#include "affectfuse/gradcheck_suite.hpp"
#include "affectfuse/models.hpp"
#include "test_support.hpp"

using namespace affectfuse;
namespace fs = std::filesystem;

namespace {

ModelSpec attn_spec(std::size_t d, std::size_t heads = 4, std::size_t layers = 1, std::size_t hidden = 16) {
    ModelSpec s;
    s.kind = ModelKind::attn_lstm;
    s.input_dim = d;
    s.attn = AttnSpec{heads, layers, false, true};
    s.lstm = {hidden, 2, false};
    return s;
}

ModelSpec gcnn_spec(std::size_t d, std::size_t channels = 16, std::size_t blocks = 2, std::size_t hidden = 16) {
    ModelSpec s;
    s.kind = ModelKind::gcnn_lstm;
    s.input_dim = d;
    s.gcnn = GcnnSpec{channels, 3, blocks};
    s.lstm = {hidden, 1, false};
    return s;
}

ModelSpec plain_spec(std::size_t d, std::size_t hidden = 16) {
    ModelSpec s;
    s.kind = ModelKind::plain_lstm;
    s.input_dim = d;
    s.lstm = {hidden, 1, false};
    return s;
}

std::vector<ModelSpec> all_kinds() { return {attn_spec(8), gcnn_spec(8), plain_spec(8), ModelSpec::fusion(3)}; }

fs::path temp_path(const std::string& name) {
    return fs::temp_directory_path() / ("affectfuse_models_" + std::to_string(::getpid()) + "_" + name);
}

void zero_lstms(SequenceModel& m) {
    for (auto& l : m.lstm_layers())
        l.visit("", [](const std::string&, Tensor& t) { t.values().setZero(); });
}

}  // namespace

TEST(AttnLstm, ZeroLstmGivesHeadBias) {
    auto m = SequenceModel::create(attn_spec(8), 1);
    zero_lstms(m);
    m.head().b.values()(0, 0) = 0.37;
    std::mt19937_64 rng(2);
    auto y = m.predict(afs_test::random_mat(rng, 12, 8));
    for (double v : y) EXPECT_EQ(v, 0.37);
}

TEST(AttnLstm, EgemapsShape) {
    auto m = SequenceModel::create(attn_spec(88, 4, 1, 64), 3);
    std::mt19937_64 rng(4);
    Tape t(false);
    Var y = attn_lstm_forward(t, t.constant(afs_test::random_mat(rng, 30, 88)), m);
    EXPECT_EQ(y.rows(), 30);
    EXPECT_EQ(y.cols(), 1);
}

TEST(GcnnLstm, ZeroLinearKernelGivesHeadBias) {
    auto m = SequenceModel::create(gcnn_spec(8, 16, 1), 5);
    m.gcnn_blocks()[0].w_kernel.values().setZero();
    ASSERT_TRUE((m.gcnn_blocks()[0].w_bias.values().array() == 0).all());
    m.head().b.values()(0, 0) = -0.2;
    std::mt19937_64 rng(6);
    for (double v : m.predict(afs_test::random_mat(rng, 10, 8))) EXPECT_EQ(v, -0.2);
}

TEST(GcnnLstm, VggishShape) {
    auto m = SequenceModel::create(gcnn_spec(128, 64, 2, 64), 7);
    std::mt19937_64 rng(8);
    Tape t(false);
    Var y = gcnn_lstm_forward(t, t.constant(afs_test::random_mat(rng, 25, 128)), m);
    EXPECT_EQ(y.rows(), 25);
    EXPECT_EQ(y.cols(), 1);
}

TEST(Models, KindMismatchRejected) {
    auto m = SequenceModel::create(gcnn_spec(8), 1);
    Tape t(false);
    Var x = t.constant(Mat::Zero(4, 8));
    EXPECT_THROW(attn_lstm_forward(t, x, m), ConfigError);
    EXPECT_THROW(late_fusion_forward(t, {x}, m), ConfigError);
}

TEST(Biosignal, ConcatenatesThreeStreams) {
    auto m = SequenceModel::create(plain_spec(3), 9);
    std::mt19937_64 rng(10);
    Mat e = afs_test::random_mat(rng, 15, 1), r = afs_test::random_mat(rng, 15, 1), b = afs_test::random_mat(rng, 15, 1);
    Mat cat(15, 3);
    cat << e, r, b;
    Tape t(false);
    Var y = biosignal_forward(t, t.constant(e), t.constant(r), t.constant(b), m);
    const auto direct = m.predict(cat);
    ASSERT_EQ(y.rows(), 15);
    for (Index i = 0; i < 15; ++i) EXPECT_EQ(y.value()(i, 0), direct[std::size_t(i)]);
}

TEST(Biosignal, LengthMismatchRejected) {
    auto m = SequenceModel::create(plain_spec(3), 9);
    Tape t(false);
    EXPECT_THROW(biosignal_forward(t, t.constant(Mat::Zero(5, 1)), t.constant(Mat::Zero(5, 1)),
                                   t.constant(Mat::Zero(4, 1)), m),
                 ShapeError);
}

TEST(Biosignal, NotPermutationEquivariant) {
    auto m = SequenceModel::create(plain_spec(3), 11);
    std::mt19937_64 rng(12);
    Mat x = afs_test::random_mat(rng, 20, 3);
    std::vector<Index> perm(20);
    std::iota(perm.begin(), perm.end(), Index{0});
    std::shuffle(perm.begin(), perm.end(), rng);
    Mat px(20, 3);
    for (Index i = 0; i < 20; ++i) px.row(i) = x.row(perm[std::size_t(i)]);
    const auto y = m.predict(x), py = m.predict(px);
    double diff = 0;
    for (Index i = 0; i < 20; ++i) diff = std::max(diff, std::abs(py[std::size_t(i)] - y[std::size_t(perm[std::size_t(i)])]));
    EXPECT_GT(diff, 1e-6);
}

TEST(Fusion, HeadReadsBothDirections) {
    auto m = SequenceModel::create(ModelSpec::fusion(3), 1);
    EXPECT_EQ(m.lstm_layers().size(), 1u);
    EXPECT_TRUE(m.lstm_layers()[0].bidirectional);
    EXPECT_EQ(m.lstm_layers()[0].hidden, 32u);
    EXPECT_EQ(m.head().input_dim(), 64u);
}

TEST(Fusion, ArityEnforced) {
    EXPECT_NO_THROW(ModelSpec::fusion(stress_fusion_arity).validate());
    EXPECT_NO_THROW(ModelSpec::fusion(physio_fusion_arity).validate());
    for (std::size_t k : {1u, 2u, 4u, 6u}) EXPECT_THROW(SequenceModel::create(ModelSpec::fusion(k), 0), ConfigError);
}

TEST(Fusion, WrongTrackCountRejectedBeforeCompute) {
    auto m = SequenceModel::create(ModelSpec::fusion(3), 2);
    Tape t;
    std::vector<Var> tracks;
    for (int i = 0; i < 4; ++i) tracks.push_back(t.constant(Mat::Constant(6, 1, 0.1 * i)));
    const auto before = t.size();
    try {
        late_fusion_forward(t, tracks, m);
        FAIL();
    } catch (const ConfigError& e) {
        EXPECT_NE(std::string(e.what()).find("expects 3"), std::string::npos);
    }
    EXPECT_EQ(t.size(), before);
}

TEST(Fusion, TrackLengthsMustAgree) {
    auto m = SequenceModel::create(ModelSpec::fusion(3), 2);
    Tape t;
    EXPECT_THROW(late_fusion_forward(t, {t.constant(Mat::Zero(6, 1)), t.constant(Mat::Zero(6, 1)),
                                         t.constant(Mat::Zero(5, 1))},
                                     m),
                 ShapeError);
}

TEST(Fusion, OrderMatters) {
    auto m = SequenceModel::create(ModelSpec::fusion(3), 3);
    std::mt19937_64 rng(4);
    Mat a = afs_test::random_mat(rng, 10, 1), v = afs_test::random_mat(rng, 10, 1), b = afs_test::random_mat(rng, 10, 1);
    Tape t(false);
    Var y1 = late_fusion_forward(t, {t.constant(a), t.constant(v), t.constant(b)}, m);
    Var y2 = late_fusion_forward(t, {t.constant(v), t.constant(a), t.constant(b)}, m);
    EXPECT_GT((y1.value() - y2.value()).cwiseAbs().maxCoeff(), 1e-9);
}

TEST(Models, ShapePolymorphicOverLength) {
    std::mt19937_64 rng(13);
    for (const auto& s : all_kinds()) {
        auto m = SequenceModel::create(s, 14);
        for (Index T : {1, 2, 7, 33}) {
            auto y = m.predict(afs_test::random_mat(rng, T, Index(s.input_dim)));
            EXPECT_EQ(y.size(), std::size_t(T)) << to_string(s.kind);
        }
    }
}

TEST(Models, ForwardIsDeterministic) {
    std::mt19937_64 rng(15);
    for (const auto& s : all_kinds()) {
        auto a = SequenceModel::create(s, 16), b = SequenceModel::create(s, 16);
        Mat x = afs_test::random_mat(rng, 19, Index(s.input_dim));
        EXPECT_EQ(a.predict(x), a.predict(x));
        EXPECT_EQ(a.predict(x), b.predict(x));
        EXPECT_NE(a.predict(x), SequenceModel::create(s, 17).predict(x));
    }
}

TEST(Models, BatchedForwardMatchesSingleSequences) {
    auto m = SequenceModel::create(attn_spec(8, 4, 2), 18);
    std::mt19937_64 rng(19);
    Mat a = afs_test::random_mat(rng, 9, 8), b = afs_test::random_mat(rng, 6, 8);
    Mat stacked = Mat::Zero(18, 8);
    stacked.topRows(9) = a;
    stacked.middleRows(9, 6) = b;
    Tape t(false);
    Var y = m.forward(t, t.constant(stacked), SeqLayout{9, {9, 6}});
    const auto ya = m.predict(a), yb = m.predict(b);
    for (Index i = 0; i < 9; ++i) EXPECT_NEAR(y.value()(i, 0), ya[std::size_t(i)], 1e-13);
    for (Index i = 0; i < 6; ++i) EXPECT_NEAR(y.value()(9 + i, 0), yb[std::size_t(i)], 1e-13);
}

TEST(Models, SerializationRoundTripBitIdentical) {
    std::mt19937_64 rng(20);
    for (const auto& s : all_kinds()) {
        auto m = SequenceModel::create(s, 21);
        const auto path = temp_path(to_string(s.kind) + ".afck");
        m.save(path, {{"target", "arousal"}});
        auto back = SequenceModel::load(path);
        fs::remove(path);
        Mat x = afs_test::random_mat(rng, 17, Index(s.input_dim));
        EXPECT_EQ(m.predict(x), back.predict(x)) << to_string(s.kind);
        EXPECT_EQ(m.parameter_names(), back.parameter_names());
    }
}

TEST(Models, CheckpointShapeMismatchRejected) {
    auto ck = SequenceModel::create(attn_spec(8), 1).to_checkpoint();
    ck.meta["model"]["lstm"]["hidden"] = 8;
    EXPECT_THROW(SequenceModel::from_checkpoint(ck), ParseError);
}

TEST(ModelSpec, ValidationMessages) {
    auto bad_heads = attn_spec(10, 4);
    EXPECT_THROW(bad_heads.validate(), ConfigError);
    auto no_group = attn_spec(8);
    no_group.attn.reset();
    EXPECT_THROW(no_group.validate(), ConfigError);
    auto extra = plain_spec(3);
    extra.gcnn = GcnnSpec{};
    EXPECT_THROW(extra.validate(), ConfigError);
    auto blocks = gcnn_spec(8, 16, 4);
    EXPECT_THROW(blocks.validate(), ConfigError);
    auto kernel = gcnn_spec(8);
    kernel.gcnn->kernel = 4;
    EXPECT_THROW(kernel.validate(), ConfigError);
    EXPECT_THROW(parse_model_kind("transformer"), ConfigError);
}

TEST(ModelSpec, JsonRoundTrip) {
    for (const auto& s : all_kinds()) EXPECT_EQ(to_json(model_spec_from_json(to_json(s))), to_json(s));
}

TEST(Models, GradientsMatchFiniteDifferences) {
    for (const char* module : {"attn_lstm", "gcnn_lstm", "plain_lstm", "fusion"})
        for (const auto& c : run_gradcheck_suite(module))
            EXPECT_TRUE(c.pass) << c.module << " " << c.label << " rel err " << c.result.max_rel_error;
}

TEST(PredictionTrack, RequiresHalfSecondGrid) {
    PredictionTrack p{"p000", "arousal", {0, 500, 1000}, {0.1, 0.2, 0.3}};
    EXPECT_NO_THROW(p.validate());
    p.timestamps[2] = 1250;
    EXPECT_THROW(p.validate(), DataError);
    p.timestamps.pop_back();
    EXPECT_THROW(p.validate(), DataError);
}
