#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "affectfuse/gradcheck.hpp"
#include "affectfuse/tensor.hpp"
#include "test_support.hpp"

using namespace affectfuse;
using afs_test::random_mat;
using afs_test::random_param;

namespace {

Mat mat(std::initializer_list<std::initializer_list<double>> rows) {
    Mat m(Index(rows.size()), Index(rows.begin()->size()));
    Index r = 0;
    for (auto row : rows) {
        Index c = 0;
        for (double v : row) m(r, c++) = v;
        ++r;
    }
    return m;
}

// Direct exponential normalisation, no max subtraction.
Mat softmax_oracle(const Mat& x) {
    Mat y = x.array().exp();
    for (Index r = 0; r < y.rows(); ++r) y.row(r) /= y.row(r).sum();
    return y;
}

// out[t,c] = bias[c] + sum_{j,i} x[t+j-pad, i] * k[j,i,c], zero outside [0,T)
Mat conv_oracle(const Mat& x, const Mat& k, const Mat& bias, int width) {
    const int pad = width / 2;
    const Index T = x.rows(), din = x.cols(), dout = k.cols();
    Mat out(T, dout);
    for (Index t = 0; t < T; ++t)
        for (Index c = 0; c < dout; ++c) {
            double acc = bias(0, c);
            for (int j = 0; j < width; ++j) {
                const Index src = t + j - pad;
                if (src < 0 || src >= T) continue;
                for (Index i = 0; i < din; ++i) acc += x(src, i) * k(j * din + i, c);
            }
            out(t, c) = acc;
        }
    return out;
}

}  // namespace

TEST(Tensor, ShapeMatchesStorage) {
    Tensor t({2, 3, 4});
    EXPECT_EQ(t.size(), 24u);
    EXPECT_EQ(t.values().rows(), 6);
    EXPECT_EQ(t.values().cols(), 4);
    EXPECT_THROW(Tensor({2, 2}, Mat::Zero(3, 2)), ShapeError);
    EXPECT_THROW(Tensor(Shape{}), ShapeError);
}

TEST(Matmul, IdentityAndDot) {
    Tape t;
    Var i2 = t.constant(Mat::Identity(2, 2));
    Var a = t.constant(mat({{1, 2}, {3, 4}}));
    EXPECT_EQ(matmul(i2, a).value(), mat({{1, 2}, {3, 4}}));
    Var r = t.constant(mat({{1, 2}}));
    Var c = t.constant(mat({{3}, {4}}));
    EXPECT_DOUBLE_EQ(matmul(r, c).value()(0, 0), 11.0);
}

TEST(Matmul, ShapeErrorNamesBothShapes) {
    Tape t;
    Var a = t.constant(Mat::Zero(2, 3));
    Var b = t.constant(Mat::Zero(2, 3));
    try {
        matmul(a, b);
        FAIL() << "expected ShapeError";
    } catch (const ShapeError& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2x3] x [2x3]"), std::string::npos) << msg;
    }
}

TEST(Matmul, GradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(1);
    Tensor a = random_param(rng, 3, 4), b = random_param(rng, 4, 2);
    auto f = [&](Tape& t) { return afs_test::project(t, matmul(t.param(a), t.param(b))); };
    EXPECT_LT(afs_test::fd_max_rel_error(f, {&a, &b}), 1e-6);
}

TEST(Softmax, Examples) {
    Tape t;
    EXPECT_TRUE(softmax_rows(t.constant(mat({{0, 0}}))).value().isApprox(mat({{0.5, 0.5}}), 1e-15));
    Mat big = softmax_rows(t.constant(mat({{1000, 1000, 1000}}))).value();
    for (Index c = 0; c < 3; ++c) EXPECT_NEAR(big(0, c), 1.0 / 3.0, 1e-15);

    Mat y = softmax_rows(t.constant(mat({{1, 2, 3}}))).value();
    Mat oracle = softmax_oracle(mat({{1, 2, 3}}));
    EXPECT_LT((y - oracle).cwiseAbs().maxCoeff(), 1e-15);
    EXPECT_NEAR(y(0, 0), 0.0900, 5e-5);
    EXPECT_NEAR(y(0, 1), 0.2447, 5e-5);
    EXPECT_NEAR(y(0, 2), 0.6652, 5e-5);
}

TEST(Softmax, NanInputIsNumericError) {
    Tape t;
    Mat m = mat({{0, 1}});
    m(0, 1) = std::nan("");
    EXPECT_THROW(softmax_rows(t.constant(m)), NumericError);
}

TEST(Softmax, RowsSumToOneAndShiftInvariant) {
    std::mt19937_64 rng(2);
    std::uniform_int_distribution<int> dim(1, 9);
    for (int trial = 0; trial < 200; ++trial) {
        Tape t;
        Mat x = random_mat(rng, dim(rng), dim(rng), -20, 20);
        Mat y = softmax_rows(t.constant(x)).value();
        for (Index r = 0; r < y.rows(); ++r) {
            EXPECT_NEAR(y.row(r).sum(), 1.0, 1e-12);
            EXPECT_GE(y.row(r).minCoeff(), 0.0);
        }
        Mat shifted = x;
        std::uniform_real_distribution<double> sh(-50, 50);
        for (Index r = 0; r < x.rows(); ++r) shifted.row(r).array() += sh(rng);
        EXPECT_LT((softmax_rows(t.constant(shifted)).value() - y).cwiseAbs().maxCoeff(), 1e-10);
    }
}

TEST(Elementwise, Examples) {
    Tape t;
    EXPECT_DOUBLE_EQ(sigmoid(t.constant(Mat::Zero(1, 1))).value()(0, 0), 0.5);
    EXPECT_DOUBLE_EQ(affectfuse::tanh(t.constant(Mat::Zero(1, 1))).value()(0, 0), 0.0);
    EXPECT_EQ(hadamard(t.constant(mat({{2, 3}})), t.constant(mat({{4, 5}}))).value(), mat({{8, 15}}));
    EXPECT_THROW(hadamard(t.constant(Mat::Zero(1, 2)), t.constant(Mat::Zero(2, 1))), ShapeError);
}

TEST(Elementwise, SigmoidStableForLargeInputs) {
    Tape t;
    Mat y = sigmoid(t.constant(mat({{-800, 800}}))).value();
    EXPECT_EQ(y(0, 0), 0.0);
    EXPECT_EQ(y(0, 1), 1.0);
}

TEST(Conv1d, Examples) {
    Tape t;
    std::mt19937_64 rng(3);
    Mat x = random_mat(rng, 5, 3);
    Var id = conv1d_same(t.constant(x), t.constant(Mat::Identity(3, 3)), t.constant(Mat::Zero(1, 3)), 1);
    EXPECT_EQ(id.value(), x);

    Var z = conv1d_same(t.constant(x), t.constant(Mat::Zero(9, 4)), t.constant(Mat::Zero(1, 4)), 3);
    EXPECT_TRUE(z.value().isZero(0));

    Var s = conv1d_same(t.constant(mat({{1}, {2}, {3}, {4}})), t.constant(mat({{1}, {1}, {1}})),
                        t.constant(Mat::Zero(1, 1)), 3);
    EXPECT_EQ(s.value(), mat({{3}, {6}, {9}, {7}}));
    EXPECT_EQ(conv_oracle(mat({{1}, {2}, {3}, {4}}), mat({{1}, {1}, {1}}), Mat::Zero(1, 1), 3),
              mat({{3}, {6}, {9}, {7}}));
}

TEST(Conv1d, EvenWidthIsConfigError) {
    Tape t;
    EXPECT_THROW(conv1d_same(t.constant(Mat::Zero(4, 1)), t.constant(Mat::Zero(2, 1)), t.constant(Mat::Zero(1, 1)), 2),
                 ConfigError);
}

TEST(Conv1d, MatchesNaiveLoopAndPreservesLength) {
    std::mt19937_64 rng(4);
    std::uniform_int_distribution<int> dim(1, 7);
    for (int trial = 0; trial < 50; ++trial) {
        const int width = 2 * (trial % 3) + 1;
        Mat x = random_mat(rng, dim(rng), dim(rng));
        Mat k = random_mat(rng, width * x.cols(), dim(rng));
        Mat b = random_mat(rng, 1, k.cols());
        Tape t;
        Mat y = conv1d_same(t.constant(x), t.constant(k), t.constant(b), std::size_t(width)).value();
        ASSERT_EQ(y.rows(), x.rows());
        EXPECT_LT((y - conv_oracle(x, k, b, width)).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Conv1d, SegmentsDoNotLeakAcrossWindows) {
    std::mt19937_64 rng(5);
    Mat a = random_mat(rng, 4, 2), b = random_mat(rng, 3, 2);
    Mat k = random_mat(rng, 6, 3), bias = random_mat(rng, 1, 3);
    Mat stacked = Mat::Zero(8, 2);
    stacked.topRows(4) = a;
    stacked.middleRows(4, 3) = b;
    Tape t;
    SeqLayout layout{4, {4, 3}};
    Mat y = conv1d_same(t.constant(stacked), t.constant(k), t.constant(bias), 3, layout).value();
    EXPECT_LT((y.topRows(4) - conv_oracle(a, k, bias, 3)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_LT((y.middleRows(4, 3) - conv_oracle(b, k, bias, 3)).cwiseAbs().maxCoeff(), 1e-14);
    EXPECT_TRUE(y.row(7).isZero(0));
}

TEST(Concat, OrderAndIdentity) {
    Tape t;
    Var a = t.constant(Mat::Constant(4, 3, 1.0));
    Var b = t.constant(Mat::Constant(4, 1, 2.0));
    Var c = t.constant(Mat::Constant(4, 1, 3.0));
    Mat y = concat_features({a, b, c}).value();
    ASSERT_EQ(y.cols(), 5);
    EXPECT_EQ(y(2, 2), 1.0);
    EXPECT_EQ(y(2, 3), 2.0);
    EXPECT_EQ(y(2, 4), 3.0);
    EXPECT_EQ(concat_features({a}).value(), a.value());
    EXPECT_THROW(concat_features({a, t.constant(Mat::Zero(3, 1))}), ShapeError);
}

TEST(Concat, GradientSplitsToOperands) {
    std::mt19937_64 rng(6);
    Tensor a = random_param(rng, 5, 3), b = random_param(rng, 5, 1), c = random_param(rng, 5, 2);
    auto f = [&](Tape& t) {
        Var y = concat_features({t.param(a), t.param(b), t.param(c)});
        return afs_test::project(t, affectfuse::tanh(y));
    };
    EXPECT_LT(afs_test::fd_max_rel_error(f, {&a, &b, &c}), 1e-6);
}

TEST(Backward, SumGivesOnes) {
    Tensor w({3, 2, 2}, true);
    w.values().setRandom();
    Tape t;
    t.backward(sum(t.param(w)));
    EXPECT_TRUE(t.grad(w).isOnes(0));
}

TEST(Backward, ProductRule) {
    std::mt19937_64 rng(7);
    Tensor a = random_param(rng, 3, 4), b = random_param(rng, 3, 4);
    Tape t;
    t.backward(sum(hadamard(t.param(a), t.param(b))));
    EXPECT_EQ(t.grad(a), b.values());
    EXPECT_EQ(t.grad(b), a.values());
}

TEST(Backward, Errors) {
    Tensor w = Tensor::matrix(Mat::Ones(2, 2), true);
    Tape t;
    Var y = scale(t.param(w), 2.0);
    EXPECT_THROW(t.backward(y), TapeError);  // not scalar
    Var l = sum(y);
    t.backward(l);
    EXPECT_THROW(t.backward(l), TapeError);  // twice without reset
    t.reset();
    EXPECT_NO_THROW(t.backward(l));
    EXPECT_TRUE(t.grad(w).isApprox(Mat::Constant(2, 2, 2.0)));
}

TEST(Backward, VisitsNodesInReverseOrder) {
    std::mt19937_64 rng(8);
    Tensor a = random_param(rng, 2, 2);
    Tape t;
    Var x = t.param(a);
    Var y = sigmoid(matmul(x, x));
    Var l = sum(hadamard(y, x));
    t.backward(l);
    const auto& order = t.visit_order();
    ASSERT_FALSE(order.empty());
    EXPECT_EQ(order.front(), l.id());
    for (std::size_t i = 1; i < order.size(); ++i) EXPECT_LT(order[i], order[i - 1]);
    EXPECT_EQ(order.back(), x.id());
}

TEST(Backward, GradientsAreLinearInTheLoss) {
    std::mt19937_64 rng(9);
    for (int trial = 0; trial < 20; ++trial) {
        Tensor a = random_param(rng, 3, 3), b = random_param(rng, 3, 2);
        auto l1 = [&](Tape& t) { return afs_test::project(t, affectfuse::tanh(matmul(t.param(a), t.param(b))), 1); };
        auto l2 = [&](Tape& t) { return afs_test::project(t, sigmoid(matmul(t.param(a), t.param(a))), 2); };
        Tape ts;
        ts.backward(add(l1(ts), l2(ts)));
        Tape t1, t2;
        t1.backward(l1(t1));
        t2.backward(l2(t2));
        EXPECT_LT((ts.grad(a) - (t1.grad(a) + t2.grad(a))).cwiseAbs().maxCoeff(), 1e-12);
        EXPECT_LT((ts.grad(b) - (t1.grad(b) + t2.grad(b))).cwiseAbs().maxCoeff(), 1e-12);
    }
}

TEST(Backward, NonFiniteResultAbortsNamingTheOp) {
    Tensor w = Tensor::matrix(Mat::Constant(1, 1, 1e300), true);
    Tape t;
    try {
        scale(t.param(w), 1e300);
        FAIL() << "expected NumericError";
    } catch (const NumericError& e) {
        EXPECT_NE(std::string(e.what()).find("scale"), std::string::npos);
    }
}

TEST(Primitives, EveryGradientMatchesFiniteDifferences) {
    std::mt19937_64 rng(10);
    std::uniform_int_distribution<int> dim(1, 5);
    for (int trial = 0; trial < 25; ++trial) {
        const int m = dim(rng), k = dim(rng), n = dim(rng);
        Tensor a = random_param(rng, m, k), b = random_param(rng, k, n), c = random_param(rng, m, k);
        Tensor row = random_param(rng, 1, k), s = random_param(rng, 1, 1);
        Tensor pos = Tensor::matrix(random_mat(rng, m, k, 0.5, 2.0), true);
        Tensor kern = random_param(rng, 3 * k, n), kb = random_param(rng, 1, n);
        std::vector<std::pair<const char*, std::function<Var(Tape&)>>> cases = {
            {"matmul", [&](Tape& t) { return afs_test::project(t, matmul(t.param(a), t.param(b))); }},
            {"matmul_nt", [&](Tape& t) { return afs_test::project(t, matmul_nt(t.param(a), t.param(c))); }},
            {"transpose", [&](Tape& t) { return afs_test::project(t, transpose(t.param(a))); }},
            {"add/sub", [&](Tape& t) { return afs_test::project(t, sub(add(t.param(a), t.param(c)), scale(t.param(a), 0.3))); }},
            {"hadamard", [&](Tape& t) { return afs_test::project(t, hadamard(t.param(a), t.param(c))); }},
            {"divide", [&](Tape& t) { return afs_test::project(t, divide(t.param(a), t.param(pos))); }},
            {"sigmoid", [&](Tape& t) { return afs_test::project(t, sigmoid(t.param(a))); }},
            {"tanh", [&](Tape& t) { return afs_test::project(t, affectfuse::tanh(t.param(a))); }},
            {"softmax", [&](Tape& t) { return afs_test::project(t, softmax_rows(t.param(a))); }},
            {"add_row", [&](Tape& t) { return afs_test::project(t, add_row(t.param(a), t.param(row))); }},
            {"sub_scalar", [&](Tape& t) { return afs_test::project(t, sub_scalar(t.param(a), t.param(s))); }},
            {"mean", [&](Tape& t) { return hadamard(mean(t.param(a)), mean(t.param(c))); }},
            {"slice", [&](Tape& t) { return afs_test::project(t, slice(t.param(a), 0, 1, 0, 1)); }},
            {"gather", [&](Tape& t) { return afs_test::project(t, gather_rows(t.param(a), {0, 0, Index(m - 1)})); }},
            {"concat_rows", [&](Tape& t) { return afs_test::project(t, concat_rows({t.param(a), t.param(c)})); }},
            {"conv1d", [&](Tape& t) {
                 return afs_test::project(t, conv1d_same(t.param(a), t.param(kern), t.param(kb), 3));
             }},
        };
        for (auto& [name, f] : cases) {
            SCOPED_TRACE(name);
            EXPECT_LT(afs_test::fd_max_rel_error(f, {&a, &b, &c, &row, &s, &pos, &kern, &kb}), 1e-4);
        }
    }
}

TEST(GradCheck, Quadratic) {
    Tensor th = Tensor::matrix(Mat::Constant(1, 1, 3.0), true);
    auto f = [&](Tape& t) {
        Var x = t.param(th);
        return hadamard(x, x);
    };
    Tensor* ps[] = {&th};
    auto r = grad_check(f, ps);
    EXPECT_LT(r.max_rel_error, 1e-9);
    EXPECT_NEAR(r.worst_analytic, 6.0, 1e-15);
    EXPECT_EQ(th.values()(0, 0), 3.0);
}

TEST(GradCheck, LinearIsExact) {
    Tensor th = Tensor::matrix(mat({{0.5, -1.25, 2.0}}), true);
    auto f = [&](Tape& t) { return sum(scale(t.param(th), 0.25)); };
    Tensor* ps[] = {&th};
    EXPECT_LT(grad_check(f, ps).max_rel_error, 1e-10);
}

TEST(GradCheck, SamplesLargeParameters) {
    std::mt19937_64 rng(11);
    Tensor big = random_param(rng, 60, 40);
    auto f = [&](Tape& t) { return afs_test::project(t, affectfuse::tanh(t.param(big))); };
    Tensor* ps[] = {&big};
    auto r = grad_check(f, ps);
    EXPECT_GE(r.checked, 200u);
    EXPECT_LT(r.checked, big.size());
    EXPECT_LT(r.max_rel_error, 1e-6);
}

TEST(GradCheck, DetectsCorruptedGradient) {
    std::mt19937_64 rng(12);
    Tensor a = random_param(rng, 3, 3);
    auto f = [&](Tape& t) { return afs_test::project(t, sigmoid(t.param(a))); };
    Tensor* ps[] = {&a};
    GradCheckOptions opt;
    opt.corrupt = [](Mat& g) { g *= 1.01; };
    EXPECT_GT(grad_check(f, ps, opt).max_rel_error, 1e-3);
}

TEST(GradCheck, NonFiniteLossIsError) {
    Tensor a = Tensor::matrix(Mat::Constant(1, 1, 1.0), true);
    auto f = [&](Tape& t) { return divide(t.param(a), t.constant(Mat::Constant(1, 1, 1e-320))); };
    Tensor* ps[] = {&a};
    EXPECT_THROW(grad_check(f, ps), NumericError);
}
