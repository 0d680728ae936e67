#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <stdexcept>
#include <vector>

#include "centerfpa/rng.hpp"
#include "centerfpa/tensor.hpp"
#include "oracles.hpp"

using namespace cfpa;

namespace {

double max_abs_diff(const Tensor& a, const Tensor& b)
{
    EXPECT_EQ(a.shape(), b.shape());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - b[i]));
    return m;
}

} // namespace

TEST(TensorTest, RejectsBadShapes)
{
    EXPECT_THROW(Tensor(Shape{2, 0, 3}), std::invalid_argument);
    EXPECT_THROW(Tensor(Shape{}), std::invalid_argument);
    EXPECT_THROW(Tensor(Shape{2, 2}, std::vector<float>{1, 2, 3}), std::invalid_argument);
    Tensor t({2, 3, 4}, 1.5f);
    EXPECT_EQ(t.size(), 24u);
    EXPECT_TRUE(t.all_finite());
}

TEST(Conv2dTest, UnitKernelIsIdentity)
{
    SplitMix64 rng(1);
    const Tensor x = oracle::random_tensor(rng, {3, 5, 7});
    Tensor k({3, 3, 1, 1});
    for (int c = 0; c < 3; ++c) k.at(c, c, 0, 0) = 1.0f;
    const Tensor y = conv2d(x, k, std::vector<float>(3, 0.0f), 1, 0);
    EXPECT_EQ(y, x);
}

TEST(Conv2dTest, OnesKernelCountsOverlap)
{
    const Tensor x({1, 3, 3}, 1.0f);
    const Tensor k({1, 1, 3, 3}, 1.0f);
    const Tensor y = conv2d(x, k, {}, 1, 1);
    const std::vector<float> expect{4, 6, 4, 6, 9, 6, 4, 6, 4};
    EXPECT_EQ(y, Tensor({1, 3, 3}, expect));
}

TEST(Conv2dTest, MatchesNaiveOracle)
{
    SplitMix64 rng(2);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = oracle::random_tensor(rng, {2, 8, 8});
        const Tensor k = oracle::random_tensor(rng, {4, 2, 3, 3});
        std::vector<float> bias(4);
        for (float& b : bias) b = static_cast<float>(rng.uniform(-1, 1));
        for (int stride : {1, 2}) {
            for (int pad : {0, 1, 2}) {
                const Tensor got = conv2d(x, k, bias, stride, pad);
                EXPECT_LE(max_abs_diff(got, oracle::naive_conv(x, k, bias, stride, pad, pad)), 1e-6);
            }
        }
    }
}

TEST(Conv2dTest, AsymmetricPaddingMatchesOracle)
{
    SplitMix64 rng(3);
    const Tensor x = oracle::random_tensor(rng, {3, 6, 9});
    const Tensor k13 = oracle::random_tensor(rng, {2, 3, 1, 3});
    const Tensor k31 = oracle::random_tensor(rng, {2, 3, 3, 1});
    EXPECT_LE(max_abs_diff(conv2d(x, k13, {}, 1, Padding2d{0, 1}), oracle::naive_conv(x, k13, {}, 1, 0, 1)), 1e-6);
    EXPECT_LE(max_abs_diff(conv2d(x, k31, {}, 2, Padding2d{1, 0}), oracle::naive_conv(x, k31, {}, 2, 1, 0)), 1e-6);
}

TEST(Conv2dTest, ShapeMismatchNamesBothShapes)
{
    const Tensor x({2, 4, 4});
    const Tensor k({1, 3, 3, 3});
    try {
        conv2d(x, k, {}, 1, 1);
        FAIL() << "expected a throw";
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("[2, 4, 4]"), std::string::npos) << msg;
        EXPECT_NE(msg.find("[1, 3, 3, 3]"), std::string::npos) << msg;
    }
    EXPECT_THROW(conv2d(Tensor({1, 2, 2}), Tensor({1, 1, 3, 3}), {}, 1, 0), std::invalid_argument);
    EXPECT_THROW(conv2d(Tensor({1, 4, 4}), Tensor({1, 1, 3, 3}), {}, 0, 0), std::invalid_argument);
}

TEST(Conv2dTest, IsLinear)
{
    SplitMix64 rng(4);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = oracle::random_tensor(rng, {2, 7, 6});
        const Tensor y = oracle::random_tensor(rng, {2, 7, 6});
        const Tensor k = oracle::random_tensor(rng, {3, 2, 3, 3});
        const float a = static_cast<float>(rng.uniform(-2, 2)), b = static_cast<float>(rng.uniform(-2, 2));
        Tensor mix = x;
        for (std::size_t i = 0; i < mix.size(); ++i) mix[i] = a * x[i] + b * y[i];
        const Tensor lhs = conv2d(mix, k, {}, 1, 1);
        const Tensor cx = conv2d(x, k, {}, 1, 1), cy = conv2d(y, k, {}, 1, 1);
        for (std::size_t i = 0; i < lhs.size(); ++i) {
            EXPECT_NEAR(lhs[i], a * double(cx[i]) + b * double(cy[i]), 1e-5);
        }
    }
}

TEST(Conv2dTest, SamePaddingPreservesExtent)
{
    SplitMix64 rng(5);
    for (int k : {1, 3, 5, 7}) {
        const int h = static_cast<int>(rng.uniform_int(k, 12)), w = static_cast<int>(rng.uniform_int(k, 12));
        const Tensor x = oracle::random_tensor(rng, {2, h, w});
        const Tensor y = conv2d(x, oracle::random_tensor(rng, {3, 2, k, k}), {}, 1, (k - 1) / 2);
        EXPECT_EQ(y.shape(), (Shape{3, h, w}));
        EXPECT_TRUE(y.all_finite());
    }
}

TEST(MaxPoolTest, ConstantInput)
{
    const Tensor y = maxpool2d(Tensor({2, 5, 5}, 3.25f), 3, 1, 1);
    EXPECT_EQ(y, Tensor({2, 5, 5}, 3.25f));
}

TEST(MaxPoolTest, SingleMaxCoversAllWindows)
{
    Tensor x({1, 3, 3});
    x.at(0, 1, 1) = 5.0f;
    EXPECT_EQ(maxpool2d(x, 3, 1, 1), Tensor({1, 3, 3}, 5.0f));
}

TEST(MaxPoolTest, PaddingNeverWins)
{
    const Tensor x({1, 4, 4}, -7.0f);
    const Tensor y = maxpool2d(x, 3, 1, 1);
    EXPECT_EQ(y, x);
}

TEST(MaxPoolTest, MatchesBruteForce)
{
    SplitMix64 rng(6);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor x = oracle::random_tensor(rng, {2, 16, 16});
        EXPECT_EQ(maxpool2d(x, 3, 1, 1), oracle::brute_maxpool(x, 3, 1, 1));
        EXPECT_EQ(maxpool2d(x, 2, 2, 0), oracle::brute_maxpool(x, 2, 2, 0));
        EXPECT_EQ(maxpool2d(x, 3, 2, 1), oracle::brute_maxpool(x, 3, 2, 1));
    }
}

TEST(MaxPoolTest, UnitWindowIsIdentity)
{
    SplitMix64 rng(7);
    const Tensor x = oracle::random_tensor(rng, {3, 9, 4});
    EXPECT_EQ(maxpool2d(x, 1, 1, 0), x);
}

TEST(MaxPoolTest, RejectsNonPositiveWindow)
{
    EXPECT_THROW(maxpool2d(Tensor({1, 3, 3}), 0, 1, 0), std::invalid_argument);
    EXPECT_THROW(maxpool2d(Tensor({1, 3, 3}), -1, 1, 0), std::invalid_argument);
}

TEST(AvgPoolTest, Examples)
{
    EXPECT_EQ(global_avg_pool(Tensor({1, 3, 3}, 2.0f)), std::vector<double>{2.0});
    EXPECT_EQ(global_avg_pool(Tensor({1, 2, 2}, {1, 2, 3, 4})), std::vector<double>{2.5});
}

TEST(AvgPoolTest, MatchesIndependentMean)
{
    SplitMix64 rng(8);
    const Tensor x = oracle::random_tensor(rng, {3, 7, 5});
    const std::vector<double> got = global_avg_pool(x);
    ASSERT_EQ(got.size(), 3u);
    for (int c = 0; c < 3; ++c) {
        double s = 0;
        for (int y = 0; y < 7; ++y)
            for (int xx = 0; xx < 5; ++xx) s += x.at(c, y, xx);
        EXPECT_NEAR(got[c], s / 35.0, 1e-9);
    }
}

TEST(UpsampleTest, Examples)
{
    SplitMix64 rng(9);
    const Tensor x = oracle::random_tensor(rng, {2, 3, 4});
    EXPECT_EQ(upsample_nearest(x, 1), x);
    EXPECT_EQ(upsample_nearest(Tensor({1, 1, 1}, 7.0f), 2), Tensor({1, 2, 2}, 7.0f));
    EXPECT_THROW(upsample_nearest(x, 0), std::invalid_argument);
}

TEST(UpsampleTest, BlockMeanRecoversInput)
{
    SplitMix64 rng(10);
    for (int f : {2, 3, 4}) {
        const Tensor x = oracle::random_tensor(rng, {2, 5, 6});
        const Tensor up = upsample_nearest(x, f);
        ASSERT_EQ(up.shape(), (Shape{2, 5 * f, 6 * f}));
        for (int c = 0; c < 2; ++c)
            for (int y = 0; y < 5; ++y)
                for (int xx = 0; xx < 6; ++xx) {
                    double s = 0;
                    for (int dy = 0; dy < f; ++dy)
                        for (int dx = 0; dx < f; ++dx) s += up.at(c, y * f + dy, xx * f + dx);
                    EXPECT_EQ(static_cast<float>(s / (f * f)), x.at(c, y, xx));
                }
    }
}

TEST(LinearTest, Examples)
{
    Tensor eye({3, 3});
    for (int i = 0; i < 3; ++i) eye[i * 3 + i] = 1.0f;
    const std::vector<double> v{0.5, -2.0, 3.0};
    EXPECT_EQ(linear(v, eye, std::vector<float>(3, 0.0f)), v);
    EXPECT_EQ(linear(v, Tensor({1, 3}, 1.0f), std::vector<float>{0.0f}), std::vector<double>{1.5});
    EXPECT_THROW(linear(v, Tensor({2, 4}), std::vector<float>(2)), std::invalid_argument);
}

TEST(LinearTest, MatchesDotProducts)
{
    SplitMix64 rng(11);
    const Tensor w = oracle::random_tensor(rng, {3, 4});
    std::vector<float> b(3);
    for (float& x : b) x = static_cast<float>(rng.uniform(-1, 1));
    std::vector<double> v(4);
    for (double& x : v) x = rng.uniform(-3, 3);
    const std::vector<double> got = linear(v, w, b);
    for (int i = 0; i < 3; ++i) {
        double s = b[i];
        for (int j = 0; j < 4; ++j) s += double(w[i * 4 + j]) * v[j];
        EXPECT_NEAR(got[i], s, 1e-9);
    }
}

TEST(ConcatTest, Examples)
{
    SplitMix64 rng(12);
    const Tensor a = oracle::random_tensor(rng, {1, 3, 3});
    const Tensor b = oracle::random_tensor(rng, {1, 3, 3});
    EXPECT_EQ(concat_channels(std::vector<Tensor>{a}), a);
    const Tensor ab = concat_channels(std::vector<Tensor>{a, b});
    EXPECT_EQ(ab.slice_channels(0, 1), a);
    EXPECT_EQ(ab.slice_channels(1, 1), b);
    EXPECT_THROW(concat_channels(std::vector<Tensor>{a, Tensor({1, 3, 4})}), std::invalid_argument);
}

TEST(ConcatTest, SliceBackRecoversInputs)
{
    SplitMix64 rng(13);
    const std::vector<Tensor> parts{oracle::random_tensor(rng, {2, 4, 5}), oracle::random_tensor(rng, {1, 4, 5}),
                                    oracle::random_tensor(rng, {3, 4, 5})};
    const Tensor all = concat_channels(parts);
    EXPECT_EQ(all.shape(), (Shape{6, 4, 5}));
    EXPECT_EQ(all.slice_channels(0, 2), parts[0]);
    EXPECT_EQ(all.slice_channels(2, 1), parts[1]);
    EXPECT_EQ(all.slice_channels(3, 3), parts[2]);
}

TEST(ActivationTest, Examples)
{
    EXPECT_EQ(sigmoid(0.0), 0.5);
    const Tensor r = relu(Tensor({1, 1, 2}, {-3.0f, 3.0f}));
    EXPECT_EQ(r[0], 0.0f);
    EXPECT_EQ(r[1], 3.0f);
}

TEST(ActivationTest, SigmoidSymmetry)
{
    SplitMix64 rng(14);
    for (int i = 0; i < 1000; ++i) {
        const double x = rng.uniform(-40, 40);
        EXPECT_NEAR(sigmoid(x) + sigmoid(-x), 1.0, 1e-12);
    }
}

TEST(ActivationTest, TensorSigmoidStaysOpen)
{
    const Tensor s = sigmoid(Tensor({1, 1, 4}, {-1000.0f, -30.0f, 30.0f, 1000.0f}));
    for (float v : s.values()) {
        EXPECT_GT(v, 0.0f);
        EXPECT_LT(v, 1.0f);
    }
}

TEST(TensorTest, OperationsKeepFiniteValues)
{
    SplitMix64 rng(15);
    for (int trial = 0; trial < 10; ++trial) {
        const Tensor x = oracle::random_tensor(rng, {3, 8, 8}, -1e3, 1e3);
        EXPECT_TRUE(conv2d(x, oracle::random_tensor(rng, {2, 3, 3, 3}), {}, 1, 1).all_finite());
        EXPECT_TRUE(maxpool2d(x, 3, 2, 1).all_finite());
        EXPECT_TRUE(upsample_nearest(x, 2).all_finite());
        EXPECT_TRUE(sigmoid(x).all_finite());
        EXPECT_TRUE(relu(x).all_finite());
        for (double m : global_avg_pool(x)) EXPECT_TRUE(std::isfinite(m));
    }
}
