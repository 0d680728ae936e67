#include <gtest/gtest.h>

#include <cmath>
#include <sstream>
#include <stdexcept>
#include <vector>

#include "centerfpa/blocks.hpp"
#include "centerfpa/io.hpp"
#include "centerfpa/rng.hpp"
#include "oracles.hpp"

using namespace cfpa;

namespace {

ACBlockParams random_ac(SplitMix64& rng, int cout, int cin)
{
    ACBlockParams p;
    p.k3x3 = oracle::random_tensor(rng, {cout, cin, 3, 3});
    p.k1x3 = oracle::random_tensor(rng, {cout, cin, 1, 3});
    p.k3x1 = oracle::random_tensor(rng, {cout, cin, 3, 1});
    p.b3x3 = oracle::random_tensor(rng, {cout});
    p.b1x3 = oracle::random_tensor(rng, {cout});
    p.b3x1 = oracle::random_tensor(rng, {cout});
    return p;
}

ACBlockParams zero_ac(int cout, int cin)
{
    return {Tensor({cout, cin, 3, 3}), Tensor({cout, cin, 1, 3}), Tensor({cout, cin, 3, 1}),
            Tensor({cout}),            Tensor({cout}),            Tensor({cout})};
}

SEParams random_se(SplitMix64& rng, int c, int r)
{
    return {oracle::random_tensor(rng, {c / r, c}), oracle::random_tensor(rng, {c / r}),
            oracle::random_tensor(rng, {c, c / r}), oracle::random_tensor(rng, {c})};
}

SEParams constant_gate_se(int c, float expand_bias)
{
    return {Tensor({1, c}), Tensor({1}), Tensor({c, 1}), Tensor({c}, expand_bias)};
}

ConvParams identity_1x1(int c)
{
    ConvParams p{Tensor({c, c, 1, 1}), Tensor({c})};
    for (int i = 0; i < c; ++i) p.kernel.at(i, i, 0, 0) = 1.0f;
    return p;
}

double max_abs_diff(const Tensor& a, const Tensor& b)
{
    EXPECT_EQ(a.shape(), b.shape());
    double m = 0;
    for (std::size_t i = 0; i < a.size(); ++i) m = std::max(m, std::abs(double(a[i]) - b[i]));
    return m;
}

ModelConfig slim_config()
{
    ModelConfig cfg;
    cfg.backbone_width = 8;
    cfg.se_ratio = 8;
    cfg.reduce_width = 16;
    cfg.head_width = 16;
    return cfg;
}

} // namespace

TEST(ACBlockTest, ZeroSideBranchesGivePlainConv)
{
    SplitMix64 rng(20);
    ACBlockParams p = random_ac(rng, 3, 2);
    p.k1x3 = Tensor({3, 2, 1, 3});
    p.k3x1 = Tensor({3, 2, 3, 1});
    p.b1x3 = Tensor({3});
    p.b3x1 = Tensor({3});
    const Tensor x = oracle::random_tensor(rng, {2, 8, 8});
    const Tensor plain = conv2d(x, p.k3x3, p.b3x3.values(), 1, 1);
    EXPECT_LE(max_abs_diff(ac_block_forward_train(x, p, 1), plain), 1e-6);
}

TEST(ACBlockTest, BiasOnly)
{
    ACBlockParams p = zero_ac(2, 1);
    p.b3x3 = Tensor({2}, {1.0f, 0.5f});
    p.b1x3 = Tensor({2}, {2.0f, -1.0f});
    p.b3x1 = Tensor({2}, {4.0f, 0.25f});
    const Tensor y = ac_block_forward_train(Tensor({1, 5, 5}, 3.0f), p, 1);
    for (int y0 = 0; y0 < 5; ++y0)
        for (int x0 = 0; x0 < 5; ++x0) {
            EXPECT_EQ(y.at(0, y0, x0), 7.0f);
            EXPECT_EQ(y.at(1, y0, x0), -0.25f);
        }
}

TEST(ACBlockTest, RejectsChannelMismatch)
{
    SplitMix64 rng(21);
    const ACBlockParams p = random_ac(rng, 3, 2);
    EXPECT_THROW(ac_block_forward_train(Tensor({3, 4, 4}), p, 1), std::invalid_argument);
    ACBlockParams bad = p;
    bad.k1x3 = Tensor({3, 1, 1, 3});
    EXPECT_THROW(ac_fuse(bad), std::invalid_argument);
}

TEST(ACFuseTest, EmbeddingLayout)
{
    ACBlockParams p = zero_ac(1, 1);
    p.k1x3 = Tensor({1, 1, 1, 3}, {1.0f, 2.0f, 3.0f});
    p.k3x1 = Tensor({1, 1, 3, 1}, {10.0f, 20.0f, 30.0f});
    const ConvParams f = ac_fuse(p);
    ASSERT_EQ(f.kernel.shape(), (Shape{1, 1, 3, 3}));
    const std::vector<float> expect{0, 10, 0, 1, 22, 3, 0, 30, 0};
    EXPECT_EQ(f.kernel, Tensor({1, 1, 3, 3}, expect));
}

TEST(ACFuseTest, ZeroKernelsSumBiases)
{
    ACBlockParams p = zero_ac(2, 3);
    p.b3x3 = Tensor({2}, {1.0f, 2.0f});
    p.b1x3 = Tensor({2}, {0.5f, 0.5f});
    p.b3x1 = Tensor({2}, {-3.0f, 1.0f});
    const ConvParams f = ac_fuse(p);
    EXPECT_EQ(f.kernel, Tensor({2, 3, 3, 3}));
    EXPECT_EQ(f.bias, Tensor({2}, {-1.5f, 3.5f}));
}

TEST(ACFuseTest, FusedMatchesTrainForm)
{
    SplitMix64 rng(22);
    for (int trial = 0; trial < 50; ++trial) {
        const int cin = static_cast<int>(rng.uniform_int(1, 4)), cout = static_cast<int>(rng.uniform_int(1, 4));
        const ACBlockParams p = random_ac(rng, cout, cin);
        const Tensor x = oracle::random_tensor(rng, {cin, 8, 8});
        for (int stride : {1, 2}) {
            EXPECT_LE(max_abs_diff(ac_block_forward_train(x, p, stride), ac_block_forward_fused(x, ac_fuse(p), stride)),
                      1e-5);
        }
    }
}

TEST(ResidualTest, ZeroWeightsGiveRelu)
{
    SplitMix64 rng(23);
    const Tensor x = oracle::random_tensor(rng, {3, 6, 6});
    ResidualParams p{zero_ac(3, 3), zero_ac(3, 3), std::nullopt, 1};
    EXPECT_EQ(residual_block(x, p), relu(x));
}

TEST(ResidualTest, ZeroInputZeroBiases)
{
    SplitMix64 rng(24);
    ResidualParams p{random_ac(rng, 4, 4), random_ac(rng, 4, 4), std::nullopt, 1};
    for (auto* slot : {&p.ac1, &p.ac2}) {
        auto& ac = std::get<ACBlockParams>(*slot);
        ac.b3x3 = ac.b1x3 = ac.b3x1 = Tensor({4});
    }
    EXPECT_EQ(residual_block(Tensor({4, 5, 5}), p), Tensor({4, 5, 5}));
}

TEST(ResidualTest, StrideTwoHalvesExtent)
{
    SplitMix64 rng(25);
    ResidualParams p{random_ac(rng, 6, 3), random_ac(rng, 6, 6), ConvParams{oracle::random_tensor(rng, {6, 3, 1, 1}),
                                                                             oracle::random_tensor(rng, {6})},
                     2};
    for (int h : {8, 9, 16}) {
        const Tensor y = residual_block(oracle::random_tensor(rng, {3, h, 12}), p);
        EXPECT_EQ(y.shape(), (Shape{6, (h - 1) / 2 + 1, 6}));
    }
}

TEST(ResidualTest, MissingProjectionRejected)
{
    SplitMix64 rng(26);
    ResidualParams widen{random_ac(rng, 6, 3), random_ac(rng, 6, 6), std::nullopt, 1};
    EXPECT_THROW(residual_block(Tensor({3, 8, 8}), widen), std::invalid_argument);
    ResidualParams strided{random_ac(rng, 3, 3), random_ac(rng, 3, 3), std::nullopt, 2};
    EXPECT_THROW(residual_block(Tensor({3, 8, 8}), strided), std::invalid_argument);
}

TEST(SETest, SaturatedGatePassesInput)
{
    SplitMix64 rng(27);
    const Tensor x = oracle::random_tensor(rng, {4, 5, 5});
    const Tensor y = se_block(x, constant_gate_se(4, 40.0f));
    EXPECT_LE(max_abs_diff(x, y), 1e-6);
}

TEST(SETest, ClosedGateZeroesOutput)
{
    SplitMix64 rng(28);
    const Tensor x = oracle::random_tensor(rng, {4, 5, 5});
    const Tensor y = se_block(x, constant_gate_se(4, -40.0f));
    for (float v : y.values()) EXPECT_LE(std::abs(v), 1e-6);
}

TEST(SETest, PerChannelScaling)
{
    SplitMix64 rng(29);
    for (int trial = 0; trial < 20; ++trial) {
        const Tensor x = oracle::random_tensor(rng, {8, 4, 6});
        const SEParams p = random_se(rng, 8, 4);
        const std::vector<float> g = se_gate(x, p);
        const Tensor y = se_block(x, p);
        for (int c = 0; c < 8; ++c) {
            EXPECT_GT(g[c], 0.0f);
            EXPECT_LT(g[c], 1.0f);
            for (int yy = 0; yy < 4; ++yy)
                for (int xx = 0; xx < 6; ++xx) {
                    EXPECT_EQ(y.at(c, yy, xx), g[c] * x.at(c, yy, xx));
                    // A single ratio per channel, independent of the gate readout.
                    EXPECT_NEAR(double(y.at(c, yy, xx)) * x.at(c, 0, 0), double(y.at(c, 0, 0)) * x.at(c, yy, xx),
                                1e-6);
                }
        }
    }
}

TEST(SETest, ShapeMismatchRejected)
{
    SplitMix64 rng(30);
    EXPECT_THROW(se_block(Tensor({6, 3, 3}), random_se(rng, 8, 4)), std::invalid_argument);
}

TEST(FPATest, SingleLevelIdentity)
{
    SplitMix64 rng(31);
    const Tensor x = oracle::random_tensor(rng, {4, 6, 6});
    const Tensor y = fpa_fuse(std::vector<Tensor>{x}, constant_gate_se(4, 40.0f), identity_1x1(4));
    EXPECT_LE(max_abs_diff(x, y), 1e-6);
}

TEST(FPATest, ZeroLevelStaysZeroAfterConcat)
{
    // Read the concatenation through an identity reduce with an open gate.
    SplitMix64 rng(32);
    const Tensor fine = oracle::random_tensor(rng, {2, 8, 8});
    const Tensor coarse({3, 4, 4});
    const Tensor y = fpa_fuse(std::vector<Tensor>{fine, coarse}, constant_gate_se(5, 40.0f), identity_1x1(5));
    ASSERT_EQ(y.shape(), (Shape{5, 8, 8}));
    for (int c = 0; c < 3; ++c)
        for (float v : y.plane(c)) EXPECT_EQ(v, 0.0f);
    EXPECT_LE(max_abs_diff(y.slice_channels(3, 2), fine), 1e-6);
}

TEST(FPATest, OutputShapeFollowsReduceKernel)
{
    SplitMix64 rng(33);
    std::vector<Tensor> levels{oracle::random_tensor(rng, {2, 16, 16}), oracle::random_tensor(rng, {4, 8, 8}),
                               oracle::random_tensor(rng, {8, 4, 4}), oracle::random_tensor(rng, {16, 2, 2})};
    for (std::size_t n = 1; n <= levels.size(); ++n) {
        int total = 0;
        for (std::size_t i = 0; i < n; ++i) total += levels[i].dim(0);
        const ConvParams reduce{oracle::random_tensor(rng, {5, total, 1, 1}), oracle::random_tensor(rng, {5})};
        const Tensor y = fpa_fuse(std::span<const Tensor>(levels.data(), n), random_se(rng, total, 1), reduce);
        EXPECT_EQ(y.shape(), (Shape{5, 16, 16}));
    }
}

TEST(FPATest, NonIntegerFactorRejected)
{
    SplitMix64 rng(34);
    std::vector<Tensor> levels{Tensor({1, 9, 9}), Tensor({1, 4, 4})};
    EXPECT_THROW(fpa_fuse(levels, random_se(rng, 2, 1), identity_1x1(2)), std::invalid_argument);
}

TEST(ModelTest, FullWidthShapes)
{
    const ModelConfig cfg;
    const ModelParams p = init_model(cfg, 1);
    SplitMix64 rng(35);
    const HeadOutputs out = model_forward(oracle::random_tensor(rng, {3, 128, 128}, 0, 1), p);
    EXPECT_EQ(out.heatmap.shape(), (Shape{15, 32, 32}));
    EXPECT_EQ(out.wh.shape(), (Shape{2, 32, 32}));
    EXPECT_EQ(out.offset.shape(), (Shape{2, 32, 32}));
    for (float v : out.heatmap.values()) {
        EXPECT_GT(v, 0.0f);
        EXPECT_LT(v, 1.0f);
    }
}

TEST(ModelTest, BackboneLevelsFollowResNetLayout)
{
    const ModelConfig cfg = slim_config();
    const ModelParams p = init_model(cfg, 2);
    const std::vector<Tensor> levels = backbone_forward(Tensor({3, 64, 96}, 0.5f), p);
    ASSERT_EQ(levels.size(), 4u);
    EXPECT_EQ(levels[0].shape(), (Shape{8, 16, 24}));
    EXPECT_EQ(levels[1].shape(), (Shape{16, 8, 12}));
    EXPECT_EQ(levels[2].shape(), (Shape{32, 4, 6}));
    EXPECT_EQ(levels[3].shape(), (Shape{64, 2, 3}));
}

TEST(ModelTest, RejectsIndivisibleInput)
{
    const ModelParams p = init_model(slim_config(), 3);
    try {
        model_forward(Tensor({3, 100, 128}), p);
        FAIL() << "expected a throw";
    } catch (const std::invalid_argument& e) {
        EXPECT_NE(std::string(e.what()).find("32"), std::string::npos) << e.what();
    }
}

TEST(ModelTest, HeatmapInsideOpenIntervalForRandomParams)
{
    for (std::uint64_t seed : {4u, 5u, 6u}) {
        const ModelParams p = init_model(slim_config(), seed);
        SplitMix64 rng(seed);
        const HeadOutputs out = model_forward(oracle::random_tensor(rng, {3, 64, 64}, -5, 5), p);
        for (float v : out.heatmap.values()) {
            EXPECT_GT(v, 0.0f);
            EXPECT_LT(v, 1.0f);
        }
        EXPECT_TRUE(out.wh.all_finite());
        EXPECT_TRUE(out.offset.all_finite());
    }
}

TEST(ModelTest, ForwardIsDeterministic)
{
    const ModelParams p = init_model(slim_config(), 7);
    SplitMix64 rng(36);
    const Tensor x = oracle::random_tensor(rng, {3, 64, 64}, 0, 1);
    const HeadOutputs a = model_forward(x, p), b = model_forward(x, p);
    EXPECT_EQ(a.heatmap, b.heatmap);
    EXPECT_EQ(a.wh, b.wh);
    EXPECT_EQ(a.offset, b.offset);
}

TEST(ModelTest, InitIsSeeded)
{
    const ModelConfig cfg = slim_config();
    const TensorFile a = model_to_tensor_file(init_model(cfg, 8), cfg);
    const TensorFile b = model_to_tensor_file(init_model(cfg, 8), cfg);
    const TensorFile c = model_to_tensor_file(init_model(cfg, 9), cfg);
    EXPECT_EQ(a, b);
    EXPECT_NE(a, c);
    EXPECT_EQ(init_model(cfg, 8).heatmap.out.bias, Tensor({15}, -2.19f));
}

TEST(ModelTest, FusedModelMatchesTrainModel)
{
    const ModelConfig cfg = slim_config();
    const ModelParams p = init_model(cfg, 10);
    const ModelParams f = fuse_model(p);
    EXPECT_FALSE(p.is_fused());
    EXPECT_TRUE(f.is_fused());
    SplitMix64 rng(37);
    const Tensor x = oracle::random_tensor(rng, {3, 64, 64}, 0, 1);
    const HeadOutputs a = model_forward(x, p), b = model_forward(x, f);
    EXPECT_LE(max_abs_diff(a.heatmap, b.heatmap), 1e-5);
    EXPECT_LE(max_abs_diff(a.wh, b.wh), 1e-5);
    EXPECT_LE(max_abs_diff(a.offset, b.offset), 1e-5);
}

TEST(WeightsTest, SaveLoadIsBitExact)
{
    const ModelConfig cfg = slim_config();
    for (bool fused : {false, true}) {
        ModelParams p = init_model(cfg, 11);
        if (fused) p = fuse_model(p);
        const TensorFile file = model_to_tensor_file(p, cfg);
        std::stringstream buf;
        write_tensor_file(file, buf);
        const std::string bytes = buf.str();
        const TensorFile back = read_tensor_file(buf);
        EXPECT_EQ(back, file);
        std::stringstream again;
        write_tensor_file(model_to_tensor_file(model_from_tensor_file(back, cfg), cfg), again);
        EXPECT_EQ(again.str(), bytes);
    }
}

TEST(WeightsTest, ShapeMismatchNamesBothShapes)
{
    const ModelConfig cfg = slim_config();
    const TensorFile file = model_to_tensor_file(init_model(cfg, 12), cfg);
    ModelConfig wider = cfg;
    wider.head_width = 32;
    try {
        model_from_tensor_file(file, wider);
        FAIL() << "expected a throw";
    } catch (const std::invalid_argument& e) {
        const std::string msg = e.what();
        EXPECT_NE(msg.find("16"), std::string::npos) << msg;
        EXPECT_NE(msg.find("32"), std::string::npos) << msg;
    }
}
