#include <cmath>
#include <stdexcept>

#include "centerfpa/blocks.hpp"
#include "centerfpa/rng.hpp"

namespace cfpa {

namespace {

class Initializer {
public:
    explicit Initializer(std::uint64_t seed) : rng_(seed) {}

    Tensor uniform(Shape shape, int fan_in)
    {
        const double bound = 1.0 / std::sqrt(static_cast<double>(fan_in));
        Tensor t(std::move(shape));
        for (float& v : t.values()) v = static_cast<float>(rng_.uniform(-bound, bound));
        return t;
    }

    ConvParams conv(int out, int in, int kh, int kw)
    {
        return {uniform({out, in, kh, kw}, in * kh * kw), Tensor({out})};
    }

    ACBlockParams ac_block(int out, int in)
    {
        ACBlockParams p;
        p.k3x3 = uniform({out, in, 3, 3}, in * 9);
        p.k1x3 = uniform({out, in, 1, 3}, in * 3);
        p.k3x1 = uniform({out, in, 3, 1}, in * 3);
        p.b3x3 = Tensor({out});
        p.b1x3 = Tensor({out});
        p.b3x1 = Tensor({out});
        return p;
    }

private:
    SplitMix64 rng_;
};

HeadOutputs run_heads(const Tensor& features, const ModelParams& p)
{
    auto head = [&](const HeadParams& h) {
        Tensor t = relu(conv_forward(features, h.conv, 1, Padding2d{1, 1}));
        return conv_forward(t, h.out, 1, Padding2d{0, 0});
    };
    return {sigmoid(head(p.heatmap)), head(p.wh), head(p.offset)};
}

} // namespace

bool ModelParams::is_fused() const
{
    for (const auto& stage : stages) {
        for (const auto& block : stage) {
            if (std::holds_alternative<ACBlockParams>(block.ac1) ||
                std::holds_alternative<ACBlockParams>(block.ac2)) {
                return false;
            }
        }
    }
    return true;
}

std::vector<Tensor> backbone_forward(const Tensor& image, const ModelParams& params)
{
    if (image.rank() != 3 || image.dim(0) != 3) {
        throw std::invalid_argument("model: expected a [3, H, W] image, got " + shape_string(image.shape()));
    }
    if (image.dim(1) % kModelInputMultiple != 0 || image.dim(2) % kModelInputMultiple != 0) {
        throw std::invalid_argument("model: image extent " + std::to_string(image.dim(2)) + "x" +
                                    std::to_string(image.dim(1)) + " must be a multiple of " +
                                    std::to_string(kModelInputMultiple));
    }
    Tensor x = relu(conv_forward(image, params.stem, 2, Padding2d{1, 1}));
    x = maxpool2d(x, 2, 2, 0);

    std::vector<Tensor> levels;
    levels.reserve(params.stages.size());
    for (const auto& stage : params.stages) {
        for (const auto& block : stage) x = residual_block(x, block);
        levels.push_back(x);
    }
    return levels;
}

HeadOutputs model_forward(const Tensor& image, const ModelParams& params)
{
    const std::vector<Tensor> levels = backbone_forward(image, params);
    const Tensor features = fpa_fuse(levels, params.se, params.reduce);
    return run_heads(features, params);
}

ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed)
{
    cfg.validate();
    Initializer init(seed);
    ModelParams p;
    const int base = cfg.backbone_width;
    p.stem = init.conv(base, 3, 3, 3);

    int in = base;
    for (int s = 0; s < 4; ++s) {
        const int width = base << s;
        const int stride = s == 0 ? 1 : 2;
        for (int b = 0; b < 2; ++b) {
            ResidualParams& r = p.stages[s][b];
            r.stride = b == 0 ? stride : 1;
            r.ac1 = init.ac_block(width, in);
            r.ac2 = init.ac_block(width, width);
            if (r.stride != 1 || in != width) r.projection = init.conv(width, in, 1, 1);
            in = width;
        }
    }

    const int pyramid = base * 15;
    const int hidden = pyramid / cfg.se_ratio;
    p.se.reduce_weight = init.uniform({hidden, pyramid}, pyramid);
    p.se.reduce_bias = Tensor({hidden});
    p.se.expand_weight = init.uniform({pyramid, hidden}, hidden);
    p.se.expand_bias = Tensor({pyramid});
    p.reduce = init.conv(cfg.reduce_width, pyramid, 1, 1);

    auto head = [&](int out) {
        return HeadParams{init.conv(cfg.head_width, cfg.reduce_width, 3, 3),
                          init.conv(out, cfg.head_width, 1, 1)};
    };
    p.heatmap = head(cfg.num_classes());
    p.wh = head(2);
    p.offset = head(2);
    for (float& b : p.heatmap.out.bias.values()) b = -2.19f;
    return p;
}

ModelParams fuse_model(const ModelParams& params)
{
    ModelParams out = params;
    for (auto& stage : out.stages) {
        for (auto& block : stage) {
            for (ACBlockSlot* slot : {&block.ac1, &block.ac2}) {
                if (const auto* train = std::get_if<ACBlockParams>(slot)) *slot = ac_fuse(*train);
            }
        }
    }
    return out;
}

} // namespace cfpa
