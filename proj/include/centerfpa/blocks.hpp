#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include "centerfpa/config.hpp"
#include "centerfpa/tensor.hpp"

namespace cfpa {

/// A plain convolution: kernel [Cout, Cin, kh, kw] and bias [Cout].
struct ConvParams {
    Tensor kernel;
    Tensor bias;

    int out_channels() const { return kernel.dim(0); }
    int in_channels() const { return kernel.dim(1); }
};

/// Asymmetric convolution block in training form: parallel 3x3, 1x3 and 3x1
/// branches whose outputs are summed.
struct ACBlockParams {
    Tensor k3x3; // [Cout, Cin, 3, 3]
    Tensor k1x3; // [Cout, Cin, 1, 3]
    Tensor k3x1; // [Cout, Cin, 3, 1]
    Tensor b3x3, b1x3, b3x1;

    int out_channels() const { return k3x3.dim(0); }
    int in_channels() const { return k3x3.dim(1); }
    void validate() const;
};

/// Either the training form or the fused single 3x3 convolution.
using ACBlockSlot = std::variant<ACBlockParams, ConvParams>;

struct SEParams {
    Tensor reduce_weight; // [C/r, C]
    Tensor reduce_bias;   // [C/r]
    Tensor expand_weight; // [C, C/r]
    Tensor expand_bias;   // [C]

    int channels() const { return reduce_weight.dim(1); }
};

struct ResidualParams {
    ACBlockSlot ac1;
    ACBlockSlot ac2;
    std::optional<ConvParams> projection; // 1x1 on the shortcut
    int stride = 1;
};

struct HeadParams {
    ConvParams conv; // 3x3, padding 1
    ConvParams out;  // 1x1
};

struct ModelParams {
    ConvParams stem;                                 // 3x3 stride 2
    std::array<std::array<ResidualParams, 2>, 4> stages;
    SEParams se;
    ConvParams reduce;                               // 1x1 after SE
    HeadParams heatmap, wh, offset;

    int num_classes() const { return heatmap.out.out_channels(); }
    bool is_fused() const;
};

Tensor conv_forward(const Tensor& x, const ConvParams& p, int stride, Padding2d padding);

Tensor ac_block_forward_train(const Tensor& x, const ACBlockParams& p, int stride);
Tensor ac_block_forward_fused(const Tensor& x, const ConvParams& fused, int stride);
Tensor ac_block_forward(const Tensor& x, const ACBlockSlot& p, int stride);

/// Folds the 1x3 kernel into the middle row and the 3x1 kernel into the middle
/// column of the 3x3 kernel; biases add.
ConvParams ac_fuse(const ACBlockParams& p);

/// relu(shortcut(x) + ac2(relu(ac1(x))))
Tensor residual_block(const Tensor& x, const ResidualParams& p);

/// Per-channel gate in (0, 1).
std::vector<float> se_gate(const Tensor& x, const SEParams& p);
Tensor se_block(const Tensor& x, const SEParams& p);

/// Upsamples every level to the finest extent, concatenates coarsest first,
/// gates channels with SE and reduces with a 1x1 convolution.
/// `levels` are given finest first (backbone order).
Tensor fpa_fuse(std::span<const Tensor> levels, const SEParams& se, const ConvParams& reduce);

struct HeadOutputs {
    Tensor heatmap; // [C, H/R, W/R], sigmoid applied
    Tensor wh;      // [2, H/R, W/R]
    Tensor offset;  // [2, H/R, W/R]
};

/// Output stride of the heads relative to the input image.
inline constexpr int kModelOutputStride = 4;
/// Input extents must be multiples of this (deepest backbone level is 1/32).
inline constexpr int kModelInputMultiple = 32;

/// Backbone level outputs at 1/4, 1/8, 1/16, 1/32 of the input.
std::vector<Tensor> backbone_forward(const Tensor& image, const ModelParams& params);

HeadOutputs model_forward(const Tensor& image, const ModelParams& params);

/// Seeded initialization. Weights are uniform in [-1/sqrt(fan_in), 1/sqrt(fan_in)]
/// drawn from splitmix64 in a fixed parameter order; biases are zero except the
/// heatmap output bias, which is -2.19 (sigmoid ~ 0.1).
ModelParams init_model(const ModelConfig& cfg, std::uint64_t seed);

/// Replaces every training-form ACBlock with its fused convolution.
ModelParams fuse_model(const ModelParams& params);

} // namespace cfpa
