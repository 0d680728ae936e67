#pragma once

#include "centerfpa/config.hpp"
#include "centerfpa/tensor.hpp"

namespace cfpa {

/// Predictions are clamped to [kFocalEps, 1 - kFocalEps] before taking logs.
inline constexpr double kFocalEps = 1e-7;

struct LossResult {
    double loss = 0.0;
    Tensor grad;          // d loss / d prediction, same shape as the prediction
    bool empty = false;   // N was 0; loss and gradient are zero
};

/// Penalty-reduced focal loss over a post-sigmoid heatmap, normalized by the
/// object count N. Cells with gt >= phi are positives.
LossResult focal_loss(const Tensor& pred, const Tensor& gt, const LossConfig& cfg, int N);

/// L1 over masked cells of a [2, h, w] map, normalized by N. The subgradient
/// at pred == gt is 0.
LossResult l1_loss_masked(const Tensor& pred, const Tensor& gt, const Tensor& mask, int N);

double total_loss(double focal, double wh, double offset, const LossConfig& cfg);

} // namespace cfpa
