#pragma once

#include <span>
#include <vector>

#include "centerfpa/bbox.hpp"
#include "centerfpa/tensor.hpp"

namespace cfpa {

struct CenterPoint {
    double px = 0.0, py = 0.0;  // box center in image pixels
    int qx = 0, qy = 0;         // floor(p / R), the owning head-map cell
    double fx = 0.0, fy = 0.0;  // p / R - q, in [0, 1)
};

CenterPoint center_point(const BBox& box, int R);

struct GaussianSigmas {
    double sx = 0.0;
    double sy = 0.0;
};

/// Standard deviations such that three sigmas span half the downsampled extent.
GaussianSigmas gaussian_sigmas(double w_ds, double h_ds);

/// Separable Gaussian heat value at offset (dx, dy) from the center cell.
double gaussian_value(double dx, double dy, GaussianSigmas s);

/// Encoded training targets on the R-times downsampled grid.
struct Targets {
    Tensor heatmap;  // [C, H/R, W/R] in [0, 1]
    Tensor wh;       // [2, H/R, W/R] downsampled width, height at each center
    Tensor offset;   // [2, H/R, W/R] fractional part of p / R at each center
    Tensor pos_mask; // [H/R, W/R] 1 at centers
    int num_objects = 0;
    int collisions = 0; // objects whose center cell was already taken
};

/// Boxes must lie in [0, W] x [0, H]; W and H must be multiples of R. Gaussians
/// are truncated at three sigmas per axis and merged by elementwise max. When
/// two boxes share a center cell the later one owns wh/offset.
Targets encode_targets(std::span<const BBox> boxes, int W, int H, int C, int R);

struct Peak {
    int x = 0;
    int y = 0;
    int class_id = 0;
    float score = 0.0f;

    friend bool operator==(const Peak&, const Peak&) = default;
};

/// Hot spots are cells equal to their 3x3 neighborhood max (borders padded
/// with -inf). Returns the K best across all channels, ordered by score
/// descending then (channel, row, column) ascending.
std::vector<Peak> extract_peaks(const Tensor& heatmap, int K);

struct DecodeResult {
    std::vector<BBox> boxes;
    int dropped = 0; // peaks with a non-positive predicted width or height
};

DecodeResult decode_boxes(std::span<const Peak> peaks, const Tensor& wh, const Tensor& offset, int R);

} // namespace cfpa
