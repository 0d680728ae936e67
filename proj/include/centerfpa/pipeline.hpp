#pragma once

#include <span>
#include <vector>

#include "centerfpa/bbox.hpp"
#include "centerfpa/blocks.hpp"
#include "centerfpa/config.hpp"
#include "centerfpa/tensor.hpp"

namespace cfpa {

/// Placement of one tile in the source image. width/height are the full tile
/// size even where the tile hangs past the image edge (that part is zero-padded).
struct TileFrame {
    int origin_x = 0;
    int origin_y = 0;
    int width = 0;
    int height = 0;

    friend bool operator==(const TileFrame&, const TileFrame&) = default;
};

enum class CoordFrame { kTileLocal, kGlobal };

struct DetectionSet {
    std::vector<BBox> boxes;
    CoordFrame frame = CoordFrame::kGlobal;
    int dropped = 0; // decoded peaks discarded for non-positive size
};

/// Origins 0, stride, 2*stride, ...; the last origin is clamped to
/// extent - tile so the final tile ends at the image edge.
std::vector<int> tile_origins(int extent, int tile, int stride);
std::vector<TileFrame> split_tiles(int W, int H, int tile = 1024, int stride = 824);

/// Pixels of `frame`, zero where it extends past the image.
Tensor crop_tile(const Tensor& image, const TileFrame& frame);

DetectionSet tile_to_global(const DetectionSet& dets, const TileFrame& frame);

/// Class-wise greedy NMS. Output is ordered by score descending; equal scores
/// keep insertion order.
DetectionSet nms(const DetectionSet& dets, double iou_thresh = 0.45);

/// Bilinear resize with half-pixel centers.
Tensor resize_bilinear(const Tensor& image, int out_w, int out_h);

std::vector<BBox> scale_boxes(std::span<const BBox> boxes, double sx, double sy);

/// Where a tile sits and how the source image was rescaled before tiling.
struct TileContext {
    TileFrame frame;
    double scale_x = 1.0;
    double scale_y = 1.0;
};

/// Anything that turns a tile into head maps: the network, or a ground-truth oracle.
class HeadSource {
public:
    virtual ~HeadSource() = default;
    virtual int output_stride() const = 0;
    virtual int input_multiple() const = 0;
    virtual HeadOutputs predict(const Tensor& tile, const TileContext& ctx) const = 0;
};

class ModelHeadSource final : public HeadSource {
public:
    explicit ModelHeadSource(const ModelParams& params) : params_(params) {}
    int output_stride() const override { return kModelOutputStride; }
    int input_multiple() const override { return kModelInputMultiple; }
    HeadOutputs predict(const Tensor& tile, const TileContext&) const override
    {
        return model_forward(tile, params_);
    }

private:
    const ModelParams& params_;
};

/// Peaks -> score floor -> boxes, in the frame of the head maps' input.
DetectionSet decode_heads(const HeadOutputs& heads, const ModelConfig& cfg);

/// Split, score every tile, translate to global coordinates, concatenate, NMS.
/// Tiles are scored on up to `workers` threads; the result does not depend on it.
DetectionSet infer_large_image(const Tensor& image, const HeadSource& source, const ModelConfig& cfg,
                               int workers = 1);

/// Runs infer_large_image on rescaled copies of the image, maps boxes back to
/// the original frame, pools them and applies one final NMS. A scale of
/// exactly 1 uses the image unchanged; other scales round the resized extent
/// to the source's input multiple.
DetectionSet multiscale_infer(const Tensor& image, const HeadSource& source, const ModelConfig& cfg,
                              std::span<const double> scales, int workers = 1);

} // namespace cfpa
