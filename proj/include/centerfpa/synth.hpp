#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "centerfpa/bbox.hpp"
#include "centerfpa/blocks.hpp"
#include "centerfpa/pipeline.hpp"
#include "centerfpa/tensor.hpp"

namespace cfpa {

enum class FillPattern { kSolid = 0, kHStripes = 1, kVStripes = 2, kChecker = 3 };

struct SceneObject {
    int class_id = 0;
    double cx = 0.0, cy = 0.0;
    double width = 0.0, height = 0.0;
    FillPattern pattern = FillPattern::kSolid;

    BBox box() const { return {cx - width / 2, cy - height / 2, cx + width / 2, cy + height / 2, class_id, 1.0}; }
    friend bool operator==(const SceneObject&, const SceneObject&) = default;
};

struct SceneSpec {
    int width = 0;
    int height = 0;
    int num_classes = 1;
    std::vector<SceneObject> objects;
    std::uint64_t seed = 0; // background noise

    friend bool operator==(const SceneSpec&, const SceneSpec&) = default;
};

struct Scene {
    Tensor image; // [3, H, W] in [0, 1]
    std::vector<BBox> gts;
};

/// Noise background plus one textured rectangle per object. Objects may
/// overlap; out-of-bounds objects are rejected.
Scene generate_scene(const SceneSpec& spec);

struct RandomSceneOptions {
    int width = 512;
    int height = 512;
    int num_classes = 15;
    int num_objects = 10;
    int min_size = 8;    // even pixel sizes in [min_size, max_size]
    int max_size = 64;
    double min_center_separation = 8.0; // Chebyshev distance between centers
    double max_same_class_iou = 0.3;    // keeps same-class objects apart under NMS
    std::uint64_t seed = 0;
};

/// Integer centers and even sizes, so every box corner is an integer pixel.
/// May return fewer objects than requested when separation cannot be met.
SceneSpec random_scene_spec(const RandomSceneOptions& opts);

std::string scene_spec_to_json(const SceneSpec& spec);
SceneSpec scene_spec_from_json(const std::string& text);

/// Perfect head maps: the encoded targets reinterpreted as model outputs.
HeadOutputs oracle_heads(std::span<const BBox> gts, int W, int H, int C, int R);

/// Head source that answers every tile with oracle heads for the ground-truth
/// boxes fully contained in it (after applying the tile's rescale).
class OracleHeadSource final : public HeadSource {
public:
    OracleHeadSource(std::vector<BBox> gts, int num_classes, int R)
        : gts_(std::move(gts)), num_classes_(num_classes), R_(R)
    {
    }
    int output_stride() const override { return R_; }
    int input_multiple() const override { return R_; }
    HeadOutputs predict(const Tensor& tile, const TileContext& ctx) const override;

private:
    std::vector<BBox> gts_;
    int num_classes_;
    int R_;
};

} // namespace cfpa
