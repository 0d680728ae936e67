#include "centerfpa/synth.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

#include "centerfpa/codec.hpp"
#include "centerfpa/eval.hpp"
#include "centerfpa/rng.hpp"
#include "json.hpp"

namespace cfpa {

namespace {

std::array<float, 3> class_color(int class_id)
{
    // Golden-ratio walk around three phase-shifted cosines.
    const double t = std::fmod(class_id * 0.6180339887498949, 1.0) * 2.0 * 3.141592653589793;
    std::array<float, 3> rgb{};
    for (int i = 0; i < 3; ++i) {
        rgb[i] = static_cast<float>(0.6 + 0.35 * std::cos(t + i * 2.0943951023931953));
    }
    return rgb;
}

float pattern_gain(FillPattern p, int x, int y)
{
    constexpr int period = 4;
    switch (p) {
    case FillPattern::kSolid: return 1.0f;
    case FillPattern::kHStripes: return (y / period) % 2 == 0 ? 1.0f : 0.6f;
    case FillPattern::kVStripes: return (x / period) % 2 == 0 ? 1.0f : 0.6f;
    case FillPattern::kChecker: return ((x / period) + (y / period)) % 2 == 0 ? 1.0f : 0.6f;
    }
    return 1.0f;
}

void validate_spec(const SceneSpec& spec)
{
    if (spec.width < 1 || spec.height < 1 || spec.num_classes < 1) {
        throw std::invalid_argument("scene: extents and class count must be positive");
    }
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        const BBox b = spec.objects[i].box();
        if (!b.valid() || b.class_id >= spec.num_classes || b.x1 < 0.0 || b.y1 < 0.0 ||
            b.x2 > spec.width || b.y2 > spec.height) {
            std::ostringstream os;
            os << "scene: object " << i << " (" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", " << b.y2
               << ", class " << b.class_id << ") is degenerate or outside the " << spec.width << "x"
               << spec.height << " image";
            throw std::invalid_argument(os.str());
        }
    }
}

} // namespace

Scene generate_scene(const SceneSpec& spec)
{
    validate_spec(spec);
    Scene scene;
    scene.image = Tensor({3, spec.height, spec.width});
    SplitMix64 rng(spec.seed);
    for (float& v : scene.image.values()) v = static_cast<float>(rng.uniform(0.0, 0.25));

    for (const SceneObject& obj : spec.objects) {
        const BBox b = obj.box();
        const auto rgb = class_color(obj.class_id);
        // Pixels whose centers fall inside the box.
        const int x0 = static_cast<int>(std::ceil(b.x1 - 0.5)), x1 = static_cast<int>(std::ceil(b.x2 - 0.5));
        const int y0 = static_cast<int>(std::ceil(b.y1 - 0.5)), y1 = static_cast<int>(std::ceil(b.y2 - 0.5));
        for (int y = y0; y < y1; ++y) {
            for (int x = x0; x < x1; ++x) {
                const float g = pattern_gain(obj.pattern, x - x0, y - y0);
                for (int c = 0; c < 3; ++c) scene.image.at(c, y, x) = rgb[c] * g;
            }
        }
        scene.gts.push_back(b);
    }
    return scene;
}

SceneSpec random_scene_spec(const RandomSceneOptions& opts)
{
    if (opts.min_size < 2 || opts.max_size < opts.min_size || opts.max_size > std::min(opts.width, opts.height)) {
        throw std::invalid_argument("random_scene_spec: need 2 <= min_size <= max_size <= image extent");
    }
    SplitMix64 rng(opts.seed ^ 0x5ce7e5eedULL);
    SceneSpec spec;
    spec.width = opts.width;
    spec.height = opts.height;
    spec.num_classes = opts.num_classes;
    spec.seed = opts.seed;

    const int half_min = opts.min_size / 2, half_max = opts.max_size / 2;
    constexpr int kAttemptsPerObject = 200;
    for (int n = 0; n < opts.num_objects; ++n) {
        for (int attempt = 0; attempt < kAttemptsPerObject; ++attempt) {
            SceneObject o;
            const int hw = static_cast<int>(rng.uniform_int(half_min, half_max));
            const int hh = static_cast<int>(rng.uniform_int(half_min, half_max));
            o.width = 2.0 * hw;
            o.height = 2.0 * hh;
            o.cx = static_cast<double>(rng.uniform_int(hw, opts.width - hw));
            o.cy = static_cast<double>(rng.uniform_int(hh, opts.height - hh));
            o.class_id = static_cast<int>(rng.uniform_int(0, opts.num_classes - 1));
            o.pattern = static_cast<FillPattern>(rng.uniform_int(0, 3));
            const bool clash = std::any_of(spec.objects.begin(), spec.objects.end(), [&](const SceneObject& p) {
                if (std::max(std::abs(p.cx - o.cx), std::abs(p.cy - o.cy)) < opts.min_center_separation) return true;
                return p.class_id == o.class_id && iou(p.box(), o.box()) > opts.max_same_class_iou;
            });
            if (!clash) {
                spec.objects.push_back(o);
                break;
            }
        }
    }
    return spec;
}

std::string scene_spec_to_json(const SceneSpec& spec)
{
    nlohmann::json j;
    j["width"] = spec.width;
    j["height"] = spec.height;
    j["num_classes"] = spec.num_classes;
    j["seed"] = spec.seed;
    j["objects"] = nlohmann::json::array();
    for (const SceneObject& o : spec.objects) {
        j["objects"].push_back({{"class_id", o.class_id},
                                {"cx", o.cx},
                                {"cy", o.cy},
                                {"width", o.width},
                                {"height", o.height},
                                {"pattern", static_cast<int>(o.pattern)}});
    }
    return j.dump(2) + "\n";
}

SceneSpec scene_spec_from_json(const std::string& text)
{
    SceneSpec spec;
    try {
        const auto j = nlohmann::json::parse(text);
        spec.width = j.at("width").get<int>();
        spec.height = j.at("height").get<int>();
        spec.num_classes = j.at("num_classes").get<int>();
        spec.seed = j.at("seed").get<std::uint64_t>();
        for (const auto& o : j.at("objects")) {
            SceneObject obj;
            obj.class_id = o.at("class_id").get<int>();
            obj.cx = o.at("cx").get<double>();
            obj.cy = o.at("cy").get<double>();
            obj.width = o.at("width").get<double>();
            obj.height = o.at("height").get<double>();
            const int pattern = o.value("pattern", 0);
            if (pattern < 0 || pattern > 3) throw std::invalid_argument("scene: unknown fill pattern");
            obj.pattern = static_cast<FillPattern>(pattern);
            spec.objects.push_back(obj);
        }
    } catch (const nlohmann::json::exception& e) {
        throw std::invalid_argument(std::string("scene: malformed spec: ") + e.what());
    }
    validate_spec(spec);
    return spec;
}

HeadOutputs oracle_heads(std::span<const BBox> gts, int W, int H, int C, int R)
{
    Targets t = encode_targets(gts, W, H, C, R);
    return {std::move(t.heatmap), std::move(t.wh), std::move(t.offset)};
}

HeadOutputs OracleHeadSource::predict(const Tensor& tile, const TileContext& ctx) const
{
    const TileFrame& f = ctx.frame;
    if (tile.rank() != 3 || tile.dim(1) != f.height || tile.dim(2) != f.width) {
        throw std::invalid_argument("oracle heads: tile " + shape_string(tile.shape()) +
                                    " does not match its frame");
    }
    std::vector<BBox> local;
    for (BBox b : scale_boxes(gts_, ctx.scale_x, ctx.scale_y)) {
        b.x1 -= f.origin_x;
        b.x2 -= f.origin_x;
        b.y1 -= f.origin_y;
        b.y2 -= f.origin_y;
        if (b.x1 >= 0.0 && b.y1 >= 0.0 && b.x2 <= f.width && b.y2 <= f.height) local.push_back(b);
    }
    return oracle_heads(local, f.width, f.height, num_classes_, R_);
}

} // namespace cfpa
