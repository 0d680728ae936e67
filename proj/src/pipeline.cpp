#include "centerfpa/pipeline.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <mutex>
#include <stdexcept>
#include <thread>

#include "centerfpa/codec.hpp"
#include "centerfpa/eval.hpp"

namespace cfpa {

std::vector<int> tile_origins(int extent, int tile, int stride)
{
    if (extent < 1) throw std::invalid_argument("tile_origins: image extent must be positive");
    if (tile < 1 || stride < 1 || stride > tile) {
        throw std::invalid_argument("tile_origins: need 0 < stride <= tile, got stride " +
                                    std::to_string(stride) + ", tile " + std::to_string(tile));
    }
    std::vector<int> origins{0};
    while (origins.back() + tile < extent) {
        origins.push_back(std::min(origins.back() + stride, extent - tile));
    }
    return origins;
}

std::vector<TileFrame> split_tiles(int W, int H, int tile, int stride)
{
    if (W < 1 || H < 1) {
        throw std::invalid_argument("split_tiles: non-positive image extent " + std::to_string(W) + "x" +
                                    std::to_string(H));
    }
    const std::vector<int> xs = tile_origins(W, tile, stride);
    const std::vector<int> ys = tile_origins(H, tile, stride);
    std::vector<TileFrame> frames;
    frames.reserve(xs.size() * ys.size());
    for (int y : ys) {
        for (int x : xs) frames.push_back({x, y, tile, tile});
    }
    return frames;
}

Tensor crop_tile(const Tensor& image, const TileFrame& frame)
{
    if (image.rank() != 3) throw std::invalid_argument("crop_tile: image must be [C, H, W]");
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    Tensor out({c, frame.height, frame.width});
    const int y_end = std::min(frame.height, h - frame.origin_y);
    const int x_end = std::min(frame.width, w - frame.origin_x);
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < y_end; ++y) {
            const float* src = image.plane(ch).data() +
                               static_cast<std::ptrdiff_t>(frame.origin_y + y) * w + frame.origin_x;
            std::copy(src, src + std::max(0, x_end), &out.at(ch, y, 0));
        }
    }
    return out;
}

DetectionSet tile_to_global(const DetectionSet& dets, const TileFrame& frame)
{
    if (dets.frame != CoordFrame::kTileLocal) {
        throw std::logic_error("tile_to_global: detections are already in the global frame");
    }
    DetectionSet out = dets;
    out.frame = CoordFrame::kGlobal;
    for (BBox& b : out.boxes) {
        b.x1 += frame.origin_x;
        b.x2 += frame.origin_x;
        b.y1 += frame.origin_y;
        b.y2 += frame.origin_y;
    }
    return out;
}

DetectionSet nms(const DetectionSet& dets, double iou_thresh)
{
    const auto& in = dets.boxes;
    std::vector<std::size_t> order(in.size());
    for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return in[a].score > in[b].score; });

    DetectionSet out;
    out.frame = dets.frame;
    out.dropped = dets.dropped;
    std::vector<std::vector<std::size_t>> kept_by_class;
    for (std::size_t idx : order) {
        const BBox& b = in[idx];
        if (b.class_id >= static_cast<int>(kept_by_class.size())) kept_by_class.resize(b.class_id + 1);
        auto& kept = kept_by_class[b.class_id];
        const bool suppressed = std::any_of(kept.begin(), kept.end(),
                                            [&](std::size_t k) { return iou(in[k], b) > iou_thresh; });
        if (suppressed) continue;
        kept.push_back(idx);
        out.boxes.push_back(b);
    }
    return out;
}

Tensor resize_bilinear(const Tensor& image, int out_w, int out_h)
{
    if (image.rank() != 3 || out_w < 1 || out_h < 1) {
        throw std::invalid_argument("resize_bilinear: bad input " + shape_string(image.shape()) +
                                    " or target extent");
    }
    const int c = image.dim(0), h = image.dim(1), w = image.dim(2);
    if (h == out_h && w == out_w) return image;

    struct Tap {
        int i0, i1;
        double t;
    };
    auto taps = [](int in, int out) {
        std::vector<Tap> v(static_cast<std::size_t>(out));
        const double ratio = static_cast<double>(in) / out;
        for (int o = 0; o < out; ++o) {
            const double src = std::clamp((o + 0.5) * ratio - 0.5, 0.0, static_cast<double>(in - 1));
            const int i0 = static_cast<int>(std::floor(src));
            v[o] = {i0, std::min(i0 + 1, in - 1), src - i0};
        }
        return v;
    };
    const auto ty = taps(h, out_h), tx = taps(w, out_w);
    Tensor out({c, out_h, out_w});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < out_h; ++y) {
            const Tap& a = ty[y];
            for (int x = 0; x < out_w; ++x) {
                const Tap& b = tx[x];
                const double top = image.at(ch, a.i0, b.i0) * (1.0 - b.t) + image.at(ch, a.i0, b.i1) * b.t;
                const double bot = image.at(ch, a.i1, b.i0) * (1.0 - b.t) + image.at(ch, a.i1, b.i1) * b.t;
                out.at(ch, y, x) = static_cast<float>(top * (1.0 - a.t) + bot * a.t);
            }
        }
    }
    return out;
}

std::vector<BBox> scale_boxes(std::span<const BBox> boxes, double sx, double sy)
{
    std::vector<BBox> out(boxes.begin(), boxes.end());
    for (BBox& b : out) {
        b.x1 *= sx;
        b.x2 *= sx;
        b.y1 *= sy;
        b.y2 *= sy;
    }
    return out;
}

DetectionSet decode_heads(const HeadOutputs& heads, const ModelConfig& cfg)
{
    std::vector<Peak> peaks = extract_peaks(heads.heatmap, cfg.K);
    std::erase_if(peaks, [&](const Peak& p) { return p.score < cfg.score_floor; });
    DecodeResult decoded = decode_boxes(peaks, heads.wh, heads.offset, cfg.R);
    return {std::move(decoded.boxes), CoordFrame::kTileLocal, decoded.dropped};
}

namespace {

void check_source(const HeadSource& source, const ModelConfig& cfg)
{
    if (cfg.R != source.output_stride()) {
        throw std::invalid_argument("config R=" + std::to_string(cfg.R) +
                                    " does not match the head output stride " +
                                    std::to_string(source.output_stride()));
    }
    if (cfg.tile % source.input_multiple() != 0) {
        throw std::invalid_argument("tile size " + std::to_string(cfg.tile) + " must be a multiple of " +
                                    std::to_string(source.input_multiple()));
    }
}

DetectionSet infer_tiles(const Tensor& image, const HeadSource& source, const ModelConfig& cfg,
                         int workers, double sx, double sy)
{
    check_source(source, cfg);
    if (image.rank() != 3) throw std::invalid_argument("infer: image must be [C, H, W]");
    const std::vector<TileFrame> frames = split_tiles(image.dim(2), image.dim(1), cfg.tile, cfg.stride);
    std::vector<DetectionSet> per_tile(frames.size());

    auto run = [&](std::size_t i) {
        const TileContext ctx{frames[i], sx, sy};
        const HeadOutputs heads = source.predict(crop_tile(image, frames[i]), ctx);
        per_tile[i] = tile_to_global(decode_heads(heads, cfg), frames[i]);
    };

    const std::size_t n_threads = std::min<std::size_t>(std::max(1, workers), frames.size());
    if (n_threads <= 1) {
        for (std::size_t i = 0; i < frames.size(); ++i) run(i);
    } else {
        std::atomic<std::size_t> next{0};
        std::exception_ptr error;
        std::mutex error_mutex;
        std::vector<std::thread> pool;
        for (std::size_t t = 0; t < n_threads; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next++; i < frames.size(); i = next++) {
                    try {
                        run(i);
                    } catch (...) {
                        std::lock_guard lock(error_mutex);
                        if (!error) error = std::current_exception();
                    }
                }
            });
        }
        for (auto& th : pool) th.join();
        if (error) std::rethrow_exception(error);
    }

    DetectionSet merged;
    for (const DetectionSet& d : per_tile) {
        merged.boxes.insert(merged.boxes.end(), d.boxes.begin(), d.boxes.end());
        merged.dropped += d.dropped;
    }
    return nms(merged, cfg.nms_iou);
}

int round_to_multiple(double v, int m)
{
    return std::max(m, static_cast<int>(std::lround(v / m)) * m);
}

} // namespace

DetectionSet infer_large_image(const Tensor& image, const HeadSource& source, const ModelConfig& cfg,
                               int workers)
{
    return infer_tiles(image, source, cfg, workers, 1.0, 1.0);
}

DetectionSet multiscale_infer(const Tensor& image, const HeadSource& source, const ModelConfig& cfg,
                              std::span<const double> scales, int workers)
{
    if (scales.empty()) throw std::invalid_argument("multiscale_infer: no scales given");
    if (image.rank() != 3) throw std::invalid_argument("multiscale_infer: image must be [C, H, W]");
    const int w = image.dim(2), h = image.dim(1);

    DetectionSet pooled;
    for (double s : scales) {
        if (!(s > 0.0)) throw std::invalid_argument("multiscale_infer: scales must be positive");
        DetectionSet d;
        if (s == 1.0) {
            d = infer_tiles(image, source, cfg, workers, 1.0, 1.0);
        } else {
            const int m = source.input_multiple();
            const int sw = round_to_multiple(w * s, m), sh = round_to_multiple(h * s, m);
            const double sx = static_cast<double>(sw) / w, sy = static_cast<double>(sh) / h;
            d = infer_tiles(resize_bilinear(image, sw, sh), source, cfg, workers, sx, sy);
            for (BBox& b : d.boxes) {
                b.x1 /= sx;
                b.x2 /= sx;
                b.y1 /= sy;
                b.y2 /= sy;
            }
        }
        pooled.boxes.insert(pooled.boxes.end(), d.boxes.begin(), d.boxes.end());
        pooled.dropped += d.dropped;
    }
    if (scales.size() == 1) return pooled;
    return nms(pooled, cfg.nms_iou);
}

} // namespace cfpa
