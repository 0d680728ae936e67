#include "centerfpa/codec.hpp"

#include <algorithm>
#include <cmath>
#include <sstream>
#include <stdexcept>

namespace cfpa {

CenterPoint center_point(const BBox& box, int R)
{
    if (R < 1) throw std::invalid_argument("center_point: R must be >= 1");
    CenterPoint c;
    c.px = (box.x1 + box.x2) / 2.0;
    c.py = (box.y1 + box.y2) / 2.0;
    const double sx = c.px / R, sy = c.py / R;
    c.qx = static_cast<int>(std::floor(sx));
    c.qy = static_cast<int>(std::floor(sy));
    c.fx = sx - c.qx;
    c.fy = sy - c.qy;
    return c;
}

GaussianSigmas gaussian_sigmas(double w_ds, double h_ds)
{
    if (!(w_ds > 0.0) || !(h_ds > 0.0)) {
        std::ostringstream os;
        os << "gaussian_sigmas: extents must be positive, got " << w_ds << " x " << h_ds;
        throw std::invalid_argument(os.str());
    }
    return {w_ds / 6.0, h_ds / 6.0};
}

double gaussian_value(double dx, double dy, GaussianSigmas s)
{
    return std::exp(-(dx * dx) / (2.0 * s.sx * s.sx)) * std::exp(-(dy * dy) / (2.0 * s.sy * s.sy));
}

Targets encode_targets(std::span<const BBox> boxes, int W, int H, int C, int R)
{
    if (R < 1 || C < 1 || W < R || H < R || W % R != 0 || H % R != 0) {
        std::ostringstream os;
        os << "encode_targets: image " << W << "x" << H << " must be a positive multiple of R=" << R
           << " and C=" << C << " must be >= 1";
        throw std::invalid_argument(os.str());
    }
    const int w = W / R, h = H / R;
    Targets t;
    t.heatmap = Tensor({C, h, w});
    t.wh = Tensor({2, h, w});
    t.offset = Tensor({2, h, w});
    t.pos_mask = Tensor({h, w});

    for (std::size_t i = 0; i < boxes.size(); ++i) {
        const BBox& b = boxes[i];
        if (!b.valid() || b.class_id >= C || b.x1 < 0.0 || b.y1 < 0.0 || b.x2 > W || b.y2 > H) {
            std::ostringstream os;
            os << "encode_targets: box " << i << " (" << b.x1 << ", " << b.y1 << ", " << b.x2 << ", "
               << b.y2 << ", class " << b.class_id << ") is degenerate or outside the " << W << "x" << H
               << " image";
            throw std::invalid_argument(os.str());
        }
        const CenterPoint c = center_point(b, R);
        const double w_ds = b.width() / R, h_ds = b.height() / R;
        const GaussianSigmas s = gaussian_sigmas(w_ds, h_ds);

        const int rx = static_cast<int>(std::floor(3.0 * s.sx));
        const int ry = static_cast<int>(std::floor(3.0 * s.sy));
        for (int y = std::max(0, c.qy - ry); y <= std::min(h - 1, c.qy + ry); ++y) {
            for (int x = std::max(0, c.qx - rx); x <= std::min(w - 1, c.qx + rx); ++x) {
                const auto v = static_cast<float>(gaussian_value(x - c.qx, y - c.qy, s));
                float& cell = t.heatmap.at(b.class_id, y, x);
                cell = std::max(cell, v);
            }
        }

        const std::size_t idx = static_cast<std::size_t>(c.qy) * w + c.qx;
        if (t.pos_mask[idx] != 0.0f) ++t.collisions;
        t.pos_mask[idx] = 1.0f;
        t.wh.at(0, c.qy, c.qx) = static_cast<float>(w_ds);
        t.wh.at(1, c.qy, c.qx) = static_cast<float>(h_ds);
        t.offset.at(0, c.qy, c.qx) = static_cast<float>(c.fx);
        t.offset.at(1, c.qy, c.qx) = static_cast<float>(c.fy);
        ++t.num_objects;
    }
    return t;
}

std::vector<Peak> extract_peaks(const Tensor& heatmap, int K)
{
    if (heatmap.rank() != 3) {
        throw std::invalid_argument("extract_peaks: heatmap must be [C, h, w], got " +
                                    shape_string(heatmap.shape()));
    }
    if (K < 1) throw std::invalid_argument("extract_peaks: K must be >= 1");
    const Tensor pooled = maxpool2d(heatmap, 3, 1, 1);

    std::vector<Peak> peaks;
    for (int c = 0; c < heatmap.dim(0); ++c) {
        for (int y = 0; y < heatmap.dim(1); ++y) {
            for (int x = 0; x < heatmap.dim(2); ++x) {
                const float v = heatmap.at(c, y, x);
                if (v == pooled.at(c, y, x)) peaks.push_back({x, y, c, v});
            }
        }
    }
    // Candidates are generated in (channel, row, column) order, so a stable
    // sort on score alone yields the required tie-break.
    std::stable_sort(peaks.begin(), peaks.end(),
                     [](const Peak& a, const Peak& b) { return a.score > b.score; });
    if (peaks.size() > static_cast<std::size_t>(K)) peaks.resize(static_cast<std::size_t>(K));
    return peaks;
}

DecodeResult decode_boxes(std::span<const Peak> peaks, const Tensor& wh, const Tensor& offset, int R)
{
    if (wh.rank() != 3 || wh.dim(0) != 2 || offset.shape() != wh.shape()) {
        throw std::invalid_argument("decode_boxes: wh " + shape_string(wh.shape()) + " and offset " +
                                    shape_string(offset.shape()) + " must both be [2, h, w]");
    }
    DecodeResult result;
    result.boxes.reserve(peaks.size());
    for (const Peak& p : peaks) {
        if (p.x < 0 || p.y < 0 || p.x >= wh.dim(2) || p.y >= wh.dim(1)) {
            throw std::out_of_range("decode_boxes: peak outside the head maps");
        }
        const double bw = wh.at(0, p.y, p.x), bh = wh.at(1, p.y, p.x);
        if (!(bw > 0.0) || !(bh > 0.0)) {
            ++result.dropped;
            continue;
        }
        const double cx = p.x + static_cast<double>(offset.at(0, p.y, p.x));
        const double cy = p.y + static_cast<double>(offset.at(1, p.y, p.x));
        BBox b;
        b.x1 = (cx - bw / 2.0) * R;
        b.x2 = (cx + bw / 2.0) * R;
        b.y1 = (cy - bh / 2.0) * R;
        b.y2 = (cy + bh / 2.0) * R;
        b.class_id = p.class_id;
        b.score = p.score;
        result.boxes.push_back(b);
    }
    return result;
}

} // namespace cfpa
