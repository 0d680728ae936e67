#pragma once

namespace cfpa {

/// Axis-aligned box in pixel coordinates. Ground truth carries score 1.
struct BBox {
    double x1 = 0.0, y1 = 0.0, x2 = 0.0, y2 = 0.0;
    int class_id = 0;
    double score = 1.0;

    double width() const { return x2 - x1; }
    double height() const { return y2 - y1; }
    double area() const { return width() * height(); }
    bool valid() const { return x1 < x2 && y1 < y2 && class_id >= 0; }

    friend bool operator==(const BBox&, const BBox&) = default;
};

} // namespace cfpa
