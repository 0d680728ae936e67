#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

namespace cfpa {

using Shape = std::vector<int>;

std::string shape_string(const Shape& shape);

/// Dense row-major float tensor. Feature maps are [C, H, W], kernels are
/// [Cout, Cin, kh, kw]. Every extent is at least 1.
class Tensor {
public:
    Tensor() = default;
    explicit Tensor(Shape shape, float fill = 0.0f);
    Tensor(Shape shape, std::vector<float> values);

    const Shape& shape() const { return shape_; }
    int rank() const { return static_cast<int>(shape_.size()); }
    int dim(int axis) const { return shape_.at(static_cast<std::size_t>(axis)); }
    std::size_t size() const { return data_.size(); }
    bool empty() const { return data_.empty(); }

    std::span<const float> values() const { return data_; }
    std::span<float> values() { return data_; }
    const float* data() const { return data_.data(); }
    float* data() { return data_.data(); }

    float operator[](std::size_t i) const { return data_[i]; }
    float& operator[](std::size_t i) { return data_[i]; }

    // Rank-3 accessors, [c, y, x].
    float at(int c, int y, int x) const { return data_[offset3(c, y, x)]; }
    float& at(int c, int y, int x) { return data_[offset3(c, y, x)]; }
    // Rank-4 accessors, [o, i, y, x].
    float at(int o, int i, int y, int x) const { return data_[offset4(o, i, y, x)]; }
    float& at(int o, int i, int y, int x) { return data_[offset4(o, i, y, x)]; }

    // For a rank-3 tensor, the [H, W] plane of channel c.
    std::span<const float> plane(int c) const;
    std::span<float> plane(int c);

    // Copy of channels [first, first + count) of a rank-3 tensor.
    Tensor slice_channels(int first, int count) const;

    bool all_finite() const;

    friend bool operator==(const Tensor&, const Tensor&) = default;

private:
    std::size_t offset3(int c, int y, int x) const
    {
        return (static_cast<std::size_t>(c) * shape_[1] + y) * shape_[2] + x;
    }
    std::size_t offset4(int o, int i, int y, int x) const
    {
        return ((static_cast<std::size_t>(o) * shape_[1] + i) * shape_[2] + y) * shape_[3] + x;
    }

    Shape shape_;
    std::vector<float> data_;
};

struct Padding2d {
    int h = 0;
    int w = 0;
};

/// Cross-correlation (no kernel flip) with zero padding. Accumulates in double.
/// input [Cin, H, W], kernel [Cout, Cin, kh, kw], bias of length Cout (may be empty).
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias, int stride,
              Padding2d padding);
Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias, int stride,
              int padding);

/// Max pooling where padded cells count as -inf.
Tensor maxpool2d(const Tensor& input, int k, int stride, int padding);

std::vector<double> global_avg_pool(const Tensor& input);

Tensor upsample_nearest(const Tensor& input, int factor);

/// weight [m, n]; bias may be empty.
std::vector<double> linear(std::span<const double> input, const Tensor& weight,
                           std::span<const float> bias);

Tensor concat_channels(std::span<const Tensor> inputs);

double sigmoid(double x);

// Elementwise. Tensor sigmoid is clamped to the open interval (0, 1) as
// representable in float, so saturated logits never reach 0 or 1 exactly.
Tensor sigmoid(const Tensor& input);
Tensor relu(const Tensor& input);

Tensor add(const Tensor& a, const Tensor& b);

} // namespace cfpa
