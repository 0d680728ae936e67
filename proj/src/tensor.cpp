#include "centerfpa/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>
#include <stdexcept>

namespace cfpa {

namespace {

std::size_t element_count(const Shape& shape)
{
    std::size_t n = 1;
    for (int e : shape) {
        if (e < 1) {
            throw std::invalid_argument("tensor extents must be >= 1, got " + shape_string(shape));
        }
        n *= static_cast<std::size_t>(e);
    }
    return n;
}

void require_rank(const Tensor& t, int rank, const char* what)
{
    if (t.rank() != rank) {
        std::ostringstream os;
        os << what << ": expected rank " << rank << ", got shape " << shape_string(t.shape());
        throw std::invalid_argument(os.str());
    }
}

// Smallest ox such that ox * stride + offset >= 0.
int first_valid(int offset, int stride)
{
    if (offset >= 0) return 0;
    return (-offset + stride - 1) / stride;
}

// Largest ox such that ox * stride + offset <= limit - 1, or -1.
int last_valid(int offset, int stride, int limit)
{
    int top = limit - 1 - offset;
    if (top < 0) return -1;
    return top / stride;
}

} // namespace

std::string shape_string(const Shape& shape)
{
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << ", ";
        os << shape[i];
    }
    os << ']';
    return os.str();
}

Tensor::Tensor(Shape shape, float fill)
    : shape_(std::move(shape))
{
    if (shape_.empty()) throw std::invalid_argument("tensor needs at least one extent");
    data_.assign(element_count(shape_), fill);
}

Tensor::Tensor(Shape shape, std::vector<float> values)
    : shape_(std::move(shape)), data_(std::move(values))
{
    if (shape_.empty()) throw std::invalid_argument("tensor needs at least one extent");
    if (element_count(shape_) != data_.size()) {
        std::ostringstream os;
        os << "shape " << shape_string(shape_) << " does not match " << data_.size() << " values";
        throw std::invalid_argument(os.str());
    }
}

std::span<const float> Tensor::plane(int c) const
{
    const std::size_t n = static_cast<std::size_t>(shape_[1]) * shape_[2];
    return std::span<const float>(data_).subspan(static_cast<std::size_t>(c) * n, n);
}

std::span<float> Tensor::plane(int c)
{
    const std::size_t n = static_cast<std::size_t>(shape_[1]) * shape_[2];
    return std::span<float>(data_).subspan(static_cast<std::size_t>(c) * n, n);
}

Tensor Tensor::slice_channels(int first, int count) const
{
    require_rank(*this, 3, "slice_channels");
    if (first < 0 || count < 1 || first + count > shape_[0]) {
        throw std::out_of_range("channel slice out of range for " + shape_string(shape_));
    }
    const std::size_t n = static_cast<std::size_t>(shape_[1]) * shape_[2];
    auto begin = data_.begin() + static_cast<std::ptrdiff_t>(first * n);
    return Tensor({count, shape_[1], shape_[2]},
                  std::vector<float>(begin, begin + static_cast<std::ptrdiff_t>(count * n)));
}

bool Tensor::all_finite() const
{
    return std::all_of(data_.begin(), data_.end(), [](float v) { return std::isfinite(v); });
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias, int stride,
              Padding2d padding)
{
    require_rank(input, 3, "conv2d input");
    require_rank(kernel, 4, "conv2d kernel");
    const int cin = input.dim(0), h = input.dim(1), w = input.dim(2);
    const int cout = kernel.dim(0), kh = kernel.dim(2), kw = kernel.dim(3);
    if (kernel.dim(1) != cin) {
        throw std::invalid_argument("conv2d: kernel " + shape_string(kernel.shape()) +
                                    " does not match input " + shape_string(input.shape()));
    }
    if (stride < 1 || padding.h < 0 || padding.w < 0) {
        throw std::invalid_argument("conv2d: stride must be >= 1 and padding >= 0");
    }
    if (h + 2 * padding.h < kh || w + 2 * padding.w < kw) {
        throw std::invalid_argument("conv2d: kernel " + shape_string(kernel.shape()) +
                                    " larger than padded input " + shape_string(input.shape()));
    }
    if (!bias.empty() && static_cast<int>(bias.size()) != cout) {
        throw std::invalid_argument("conv2d: bias length " + std::to_string(bias.size()) +
                                    " does not match kernel " + shape_string(kernel.shape()));
    }

    const int ho = (h + 2 * padding.h - kh) / stride + 1;
    const int wo = (w + 2 * padding.w - kw) / stride + 1;
    Tensor out({cout, ho, wo});
    std::vector<double> acc(static_cast<std::size_t>(ho) * wo);

    for (int oc = 0; oc < cout; ++oc) {
        std::fill(acc.begin(), acc.end(), bias.empty() ? 0.0 : static_cast<double>(bias[oc]));
        for (int ic = 0; ic < cin; ++ic) {
            const float* src = input.plane(ic).data();
            for (int ky = 0; ky < kh; ++ky) {
                const int y_off = ky - padding.h;
                const int oy0 = first_valid(y_off, stride);
                const int oy1 = std::min(ho - 1, last_valid(y_off, stride, h));
                for (int kx = 0; kx < kw; ++kx) {
                    const double wv = kernel.at(oc, ic, ky, kx);
                    if (wv == 0.0) continue;
                    const int x_off = kx - padding.w;
                    const int ox0 = first_valid(x_off, stride);
                    const int ox1 = std::min(wo - 1, last_valid(x_off, stride, w));
                    for (int oy = oy0; oy <= oy1; ++oy) {
                        const float* row = src + static_cast<std::ptrdiff_t>(oy * stride + y_off) * w;
                        double* dst = acc.data() + static_cast<std::ptrdiff_t>(oy) * wo;
                        if (stride == 1) {
                            const float* s = row + x_off;
                            for (int ox = ox0; ox <= ox1; ++ox) dst[ox] += wv * s[ox];
                        } else {
                            for (int ox = ox0; ox <= ox1; ++ox) dst[ox] += wv * row[ox * stride + x_off];
                        }
                    }
                }
            }
        }
        float* o = out.plane(oc).data();
        for (std::size_t i = 0; i < acc.size(); ++i) o[i] = static_cast<float>(acc[i]);
    }
    return out;
}

Tensor conv2d(const Tensor& input, const Tensor& kernel, std::span<const float> bias, int stride,
              int padding)
{
    return conv2d(input, kernel, bias, stride, Padding2d{padding, padding});
}

Tensor maxpool2d(const Tensor& input, int k, int stride, int padding)
{
    require_rank(input, 3, "maxpool2d input");
    if (k <= 0) throw std::invalid_argument("maxpool2d: window size must be positive");
    if (stride < 1 || padding < 0) {
        throw std::invalid_argument("maxpool2d: stride must be >= 1 and padding >= 0");
    }
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    if (h + 2 * padding < k || w + 2 * padding < k) {
        throw std::invalid_argument("maxpool2d: window larger than padded input " +
                                    shape_string(input.shape()));
    }
    const int ho = (h + 2 * padding - k) / stride + 1;
    const int wo = (w + 2 * padding - k) / stride + 1;
    Tensor out({c, ho, wo});
    for (int ch = 0; ch < c; ++ch) {
        for (int oy = 0; oy < ho; ++oy) {
            const int y0 = std::max(0, oy * stride - padding);
            const int y1 = std::min(h, oy * stride - padding + k);
            for (int ox = 0; ox < wo; ++ox) {
                const int x0 = std::max(0, ox * stride - padding);
                const int x1 = std::min(w, ox * stride - padding + k);
                float best = -std::numeric_limits<float>::infinity();
                for (int y = y0; y < y1; ++y) {
                    for (int x = x0; x < x1; ++x) best = std::max(best, input.at(ch, y, x));
                }
                out.at(ch, oy, ox) = best;
            }
        }
    }
    return out;
}

std::vector<double> global_avg_pool(const Tensor& input)
{
    require_rank(input, 3, "global_avg_pool input");
    std::vector<double> out(static_cast<std::size_t>(input.dim(0)));
    for (int c = 0; c < input.dim(0); ++c) {
        double sum = 0.0;
        for (float v : input.plane(c)) sum += v;
        out[c] = sum / static_cast<double>(input.plane(c).size());
    }
    return out;
}

Tensor upsample_nearest(const Tensor& input, int factor)
{
    require_rank(input, 3, "upsample_nearest input");
    if (factor < 1) throw std::invalid_argument("upsample_nearest: factor must be >= 1");
    if (factor == 1) return input;
    const int c = input.dim(0), h = input.dim(1), w = input.dim(2);
    Tensor out({c, h * factor, w * factor});
    for (int ch = 0; ch < c; ++ch) {
        for (int y = 0; y < h * factor; ++y) {
            for (int x = 0; x < w * factor; ++x) out.at(ch, y, x) = input.at(ch, y / factor, x / factor);
        }
    }
    return out;
}

std::vector<double> linear(std::span<const double> input, const Tensor& weight,
                           std::span<const float> bias)
{
    require_rank(weight, 2, "linear weight");
    const int m = weight.dim(0), n = weight.dim(1);
    if (static_cast<int>(input.size()) != n) {
        throw std::invalid_argument("linear: weight " + shape_string(weight.shape()) +
                                    " does not accept input of length " +
                                    std::to_string(input.size()));
    }
    if (!bias.empty() && static_cast<int>(bias.size()) != m) {
        throw std::invalid_argument("linear: bias length " + std::to_string(bias.size()) +
                                    " does not match weight " + shape_string(weight.shape()));
    }
    std::vector<double> out(static_cast<std::size_t>(m));
    for (int i = 0; i < m; ++i) {
        double acc = bias.empty() ? 0.0 : bias[i];
        const float* row = weight.data() + static_cast<std::ptrdiff_t>(i) * n;
        for (int j = 0; j < n; ++j) acc += static_cast<double>(row[j]) * input[j];
        out[i] = acc;
    }
    return out;
}

Tensor concat_channels(std::span<const Tensor> inputs)
{
    if (inputs.empty()) throw std::invalid_argument("concat_channels: no inputs");
    const int h = inputs[0].dim(1), w = inputs[0].dim(2);
    int total = 0;
    for (const auto& t : inputs) {
        require_rank(t, 3, "concat_channels input");
        if (t.dim(1) != h || t.dim(2) != w) {
            throw std::invalid_argument("concat_channels: spatial mismatch " +
                                        shape_string(inputs[0].shape()) + " vs " +
                                        shape_string(t.shape()));
        }
        total += t.dim(0);
    }
    std::vector<float> values;
    values.reserve(static_cast<std::size_t>(total) * h * w);
    for (const auto& t : inputs) values.insert(values.end(), t.values().begin(), t.values().end());
    return Tensor({total, h, w}, std::move(values));
}

double sigmoid(double x)
{
    if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
    const double e = std::exp(x);
    return e / (1.0 + e);
}

Tensor sigmoid(const Tensor& input)
{
    constexpr float lo = std::numeric_limits<float>::min();
    const float hi = std::nextafter(1.0f, 0.0f);
    Tensor out = input;
    for (float& v : out.values()) v = std::clamp(static_cast<float>(sigmoid(static_cast<double>(v))), lo, hi);
    return out;
}

Tensor relu(const Tensor& input)
{
    Tensor out = input;
    for (float& v : out.values()) v = std::max(v, 0.0f);
    return out;
}

Tensor add(const Tensor& a, const Tensor& b)
{
    if (a.shape() != b.shape()) {
        throw std::invalid_argument("add: shape mismatch " + shape_string(a.shape()) + " vs " +
                                    shape_string(b.shape()));
    }
    Tensor out = a;
    auto dst = out.values();
    auto src = b.values();
    for (std::size_t i = 0; i < dst.size(); ++i) dst[i] += src[i];
    return out;
}

} // namespace cfpa
