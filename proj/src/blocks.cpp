#include "centerfpa/blocks.hpp"

#include <stdexcept>

namespace cfpa {

namespace {

void require_kernel(const Tensor& k, int kh, int kw, const char* name)
{
    if (k.rank() != 4 || k.dim(2) != kh || k.dim(3) != kw) {
        throw std::invalid_argument(std::string("ACBlock: ") + name + " has shape " +
                                    shape_string(k.shape()));
    }
}

void require_bias(const Tensor& b, int n, const char* name)
{
    if (b.rank() != 1 || b.dim(0) != n) {
        throw std::invalid_argument(std::string(name) + " has shape " + shape_string(b.shape()) +
                                    ", expected [" + std::to_string(n) + "]");
    }
}

int slot_out_channels(const ACBlockSlot& s)
{
    return std::visit([](const auto& p) { return p.out_channels(); }, s);
}

int slot_in_channels(const ACBlockSlot& s)
{
    return std::visit([](const auto& p) { return p.in_channels(); }, s);
}

} // namespace

void ACBlockParams::validate() const
{
    require_kernel(k3x3, 3, 3, "k3x3");
    require_kernel(k1x3, 1, 3, "k1x3");
    require_kernel(k3x1, 3, 1, "k3x1");
    const int co = k3x3.dim(0), ci = k3x3.dim(1);
    if (k1x3.dim(0) != co || k1x3.dim(1) != ci || k3x1.dim(0) != co || k3x1.dim(1) != ci) {
        throw std::invalid_argument("ACBlock: branch kernels disagree on channels: " +
                                    shape_string(k3x3.shape()) + ", " + shape_string(k1x3.shape()) +
                                    ", " + shape_string(k3x1.shape()));
    }
    require_bias(b3x3, co, "ACBlock b3x3");
    require_bias(b1x3, co, "ACBlock b1x3");
    require_bias(b3x1, co, "ACBlock b3x1");
}

Tensor conv_forward(const Tensor& x, const ConvParams& p, int stride, Padding2d padding)
{
    return conv2d(x, p.kernel, p.bias.values(), stride, padding);
}

Tensor ac_block_forward_train(const Tensor& x, const ACBlockParams& p, int stride)
{
    p.validate();
    if (x.rank() != 3 || x.dim(0) != p.in_channels()) {
        throw std::invalid_argument("ACBlock: input " + shape_string(x.shape()) +
                                    " does not match kernel " + shape_string(p.k3x3.shape()));
    }
    Tensor out = conv2d(x, p.k3x3, p.b3x3.values(), stride, Padding2d{1, 1});
    out = add(out, conv2d(x, p.k1x3, p.b1x3.values(), stride, Padding2d{0, 1}));
    return add(out, conv2d(x, p.k3x1, p.b3x1.values(), stride, Padding2d{1, 0}));
}

Tensor ac_block_forward_fused(const Tensor& x, const ConvParams& fused, int stride)
{
    return conv_forward(x, fused, stride, Padding2d{1, 1});
}

Tensor ac_block_forward(const Tensor& x, const ACBlockSlot& p, int stride)
{
    if (const auto* train = std::get_if<ACBlockParams>(&p)) return ac_block_forward_train(x, *train, stride);
    return ac_block_forward_fused(x, std::get<ConvParams>(p), stride);
}

ConvParams ac_fuse(const ACBlockParams& p)
{
    p.validate();
    const int co = p.out_channels(), ci = p.in_channels();
    ConvParams fused{p.k3x3, Tensor({co})};
    for (int o = 0; o < co; ++o) {
        for (int i = 0; i < ci; ++i) {
            for (int k = 0; k < 3; ++k) {
                fused.kernel.at(o, i, 1, k) += p.k1x3.at(o, i, 0, k);
                fused.kernel.at(o, i, k, 1) += p.k3x1.at(o, i, k, 0);
            }
        }
        fused.bias[o] = p.b3x3[o] + p.b1x3[o] + p.b3x1[o];
    }
    return fused;
}

Tensor residual_block(const Tensor& x, const ResidualParams& p)
{
    const int in_ch = slot_in_channels(p.ac1);
    const int out_ch = slot_out_channels(p.ac2);
    if (x.rank() != 3 || x.dim(0) != in_ch) {
        throw std::invalid_argument("residual block: input " + shape_string(x.shape()) +
                                    " does not have " + std::to_string(in_ch) + " channels");
    }
    const bool needs_projection = p.stride > 1 || in_ch != out_ch;
    if (needs_projection && !p.projection) {
        throw std::invalid_argument("residual block: stride " + std::to_string(p.stride) + " with " +
                                    std::to_string(in_ch) + "->" + std::to_string(out_ch) +
                                    " channels requires a shortcut projection");
    }

    Tensor branch = relu(ac_block_forward(x, p.ac1, p.stride));
    branch = ac_block_forward(branch, p.ac2, 1);
    Tensor shortcut = p.projection ? conv_forward(x, *p.projection, p.stride, Padding2d{0, 0}) : x;
    return relu(add(shortcut, branch));
}

std::vector<float> se_gate(const Tensor& x, const SEParams& p)
{
    if (x.rank() != 3 || x.dim(0) != p.channels() || p.expand_weight.dim(0) != x.dim(0)) {
        throw std::invalid_argument("SE block: input " + shape_string(x.shape()) +
                                    " does not match reduce " + shape_string(p.reduce_weight.shape()) +
                                    " / expand " + shape_string(p.expand_weight.shape()));
    }
    const std::vector<double> squeezed = global_avg_pool(x);
    std::vector<double> hidden = linear(squeezed, p.reduce_weight, p.reduce_bias.values());
    for (double& v : hidden) v = v > 0.0 ? v : 0.0;
    const std::vector<double> logits = linear(hidden, p.expand_weight, p.expand_bias.values());
    const Tensor gate = sigmoid(Tensor({static_cast<int>(logits.size())},
                                       std::vector<float>(logits.begin(), logits.end())));
    return {gate.values().begin(), gate.values().end()};
}

Tensor se_block(const Tensor& x, const SEParams& p)
{
    const std::vector<float> gate = se_gate(x, p);
    Tensor out = x;
    for (int c = 0; c < x.dim(0); ++c) {
        for (float& v : out.plane(c)) v = gate[c] * v;
    }
    return out;
}

Tensor fpa_fuse(std::span<const Tensor> levels, const SEParams& se, const ConvParams& reduce)
{
    if (levels.empty()) throw std::invalid_argument("fpa_fuse: no pyramid levels");
    const int h = levels[0].dim(1), w = levels[0].dim(2);
    for (const auto& l : levels) {
        if (l.dim(1) > h || l.dim(2) > w) {
            throw std::invalid_argument("fpa_fuse: levels must be ordered finest first, got " +
                                        shape_string(l.shape()) + " after " +
                                        shape_string(levels[0].shape()));
        }
    }

    std::vector<Tensor> resized;
    resized.reserve(levels.size());
    for (auto it = levels.rbegin(); it != levels.rend(); ++it) {
        const int lh = it->dim(1), lw = it->dim(2);
        if (h % lh != 0 || w % lw != 0 || h / lh != w / lw) {
            throw std::invalid_argument("fpa_fuse: level " + shape_string(it->shape()) +
                                        " is not an integer downscale of " +
                                        shape_string(levels[0].shape()));
        }
        resized.push_back(upsample_nearest(*it, h / lh));
    }
    const Tensor gated = se_block(concat_channels(resized), se);
    return conv_forward(gated, reduce, 1, Padding2d{0, 0});
}

} // namespace cfpa
