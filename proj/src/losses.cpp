#include "centerfpa/losses.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace cfpa {

LossResult focal_loss(const Tensor& pred, const Tensor& gt, const LossConfig& cfg, int N)
{
    if (pred.shape() != gt.shape()) {
        throw std::invalid_argument("focal_loss: prediction " + shape_string(pred.shape()) +
                                    " does not match target " + shape_string(gt.shape()));
    }
    cfg.validate();
    LossResult r;
    r.grad = Tensor(pred.shape());
    if (N <= 0) {
        r.empty = true;
        return r;
    }

    const double a = cfg.alpha, b = cfg.beta;
    const double inv_n = 1.0 / N;
    double sum = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) {
        const double raw = pred[i];
        const double y = std::clamp(raw, kFocalEps, 1.0 - kFocalEps);
        const bool clamped = y != raw;
        const double target = gt[i];
        double term, dterm;
        if (target >= cfg.phi) {
            const double w = std::pow(1.0 - y, a);
            term = w * std::log(y);
            dterm = -a * std::pow(1.0 - y, a - 1.0) * std::log(y) + w / y;
        } else {
            const double penalty = std::pow(1.0 - target, b);
            const double ya = std::pow(y, a);
            term = penalty * ya * std::log1p(-y);
            dterm = penalty * (a * std::pow(y, a - 1.0) * std::log1p(-y) - ya / (1.0 - y));
        }
        sum += term;
        r.grad[i] = clamped ? 0.0f : static_cast<float>(-dterm * inv_n);
    }
    r.loss = -sum * inv_n;
    return r;
}

LossResult l1_loss_masked(const Tensor& pred, const Tensor& gt, const Tensor& mask, int N)
{
    if (pred.shape() != gt.shape() || pred.rank() != 3 || mask.rank() != 2 ||
        mask.dim(0) != pred.dim(1) || mask.dim(1) != pred.dim(2)) {
        throw std::invalid_argument("l1_loss_masked: prediction " + shape_string(pred.shape()) +
                                    ", target " + shape_string(gt.shape()) + " and mask " +
                                    shape_string(mask.shape()) + " are incompatible");
    }
    LossResult r;
    r.grad = Tensor(pred.shape());
    if (N <= 0) {
        r.empty = true;
        return r;
    }
    const double inv_n = 1.0 / N;
    double sum = 0.0;
    for (int c = 0; c < pred.dim(0); ++c) {
        for (int y = 0; y < pred.dim(1); ++y) {
            for (int x = 0; x < pred.dim(2); ++x) {
                if (mask.values()[static_cast<std::size_t>(y) * mask.dim(1) + x] == 0.0f) continue;
                const double diff = static_cast<double>(gt.at(c, y, x)) - pred.at(c, y, x);
                sum += std::abs(diff);
                if (diff != 0.0) r.grad.at(c, y, x) = static_cast<float>((diff > 0.0 ? -1.0 : 1.0) * inv_n);
            }
        }
    }
    r.loss = sum * inv_n;
    return r;
}

double total_loss(double focal, double wh, double offset, const LossConfig& cfg)
{
    return focal + cfg.lambda1 * wh + cfg.lambda2 * offset;
}

} // namespace cfpa
