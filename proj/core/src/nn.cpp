// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace cxr {

namespace {

void require_nchw(const Tensor& x, const char* who) {
    if (x.shape.size() != 4) throw InvalidInputError(std::string(who) + " expects NCHW input");
}

}  // namespace

int conv_output_size(int in, int kernel, int stride, int padding) {
    const int out = (in + 2 * padding - kernel) / stride + 1;
    if (out < 1)
        throw InvalidInputError("spatial size " + std::to_string(in) + " too small for kernel " +
                                std::to_string(kernel) + " stride " + std::to_string(stride));
    return out;
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(std::string name, int in_ch, int out_ch, int k, int s, int p, bool with_bias)
    : weight(name + ".weight", {out_ch, in_ch, k, k}),
      bias(),
      has_bias(with_bias),
      in_channels(in_ch),
      out_channels(out_ch),
      kernel(k),
      stride(s),
      padding(p) {
    if (k < 1 || s < 1 || p < 0) throw InvalidInputError("bad conv geometry");
    if (with_bias) bias = Parameter(name + ".bias", {out_ch});
}

void Conv2d::init_default(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_channels) * kernel * kernel);
    for (auto& w : weight.value.data) w = rng.uniform(-bound, bound);
    if (has_bias)
        for (auto& b : bias.value.data) b = rng.uniform(-bound, bound);
}

void Conv2d::collect(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    if (has_bias) out.push_back(&bias);
}

Tensor Conv2d::forward(const Tensor& x, bool train) {
    require_nchw(x, "Conv2d");
    if (x.dim(1) != in_channels)
        throw InvalidInputError("Conv2d " + weight.name + ": input has " + std::to_string(x.dim(1)) +
                                " channels, expected " + std::to_string(in_channels));
    const int n = x.dim(0), ih = x.dim(2), iw = x.dim(3);
    const int oh = conv_output_size(ih, kernel, stride, padding);
    const int ow = conv_output_size(iw, kernel, stride, padding);

    Tensor y({n, out_channels, oh, ow});
    for (int b = 0; b < n; ++b)
        for (int co = 0; co < out_channels; ++co) {
            double* yrow = &y.at4(b, co, 0, 0);
            if (has_bias) {
                const double bv = bias.value.data[static_cast<std::size_t>(co)];
                for (int i = 0; i < oh * ow; ++i) yrow[i] = bv;
            }
            for (int ci = 0; ci < in_channels; ++ci)
                for (int ky = 0; ky < kernel; ++ky)
                    for (int kx = 0; kx < kernel; ++kx) {
                        const double wv = weight.value.at4(co, ci, ky, kx);
                        if (wv == 0.0) continue;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride - padding + ky;
                            if (iy < 0 || iy >= ih) continue;
                            const double* xrow = &x.at4(b, ci, iy, 0);
                            double* dst = yrow + static_cast<std::size_t>(oy) * ow;
                            for (int ox = 0; ox < ow; ++ox) {
                                const int ix = ox * stride - padding + kx;
                                if (ix < 0 || ix >= iw) continue;
                                dst[ox] += wv * xrow[ix];
                            }
                        }
                    }
        }
    has_cache_ = train;
    cache_x_ = train ? x : Tensor();
    return y;
}

Tensor Conv2d::backward(const Tensor& dy) {
    if (!has_cache_) throw TrainingError("Conv2d::backward without cached forward");
    const Tensor& x = cache_x_;
    const int n = x.dim(0), ih = x.dim(2), iw = x.dim(3);
    const int oh = dy.dim(2), ow = dy.dim(3);

    Tensor dx = Tensor::zeros_like(x);
    for (int b = 0; b < n; ++b)
        for (int co = 0; co < out_channels; ++co) {
            const double* dyrow = &dy.at4(b, co, 0, 0);
            if (has_bias) {
                double acc = 0;
                for (int i = 0; i < oh * ow; ++i) acc += dyrow[i];
                bias.grad.data[static_cast<std::size_t>(co)] += acc;
            }
            for (int ci = 0; ci < in_channels; ++ci)
                for (int ky = 0; ky < kernel; ++ky)
                    for (int kx = 0; kx < kernel; ++kx) {
                        const double wv = weight.value.at4(co, ci, ky, kx);
                        double wg = 0;
                        for (int oy = 0; oy < oh; ++oy) {
                            const int iy = oy * stride - padding + ky;
                            if (iy < 0 || iy >= ih) continue;
                            const double* xrow = &x.at4(b, ci, iy, 0);
                            double* dxrow = &dx.at4(b, ci, iy, 0);
                            const double* dsrc = dyrow + static_cast<std::size_t>(oy) * ow;
                            for (int ox = 0; ox < ow; ++ox) {
                                const int ix = ox * stride - padding + kx;
                                if (ix < 0 || ix >= iw) continue;
                                wg += xrow[ix] * dsrc[ox];
                                dxrow[ix] += wv * dsrc[ox];
                            }
                        }
                        weight.grad.at4(co, ci, ky, kx) += wg;
                    }
        }
    return dx;
}

// ---------------------------------------------------------------------------
// BatchNorm2d
// ---------------------------------------------------------------------------

BatchNorm2d::BatchNorm2d(std::string name, int ch, double e, double mom)
    : weight(name + ".weight", {ch}),
      bias(name + ".bias", {ch}),
      running_mean({ch}),
      running_var({ch}),
      channels(ch),
      eps(e),
      momentum(mom) {
    std::fill(weight.value.data.begin(), weight.value.data.end(), 1.0);
    std::fill(running_var.data.begin(), running_var.data.end(), 1.0);
    running_mean.shape = {ch};
    running_var.shape = {ch};
}

void BatchNorm2d::collect(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

Tensor BatchNorm2d::forward(const Tensor& x, bool train) {
    require_nchw(x, "BatchNorm2d");
    if (x.dim(1) != channels)
        throw InvalidInputError("BatchNorm2d " + weight.name + ": channel mismatch");
    const int n = x.dim(0), h = x.dim(2), w = x.dim(3);
    const long long m = static_cast<long long>(n) * h * w;
    const std::size_t plane = static_cast<std::size_t>(h) * w;

    Tensor y = Tensor::zeros_like(x);
    if (train) {
        cache_xhat_ = Tensor::zeros_like(x);
        cache_inv_std_.assign(static_cast<std::size_t>(channels), 0.0);
    }
    for (int c = 0; c < channels; ++c) {
        double mean, inv_std, var = 0;
        if (train) {
            double sum = 0;
            for (int b = 0; b < n; ++b) {
                const double* row = &x.at4(b, c, 0, 0);
                for (std::size_t i = 0; i < plane; ++i) sum += row[i];
            }
            mean = sum / static_cast<double>(m);
            for (int b = 0; b < n; ++b) {
                const double* row = &x.at4(b, c, 0, 0);
                for (std::size_t i = 0; i < plane; ++i) var += (row[i] - mean) * (row[i] - mean);
            }
            var /= static_cast<double>(m);  // biased, used for normalization
            inv_std = 1.0 / std::sqrt(var + eps);

            // running stats track the unbiased variance, torch-style
            const double unbiased = m > 1 ? var * static_cast<double>(m) / static_cast<double>(m - 1)
                                          : var;
            auto& rm = running_mean.data[static_cast<std::size_t>(c)];
            auto& rv = running_var.data[static_cast<std::size_t>(c)];
            rm = (1.0 - momentum) * rm + momentum * mean;
            rv = (1.0 - momentum) * rv + momentum * unbiased;
            cache_inv_std_[static_cast<std::size_t>(c)] = inv_std;
        } else {
            mean = running_mean.data[static_cast<std::size_t>(c)];
            inv_std = 1.0 / std::sqrt(running_var.data[static_cast<std::size_t>(c)] + eps);
        }
        const double gamma = weight.value.data[static_cast<std::size_t>(c)];
        const double beta = bias.value.data[static_cast<std::size_t>(c)];
        for (int b = 0; b < n; ++b) {
            const double* row = &x.at4(b, c, 0, 0);
            double* dst = &y.at4(b, c, 0, 0);
            double* xh = train ? &cache_xhat_.at4(b, c, 0, 0) : nullptr;
            for (std::size_t i = 0; i < plane; ++i) {
                const double xhat = (row[i] - mean) * inv_std;
                if (xh) xh[i] = xhat;
                dst[i] = gamma * xhat + beta;
            }
        }
    }
    cache_train_mode_ = train;
    has_cache_ = true;
    return y;
}

Tensor BatchNorm2d::backward(const Tensor& dy) {
    if (!has_cache_) throw TrainingError("BatchNorm2d::backward without cached forward");
    const int n = dy.dim(0), h = dy.dim(2), w = dy.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    const double m = static_cast<double>(static_cast<long long>(n) * h * w);

    if (!cache_train_mode_)
        throw TrainingError("BatchNorm2d::backward after an inference-mode forward");

    Tensor dx = Tensor::zeros_like(dy);
    for (int c = 0; c < channels; ++c) {
        const double gamma = weight.value.data[static_cast<std::size_t>(c)];
        const double inv = cache_inv_std_[static_cast<std::size_t>(c)];
        double sum_dy = 0, sum_dy_xhat = 0;
        for (int b = 0; b < n; ++b) {
            const double* dsrc = &dy.at4(b, c, 0, 0);
            const double* xh = &cache_xhat_.at4(b, c, 0, 0);
            for (std::size_t i = 0; i < plane; ++i) {
                sum_dy += dsrc[i];
                sum_dy_xhat += dsrc[i] * xh[i];
            }
        }
        weight.grad.data[static_cast<std::size_t>(c)] += sum_dy_xhat;
        bias.grad.data[static_cast<std::size_t>(c)] += sum_dy;
        const double k1 = sum_dy / m, k2 = sum_dy_xhat / m;
        for (int b = 0; b < n; ++b) {
            const double* dsrc = &dy.at4(b, c, 0, 0);
            const double* xh = &cache_xhat_.at4(b, c, 0, 0);
            double* dst = &dx.at4(b, c, 0, 0);
            for (std::size_t i = 0; i < plane; ++i)
                dst[i] = gamma * inv * (dsrc[i] - k1 - xh[i] * k2);
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// ReLU
// ---------------------------------------------------------------------------

Tensor ReLU::forward(const Tensor& x, bool train) {
    Tensor y = x;
    mask_.clear();
    if (train) mask_.assign(x.data.size(), 0);
    for (std::size_t i = 0; i < y.data.size(); ++i) {
        if (y.data[i] > 0) {
            if (train) mask_[i] = 1;
        } else {
            y.data[i] = 0;
        }
    }
    return y;
}

Tensor ReLU::backward(const Tensor& dy) {
    if (mask_.size() != dy.data.size()) throw TrainingError("ReLU::backward without cached forward");
    Tensor dx = dy;
    for (std::size_t i = 0; i < dx.data.size(); ++i)
        if (!mask_[i]) dx.data[i] = 0;
    return dx;
}

// ---------------------------------------------------------------------------
// MaxPool2d
// ---------------------------------------------------------------------------

MaxPool2d::MaxPool2d(int k, int s, int p) : kernel(k), stride(s), padding(p) {
    if (k < 1 || s < 1 || p < 0) throw InvalidInputError("bad pool geometry");
}

Tensor MaxPool2d::forward(const Tensor& x, bool train) {
    require_nchw(x, "MaxPool2d");
    const int n = x.dim(0), c = x.dim(1), ih = x.dim(2), iw = x.dim(3);
    const int oh = conv_output_size(ih, kernel, stride, padding);
    const int ow = conv_output_size(iw, kernel, stride, padding);

    Tensor y({n, c, oh, ow});
    in_shape_.clear();
    argmax_.clear();
    if (train) {
        in_shape_ = x.shape;
        argmax_.assign(y.data.size(), 0);
    }
    std::size_t oidx = 0;
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox, ++oidx) {
                    double best = -std::numeric_limits<double>::infinity();
                    std::size_t best_at = 0;
                    for (int ky = 0; ky < kernel; ++ky) {
                        const int iy = oy * stride - padding + ky;
                        if (iy < 0 || iy >= ih) continue;
                        for (int kx = 0; kx < kernel; ++kx) {
                            const int ix = ox * stride - padding + kx;
                            if (ix < 0 || ix >= iw) continue;
                            const std::size_t at =
                                ((static_cast<std::size_t>(b) * c + ch) * ih + iy) * iw + ix;
                            if (x.data[at] > best) {
                                best = x.data[at];
                                best_at = at;
                            }
                        }
                    }
                    y.data[oidx] = best;
                    if (train) argmax_[oidx] = best_at;
                }
    return y;
}

Tensor MaxPool2d::backward(const Tensor& dy) {
    if (argmax_.size() != dy.data.size())
        throw TrainingError("MaxPool2d::backward without cached forward");
    Tensor dx((in_shape_));
    for (std::size_t i = 0; i < dy.data.size(); ++i) dx.data[argmax_[i]] += dy.data[i];
    return dx;
}

// ---------------------------------------------------------------------------
// AvgPool2d
// ---------------------------------------------------------------------------

AvgPool2d::AvgPool2d(int k, int s) : kernel(k), stride(s) {
    if (k < 1 || s < 1) throw InvalidInputError("bad pool geometry");
}

Tensor AvgPool2d::forward(const Tensor& x, bool train) {
    require_nchw(x, "AvgPool2d");
    const int n = x.dim(0), c = x.dim(1), ih = x.dim(2), iw = x.dim(3);
    const int oh = conv_output_size(ih, kernel, stride, 0);
    const int ow = conv_output_size(iw, kernel, stride, 0);
    in_shape_ = train ? x.shape : std::vector<int>{};

    Tensor y({n, c, oh, ow});
    const double norm = 1.0 / (static_cast<double>(kernel) * kernel);
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    double acc = 0;
                    for (int ky = 0; ky < kernel; ++ky)
                        for (int kx = 0; kx < kernel; ++kx)
                            acc += x.at4(b, ch, oy * stride + ky, ox * stride + kx);
                    y.at4(b, ch, oy, ox) = acc * norm;
                }
    return y;
}

Tensor AvgPool2d::backward(const Tensor& dy) {
    if (in_shape_.empty()) throw TrainingError("AvgPool2d::backward without cached forward");
    Tensor dx((in_shape_));
    const int n = dy.dim(0), c = dy.dim(1), oh = dy.dim(2), ow = dy.dim(3);
    const double norm = 1.0 / (static_cast<double>(kernel) * kernel);
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int oy = 0; oy < oh; ++oy)
                for (int ox = 0; ox < ow; ++ox) {
                    const double g = dy.at4(b, ch, oy, ox) * norm;
                    for (int ky = 0; ky < kernel; ++ky)
                        for (int kx = 0; kx < kernel; ++kx)
                            dx.at4(b, ch, oy * stride + ky, ox * stride + kx) += g;
                }
    return dx;
}

// ---------------------------------------------------------------------------
// GlobalAvgPool
// ---------------------------------------------------------------------------

Tensor GlobalAvgPool::forward(const Tensor& x, bool train) {
    require_nchw(x, "GlobalAvgPool");
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    in_shape_ = train ? x.shape : std::vector<int>{};
    Tensor y({n, c});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const double* row = &x.at4(b, ch, 0, 0);
            double acc = 0;
            for (std::size_t i = 0; i < plane; ++i) acc += row[i];
            y.at2(b, ch) = acc / static_cast<double>(plane);
        }
    return y;
}

Tensor GlobalAvgPool::backward(const Tensor& dy) {
    if (in_shape_.empty()) throw TrainingError("GlobalAvgPool::backward without cached forward");
    Tensor dx((in_shape_));
    const int n = dx.dim(0), c = dx.dim(1), h = dx.dim(2), w = dx.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch) {
            const double g = dy.at2(b, ch) / static_cast<double>(plane);
            double* row = &dx.at4(b, ch, 0, 0);
            for (std::size_t i = 0; i < plane; ++i) row[i] = g;
        }
    return dx;
}

// ---------------------------------------------------------------------------
// Linear
// ---------------------------------------------------------------------------

Linear::Linear(std::string name, int in_f, int out_f)
    : weight(name + ".weight", {out_f, in_f}),
      bias(name + ".bias", {out_f}),
      in_features(in_f),
      out_features(out_f) {}

void Linear::init_default(Rng& rng) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(in_features));
    for (auto& w : weight.value.data) w = rng.uniform(-bound, bound);
    for (auto& b : bias.value.data) b = rng.uniform(-bound, bound);
}

void Linear::collect(std::vector<Parameter*>& out) {
    out.push_back(&weight);
    out.push_back(&bias);
}

Tensor Linear::forward(const Tensor& x, bool train) {
    if (x.shape.size() != 2 || x.dim(1) != in_features)
        throw InvalidInputError("Linear " + weight.name + ": expected [N," +
                                std::to_string(in_features) + "], got " + x.shape_str());
    const int n = x.dim(0);
    Tensor y({n, out_features});
    for (int b = 0; b < n; ++b)
        for (int o = 0; o < out_features; ++o) {
            double acc = bias.value.data[static_cast<std::size_t>(o)];
            for (int i = 0; i < in_features; ++i) acc += weight.value.at2(o, i) * x.at2(b, i);
            y.at2(b, o) = acc;
        }
    has_cache_ = train;
    cache_x_ = train ? x : Tensor();
    return y;
}

Tensor Linear::backward(const Tensor& dy) {
    if (!has_cache_) throw TrainingError("Linear::backward without cached forward");
    const Tensor& x = cache_x_;
    const int n = x.dim(0);
    Tensor dx = Tensor::zeros_like(x);
    for (int b = 0; b < n; ++b)
        for (int o = 0; o < out_features; ++o) {
            const double g = dy.at2(b, o);
            bias.grad.data[static_cast<std::size_t>(o)] += g;
            for (int i = 0; i < in_features; ++i) {
                weight.grad.at2(o, i) += g * x.at2(b, i);
                dx.at2(b, i) += g * weight.value.at2(o, i);
            }
        }
    return dx;
}

// ---------------------------------------------------------------------------
// AdamOptimizer
// ---------------------------------------------------------------------------

AdamOptimizer::AdamOptimizer(std::vector<Parameter*> params, double lr, double beta1, double beta2,
                             double eps)
    : params_(std::move(params)), lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {
    for (const Parameter* p : params_) {
        m_.push_back(Tensor::zeros_like(p->value));
        v_.push_back(Tensor::zeros_like(p->value));
    }
}

void AdamOptimizer::step() {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (std::size_t pi = 0; pi < params_.size(); ++pi) {
        Parameter& p = *params_[pi];
        Tensor& m = m_[pi];
        Tensor& v = v_[pi];
        for (std::size_t i = 0; i < p.value.data.size(); ++i) {
            const double g = p.grad.data[i];
            m.data[i] = beta1_ * m.data[i] + (1.0 - beta1_) * g;
            v.data[i] = beta2_ * v.data[i] + (1.0 - beta2_) * g * g;
            const double mhat = m.data[i] / bc1;
            const double vhat = v.data[i] / bc2;
            p.value.data[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
        }
    }
}

void AdamOptimizer::zero_grad() {
    for (Parameter* p : params_) p->zero_grad();
}

}  // namespace cxr
