// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cxr/rng.hpp"
#include "cxr/tensor.hpp"

namespace cxr {

/// Named trainable tensor plus its gradient accumulator.
struct Parameter {
    std::string name;
    Tensor value;
    Tensor grad;

    Parameter() = default;
    Parameter(std::string n, std::vector<int> shape)
        : name(std::move(n)), value(shape), grad(std::move(shape)) {}
    void zero_grad() { std::fill(grad.data.begin(), grad.data.end(), 0.0); }
};

/// Layers follow one contract: forward(x, train) computes the output and,
/// when train is true, retains whatever backward needs; backward(dy)
/// accumulates parameter gradients and returns dx. Each instance appears
/// exactly once in a network, so a single cache slot suffices.

class Conv2d {
 public:
    Conv2d(std::string name, int in_channels, int out_channels, int kernel, int stride, int padding,
           bool with_bias);

    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& dy);
    void init_default(Rng& rng);  // U(+-1/sqrt(fan_in)) for weight and bias
    void collect(std::vector<Parameter*>& out);

    Parameter weight;  // [out, in, k, k]
    Parameter bias;    // [out], present iff with_bias
    bool has_bias;
    int in_channels, out_channels, kernel, stride, padding;

 private:
    Tensor cache_x_;
    bool has_cache_ = false;
};

class BatchNorm2d {
 public:
    BatchNorm2d(std::string name, int channels, double eps = 1e-5, double momentum = 0.1);

    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& dy);
    void collect(std::vector<Parameter*>& out);

    Parameter weight;  // gamma, initialized to 1
    Parameter bias;    // beta, initialized to 0
    Tensor running_mean;
    Tensor running_var;
    int channels;
    double eps, momentum;

 private:
    Tensor cache_xhat_;
    std::vector<double> cache_inv_std_;
    bool cache_train_mode_ = false;
    bool has_cache_ = false;
};

class ReLU {
 public:
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& dy);

 private:
    std::vector<std::uint8_t> mask_;
};

class MaxPool2d {
 public:
    MaxPool2d(int kernel, int stride, int padding);
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& dy);
    int kernel, stride, padding;

 private:
    std::vector<int> in_shape_;
    std::vector<std::size_t> argmax_;
};

class AvgPool2d {
 public:
    AvgPool2d(int kernel, int stride);
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& dy);
    int kernel, stride;

 private:
    std::vector<int> in_shape_;
};

/// [N,C,H,W] -> [N,C] channel means; the pooling stage CAM reasons about.
class GlobalAvgPool {
 public:
    Tensor forward(const Tensor& x, bool train);
    Tensor backward(const Tensor& dy);

 private:
    std::vector<int> in_shape_;
};

class Linear {
 public:
    Linear(std::string name, int in_features, int out_features);

    Tensor forward(const Tensor& x, bool train);  // [N,in] -> [N,out]
    Tensor backward(const Tensor& dy);
    void init_default(Rng& rng);
    void collect(std::vector<Parameter*>& out);

    Parameter weight;  // [out, in]
    Parameter bias;    // [out]
    int in_features, out_features;

 private:
    Tensor cache_x_;
    bool has_cache_ = false;
};

/// Adam with bias correction; one slot of (m, v) per registered parameter.
class AdamOptimizer {
 public:
    AdamOptimizer(std::vector<Parameter*> params, double lr, double beta1 = 0.9,
                  double beta2 = 0.999, double eps = 1e-8);

    void step();
    void zero_grad();
    void set_lr(double lr) { lr_ = lr; }
    double lr() const { return lr_; }
    long long steps_taken() const { return t_; }

 private:
    std::vector<Parameter*> params_;
    std::vector<Tensor> m_, v_;
    double lr_, beta1_, beta2_, eps_;
    long long t_ = 0;
};

int conv_output_size(int in, int kernel, int stride, int padding);

}  // namespace cxr
