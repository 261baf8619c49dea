// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "cxr/error.hpp"

namespace cxr {

/// Dense row-major tensor of doubles. Activations use NCHW; weights use
/// [out, in, kh, kw] (conv) or [out, in] (linear). Double precision is a
/// deliberate choice: finite-difference gradient checks need the headroom.
struct Tensor {
    std::vector<int> shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(std::vector<int> s, double fill = 0.0) : shape(std::move(s)) {
        data.assign(static_cast<std::size_t>(numel_of(shape)), fill);
    }

    static long long numel_of(const std::vector<int>& s) {
        long long n = 1;
        for (int d : s) {
            if (d <= 0) throw InvalidInputError("tensor dimensions must be positive");
            n *= d;
        }
        return n;
    }

    static Tensor zeros_like(const Tensor& t) { return Tensor(t.shape); }

    long long numel() const { return static_cast<long long>(data.size()); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    bool same_shape(const Tensor& o) const { return shape == o.shape; }

    // NCHW accessors
    double& at4(int n, int c, int y, int x) {
        return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    const double& at4(int n, int c, int y, int x) const {
        return data[((static_cast<std::size_t>(n) * shape[1] + c) * shape[2] + y) * shape[3] + x];
    }
    double& at2(int n, int c) { return data[static_cast<std::size_t>(n) * shape[1] + c]; }
    const double& at2(int n, int c) const { return data[static_cast<std::size_t>(n) * shape[1] + c]; }

    std::string shape_str() const {
        std::string s = "[";
        for (std::size_t i = 0; i < shape.size(); ++i) {
            if (i) s += ", ";
            s += std::to_string(shape[i]);
        }
        return s + "]";
    }
};

/// Concatenate along the channel axis (dim 1) of NCHW tensors.
Tensor concat_channels(const std::vector<const Tensor*>& parts);

/// Split a channel-gradient back into per-part slices with the given widths.
std::vector<Tensor> split_channels(const Tensor& t, const std::vector<int>& widths);

}  // namespace cxr
