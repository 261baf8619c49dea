// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/tensor.hpp"

#include <cstring>

namespace cxr {

Tensor concat_channels(const std::vector<const Tensor*>& parts) {
    if (parts.empty()) throw InvalidInputError("concat_channels: no inputs");
    const Tensor& first = *parts[0];
    if (first.shape.size() != 4) throw InvalidInputError("concat_channels expects NCHW tensors");
    const int n = first.dim(0), h = first.dim(2), w = first.dim(3);
    int total_c = 0;
    for (const Tensor* p : parts) {
        if (p->shape.size() != 4 || p->dim(0) != n || p->dim(2) != h || p->dim(3) != w)
            throw InvalidInputError("concat_channels: mismatched shapes " + first.shape_str() +
                                    " vs " + p->shape_str());
        total_c += p->dim(1);
    }
    Tensor out({n, total_c, h, w});
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    for (int b = 0; b < n; ++b) {
        std::size_t dst = (static_cast<std::size_t>(b) * total_c) * plane;
        for (const Tensor* p : parts) {
            const std::size_t count = static_cast<std::size_t>(p->dim(1)) * plane;
            const std::size_t src = (static_cast<std::size_t>(b) * p->dim(1)) * plane;
            std::memcpy(out.data.data() + dst, p->data.data() + src, count * sizeof(double));
            dst += count;
        }
    }
    return out;
}

std::vector<Tensor> split_channels(const Tensor& t, const std::vector<int>& widths) {
    if (t.shape.size() != 4) throw InvalidInputError("split_channels expects NCHW tensors");
    int total = 0;
    for (int w : widths) total += w;
    if (total != t.dim(1))
        throw InvalidInputError("split_channels: widths sum to " + std::to_string(total) +
                                ", tensor has " + std::to_string(t.dim(1)) + " channels");
    const int n = t.dim(0), h = t.dim(2), w = t.dim(3);
    const std::size_t plane = static_cast<std::size_t>(h) * w;
    std::vector<Tensor> out;
    out.reserve(widths.size());
    for (int width : widths) out.emplace_back(std::vector<int>{n, width, h, w});
    for (int b = 0; b < n; ++b) {
        std::size_t src = (static_cast<std::size_t>(b) * t.dim(1)) * plane;
        for (std::size_t part = 0; part < widths.size(); ++part) {
            const std::size_t count = static_cast<std::size_t>(widths[part]) * plane;
            const std::size_t dst = (static_cast<std::size_t>(b) * widths[part]) * plane;
            std::memcpy(out[part].data.data() + dst, t.data.data() + src, count * sizeof(double));
            src += count;
        }
    }
    return out;
}

}  // namespace cxr
