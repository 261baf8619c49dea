// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <vector>

#include "cxr/error.hpp"

namespace cxr {

/// Single-channel integer image as ingested from disk (8-bit PNG or raw
/// 12-bit gray). Values lie in [0, 2^bit_depth - 1].
struct GrayImage {
    int width = 0;
    int height = 0;
    int bit_depth = 8;
    std::vector<std::uint16_t> pixels;  // row-major

    GrayImage() = default;
    GrayImage(int w, int h, int depth, std::uint16_t fill = 0)
        : width(w), height(h), bit_depth(depth),
          pixels(static_cast<std::size_t>(w) * h, fill) {
        if (w <= 0 || h <= 0) throw InvalidInputError("image dimensions must be positive");
        if (depth < 1 || depth > 16) throw InvalidInputError("bit depth must be in [1,16]");
    }

    std::uint16_t& at(int y, int x) { return pixels[static_cast<std::size_t>(y) * width + x]; }
    std::uint16_t at(int y, int x) const { return pixels[static_cast<std::size_t>(y) * width + x]; }
    int max_value() const { return (1 << bit_depth) - 1; }
};

/// Real-valued image, channel-planar (CHW). This is what the preprocessing
/// chain hands to the model: 1 channel mid-pipeline, 3 after replication.
struct PlanarImage {
    int channels = 0;
    int height = 0;
    int width = 0;
    std::vector<double> values;  // [c][y][x]

    PlanarImage() = default;
    PlanarImage(int c, int h, int w, double fill = 0.0)
        : channels(c), height(h), width(w),
          values(static_cast<std::size_t>(c) * h * w, fill) {
        if (c <= 0 || h <= 0 || w <= 0) throw InvalidInputError("image dimensions must be positive");
    }

    double& at(int c, int y, int x) {
        return values[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
    double at(int c, int y, int x) const {
        return values[(static_cast<std::size_t>(c) * height + y) * width + x];
    }
};

/// Widen an integer image into a 1-channel real image (values unchanged).
PlanarImage to_planar(const GrayImage& img);

}  // namespace cxr
