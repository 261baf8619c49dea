// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>

#include "cxr/image.hpp"

namespace cxr {

/// Configuration for the four-step preparation chain: histogram
/// equalization, median filtering, bilinear resize, channel normalization.
struct PrepConfig {
    int target_size = 224;
    int median_window = 3;
    // Default channel statistics are the published ImageNet training-set
    // mean/std; they are configuration, not baked into the pipeline.
    std::array<double, 3> channel_means = {0.485, 0.456, 0.406};
    std::array<double, 3> channel_stds = {0.229, 0.224, 0.225};

    void validate() const;
};

/// Contrast normalization by the classic CDF remap
///   out(v) = round((cdf(v) - cdf_min) / (N - cdf_min) * (levels - 1)).
/// An image with a single occupied intensity is returned unchanged (the
/// formula's denominator vanishes there). The mapping is monotone
/// non-decreasing.
GrayImage equalize_histogram(const GrayImage& img);

/// Median filter with an odd square window; borders use reflect padding
/// (mirrored about the image edge, edge pixel included, applied repeatedly
/// if the window overhangs a whole dimension).
GrayImage median_filter(const GrayImage& img, int window);

/// Reflect-pad index helper shared with the brute-force test oracle so both
/// sides agree on the documented border convention.
int reflect_index(int i, int n);

/// Bilinear resize of every channel to target x target, using half-pixel
/// sample centers (src = (dst + 0.5) * scale - 0.5, clamped).
PlanarImage resize_bilinear(const PlanarImage& img, int target);

/// Per-channel (value - mean) / std. Requires 3 channels and positive stds.
PlanarImage normalize_channels(const PlanarImage& img, const std::array<double, 3>& means,
                               const std::array<double, 3>& stds);

/// Inverse of normalize_channels (value * std + mean).
PlanarImage denormalize_channels(const PlanarImage& img, const std::array<double, 3>& means,
                                 const std::array<double, 3>& stds);

/// Steps 1-3 on the integer input: equalize, median filter, resize. The
/// result is a real-valued single channel still in [0, 2^bit_depth - 1].
PlanarImage prepare_gray(const GrayImage& img, const PrepConfig& cfg);

/// Steps 4+: replicate gray to 3 channels, scale by 1/(2^bit_depth - 1) to
/// [0,1], then mean/std-normalize. Augmentation, when used, runs between
/// prepare_gray and this call.
PlanarImage finalize_prepared(const PlanarImage& gray, int bit_depth, const PrepConfig& cfg);

/// Full chain: prepare_gray followed by finalize_prepared. Output is
/// target x target x 3 with all values finite.
PlanarImage prepare(const GrayImage& img, const PrepConfig& cfg);

/// Per-stage snapshots of the chain (for the --debug-stages CLI mode):
/// equalized, median-filtered, resized, normalized.
struct PrepStages {
    GrayImage equalized;
    GrayImage filtered;
    PlanarImage resized;
    PlanarImage normalized;
};
PrepStages prepare_stages(const GrayImage& img, const PrepConfig& cfg);

}  // namespace cxr
