// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "cxr/image.hpp"
#include "cxr/rng.hpp"

namespace cxr {

/// Training-time augmentation. It runs on the real-valued prepared image
/// (post equalize/median/resize, pre normalization), so rotation resampling
/// loses nothing to quantization.
struct AugmentConfig {
    bool hflip = true;            // mirror with probability 1/2
    double max_rotate_deg = 0.0;  // 0 disables; else uniform in [-max, max]
};

PlanarImage hflip(const PlanarImage& img);

/// Rotate all channels about the image center by `degrees` via the inverse
/// map src = center + R(degrees) * (dst - center), bilinear resampling, same
/// output size; samples from outside the frame read as 0 (black). Sign is
/// immaterial for augmentation (angles are drawn symmetrically).
PlanarImage rotate_bilinear(const PlanarImage& img, double degrees);

/// Draws flip/angle decisions from `rng` and applies them (flip first).
PlanarImage augment_sample(const PlanarImage& img, const AugmentConfig& cfg, Rng& rng);

}  // namespace cxr
