// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <string>
#include <vector>

#include "cxr/image.hpp"

namespace cxr {

/// Load an 8-bit PNG as grayscale. RGB input is reduced with the Rec.601
/// luma weights; palette images are expanded first. 16-bit PNGs are
/// rejected (raw 12-bit files are the supported high-depth path).
GrayImage load_png_gray(const std::string& path);

/// Write an 8-bit grayscale PNG. Values are clamped to [0, 255].
void save_png_gray(const std::string& path, const GrayImage& img);

/// Write an 8-bit RGB PNG from interleaved rows (3 * width bytes per row).
void save_png_rgb(const std::string& path, int width, int height,
                  const std::vector<std::uint8_t>& rgb);

/// Load a headerless big-endian unsigned 12-bit raw gray file (the JSRT
/// `.IMG` layout: two bytes per pixel, 2048x2048 unless stated otherwise).
/// File size must be exactly width*height*2; sample values must fit 12 bits.
GrayImage load_raw12_be(const std::string& path, int width = 2048, int height = 2048);

/// Dispatch on extension: `.img` (any case) loads as raw 12-bit 2048x2048,
/// anything else as PNG.
GrayImage load_gray_auto(const std::string& path);

/// Render a real-valued single plane to 8 bits by affine min-max scaling
/// (used for debug images of normalized data; constant planes map to 0).
GrayImage render_minmax_8bit(const PlanarImage& img, int channel = 0);

/// Render a single plane assuming values already lie in [0, max_value]
/// (rounds and clamps).
GrayImage quantize_plane(const PlanarImage& img, int channel, int max_value);

}  // namespace cxr
