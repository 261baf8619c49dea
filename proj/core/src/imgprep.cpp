// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/imgprep.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

namespace cxr {

void PrepConfig::validate() const {
    if (target_size < 1) throw InvalidInputError("target_size must be >= 1");
    if (median_window < 1 || median_window % 2 == 0)
        throw InvalidInputError("median_window must be odd and >= 1");
    for (double s : channel_stds)
        if (!(s > 0)) throw InvalidInputError("channel_stds must all be > 0");
}

GrayImage equalize_histogram(const GrayImage& img) {
    const int levels = img.max_value() + 1;
    std::vector<std::uint64_t> hist(static_cast<std::size_t>(levels), 0);
    for (std::uint16_t v : img.pixels) ++hist[v];

    // Cumulative counts and the first occupied level.
    std::vector<std::uint64_t> cdf(hist.size());
    std::partial_sum(hist.begin(), hist.end(), cdf.begin());
    const std::uint64_t n = img.pixels.size();
    std::uint64_t cdf_min = 0;
    for (std::uint64_t c : cdf)
        if (c > 0) {
            cdf_min = c;
            break;
        }
    if (cdf_min == n) return img;  // single intensity: remap is undefined, keep as-is

    std::vector<std::uint16_t> map(hist.size());
    const double denom = static_cast<double>(n - cdf_min);
    for (std::size_t v = 0; v < map.size(); ++v) {
        const double scaled =
            (static_cast<double>(cdf[v]) - static_cast<double>(cdf_min)) / denom * (levels - 1);
        map[v] = static_cast<std::uint16_t>(std::lround(scaled < 0 ? 0 : scaled));
    }

    GrayImage out(img.width, img.height, img.bit_depth);
    for (std::size_t i = 0; i < img.pixels.size(); ++i) out.pixels[i] = map[img.pixels[i]];
    return out;
}

int reflect_index(int i, int n) {
    // Mirror about the edges (edge pixel included) until inside.
    while (i < 0 || i >= n) {
        if (i < 0) i = -i - 1;
        if (i >= n) i = 2 * n - i - 1;
    }
    return i;
}

GrayImage median_filter(const GrayImage& img, int window) {
    if (window < 1 || window % 2 == 0)
        throw InvalidInputError("median window must be odd and >= 1");
    const int r = window / 2;
    GrayImage out(img.width, img.height, img.bit_depth);
    std::vector<std::uint16_t> patch(static_cast<std::size_t>(window) * window);
    for (int y = 0; y < img.height; ++y) {
        for (int x = 0; x < img.width; ++x) {
            std::size_t k = 0;
            for (int dy = -r; dy <= r; ++dy) {
                const int sy = reflect_index(y + dy, img.height);
                for (int dx = -r; dx <= r; ++dx)
                    patch[k++] = img.at(sy, reflect_index(x + dx, img.width));
            }
            auto mid = patch.begin() + static_cast<std::ptrdiff_t>(patch.size() / 2);
            std::nth_element(patch.begin(), mid, patch.end());
            out.at(y, x) = *mid;
        }
    }
    return out;
}

PlanarImage resize_bilinear(const PlanarImage& img, int target) {
    if (target < 1) throw InvalidInputError("resize target must be >= 1");
    PlanarImage out(img.channels, target, target);
    const double sy = static_cast<double>(img.height) / target;
    const double sx = static_cast<double>(img.width) / target;
    for (int c = 0; c < img.channels; ++c) {
        for (int oy = 0; oy < target; ++oy) {
            double fy = (oy + 0.5) * sy - 0.5;
            fy = std::clamp(fy, 0.0, static_cast<double>(img.height - 1));
            const int y0 = static_cast<int>(fy);
            const int y1 = std::min(y0 + 1, img.height - 1);
            const double wy = fy - y0;
            for (int ox = 0; ox < target; ++ox) {
                double fx = (ox + 0.5) * sx - 0.5;
                fx = std::clamp(fx, 0.0, static_cast<double>(img.width - 1));
                const int x0 = static_cast<int>(fx);
                const int x1 = std::min(x0 + 1, img.width - 1);
                const double wx = fx - x0;
                const double top = img.at(c, y0, x0) * (1 - wx) + img.at(c, y0, x1) * wx;
                const double bot = img.at(c, y1, x0) * (1 - wx) + img.at(c, y1, x1) * wx;
                out.at(c, oy, ox) = top * (1 - wy) + bot * wy;
            }
        }
    }
    return out;
}

PlanarImage normalize_channels(const PlanarImage& img, const std::array<double, 3>& means,
                               const std::array<double, 3>& stds) {
    if (img.channels != 3) throw InvalidInputError("normalize_channels expects 3 channels");
    for (double s : stds)
        if (!(s > 0)) throw InvalidInputError("channel std must be > 0");
    PlanarImage out = img;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(c, y, x) = (img.at(c, y, x) - means[c]) / stds[c];
    return out;
}

PlanarImage denormalize_channels(const PlanarImage& img, const std::array<double, 3>& means,
                                 const std::array<double, 3>& stds) {
    if (img.channels != 3) throw InvalidInputError("denormalize_channels expects 3 channels");
    PlanarImage out = img;
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x)
                out.at(c, y, x) = img.at(c, y, x) * stds[c] + means[c];
    return out;
}

PlanarImage prepare_gray(const GrayImage& img, const PrepConfig& cfg) {
    cfg.validate();
    const GrayImage eq = equalize_histogram(img);
    const GrayImage med = median_filter(eq, cfg.median_window);
    return resize_bilinear(to_planar(med), cfg.target_size);
}

PlanarImage finalize_prepared(const PlanarImage& gray, int bit_depth, const PrepConfig& cfg) {
    if (gray.channels != 1) throw InvalidInputError("finalize_prepared expects 1 channel");
    const double scale = 1.0 / ((1 << bit_depth) - 1);
    PlanarImage rgb(3, gray.height, gray.width);
    for (int c = 0; c < 3; ++c)
        for (int y = 0; y < gray.height; ++y)
            for (int x = 0; x < gray.width; ++x)
                rgb.at(c, y, x) = gray.at(0, y, x) * scale;
    return normalize_channels(rgb, cfg.channel_means, cfg.channel_stds);
}

PlanarImage prepare(const GrayImage& img, const PrepConfig& cfg) {
    return finalize_prepared(prepare_gray(img, cfg), img.bit_depth, cfg);
}

PrepStages prepare_stages(const GrayImage& img, const PrepConfig& cfg) {
    cfg.validate();
    PrepStages s;
    s.equalized = equalize_histogram(img);
    s.filtered = median_filter(s.equalized, cfg.median_window);
    s.resized = resize_bilinear(to_planar(s.filtered), cfg.target_size);
    s.normalized = finalize_prepared(s.resized, img.bit_depth, cfg);
    return s;
}

}  // namespace cxr
