// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/augment.hpp"

#include <algorithm>
#include <cmath>

namespace cxr {

PlanarImage hflip(const PlanarImage& img) {
    PlanarImage out(img.channels, img.height, img.width);
    for (int c = 0; c < img.channels; ++c)
        for (int y = 0; y < img.height; ++y)
            for (int x = 0; x < img.width; ++x) out.at(c, y, x) = img.at(c, y, img.width - 1 - x);
    return out;
}

PlanarImage rotate_bilinear(const PlanarImage& img, double degrees) {
    const double rad = degrees * M_PI / 180.0;
    const double cs = std::cos(rad), sn = std::sin(rad);
    const double cx = (img.width - 1) / 2.0, cy = (img.height - 1) / 2.0;

    PlanarImage out(img.channels, img.height, img.width);
    for (int y = 0; y < img.height; ++y)
        for (int x = 0; x < img.width; ++x) {
            // inverse-rotate the destination coordinate into the source
            const double dx = x - cx, dy = y - cy;
            const double sx = cx + cs * dx + sn * dy;
            const double sy = cy - sn * dx + cs * dy;
            if (sx < 0 || sy < 0 || sx > img.width - 1 || sy > img.height - 1) {
                for (int c = 0; c < img.channels; ++c) out.at(c, y, x) = 0.0;
                continue;
            }
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const int x1 = std::min(x0 + 1, img.width - 1);
            const int y1 = std::min(y0 + 1, img.height - 1);
            const double fx = sx - x0, fy = sy - y0;
            for (int c = 0; c < img.channels; ++c)
                out.at(c, y, x) = (1 - fy) * ((1 - fx) * img.at(c, y0, x0) + fx * img.at(c, y0, x1)) +
                                  fy * ((1 - fx) * img.at(c, y1, x0) + fx * img.at(c, y1, x1));
        }
    return out;
}

PlanarImage augment_sample(const PlanarImage& img, const AugmentConfig& cfg, Rng& rng) {
    PlanarImage out = img;
    if (cfg.hflip && rng.coin()) out = hflip(out);
    if (cfg.max_rotate_deg > 0) {
        const double angle = rng.uniform(-cfg.max_rotate_deg, cfg.max_rotate_deg);
        out = rotate_bilinear(out, angle);
    }
    return out;
}

}  // namespace cxr
