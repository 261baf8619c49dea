// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/cam.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>

#include "cxr/error.hpp"
#include "cxr/imgprep.hpp"
#include "cxr/loss.hpp"

namespace cxr {

ActivationMap compute_cam(const Tensor& features, int sample, const std::vector<double>& weights) {
    if (features.shape.size() != 4)
        throw InvalidInputError("feature tensor must be NCHW, got " + features.shape_str());
    const int n = features.dim(0), k = features.dim(1);
    const int h = features.dim(2), w = features.dim(3);
    if (sample < 0 || sample >= n) throw InvalidInputError("sample index out of range");
    if (static_cast<int>(weights.size()) != k)
        throw InvalidInputError("weight count " + std::to_string(weights.size()) +
                                " does not match " + std::to_string(k) + " feature channels");

    ActivationMap map;
    map.height = h;
    map.width = w;
    map.raw.assign(static_cast<std::size_t>(h) * w, 0.0);
    for (int c = 0; c < k; ++c) {
        const double wc = weights[static_cast<std::size_t>(c)];
        if (wc == 0.0) continue;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x)
                map.raw[static_cast<std::size_t>(y) * w + x] += wc * features.at4(sample, c, y, x);
    }
    for (double v : map.raw)
        if (!std::isfinite(v)) throw InvalidInputError("activation map is not finite");

    const auto [lo, hi] = std::minmax_element(map.raw.begin(), map.raw.end());
    map.normalized.assign(map.raw.size(), 0.0);
    if (*hi > *lo)
        for (std::size_t i = 0; i < map.raw.size(); ++i)
            map.normalized[i] = (map.raw[i] - *lo) / (*hi - *lo);
    return map;
}

CamIdentityCheck cam_logit_identity(ClassifierModel& model, const Tensor& x, int sample,
                                    double tol) {
    const ForwardResult fwd = model.forward_detail(x);
    const ActivationMap map = compute_cam(fwd.features, sample, model.head_weights());

    double mean = 0;
    for (double v : map.raw) mean += v;
    mean /= static_cast<double>(map.raw.size());

    CamIdentityCheck check;
    check.cam_mean_plus_bias = mean + model.head_bias();
    check.logit = fwd.logits.data[static_cast<std::size_t>(sample)];
    check.abs_diff = std::abs(check.cam_mean_plus_bias - check.logit);
    check.ok = check.abs_diff <= tol;
    return check;
}

PlanarImage upsample_map(const ActivationMap& map, int target) {
    PlanarImage plane(1, map.height, map.width);
    plane.values = map.normalized;
    return resize_bilinear(plane, target);
}

void colormap_rgb(double t, std::uint8_t rgb[3]) {
    t = std::clamp(t, 0.0, 1.0);
    // Piecewise-linear ramp through blue, cyan, green, yellow, red.
    static const double stops[5][3] = {
        {0, 0, 1}, {0, 1, 1}, {0, 1, 0}, {1, 1, 0}, {1, 0, 0}};
    const double pos = t * 4.0;
    const int seg = std::min(3, static_cast<int>(pos));
    const double f = pos - seg;
    for (int c = 0; c < 3; ++c) {
        const double v = stops[seg][c] * (1 - f) + stops[seg + 1][c] * f;
        rgb[c] = static_cast<std::uint8_t>(std::lround(v * 255.0));
    }
}

namespace {

void draw_circle(std::vector<std::uint8_t>& rgb, int width, int height, const Circle& circle) {
    // Blue ring, ~1.5px stroke; the marker color sits outside the heat ramp's
    // warm end so it stays visible on hot regions.
    const double stroke = 1.5;
    const int x0 = std::max(0, static_cast<int>(std::floor(circle.cx - circle.radius - stroke)));
    const int x1 = std::min(width - 1, static_cast<int>(std::ceil(circle.cx + circle.radius + stroke)));
    const int y0 = std::max(0, static_cast<int>(std::floor(circle.cy - circle.radius - stroke)));
    const int y1 = std::min(height - 1, static_cast<int>(std::ceil(circle.cy + circle.radius + stroke)));
    for (int y = y0; y <= y1; ++y)
        for (int x = x0; x <= x1; ++x) {
            const double d = std::hypot(x - circle.cx, y - circle.cy);
            if (std::abs(d - circle.radius) > stroke) continue;
            std::uint8_t* px = rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
            px[0] = 30;
            px[1] = 60;
            px[2] = 255;
        }
}

}  // namespace

std::vector<std::uint8_t> render_overlay(const GrayImage& base, const ActivationMap& map,
                                         double alpha, const std::optional<Circle>& circle,
                                         std::vector<std::string>* warnings) {
    if (alpha < 0 || alpha > 1) throw InvalidInputError("alpha must lie in [0,1]");
    if (base.width != base.height)
        throw InvalidInputError("overlay base must be square, got " +
                                std::to_string(base.width) + "x" + std::to_string(base.height));
    const int size = base.width;
    const PlanarImage up = upsample_map(map, size);

    std::vector<std::uint8_t> rgb(static_cast<std::size_t>(size) * size * 3);
    const double base_scale = 255.0 / base.max_value();
    for (int y = 0; y < size; ++y)
        for (int x = 0; x < size; ++x) {
            const double gray =
                std::clamp(base.at(y, x) * base_scale, 0.0, 255.0);
            std::uint8_t* px = rgb.data() + (static_cast<std::size_t>(y) * size + x) * 3;
            if (alpha == 0.0) {
                const std::uint8_t g = static_cast<std::uint8_t>(std::lround(gray));
                px[0] = px[1] = px[2] = g;
                continue;
            }
            std::uint8_t heat[3];
            colormap_rgb(up.at(0, y, x), heat);
            for (int c = 0; c < 3; ++c)
                px[c] = static_cast<std::uint8_t>(
                    std::lround((1 - alpha) * gray + alpha * heat[c]));
        }

    if (circle) {
        Circle c = *circle;
        if (c.cx < 0 || c.cx > size - 1 || c.cy < 0 || c.cy > size - 1) {
            c.cx = std::clamp(c.cx, 0.0, static_cast<double>(size - 1));
            c.cy = std::clamp(c.cy, 0.0, static_cast<double>(size - 1));
            if (warnings)
                warnings->push_back("circle center outside the frame; clamped to (" +
                                    std::to_string(c.cx) + ", " + std::to_string(c.cy) + ")");
        }
        draw_circle(rgb, size, size, c);
    }
    return rgb;
}

CamPeak cam_peak(const ActivationMap& map, int display_size) {
    const PlanarImage up = upsample_map(map, display_size);
    CamPeak peak;
    peak.value = up.at(0, 0, 0);
    for (int y = 0; y < display_size; ++y)
        for (int x = 0; x < display_size; ++x)
            if (up.at(0, y, x) > peak.value) {
                peak.value = up.at(0, y, x);
                peak.x = x;
                peak.y = y;
            }
    return peak;
}

void write_cam_csv(const std::string& path, const std::vector<CamRecord>& records) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write cam csv: " + path);
    out << "image_id,stage,peak_x,peak_y,raw_min,raw_max,raw_mean,logit,prob\n";
    out.precision(17);
    for (const auto& r : records) {
        out << r.image_id << ',' << r.stage << ',' << r.peak.x << ',' << r.peak.y << ','
            << r.raw_min << ',' << r.raw_max << ',' << r.raw_mean << ',' << r.logit << ','
            << r.prob << '\n';
    }
    if (!out) throw IoError("cannot write cam csv: " + path);
}

}  // namespace cxr
