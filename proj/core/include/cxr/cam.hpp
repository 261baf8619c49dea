// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "cxr/image.hpp"
#include "cxr/model.hpp"
#include "cxr/tensor.hpp"

namespace cxr {

/// Class activation map for the single sigmoid class: the head-weighted sum
/// of the final feature maps. `raw` keeps sign (positive regions argue for
/// the positive class); `normalized` is min-max scaled for display and all
/// zeros when the raw map is constant.
struct ActivationMap {
    int height = 0, width = 0;
    std::vector<double> raw;
    std::vector<double> normalized;

    double raw_at(int y, int x) const { return raw[static_cast<std::size_t>(y) * width + x]; }
};

/// raw(y,x) = sum_k weights[k] * features[sample, k, y, x]. The head bias is
/// excluded by construction.
ActivationMap compute_cam(const Tensor& features, int sample, const std::vector<double>& weights);

/// Structural identity of the GAP + linear head: the spatial mean of the raw
/// map plus the head bias equals the model's pre-sigmoid logit.
struct CamIdentityCheck {
    double cam_mean_plus_bias = 0;
    double logit = 0;
    double abs_diff = 0;
    bool ok = false;
};

CamIdentityCheck cam_logit_identity(ClassifierModel& model, const Tensor& x, int sample,
                                    double tol = 1e-5);

/// Bilinearly upsample the normalized map to target x target.
PlanarImage upsample_map(const ActivationMap& map, int target);

/// Fixed perceptual ramp blue -> cyan -> green -> yellow -> red over [0,1].
void colormap_rgb(double t, std::uint8_t rgb[3]);

struct Circle {
    double cx = 0, cy = 0, radius = 0;  // display-resolution pixels
};

/// Alpha-blend the colorized, upsampled map over the 8-bit base image and
/// optionally draw a ground-truth circle (blue). A circle center outside the
/// frame is clamped onto it with a warning. Returns interleaved RGB rows.
/// With alpha 0 the pixels under no circle are exactly the base image.
std::vector<std::uint8_t> render_overlay(const GrayImage& base, const ActivationMap& map,
                                         double alpha = 0.4,
                                         const std::optional<Circle>& circle = std::nullopt,
                                         std::vector<std::string>* warnings = nullptr);

/// Location and value of the maximum of the upsampled map (display coords).
struct CamPeak {
    int x = 0, y = 0;
    double value = 0;
};
CamPeak cam_peak(const ActivationMap& map, int display_size);

/// Statistics sidecar for one rendered overlay.
struct CamRecord {
    std::string image_id;
    std::string stage;
    CamPeak peak;
    double raw_min = 0, raw_max = 0, raw_mean = 0;
    double logit = 0, prob = 0;
};

/// CSV with header image_id,stage,peak_x,peak_y,raw_min,raw_max,raw_mean,
/// logit,prob.
void write_cam_csv(const std::string& path, const std::vector<CamRecord>& records);

}  // namespace cxr
