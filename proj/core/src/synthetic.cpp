// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/synthetic.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "cxr/image_io.hpp"
#include "cxr/rng.hpp"

namespace fs = std::filesystem;

namespace cxr {

GrayImage synth_image(int image_size, std::uint64_t stream_seed, double blob_amplitude,
                      NodulePoint* center_out, double* sigma_out) {
    if (image_size < 8) throw InvalidInputError("synthetic image size must be >= 8");
    Rng rng(stream_seed);
    const int s = image_size;

    std::vector<double> canvas(static_cast<std::size_t>(s) * s, 70.0);

    // Smooth background structure: a gentle vertical gradient plus three
    // broad low-amplitude bumps.
    const double grad = rng.uniform(-10.0, 10.0);
    for (int y = 0; y < s; ++y) {
        const double g = grad * (static_cast<double>(y) / (s - 1) - 0.5);
        for (int x = 0; x < s; ++x) canvas[static_cast<std::size_t>(y) * s + x] += g;
    }
    for (int b = 0; b < 3; ++b) {
        const double cx = rng.uniform(0, s), cy = rng.uniform(0, s);
        const double sigma = s / 4.0;
        const double amp = rng.uniform(-4.0, 4.0);
        const double inv = 1.0 / (2.0 * sigma * sigma);
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
                canvas[static_cast<std::size_t>(y) * s + x] += amp * std::exp(-d2 * inv);
            }
    }

    NodulePoint center{};
    double sigma = 0;
    if (blob_amplitude > 0) {
        center.x = rng.uniform(0.30 * s, 0.70 * s);
        center.y = rng.uniform(0.30 * s, 0.70 * s);
        sigma = rng.uniform(0.080, 0.095) * s;
        const double inv = 1.0 / (2.0 * sigma * sigma);
        for (int y = 0; y < s; ++y)
            for (int x = 0; x < s; ++x) {
                const double d2 = (x - center.x) * (x - center.x) + (y - center.y) * (y - center.y);
                canvas[static_cast<std::size_t>(y) * s + x] += blob_amplitude * std::exp(-d2 * inv);
            }
    }

    GrayImage img(s, s, 8);
    for (std::size_t i = 0; i < canvas.size(); ++i) {
        const double v = canvas[i] + rng.normal(0.0, 10.0);
        img.pixels[i] = static_cast<std::uint16_t>(std::clamp(std::lround(v), 0L, 255L));
    }
    if (center_out) *center_out = center;
    if (sigma_out) *sigma_out = sigma;
    return img;
}

namespace {

struct SynthCase {
    const char* prefix;
    Malignancy malignancy;
    bool has_blob;
    double amp_lo, amp_hi;
    int count;
};

Manifest generate_cases(const std::vector<SynthCase>& cases, int image_size, std::uint64_t seed,
                        const std::string& out_dir) {
    fs::create_directories(out_dir);
    Manifest m;
    m.source = DataSource::synthetic;
    std::uint64_t stream = 0;
    int serial = 0;
    for (const auto& c : cases) {
        for (int i = 0; i < c.count; ++i, ++stream, ++serial) {
            const std::uint64_t item_seed = Rng::derive(seed, stream);
            Rng pick(Rng::derive(item_seed, 1));
            const double amp = c.has_blob ? pick.uniform(c.amp_lo, c.amp_hi) : 0.0;

            NodulePoint center{};
            double sigma = 0;
            const GrayImage img = synth_image(image_size, item_seed, amp,
                                              c.has_blob ? &center : nullptr,
                                              c.has_blob ? &sigma : nullptr);

            char name[64];
            std::snprintf(name, sizeof(name), "%s_%04d.png", c.prefix, i);
            const std::string path = (fs::path(out_dir) / name).string();
            save_png_gray(path, img);

            SampleRecord rec;
            rec.image_ref = path;
            char pid[32];
            std::snprintf(pid, sizeof(pid), "synth_p%05d", serial);
            rec.patient_id = pid;
            rec.malignancy = c.malignancy;
            if (c.has_blob) {
                rec.findings.push_back("nodule");
                rec.nodule_center = center;
                rec.nodule_size = sigma;
            }
            m.records.push_back(std::move(rec));
        }
    }
    save_manifest_csv((fs::path(out_dir) / "manifest.csv").string(), m);
    return m;
}

}  // namespace

Manifest generate_synthetic(int n_pos, int n_neg, int image_size, std::uint64_t seed,
                            const std::string& out_dir) {
    if (n_pos < 0 || n_neg < 0) throw InvalidInputError("synthetic counts must be >= 0");
    return generate_cases(
        {{"pos", Malignancy::unknown, true, SynthContrast::detect_lo, SynthContrast::detect_hi, n_pos},
         {"neg", Malignancy::none, false, 0, 0, n_neg}},
        image_size, seed, out_dir);
}

Manifest generate_synthetic_graded(int n_malignant, int n_benign, int n_nonnodule,
                                   int image_size, std::uint64_t seed,
                                   const std::string& out_dir) {
    if (n_malignant < 0 || n_benign < 0 || n_nonnodule < 0)
        throw InvalidInputError("synthetic counts must be >= 0");
    return generate_cases(
        {{"malig", Malignancy::malignant, true, SynthContrast::bright_lo, SynthContrast::bright_hi,
          n_malignant},
         {"benign", Malignancy::benign, true, SynthContrast::dim_lo, SynthContrast::dim_hi, n_benign},
         {"clear", Malignancy::none, false, 0, 0, n_nonnodule}},
        image_size, seed, out_dir);
}

}  // namespace cxr
