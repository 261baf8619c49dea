// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>

#include "cxr/image.hpp"
#include "cxr/manifest.hpp"

namespace cxr {

/// Desk-scale synthetic data: grayscale 8-bit images of a noisy, smoothly
/// varying background, optionally carrying one bright Gaussian blob (the
/// stand-in nodule). Blob center and size are recorded in the manifest so
/// localization checks have ground truth. Generation is deterministic per
/// seed, including the emitted PNG bytes.

/// Detection task data: positives carry a blob (finding tag "nodule",
/// malignancy unknown), negatives are background only (malignancy none).
/// Images are written under `out_dir` and the returned manifest references
/// them; the manifest CSV itself is written to out_dir/manifest.csv.
Manifest generate_synthetic(int n_pos, int n_neg, int image_size, std::uint64_t seed,
                            const std::string& out_dir);

/// Graded task data mirroring a JSRT-style mix: `n_malignant` bright blobs
/// (malignancy malignant), `n_benign` dim blobs (benign), and
/// `n_nonnodule` blob-free backgrounds (none). Under the malignancy task
/// only the bright-blob class is positive.
Manifest generate_synthetic_graded(int n_malignant, int n_benign, int n_nonnodule,
                                   int image_size, std::uint64_t seed,
                                   const std::string& out_dir);

/// The single-image kernel behind both generators, exposed for tests.
/// `blob_amplitude` <= 0 draws no blob; otherwise center/size outputs are
/// filled in.
GrayImage synth_image(int image_size, std::uint64_t stream_seed, double blob_amplitude,
                      NodulePoint* center_out, double* sigma_out);

/// Amplitude ranges used by the generators (min, max), exposed so tests can
/// reason about separability margins.
struct SynthContrast {
    static constexpr double detect_lo = 95, detect_hi = 120;
    static constexpr double bright_lo = 95, bright_hi = 120;
    static constexpr double dim_lo = 35, dim_hi = 55;
};

}  // namespace cxr
