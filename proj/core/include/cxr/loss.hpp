// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "cxr/splits.hpp"

namespace cxr {

/// Class weights for the imbalance-weighted binary cross-entropy: the
/// positive class is weighted by the negative share of the training split
/// and vice versa, so the rarer class carries the larger weight.
struct ClassWeights {
    double w_pos = 1.0;
    double w_neg = 1.0;
};

/// w_pos = n_neg / total, w_neg = n_pos / total. Empty counts are an error;
/// a single-class split yields weights (1, 0) or (0, 1) plus a warning when
/// a sink is provided (the loss then sees only one term).
ClassWeights compute_class_weights(const ClassCounts& counts,
                                   std::vector<std::string>* warnings = nullptr);

double sigmoid(double z);

/// Per-batch mean of -w_pos*y*log(p) - w_neg*(1-y)*log(1-p), with p clamped
/// to [1e-7, 1-1e-7] inside the logs only.
double weighted_bce(const std::vector<double>& probs, const std::vector<int>& labels,
                    const ClassWeights& w);

/// Same loss evaluated from logits via the sigmoid. When `dlogits` is given
/// it receives d(mean loss)/d(logit_i) = (-w_pos*y*(1-p) + w_neg*(1-y)*p)/N,
/// the exact gradient of the unclamped loss (the clamp only guards the
/// forward logs, so gradients stay informative at saturation).
double weighted_bce_from_logits(const std::vector<double>& logits, const std::vector<int>& labels,
                                const ClassWeights& w, std::vector<double>* dlogits = nullptr);

}  // namespace cxr
