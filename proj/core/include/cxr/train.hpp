// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cxr/augment.hpp"
#include "cxr/imgprep.hpp"
#include "cxr/loss.hpp"
#include "cxr/manifest.hpp"
#include "cxr/model.hpp"
#include "cxr/splits.hpp"

namespace cxr {

/// One sample after the deterministic preparation steps (equalize, median,
/// resize). Augmentation and normalization happen per epoch at batch time.
struct PreparedSample {
    PlanarImage gray;  // single channel, values in [0, 2^bit_depth - 1]
    int bit_depth = 8;
    int label = 0;
};

struct PreparedDataset {
    std::vector<PreparedSample> samples;
    PrepConfig prep;

    ClassCounts counts() const;
    bool empty() const { return samples.empty(); }
};

/// Load + prepare the manifest records selected by `indices`. `workers`
/// threads split the index range; the result is identical for any count.
PreparedDataset load_prepared(const Manifest& manifest, const std::vector<int>& indices, Task task,
                              const PrepConfig& prep, int workers = 1);

struct TrainConfig {
    int batch_size = 32;
    double lr = 1e-3;
    double beta1 = 0.9, beta2 = 0.999, adam_eps = 1e-8;
    int max_epochs = 20;

    int plateau_patience = 1;
    double plateau_factor = 0.1;
    double plateau_rel_threshold = 1e-4;
    double min_lr = 1e-6;

    AugmentConfig augment;        // stage A: hflip only; B/C add rotation
    std::uint64_t seed = 0;
    int early_stop_patience = 3;  // epochs without a new best; 0 disables
    int max_steps = 0;            // optimizer step budget; 0 disables
    int workers = 1;
};

struct EpochLog {
    int epoch = 0;  // 0 is the pre-training snapshot
    double train_loss = 0;
    double train_accuracy = 0;
    double val_loss = 0;
    double lr = 0;
    bool is_best = false;
};

struct TrainResult {
    std::vector<EpochLog> epochs;
    double best_val_loss = 0;
    int best_epoch = 0;
    long long steps = 0;
    ClassWeights class_weights;
};

/// Optimize `model` on the training set, selecting the least-validation-loss
/// parameters (the untouched initial state counts as epoch 0, so a run that
/// never improves returns the initial weights). The model holds the selected
/// parameters when this returns. Batches, shuffling and augmentation derive
/// from cfg.seed alone; `workers` only parallelizes image preparation.
TrainResult train_stage(ClassifierModel& model, const PreparedDataset& train_set,
                        const PreparedDataset& val_set, const TrainConfig& cfg);

/// Assemble the finalized (augment-free) input tensor for the given samples.
Tensor batch_tensor(const PreparedDataset& set, const std::vector<int>& indices);

/// Sigmoid probabilities for every sample in the set, in order.
std::vector<double> predict_probs(ClassifierModel& model, const PreparedDataset& set,
                                  int batch_size = 32);

std::vector<int> dataset_labels(const PreparedDataset& set);

/// Write the per-epoch log as CSV (epoch,train_loss,train_accuracy,val_loss,
/// lr,is_best).
void write_epoch_log_csv(const std::string& path, const TrainResult& result);

}  // namespace cxr
