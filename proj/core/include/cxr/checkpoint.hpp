// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <memory>
#include <string>

#include "cxr/imgprep.hpp"
#include "cxr/model.hpp"

namespace cxr {

/// Provenance carried inside a checkpoint next to the weights. `parent_hash`
/// is the parameter hash of the checkpoint this model was initialized from,
/// so a cascade's lineage can be walked after the fact.
struct CheckpointMeta {
    std::string task;     // "nodule", "malignancy" or ""
    std::string stage;    // free-form stage tag ("A", "B", "C", "base", ...)
    int fold = -1;        // cross-validation fold, -1 when not applicable
    std::string parent_hash;
    PrepConfig prep;      // preprocessing the weights were trained under
};

struct LoadedCheckpoint {
    ModelConfig config;
    CheckpointMeta meta;
    std::string param_hash;
    std::unique_ptr<ClassifierModel> model;
};

/// Checkpoint files: 8-byte magic, little-endian u64 JSON header length, the
/// header (format version, model config, meta, tensor directory, SHA-256 of
/// the payload), then all tensors as raw little-endian doubles.
void save_checkpoint(const std::string& path, ClassifierModel& model, const CheckpointMeta& meta);

/// Rebuild the model described by the file. Corrupt payloads (hash mismatch)
/// and malformed headers are errors.
LoadedCheckpoint load_checkpoint(const std::string& path);

/// Restore weights into an existing model; the stored architecture must
/// match exactly, mismatches name the offending tensor.
CheckpointMeta load_checkpoint_into(const std::string& path, ClassifierModel& model);

/// SHA-256 over the concatenated parameter/buffer payload, as stored in the
/// checkpoint header.
std::string param_hash(ClassifierModel& model);

}  // namespace cxr
