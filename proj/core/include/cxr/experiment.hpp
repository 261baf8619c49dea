// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cxr/eval.hpp"
#include "cxr/manifest.hpp"
#include "cxr/model.hpp"
#include "cxr/splits.hpp"
#include "cxr/train.hpp"

namespace cxr {

/// Where one stage's data comes from. `kind` selects the loader:
///   jsrt / chestxray14  - root + metadata CSV on disk
///   manifest            - a saved manifest CSV (image_refs resolvable as-is)
///   synthetic           - generated detection set (n_pos / n_neg)
///   synthetic_graded    - generated malignancy set (bright / dim / none)
struct DataSourceConfig {
    std::string kind = "synthetic";
    std::string root;
    std::string metadata;
    int n_pos = 0, n_neg = 0;
    int n_malignant = 0, n_benign = 0, n_nonnodule = 0;
    int image_size = 64;
};

/// One experiment, fully serializable: a saved copy replays the run.
struct ExperimentConfig {
    int version = 1;
    std::string out_dir = "run";
    std::uint64_t seed = 0;
    int workers = 1;
    std::vector<Stage> stages = {Stage::a, Stage::b, Stage::c};

    /// Optional starting weights ("base model"). Empty: seeded random init.
    std::string base_checkpoint;
    /// Optional previously trained stage-A checkpoint, needed when stage C
    /// runs without stage A in the same invocation.
    std::string checkpoint_a;

    ModelConfig model;
    PrepConfig prep;
    TrainConfig train;       // seed/workers/augment are managed per stage
    double rotate_deg = 30;  // B/C rotation limit; stage A flips only

    DataSourceConfig stage_a;   // nodule-vs-non-nodule corpus
    DataSourceConfig stage_bc;  // malignancy corpus
    double a_train = 8, a_validation = 1, a_test = 1;
    GroupingKey a_grouping = GroupingKey::patient;
    int folds = 10;
    double fold_train_ratio = 8, fold_validation_ratio = 1;
};

/// Preset for --desk: synthetic data, desk_tiny backbone, small inputs; the
/// whole cascade finishes on a CPU in minutes.
ExperimentConfig desk_config(const std::string& out_dir, std::uint64_t seed);

/// Strict JSON round trip: unknown keys and missing required keys are
/// errors naming the key; "version" must be 1.
ExperimentConfig load_experiment_config(const std::string& path);
void save_experiment_config(const std::string& path, const ExperimentConfig& cfg);

/// Materialize the manifest a DataSourceConfig describes. Synthetic kinds
/// generate images under `synth_dir`. `hash_out`, when given, receives the
/// SHA-256 of the dataset's metadata/manifest CSV.
Manifest resolve_dataset(const DataSourceConfig& ds, std::uint64_t seed,
                         const std::string& synth_dir, std::string* hash_out = nullptr,
                         std::vector<std::string>* warnings = nullptr);

struct StageOutput {
    Stage stage = Stage::a;
    int fold = -1;  // -1 for stage A
    std::string checkpoint_path;
    std::string param_hash;
    std::string parent_hash;
    TrainResult train;
    MetricsReport test_report;  // at the stage's default threshold
};

struct CascadeResult {
    std::string run_dir;
    std::vector<StageOutput> outputs;
    CVSummary b_summary, c_summary;  // folds empty when the stage didn't run
    std::string report_text;
};

/// Run the configured stages: A once (base -> nodule task), then per fold
/// B (base -> malignancy) and C (A -> malignancy). Writes checkpoints,
/// epoch logs, split/fold descriptions, metric CSVs, a text report and a
/// replayable run manifest under cfg.out_dir.
CascadeResult run_cascade(const ExperimentConfig& cfg,
                          std::vector<std::string>* warnings = nullptr);

}  // namespace cxr
