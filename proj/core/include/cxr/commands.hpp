// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "cxr/experiment.hpp"

namespace cxr {

/// Outcome of one CLI command, returned instead of calling exit() so the
/// commands stay testable in-process. `exit_code` 0 means success. Soft
/// per-file failures are collected in `errors` (and mirrored to an
/// errors.csv beside the outputs) and force a nonzero exit; hard errors
/// also land in `errors` as the single cause.
struct CommandResult {
    int exit_code = 0;
    std::vector<std::string> warnings;
    std::vector<std::string> errors;
};

struct PrepareOptions {
    std::string input;            // images directory, or a metadata CSV (see kind)
    std::string kind = "images";  // images | jsrt | chestxray14 | manifest
    std::string root;             // image root for jsrt / chestxray14 metadata
    std::string out_dir = "prepared";
    PrepConfig prep;
    int workers = 1;
    bool debug_stages = false;  // also write the four per-stage images
};

/// Run the preparation chain over a directory or dataset. Writes an 8-bit
/// prepared-image store under <out_dir>/images plus prepared_manifest.csv
/// with refs (and nodule geometry) rewritten to the prepared resolution.
/// Unreadable inputs are reported in errors.csv and skipped; any failure
/// makes the exit code nonzero. Reruns over identical inputs are
/// byte-identical.
CommandResult cmd_prepare(const PrepareOptions& opt, std::ostream& log);

struct TrainOptions {
    std::string config_path;        // JSON experiment config; optional with desk
    bool desk = false;              // synthetic-data + desk_tiny preset
    std::string stage = "cascade";  // A | B | C | cascade
    std::string out_dir;            // overrides the config's out_dir when set
    bool has_seed = false;
    std::uint64_t seed = 0;  // overrides the config's seed when has_seed
    int workers = 0;         // overrides the config's workers when > 0
};

/// Train the requested stages of the cascade and write checkpoints, epoch
/// logs, metric CSVs, a text report and a replayable run manifest.
CommandResult cmd_train(const TrainOptions& opt, std::ostream& log);

struct EvalOptions {
    std::string checkpoint;
    std::string manifest_csv;     // dataset to evaluate
    std::string split_json;       // optional saved split; restricts to `subset`
    std::string subset = "test";  // train | validation | test (with split_json)
    std::string out_dir = "eval";
    double threshold = -1;  // < 0: the checkpoint stage's default
    bool sweep = false;     // also emit the 101-point threshold table
    std::string task;       // override the checkpoint's task (requires force)
    bool force = false;
    int workers = 1;
};

/// Evaluate a checkpoint on a manifest (optionally one split subset) at a
/// fixed threshold, writing predictions.csv + metrics.csv and, with sweep,
/// sweep.csv. The checkpoint's recorded task and preprocessing are used; a
/// conflicting --task is an error unless forced.
CommandResult cmd_eval(const EvalOptions& opt, std::ostream& log);

struct CamOptions {
    std::string checkpoint;
    std::vector<std::string> images;  // explicit image files, and/or ...
    std::string manifest_csv;         // ... every record of a manifest
    int limit = 0;                    // keep only the first N manifest records
    std::string out_dir = "cam";
    double alpha = 0.4;
    int workers = 1;
};

/// Render one class-activation overlay per input at the input's resolution
/// ({image_id}_{stage}_cam.png) plus a cams.csv sidecar. Records with
/// nodule geometry get the ground-truth circle. Per-image failures are
/// reported and the run continues with a nonzero final exit code.
CommandResult cmd_cam(const CamOptions& opt, std::ostream& log);

}  // namespace cxr
