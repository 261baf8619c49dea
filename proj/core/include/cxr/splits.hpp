// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "cxr/manifest.hpp"

namespace cxr {

enum class GroupingKey { record, patient };

const char* to_string(GroupingKey g);
GroupingKey grouping_from_string(const std::string& s);

/// Disjoint train/validation/test index lists over one manifest.
struct SplitSpec {
    std::vector<int> train;
    std::vector<int> validation;
    std::vector<int> test;
    GroupingKey grouping = GroupingKey::record;
    std::uint64_t seed = 0;
};

/// k rotations of the manifest; every record lands in exactly one test set.
struct FoldPlan {
    int k = 0;
    std::uint64_t seed = 0;
    std::vector<SplitSpec> folds;
};

/// Requested split sizes: either train/validation/test ratios with the
/// remainder rule train-first, or exact class-balanced validation/test
/// quotas with everything else going to training.
struct SplitSizes {
    enum class Mode { ratios, balanced_counts };
    Mode mode = Mode::ratios;

    // ratios mode
    double train = 8, validation = 1, test = 1;

    // balanced_counts mode
    int validation_pos = 0, validation_neg = 0;
    int test_pos = 0, test_neg = 0;

    static SplitSizes from_ratios(double train, double validation, double test);
    static SplitSizes balanced(int val_pos, int val_neg, int test_pos, int test_neg);
};

struct ClassCounts {
    long long n_pos = 0;
    long long n_neg = 0;
    long long total() const { return n_pos + n_neg; }
};

/// Randomized split honoring the grouping key: with GroupingKey::patient no
/// patient_id ever appears in two splits. In balanced_counts mode the
/// validation/test class quotas are met exactly or an error reports the
/// available counts.
SplitSpec split_grouped(const Manifest& manifest, Task task, const SplitSizes& sizes,
                        GroupingKey grouping, std::uint64_t seed);

/// Stratified-by-label k-fold plan. Fold i holds out chunk i as the test
/// set; the remainder is split per class into train/validation with the
/// given ratios (defaults give the 8:1:1 shape at k=10).
FoldPlan make_folds(const Manifest& manifest, Task task, int k, std::uint64_t seed,
                    double train_ratio = 8, double validation_ratio = 1);

ClassCounts class_counts(const Manifest& manifest, Task task);
ClassCounts class_counts(const Manifest& manifest, const std::vector<int>& indices, Task task);

/// Replayable split / fold description files (JSON, seed-stamped).
void save_split_json(const std::string& path, const SplitSpec& split);
SplitSpec load_split_json(const std::string& path);
void save_folds_json(const std::string& path, const FoldPlan& plan);
FoldPlan load_folds_json(const std::string& path);

}  // namespace cxr
