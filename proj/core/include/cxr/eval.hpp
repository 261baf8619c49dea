// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

namespace cxr {

/// Cascade stages: A recognizes nodules on the large corpus, B fine-tunes
/// malignancy directly from the base weights, C fine-tunes malignancy from
/// A. Stage identity also fixes the default decision threshold.
enum class Stage { a, b, c };

const char* to_string(Stage s);
Stage stage_from_string(const std::string& s);

/// Operating points: stage A decides at 0.55, stages B and C at 0.5.
double default_threshold(Stage s);

struct ConfusionCounts {
    long long tp = 0, tn = 0, fp = 0, fn = 0;
    long long total() const { return tp + tn + fp + fn; }
};

/// Count outcomes at a decision threshold; a sample is predicted positive
/// iff p >= threshold (ties count as positive).
ConfusionCounts confusion(const std::vector<double>& probs, const std::vector<int>& labels,
                          double threshold);

struct MetricsReport {
    ConfusionCounts counts;
    double threshold = 0.5;
    long long n = 0;
    double accuracy = 0;
    // Zero-denominator metrics are flagged undefined rather than NaN.
    double specificity = 0;
    bool specificity_defined = false;
    double sensitivity = 0;
    bool sensitivity_defined = false;
};

MetricsReport metrics(const ConfusionCounts& counts, double threshold);
MetricsReport evaluate_at(const std::vector<double>& probs, const std::vector<int>& labels,
                          double threshold);

struct SweepPoint {
    double threshold = 0;
    double objective = 0;  // specificity + sensitivity
    MetricsReport report;
};

struct SweepResult {
    double best_threshold = 0;
    MetricsReport best;
    std::vector<SweepPoint> table;  // the full grid, ascending
};

/// Scan thresholds 0.00, 0.01, ..., 1.00 and return the one maximizing
/// specificity + sensitivity; ties break toward the lower threshold. Both
/// classes must be present (otherwise one term is undefined everywhere).
SweepResult sweep_threshold(const std::vector<double>& probs, const std::vector<int>& labels);

struct MetricSummary {
    double mean = 0;
    double stddev = 0;   // sample (n-1); 0 when only one fold
    bool defined = false;  // true iff the metric was defined in every fold
};

struct CVSummary {
    std::vector<MetricsReport> folds;
    MetricSummary accuracy, specificity, sensitivity;
};

/// Mean and sample standard deviation per metric over folds. A metric left
/// undefined in any fold marks the whole summary column undefined.
CVSummary cv_aggregate(const std::vector<MetricsReport>& folds);

/// Per-fold rows plus mean/std summary rows. Undefined cells are left empty.
void write_cv_csv(const std::string& path, const CVSummary& cv);

/// "74.43" / "74.43±6.01" style percent cells.
std::string format_percent(double fraction);
std::string format_summary_cell(const MetricSummary& m, std::size_t folds);

struct ReportRow {
    std::string model, dataset, purpose;
    CVSummary summary;
};

/// Aligned text table with the columns model, dataset, purpose, accuracy,
/// specificity, sensitivity (percent, mean±std across folds).
std::string format_report(const std::vector<ReportRow>& rows);

}  // namespace cxr
