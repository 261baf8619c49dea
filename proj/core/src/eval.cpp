// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/eval.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "cxr/error.hpp"

namespace cxr {

const char* to_string(Stage s) {
    switch (s) {
        case Stage::a: return "A";
        case Stage::b: return "B";
        case Stage::c: return "C";
    }
    throw InvalidInputError("bad stage");
}

Stage stage_from_string(const std::string& s) {
    if (s == "A" || s == "a") return Stage::a;
    if (s == "B" || s == "b") return Stage::b;
    if (s == "C" || s == "c") return Stage::c;
    throw InvalidInputError("unknown stage: " + s);
}

double default_threshold(Stage s) { return s == Stage::a ? 0.55 : 0.5; }

ConfusionCounts confusion(const std::vector<double>& probs, const std::vector<int>& labels,
                          double threshold) {
    if (probs.size() != labels.size())
        throw InvalidInputError("probability/label length mismatch: " +
                                std::to_string(probs.size()) + " vs " +
                                std::to_string(labels.size()));
    if (threshold < 0 || threshold > 1)
        throw InvalidInputError("threshold must lie in [0,1]");
    ConfusionCounts c;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw InvalidInputError("labels must be 0 or 1");
        const bool pred_pos = probs[i] >= threshold;
        if (labels[i] == 1)
            (pred_pos ? c.tp : c.fn)++;
        else
            (pred_pos ? c.fp : c.tn)++;
    }
    return c;
}

MetricsReport metrics(const ConfusionCounts& counts, double threshold) {
    MetricsReport r;
    r.counts = counts;
    r.threshold = threshold;
    r.n = counts.total();
    if (r.n == 0) throw InvalidInputError("metrics over zero samples");
    r.accuracy = static_cast<double>(counts.tp + counts.tn) / static_cast<double>(r.n);
    if (counts.tn + counts.fp > 0) {
        r.specificity = static_cast<double>(counts.tn) / static_cast<double>(counts.tn + counts.fp);
        r.specificity_defined = true;
    }
    if (counts.tp + counts.fn > 0) {
        r.sensitivity = static_cast<double>(counts.tp) / static_cast<double>(counts.tp + counts.fn);
        r.sensitivity_defined = true;
    }
    return r;
}

MetricsReport evaluate_at(const std::vector<double>& probs, const std::vector<int>& labels,
                          double threshold) {
    return metrics(confusion(probs, labels, threshold), threshold);
}

SweepResult sweep_threshold(const std::vector<double>& probs, const std::vector<int>& labels) {
    const bool any_pos = std::find(labels.begin(), labels.end(), 1) != labels.end();
    const bool any_neg = std::find(labels.begin(), labels.end(), 0) != labels.end();
    if (!any_pos || !any_neg)
        throw InvalidInputError("threshold sweep needs both classes present");

    SweepResult result;
    result.table.reserve(101);
    for (int i = 0; i <= 100; ++i) {
        SweepPoint pt;
        pt.threshold = i / 100.0;
        pt.report = evaluate_at(probs, labels, pt.threshold);
        pt.objective = pt.report.specificity + pt.report.sensitivity;
        // Strict > keeps the lowest threshold on ties.
        if (result.table.empty() || pt.objective > result.best.specificity +
                                                      result.best.sensitivity) {
            result.best_threshold = pt.threshold;
            result.best = pt.report;
        }
        result.table.push_back(std::move(pt));
    }
    return result;
}

CVSummary cv_aggregate(const std::vector<MetricsReport>& folds) {
    if (folds.empty()) throw InvalidInputError("cross-validation summary needs at least one fold");
    CVSummary cv;
    cv.folds = folds;

    const auto summarize = [&](auto value_of, auto defined_of) {
        MetricSummary s;
        s.defined = true;
        for (const auto& f : folds) s.defined = s.defined && defined_of(f);
        if (!s.defined) return s;
        double sum = 0;
        for (const auto& f : folds) sum += value_of(f);
        s.mean = sum / static_cast<double>(folds.size());
        if (folds.size() > 1) {
            double sq = 0;
            for (const auto& f : folds) {
                const double d = value_of(f) - s.mean;
                sq += d * d;
            }
            s.stddev = std::sqrt(sq / static_cast<double>(folds.size() - 1));
        }
        return s;
    };

    cv.accuracy = summarize([](const MetricsReport& f) { return f.accuracy; },
                            [](const MetricsReport&) { return true; });
    cv.specificity = summarize([](const MetricsReport& f) { return f.specificity; },
                               [](const MetricsReport& f) { return f.specificity_defined; });
    cv.sensitivity = summarize([](const MetricsReport& f) { return f.sensitivity; },
                               [](const MetricsReport& f) { return f.sensitivity_defined; });
    return cv;
}

namespace {

std::string fraction_or_empty(double value, bool defined) {
    if (!defined) return "";
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.17g", value);
    return buf;
}

}  // namespace

void write_cv_csv(const std::string& path, const CVSummary& cv) {
    std::ofstream out(path, std::ios::binary);
    if (!out) throw IoError("cannot write metrics csv: " + path);
    out << "fold,threshold,n,tp,tn,fp,fn,accuracy,specificity,sensitivity\n";
    for (std::size_t i = 0; i < cv.folds.size(); ++i) {
        const MetricsReport& f = cv.folds[i];
        out << i << ',' << f.threshold << ',' << f.n << ',' << f.counts.tp << ',' << f.counts.tn
            << ',' << f.counts.fp << ',' << f.counts.fn << ','
            << fraction_or_empty(f.accuracy, true) << ','
            << fraction_or_empty(f.specificity, f.specificity_defined) << ','
            << fraction_or_empty(f.sensitivity, f.sensitivity_defined) << '\n';
    }
    out << "mean,,,,,,," << fraction_or_empty(cv.accuracy.mean, cv.accuracy.defined) << ','
        << fraction_or_empty(cv.specificity.mean, cv.specificity.defined) << ','
        << fraction_or_empty(cv.sensitivity.mean, cv.sensitivity.defined) << '\n';
    out << "std,,,,,,," << fraction_or_empty(cv.accuracy.stddev, cv.accuracy.defined) << ','
        << fraction_or_empty(cv.specificity.stddev, cv.specificity.defined) << ','
        << fraction_or_empty(cv.sensitivity.stddev, cv.sensitivity.defined) << '\n';
    if (!out) throw IoError("cannot write metrics csv: " + path);
}

std::string format_percent(double fraction) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.2f", fraction * 100.0);
    return buf;
}

std::string format_summary_cell(const MetricSummary& m, std::size_t folds) {
    if (!m.defined) return "undef";
    if (folds <= 1) return format_percent(m.mean);
    return format_percent(m.mean) + "±" + format_percent(m.stddev);
}

std::string format_report(const std::vector<ReportRow>& rows) {
    const std::vector<std::string> header = {"model",    "dataset",     "purpose",
                                             "accuracy", "specificity", "sensitivity"};
    std::vector<std::vector<std::string>> cells;
    for (const auto& r : rows) {
        const std::size_t k = r.summary.folds.size();
        cells.push_back({r.model, r.dataset, r.purpose,
                         format_summary_cell(r.summary.accuracy, k),
                         format_summary_cell(r.summary.specificity, k),
                         format_summary_cell(r.summary.sensitivity, k)});
    }

    // Column widths in display characters; the ± glyph is 2 bytes, 1 column.
    const auto display_width = [](const std::string& s) {
        std::size_t w = 0;
        for (std::size_t i = 0; i < s.size(); ++i)
            if ((s[i] & 0xc0) != 0x80) ++w;
        return w;
    };
    std::vector<std::size_t> width(header.size());
    for (std::size_t c = 0; c < header.size(); ++c) width[c] = header[c].size();
    for (const auto& row : cells)
        for (std::size_t c = 0; c < row.size(); ++c)
            width[c] = std::max(width[c], display_width(row[c]));

    std::ostringstream out;
    const auto emit = [&](const std::vector<std::string>& row) {
        for (std::size_t c = 0; c < row.size(); ++c) {
            out << row[c];
            for (std::size_t pad = display_width(row[c]); pad < width[c] + 2 && c + 1 < row.size();
                 ++pad)
                out << ' ';
        }
        out << '\n';
    };
    emit(header);
    std::vector<std::string> rule;
    for (std::size_t c = 0; c < header.size(); ++c) rule.push_back(std::string(width[c], '-'));
    emit(rule);
    for (const auto& row : cells) emit(row);
    return out.str();
}

}  // namespace cxr
