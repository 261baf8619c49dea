// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#include "cxr/loss.hpp"

#include <algorithm>
#include <cmath>

#include "cxr/error.hpp"

namespace cxr {

namespace {
constexpr double kProbClamp = 1e-7;
}

ClassWeights compute_class_weights(const ClassCounts& counts,
                                   std::vector<std::string>* warnings) {
    if (counts.total() <= 0) throw InvalidInputError("class weights need a non-empty split");
    if (warnings && (counts.n_pos == 0 || counts.n_neg == 0))
        warnings->push_back("training split holds only " +
                            std::string(counts.n_pos == 0 ? "negative" : "positive") +
                            " cases; the weighted loss degenerates to a single term");
    ClassWeights w;
    w.w_pos = static_cast<double>(counts.n_neg) / static_cast<double>(counts.total());
    w.w_neg = static_cast<double>(counts.n_pos) / static_cast<double>(counts.total());
    return w;
}

double sigmoid(double z) {
    // split form stays stable for large |z|
    if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
    const double e = std::exp(z);
    return e / (1.0 + e);
}

double weighted_bce(const std::vector<double>& probs, const std::vector<int>& labels,
                    const ClassWeights& w) {
    if (probs.size() != labels.size() || probs.empty())
        throw InvalidInputError("loss needs equal-length, non-empty probs and labels");
    double total = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const double p = std::clamp(probs[i], kProbClamp, 1.0 - kProbClamp);
        if (labels[i] != 0 && labels[i] != 1)
            throw InvalidInputError("labels must be 0 or 1");
        total += labels[i] == 1 ? -w.w_pos * std::log(p) : -w.w_neg * std::log(1.0 - p);
    }
    return total / static_cast<double>(probs.size());
}

double weighted_bce_from_logits(const std::vector<double>& logits, const std::vector<int>& labels,
                                const ClassWeights& w, std::vector<double>* dlogits) {
    if (logits.size() != labels.size() || logits.empty())
        throw InvalidInputError("loss needs equal-length, non-empty logits and labels");
    const double n = static_cast<double>(logits.size());
    if (dlogits) dlogits->assign(logits.size(), 0.0);
    double total = 0;
    for (std::size_t i = 0; i < logits.size(); ++i) {
        if (labels[i] != 0 && labels[i] != 1)
            throw InvalidInputError("labels must be 0 or 1");
        const double p = sigmoid(logits[i]);
        const double pc = std::clamp(p, kProbClamp, 1.0 - kProbClamp);
        total += labels[i] == 1 ? -w.w_pos * std::log(pc) : -w.w_neg * std::log(1.0 - pc);
        if (dlogits)
            (*dlogits)[i] =
                (labels[i] == 1 ? -w.w_pos * (1.0 - p) : w.w_neg * p) / n;
    }
    return total / n;
}

}  // namespace cxr
