// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>

#include "cxr/error.hpp"

namespace cxr {

/// Reduce-on-plateau learning-rate schedule. A metric value counts as an
/// improvement when it is below best * (1 - rel_threshold); after more than
/// `patience` consecutive non-improvements the rate is divided by 10 (times
/// `factor`), floored at `min_lr`, and the bad-epoch counter resets.
class PlateauSchedule {
 public:
    PlateauSchedule(double initial_lr, double factor = 0.1, int patience = 5,
                    double rel_threshold = 1e-4, double min_lr = 1e-6)
        : lr_(initial_lr),
          factor_(factor),
          patience_(patience),
          rel_threshold_(rel_threshold),
          min_lr_(min_lr) {
        if (initial_lr <= 0 || factor <= 0 || factor >= 1 || patience < 0 || min_lr < 0)
            throw InvalidInputError("bad plateau schedule parameters");
    }

    /// Feed one epoch's validation metric; returns the rate to use next.
    double observe(double metric) {
        just_dropped_ = false;
        if (metric < best_ * (1.0 - rel_threshold_)) {
            best_ = metric;
            bad_epochs_ = 0;
        } else {
            ++bad_epochs_;
            if (bad_epochs_ > patience_) {
                const double next = lr_ * factor_;
                if (next >= min_lr_) {
                    lr_ = next;
                    just_dropped_ = true;
                } else if (lr_ > min_lr_) {
                    lr_ = min_lr_;
                    just_dropped_ = true;
                }
                bad_epochs_ = 0;
            }
        }
        return lr_;
    }

    double lr() const { return lr_; }
    double best() const { return best_; }
    int bad_epochs() const { return bad_epochs_; }
    bool just_dropped() const { return just_dropped_; }

 private:
    double lr_;
    double factor_;
    int patience_;
    double rel_threshold_;
    double min_lr_;
    double best_ = std::numeric_limits<double>::infinity();
    int bad_epochs_ = 0;
    bool just_dropped_ = false;
};

}  // namespace cxr
