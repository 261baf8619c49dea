// Copyright (c) 2026 The cxrcascade authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cmath>
#include <functional>

namespace cxrtest {

/// Central finite difference of a recomputable scalar with respect to one
/// storage slot. The slot is restored afterwards.
inline double fd_slot(const std::function<double()>& recompute, double& slot, double h = 1e-5) {
    const double keep = slot;
    slot = keep + h;
    const double up = recompute();
    slot = keep - h;
    const double down = recompute();
    slot = keep;
    return (up - down) / (2.0 * h);
}

/// Relative agreement: |a-b| <= tol * max(1, |a|, |b|).
inline bool grad_close(double analytic, double numeric, double tol) {
    const double scale = std::max({1.0, std::abs(analytic), std::abs(numeric)});
    return std::abs(analytic - numeric) <= tol * scale;
}

enum class SlotCheck { ok, mismatch, kink };

/// Check one slot, guarding against ReLU-style kinks inside the finite
/// difference window: when the h and h/4 estimates disagree with each other
/// the slot is non-differentiable there and carries no signal either way.
inline SlotCheck check_grad_slot(const std::function<double()>& recompute, double& slot,
                                 double analytic, double tol, double h = 1e-5) {
    const double fd1 = fd_slot(recompute, slot, h);
    if (grad_close(analytic, fd1, tol)) return SlotCheck::ok;
    const double fd2 = fd_slot(recompute, slot, h / 4.0);
    if (grad_close(analytic, fd2, tol)) return SlotCheck::kink;
    const double scale = std::max({1.0, std::abs(fd1), std::abs(fd2)});
    if (std::abs(fd1 - fd2) > 0.25 * tol * scale) return SlotCheck::kink;
    return SlotCheck::mismatch;
}

}  // namespace cxrtest
