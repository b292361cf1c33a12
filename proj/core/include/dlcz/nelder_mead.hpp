// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <functional>
#include <span>
#include <vector>

namespace dlcz {

struct NelderMeadOptions {
    /// Edge length of the initial simplex along each axis.
    double initial_step = 0.1;
    /// Convergence: the mean objective over the simplex improved by less
    /// than this across one full cycle (dimension + 1 iterations).
    double tolerance = 1e-10;
    unsigned max_iterations = 20000;
    /// Vertices are clamped into [0, 1]^d when set.
    bool unit_box = true;
};

struct NelderMeadResult {
    std::vector<double> x;
    double value = 0.0;
    unsigned iterations = 0;
    bool converged = false;
};

/// Derivative-free downhill simplex minimization (reflection 1, expansion
/// 2, contraction 1/2, shrink 1/2).
NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)> &f, std::vector<double> x0,
                             const NelderMeadOptions &options = {});

}  // namespace dlcz
