// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <limits>
#include <optional>
#include <string_view>
#include <utility>
#include <vector>

#include "dlcz/model_params.hpp"

namespace dlcz {

/// Joint generating function E[x^n1 y^n2] of the two-mode squeezed state
/// with pair weight ratio `chi`: (1 - chi) / (1 - chi x y).
/// Throws std::domain_error unless 0 <= chi < 1 and x, y lie in [0, 1].
double tmss_pgf(double chi, double x, double y);

/// Per-trial click probabilities. Fields that do not belong to `mode` are
/// NaN. Names follow the detector labels: `p1_2a` is the probability that
/// D1 and D2a both click in one trial, and so on.
struct Statistics {
    static constexpr double kUnset = std::numeric_limits<double>::quiet_NaN();

    DetectionMode mode = DetectionMode::Single;
    double p1 = kUnset;
    double p2 = kUnset;
    double p12 = kUnset;
    double p2a = kUnset;
    double p2b = kUnset;
    double p1_2a = kUnset;
    double p1_2b = kUnset;
    double p2a_2b = kUnset;
    double p1_2a_2b = kUnset;

    /// The fields defined for `mode`, as (name, value) in a fixed order.
    std::vector<std::pair<std::string_view, double>> fields() const;
};

/// Figures of merit. A disengaged optional marks a metric whose
/// denominator vanished or that the detection mode cannot provide.
struct Metrics {
    std::optional<double> g12;
    std::optional<double> w;
    std::optional<double> pc;
    std::optional<double> qc;
    std::optional<double> p12;
    /// p2 / p1, the background-sensitive "retrieval efficiency" estimate.
    std::optional<double> naive_ratio;
};

/// Exact click probabilities of the model, in closed form.
///
/// Pair photons are binomially thinned by each detector's pair efficiency,
/// backgrounds are independent Poisson counts, and a detector clicks iff at
/// least one photon arrives. All-silent probabilities come from tmss_pgf;
/// coincidences follow by inclusion-exclusion, with the pairwise terms
/// written as product-plus-covariance so that they stay accurate when the
/// probabilities are small.
Statistics click_statistics(const ModelParams &params, const DetectionConfig &config);

/// g12 = p12 / (p1 p2), pc = p12 / p1, qc = pc / eta2 for Single statistics;
/// w = p1 p_1_2a_2b / (p_1_2a p_1_2b) for Split statistics.
Metrics derived_metrics(const Statistics &stats, const ModelParams &params);

}  // namespace dlcz
