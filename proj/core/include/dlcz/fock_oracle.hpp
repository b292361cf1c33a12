// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include "dlcz/model_params.hpp"
#include "dlcz/photon_model.hpp"

namespace dlcz {

inline constexpr int kDefaultFockCutoff = 60;
inline constexpr double kTailWarningThreshold = 1e-12;

struct OracleResult {
    /// Click probabilities summed over the enumerated (not renormalized)
    /// probability mass.
    Statistics stats;
    /// Probability mass of pair and background photon numbers above `nmax`.
    double tail_mass = 0.0;
    /// Set when tail_mass exceeds kTailWarningThreshold.
    bool tail_warning = false;
};

/// Brute-force reference for click_statistics: enumerates pair number
/// n <= nmax and background counts k <= nmax per detector with explicit
/// binomial, multinomial, and Poisson weights, routing every photon through
/// retrieval, transmission, splitter, and detector efficiency. Shares no
/// code path with the closed form. Throws std::invalid_argument if nmax < 1.
OracleResult brute_force_statistics(
    const ModelParams &params, const DetectionConfig &config, int nmax = kDefaultFockCutoff);

}  // namespace dlcz
