// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace dlcz {

struct Observation {
    double value = 0.0;
    double se = 0.0;
};

/// One measured operating point.
struct DataPoint {
    double p1 = 0.0;
    double p1_se = 0.0;
    std::optional<Observation> g12;
    std::optional<Observation> qc;
    std::optional<Observation> p12;
    std::optional<Observation> w;
    /// Free-form tags separated by ';'. `trap_off` marks points taken
    /// without trapping light between trials.
    std::string flags;

    bool has_flag(std::string_view flag) const;
    bool trap_off() const { return has_flag("trap_off"); }
};

inline constexpr std::string_view kTrapOffFlag = "trap_off";

/// Measured curves versus p1.
///
/// CSV header (columns may be omitted, order is free):
///   p1,p1_se,g12,g12_se,qc,qc_se,p12,p12_se,w,w_se,flags
/// Empty cells mean "not measured". Every value column needs its `_se`
/// partner, and present SEs must be positive.
struct Dataset {
    std::vector<DataPoint> points;

    /// Throws ConfigError naming the offending column, or FormatError with
    /// the line number for bad cells.
    static Dataset from_csv(std::string_view text);
    static Dataset load(const std::string &path);

    std::string to_csv() const;

    /// Number of scalar observations (excluding p1, which parameterizes
    /// the curves).
    std::size_t observation_count() const;
    bool any_trap_off() const;
};

}  // namespace dlcz
