// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlcz/event_sim.hpp"
#include "dlcz/keyvalue.hpp"

namespace dlcz {

/// Sufficient statistics of a run: per-trial click and coincidence counts.
/// A coincidence is co-occurrence within one trial. Counts for detectors
/// that do not exist in `mode` stay zero.
struct CountTable {
    DetectionMode mode = DetectionMode::Single;
    std::uint64_t n_trials = 0;
    std::uint64_t n1 = 0;
    std::uint64_t n2 = 0;
    std::uint64_t n2a = 0;
    std::uint64_t n2b = 0;
    std::uint64_t n12 = 0;
    std::uint64_t n1_2a = 0;
    std::uint64_t n1_2b = 0;
    std::uint64_t n2a_2b = 0;
    std::uint64_t n1_2a_2b = 0;

    /// Trials per click pattern; bit 0 = D1, bit 1 = D2 (or D2a), bit 2 = D2b.
    std::array<std::uint64_t, 8> patterns() const;

    static CountTable from_patterns(DetectionMode mode, const std::array<std::uint64_t, 8> &patterns);
    /// Builds a table from a ClickSet histogram (see simulate_click_histogram).
    static CountTable from_click_histogram(DetectionMode mode, const std::array<std::uint64_t, 16> &hist);

    /// Throws std::logic_error if a coincidence count exceeds one of its
    /// singles or any count exceeds n_trials.
    void validate() const;

    bool operator==(const CountTable &) const = default;
};

/// Streaming ingestion of records grouped by trial. Multiple clicks of one
/// detector in one trial count once. Records must arrive with
/// non-decreasing trial_index; a record from a detector that does not
/// belong to the table's mode throws ModeMismatch.
class Accumulator {
  public:
    explicit Accumulator(CountTable start) : table_(start) {}
    explicit Accumulator(DetectionMode mode, std::uint64_t n_trials = 0) : table_{.mode = mode, .n_trials = n_trials} {}

    void push(const DetectionRecord &r);
    void push(std::span<const DetectionRecord> records);

    /// Flushes the trial in progress and returns the table.
    CountTable finish();

  private:
    void flush();

    CountTable table_;
    std::optional<std::uint64_t> current_trial_;
    unsigned pattern_ = 0;
};

/// Adds the counts of `records` (complete trials) to `table`.
CountTable accumulate(CountTable table, std::span<const DetectionRecord> records);

/// Componentwise sum of tables built over disjoint trial ranges.
CountTable merge(const CountTable &a, const CountTable &b);

enum class ErrorMethod { Delta, Bootstrap };

ErrorMethod error_method_from_string(std::string_view s);
std::string_view to_string(ErrorMethod m);

struct EstimateOptions {
    ErrorMethod method = ErrorMethod::Delta;
    unsigned bootstrap_replicates = 1000;
    std::uint64_t bootstrap_seed = 0;
};

/// Point estimate and one standard error. `value` is empty when the
/// metric's denominator count is zero or the mode lacks the detectors.
struct Estimate {
    std::optional<double> value;
    double se = 0.0;
    /// A count entering the estimate is below kLowCountThreshold.
    bool low_count = false;
};

inline constexpr std::uint64_t kLowCountThreshold = 10;

struct MetricsWithErrors {
    DetectionMode mode = DetectionMode::Single;
    std::uint64_t n_trials = 0;
    Estimate p1, p2, p12, p2a, p2b, p1_2a, p1_2b, p2a_2b, p1_2a_2b;
    Estimate g12, w, pc, qc, naive_ratio;
    ErrorMethod method = ErrorMethod::Delta;
    unsigned replicates = 0;
    std::vector<std::string> warnings;

    /// (name, estimate) pairs for every metric reported in `mode`.
    std::vector<std::pair<std::string, const Estimate *>> named() const;

    /// Flat report: `<name>` and `<name>_se` per metric, `undefined` for
    /// empty values, plus run metadata.
    KeyValueDoc to_doc() const;
};

/// Plug-in estimates p_i = N_i / n, g12 = N12 n / (N1 N2), pc = N12 / N1,
/// qc = pc / eta2, w = N1 N1_2a_2b / (N1_2a N1_2b), with delta-method
/// (multinomial over click patterns) or trial-bootstrap standard errors.
MetricsWithErrors estimate_metrics(const CountTable &table, double eta2, const EstimateOptions &options = {});

std::string count_table_csv(const CountTable &t);

}  // namespace dlcz
