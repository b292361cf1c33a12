// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <vector>

#include "dlcz/keyvalue.hpp"
#include "dlcz/model_params.hpp"
#include "dlcz/trial_rng.hpp"

namespace dlcz {

/// Cyclic acquisition timing. Each MOT cycle opens one window of
/// `trials_per_window` back-to-back trials; trial preparation is folded
/// into `trial_period_ns`.
struct TrialSchedule {
    double mot_rate_hz = 40.0;
    double window_ms = 5.0;
    std::uint64_t trials_per_window = 1100;
    std::uint32_t trial_period_ns = 2000;
    std::uint32_t read_delay_ns = 300;
    std::uint32_t write_offset_ns = 0;

    void validate() const;

    double trials_per_second() const { return mot_rate_hz * static_cast<double>(trials_per_window); }
    double cycle_ns() const { return 1e9 / mot_rate_hz; }

    /// Schedule time from the first window opening to the end of the cycle
    /// containing the last of `n_trials` trials.
    double span_seconds(std::uint64_t n_trials) const;

    /// Absolute time of an event at `offset_ns` inside trial `trial_index`.
    std::uint64_t absolute_time_ns(std::uint64_t trial_index, std::uint32_t offset_ns) const;
    bool in_active_window(std::uint64_t absolute_ns) const;

    bool operator==(const TrialSchedule &) const = default;
};

inline constexpr std::array<std::string_view, 6> kScheduleKeys = {
    "mot_rate_hz", "window_ms", "trials_per_window", "trial_period_ns", "read_delay_ns", "write_offset_ns"};

TrialSchedule schedule_from_doc(const KeyValueDoc &doc, const TrialSchedule &defaults = {});
void schedule_to_doc(const TrialSchedule &s, KeyValueDoc &doc);

struct DetectionRecord {
    std::uint64_t trial_index = 0;
    DetectorId detector = DetectorId::D1;
    std::uint32_t offset_ns = 0;

    bool operator==(const DetectionRecord &) const = default;
};

struct SessionSpec {
    ModelParams params;
    DetectionConfig config;
    TrialSchedule schedule;
    std::uint64_t n_trials = 0;
    std::uint64_t seed = 0;
};

/// Records of one run, ordered by trial and then detector id. Trials
/// without clicks leave no record, so `n_trials` travels alongside.
struct RecordStream {
    DetectionMode mode = DetectionMode::Single;
    std::uint64_t n_trials = 0;
    std::vector<DetectionRecord> records;
};

/// Bitmask over DetectorId values (bit i set = detector i clicked).
using ClickSet = std::uint8_t;

constexpr ClickSet click_bit(DetectorId d) { return static_cast<ClickSet>(1U << static_cast<unsigned>(d)); }

/// One write/read trial of the model, sampled mechanistically: pair number
/// from the geometric distribution, Poisson background counts at every
/// detector, independent thinning (and splitter routing) of each pair
/// photon. A detector clicks iff at least one photon reaches it.
class TrialSampler {
  public:
    TrialSampler(const ModelParams &params, const DetectionConfig &config);

    ClickSet operator()(TrialRng &rng) const;

    DetectionMode mode() const { return mode_; }

  private:
    struct Channel {
        DetectorId id;
        double pair_efficiency;
        double background_mean;
        double background_silent;  // exp(-background_mean)
    };

    std::uint64_t sample_pairs(TrialRng &rng) const;
    static std::uint64_t sample_poisson(const Channel &c, TrialRng &rng);

    DetectionMode mode_;
    double chi_;
    double log_chi_;
    std::vector<Channel> channels_;
};

/// Convenience wrapper constructing a TrialSampler for a single draw.
ClickSet sample_trial(const ModelParams &params, const DetectionConfig &config, TrialRng &rng);

/// Runs every trial of `spec`. The output is a pure function of `spec`;
/// `threads` (0 = hardware concurrency) only changes wall time.
RecordStream run_session(const SessionSpec &spec, unsigned threads = 0);

/// Histogram of per-trial click sets, indexed by ClickSet. Same trials and
/// random streams as run_session, without materializing records.
std::array<std::uint64_t, 16> simulate_click_histogram(const SessionSpec &spec, unsigned threads = 0);

}  // namespace dlcz
