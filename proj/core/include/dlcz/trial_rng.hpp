// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <limits>

namespace dlcz {

/// SplitMix64 finalizer.
constexpr std::uint64_t mix64(std::uint64_t z) {
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
}

/// Counter-based random stream dedicated to one trial. The starting state is
/// a hash of (seed, trial_index), so any trial can be regenerated without
/// touching its neighbours; the stream itself is SplitMix64.
/// Satisfies UniformRandomBitGenerator.
class TrialRng {
  public:
    using result_type = std::uint64_t;

    constexpr TrialRng(std::uint64_t seed, std::uint64_t trial_index)
        : state_(mix64(seed ^ mix64(trial_index + 0x632BE59BD9B4E019ULL))) {}

    static constexpr result_type min() { return 0; }
    static constexpr result_type max() { return std::numeric_limits<result_type>::max(); }

    constexpr result_type operator()() {
        state_ += 0x9E3779B97F4A7C15ULL;
        return mix64(state_);
    }

    /// Uniform double on (0, 1].
    double uniform() { return static_cast<double>(((*this)() >> 11) + 1) * 0x1.0p-53; }

  private:
    std::uint64_t state_;
};

}  // namespace dlcz
