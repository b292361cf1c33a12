// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlcz/event_sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <random>
#include <thread>

#include "dlcz/errors.hpp"

namespace dlcz {

namespace {

constexpr std::uint64_t kBlockTrials = std::uint64_t{1} << 16;
constexpr double kInversionMeanLimit = 30.0;

unsigned resolve_threads(unsigned threads, std::uint64_t n_blocks) {
    if (threads == 0) {
        threads = std::max(1U, std::thread::hardware_concurrency());
    }
    return static_cast<unsigned>(std::clamp<std::uint64_t>(n_blocks, 1, threads));
}

/// Runs `work(block_index)` for every block on a small pool. Blocks are
/// claimed dynamically; callers must write results to per-block slots.
template <typename Fn>
void for_each_block(std::uint64_t n_blocks, unsigned threads, Fn &&work) {
    std::atomic<std::uint64_t> next{0};
    auto worker = [&] {
        for (std::uint64_t b = next++; b < n_blocks; b = next++) {
            work(b);
        }
    };
    const unsigned n = resolve_threads(threads, n_blocks);
    std::vector<std::jthread> pool;
    pool.reserve(n - 1);
    for (unsigned i = 1; i < n; ++i) {
        pool.emplace_back(worker);
    }
    worker();
}

void validate_session(const SessionSpec &spec) {
    spec.params.validate();
    spec.schedule.validate();
}

}  // namespace

void TrialSchedule::validate() const {
    if (!(mot_rate_hz > 0.0) || !std::isfinite(mot_rate_hz)) {
        throw ConfigError("mot_rate_hz", "must be positive");
    }
    if (!(window_ms > 0.0) || window_ms * 1e6 > cycle_ns()) {
        throw ConfigError("window_ms", "must be positive and fit inside one MOT cycle");
    }
    if (trials_per_window == 0) {
        throw ConfigError("trials_per_window", "must be >= 1");
    }
    if (trial_period_ns == 0) {
        throw ConfigError("trial_period_ns", "must be >= 1");
    }
    if (static_cast<double>(trials_per_window) * trial_period_ns > window_ms * 1e6) {
        throw ConfigError("trials_per_window", "trials do not fit in the active window");
    }
    if (std::uint64_t{write_offset_ns} + read_delay_ns >= trial_period_ns) {
        throw ConfigError("read_delay_ns", "write offset plus read delay must stay inside the trial");
    }
}

double TrialSchedule::span_seconds(std::uint64_t n_trials) const {
    const std::uint64_t cycles = (n_trials + trials_per_window - 1) / trials_per_window;
    return static_cast<double>(cycles) / mot_rate_hz;
}

std::uint64_t TrialSchedule::absolute_time_ns(std::uint64_t trial_index, std::uint32_t offset_ns) const {
    const std::uint64_t cycle = trial_index / trials_per_window;
    const std::uint64_t slot = trial_index % trials_per_window;
    const auto cycle_start = static_cast<std::uint64_t>(std::llround(static_cast<double>(cycle) * cycle_ns()));
    return cycle_start + slot * trial_period_ns + offset_ns;
}

bool TrialSchedule::in_active_window(std::uint64_t absolute_ns) const {
    const double cycle = std::floor(static_cast<double>(absolute_ns) / cycle_ns());
    const double into_cycle = static_cast<double>(absolute_ns) - cycle * cycle_ns();
    return into_cycle >= 0.0 && into_cycle < window_ms * 1e6;
}

TrialSchedule schedule_from_doc(const KeyValueDoc &doc, const TrialSchedule &defaults) {
    TrialSchedule s = defaults;
    auto as_u32 = [&](std::string_view key, std::uint32_t &field) {
        if (auto v = doc.get_uint(key)) {
            if (*v > 0xFFFFFFFFULL) {
                throw ConfigError(std::string(key), "out of range");
            }
            field = static_cast<std::uint32_t>(*v);
        }
    };
    if (auto v = doc.get_double("mot_rate_hz")) s.mot_rate_hz = *v;
    if (auto v = doc.get_double("window_ms")) s.window_ms = *v;
    if (auto v = doc.get_uint("trials_per_window")) s.trials_per_window = *v;
    as_u32("trial_period_ns", s.trial_period_ns);
    as_u32("read_delay_ns", s.read_delay_ns);
    as_u32("write_offset_ns", s.write_offset_ns);
    s.validate();
    return s;
}

void schedule_to_doc(const TrialSchedule &s, KeyValueDoc &doc) {
    doc.set("mot_rate_hz", s.mot_rate_hz);
    doc.set("window_ms", s.window_ms);
    doc.set("trials_per_window", s.trials_per_window);
    doc.set("trial_period_ns", std::uint64_t{s.trial_period_ns});
    doc.set("read_delay_ns", std::uint64_t{s.read_delay_ns});
    doc.set("write_offset_ns", std::uint64_t{s.write_offset_ns});
}

TrialSampler::TrialSampler(const ModelParams &params, const DetectionConfig &config)
    : mode_(config.mode), chi_(params.chi), log_chi_(params.chi > 0.0 ? std::log(params.chi) : 0.0) {
    params.validate();
    for (const auto &c : config.resolve(params)) {
        channels_.push_back({c.id, c.pair_efficiency, c.background_mean, std::exp(-c.background_mean)});
    }
}

std::uint64_t TrialSampler::sample_pairs(TrialRng &rng) const {
    // Inversion of P(n >= k) = chi^k; u > chi means n = 0.
    const double u = rng.uniform();
    if (u > chi_) {
        return 0;
    }
    const double n = std::floor(std::log(u) / log_chi_);
    return std::max<std::uint64_t>(1, static_cast<std::uint64_t>(n));
}

std::uint64_t TrialSampler::sample_poisson(const Channel &c, TrialRng &rng) {
    if (c.background_mean <= 0.0) {
        return 0;
    }
    if (c.background_mean >= kInversionMeanLimit) {
        std::poisson_distribution<std::uint64_t> dist(c.background_mean);
        return dist(rng);
    }
    const double u = rng.uniform();
    double pmf = c.background_silent;
    double cdf = pmf;
    std::uint64_t k = 0;
    while (u > cdf && pmf > 0.0) {
        ++k;
        pmf *= c.background_mean / static_cast<double>(k);
        cdf += pmf;
    }
    return k;
}

ClickSet TrialSampler::operator()(TrialRng &rng) const {
    const std::uint64_t pairs = chi_ > 0.0 ? sample_pairs(rng) : 0;

    ClickSet clicks = 0;
    for (const auto &c : channels_) {
        if (sample_poisson(c, rng) > 0) {
            clicks |= click_bit(c.id);
        }
    }
    if (pairs == 0) {
        return clicks;
    }

    // Field 1: any surviving photon fires D1.
    const Channel &d1 = channels_[0];
    for (std::uint64_t i = 0; i < pairs; ++i) {
        if (rng.uniform() <= d1.pair_efficiency) {
            clicks |= click_bit(d1.id);
            break;
        }
    }

    // Field 2: each photon lands on at most one detector or is lost.
    const std::size_t n2 = channels_.size() - 1;
    const ClickSet all2 = n2 == 1 ? click_bit(channels_[1].id) : click_bit(channels_[1].id) | click_bit(channels_[2].id);
    ClickSet hit2 = 0;
    for (std::uint64_t i = 0; i < pairs && hit2 != all2; ++i) {
        double u = rng.uniform();
        for (std::size_t k = 1; k <= n2; ++k) {
            if (u <= channels_[k].pair_efficiency) {
                hit2 |= click_bit(channels_[k].id);
                break;
            }
            u -= channels_[k].pair_efficiency;
        }
    }
    return clicks | hit2;
}

ClickSet sample_trial(const ModelParams &params, const DetectionConfig &config, TrialRng &rng) {
    return TrialSampler(params, config)(rng);
}

RecordStream run_session(const SessionSpec &spec, unsigned threads) {
    validate_session(spec);
    RecordStream out;
    out.mode = spec.config.mode;
    out.n_trials = spec.n_trials;
    if (spec.n_trials == 0) {
        return out;
    }

    const TrialSampler sampler(spec.params, spec.config);
    const std::uint32_t field1_offset = spec.schedule.write_offset_ns;
    const std::uint32_t field2_offset = spec.schedule.write_offset_ns + spec.schedule.read_delay_ns;
    const std::uint64_t n_blocks = (spec.n_trials + kBlockTrials - 1) / kBlockTrials;
    std::vector<std::vector<DetectionRecord>> blocks(n_blocks);

    for_each_block(n_blocks, threads, [&](std::uint64_t b) {
        const std::uint64_t begin = b * kBlockTrials;
        const std::uint64_t end = std::min(spec.n_trials, begin + kBlockTrials);
        auto &recs = blocks[b];
        for (std::uint64_t t = begin; t < end; ++t) {
            TrialRng rng(spec.seed, t);
            const ClickSet clicks = sampler(rng);
            for (int d = 0; d < kNumDetectorIds; ++d) {
                if (clicks & (1U << d)) {
                    const auto id = static_cast<DetectorId>(d);
                    recs.push_back({t, id, id == DetectorId::D1 ? field1_offset : field2_offset});
                }
            }
        }
    });

    std::size_t total = 0;
    for (const auto &b : blocks) {
        total += b.size();
    }
    out.records.reserve(total);
    for (auto &b : blocks) {
        out.records.insert(out.records.end(), b.begin(), b.end());
    }
    return out;
}

std::array<std::uint64_t, 16> simulate_click_histogram(const SessionSpec &spec, unsigned threads) {
    validate_session(spec);
    std::array<std::uint64_t, 16> total{};
    if (spec.n_trials == 0) {
        return total;
    }
    const TrialSampler sampler(spec.params, spec.config);
    const std::uint64_t n_blocks = (spec.n_trials + kBlockTrials - 1) / kBlockTrials;
    std::vector<std::array<std::uint64_t, 16>> blocks(n_blocks);

    for_each_block(n_blocks, threads, [&](std::uint64_t b) {
        const std::uint64_t begin = b * kBlockTrials;
        const std::uint64_t end = std::min(spec.n_trials, begin + kBlockTrials);
        auto &hist = blocks[b];
        hist.fill(0);
        for (std::uint64_t t = begin; t < end; ++t) {
            TrialRng rng(spec.seed, t);
            ++hist[sampler(rng)];
        }
    });
    for (const auto &h : blocks) {
        for (std::size_t i = 0; i < total.size(); ++i) {
            total[i] += h[i];
        }
    }
    return total;
}

}  // namespace dlcz
