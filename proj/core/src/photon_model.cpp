// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlcz/photon_model.hpp"

#include <algorithm>
#include <bit>
#include <span>
#include <cmath>
#include <cstdint>
#include <stdexcept>

namespace dlcz {

namespace {

double clamp_unit(double v) { return std::clamp(v, 0.0, 1.0); }

/// Closed-form model evaluated over a resolved channel list. Channel 0 is
/// the field-1 detector, the remaining channels share field 2.
class ClickModel {
  public:
    ClickModel(double chi, std::span<const DetectorChannel> channels) : chi_(chi), channels_(channels) {}

    /// P(channel i clicks).
    double single(std::size_t i) const {
        const auto [x, y] = pgf_args(std::size_t{1} << i);
        // 1 - G e^{-B} with log G = log(1 - chi) - log(1 - chi x y).
        const double log_g = std::log1p(-chi_) - std::log1p(-chi_ * x * y);
        return clamp_unit(-std::expm1(log_g - channels_[i].background_mean));
    }

    /// P(channel i and channel j both click), i < j.
    double pair(std::size_t i, std::size_t j) const {
        const double pi = single(i);
        const double pj = single(j);
        const double ei = channels_[i].pair_efficiency;
        const double ej = channels_[j].pair_efficiency;
        const double bg = std::exp(-channels_[i].background_mean - channels_[j].background_mean);
        double cov = 0.0;
        if (i == 0) {
            // Field 1 against one field-2 detector:
            // G(x,y) - G(x,1) G(1,y) = (1-chi) chi (1-x)(1-y) / [(1-chi x y)(1-chi x)(1-chi y)].
            const double x = 1.0 - ei;
            const double y = 1.0 - ej;
            cov = (1.0 - chi_) * chi_ * ei * ej / ((1.0 - chi_ * x * y) * (1.0 - chi_ * x) * (1.0 - chi_ * y));
        } else {
            // Two field-2 detectors sharing one photon number:
            // G(1,1-ea-eb) - G(1,1-ea) G(1,1-eb) = (1-chi) chi^2 ea eb / [...].
            cov = (1.0 - chi_) * chi_ * chi_ * ei * ej /
                  ((1.0 - chi_ * (1.0 - ei - ej)) * (1.0 - chi_ * (1.0 - ei)) * (1.0 - chi_ * (1.0 - ej)));
        }
        return clamp_unit(pi * pj + bg * cov);
    }

    /// P(field 1 and both field-2 channels click). Summed over the pair
    /// number n, where every term is non-negative, so the small-chi regime
    /// keeps full relative precision. The tail after n is at most chi^(n+1).
    double triple() const {
        const auto &c1 = channels_[0];
        const auto &ca = channels_[1];
        const auto &cb = channels_[2];
        const double u = std::max(1.0 - ca.pair_efficiency - cb.pair_efficiency, 0.0);
        const double v = (1.0 - ca.pair_efficiency) * (1.0 - cb.pair_efficiency);
        const double both_bg = std::exp(-ca.background_mean - cb.background_mean);
        double weight = 1.0 - chi_;  // (1 - chi) chi^n
        double tail = chi_;          // chi^(n+1)
        double sum = 0.0;
        for (std::uint64_t n = 0; n < kMaxSeriesTerms; ++n) {
            const double nd = static_cast<double>(n);
            // v^n - u^n >= 0: the two arms compete for the same photons.
            double shared = 0.0;
            if (n > 0 && v > 0.0) {
                shared = u > 0.0 ? -std::pow(v, nd) * std::expm1(nd * std::log1p(-ca.pair_efficiency *
                                                                                   cb.pair_efficiency / v))
                                 : std::pow(v, nd);
            }
            const double arms =
                std::max(click_given(n, ca) * click_given(n, cb) - both_bg * shared, 0.0);
            sum += weight * click_given(n, c1) * arms;
            if (tail <= 1e-17 * sum || tail < 1e-300) {
                return clamp_unit(sum);
            }
            weight *= chi_;
            tail *= chi_;
        }
        return all_click(0b111);
    }

    /// P(every channel in `mask` clicks) by inclusion-exclusion over the
    /// all-silent probabilities, in extended precision.
    double all_click(unsigned mask) const {
        long double sum = 0.0L;
        for (unsigned sub = mask;; sub = (sub - 1) & mask) {
            const int parity = std::popcount(sub) & 1;
            const long double q = silent(sub);
            sum += parity ? -q : q;
            if (sub == 0) {
                break;
            }
        }
        return clamp_unit(static_cast<double>(sum));
    }

  private:
    static constexpr std::uint64_t kMaxSeriesTerms = 200000;

    /// P(channel clicks | n pair photons reach its thinning stage).
    static double click_given(std::uint64_t n, const DetectorChannel &c) {
        if (n == 0) {
            return -std::expm1(-c.background_mean);
        }
        if (c.pair_efficiency >= 1.0) {
            return 1.0;
        }
        return -std::expm1(static_cast<double>(n) * std::log1p(-c.pair_efficiency) - c.background_mean);
    }

    std::pair<double, double> pgf_args(unsigned mask) const {
        double x = 1.0;
        double y = 1.0;
        for (std::size_t k = 0; k < channels_.size(); ++k) {
            if ((mask >> k) & 1U) {
                if (k == 0) {
                    x -= channels_[k].pair_efficiency;
                } else {
                    y -= channels_[k].pair_efficiency;
                }
            }
        }
        return {std::max(x, 0.0), std::max(y, 0.0)};
    }

    /// P(all channels in `mask` silent).
    long double silent(unsigned mask) const {
        const auto [x, y] = pgf_args(mask);
        long double bg = 0.0L;
        for (std::size_t k = 0; k < channels_.size(); ++k) {
            if ((mask >> k) & 1U) {
                bg += channels_[k].background_mean;
            }
        }
        const long double c = chi_;
        return (1.0L - c) / (1.0L - c * x * y) * std::exp(-bg);
    }

    double chi_;
    std::span<const DetectorChannel> channels_;
};

}  // namespace

double tmss_pgf(double chi, double x, double y) {
    if (!(chi >= 0.0 && chi < 1.0)) {
        throw std::domain_error("tmss_pgf: chi must lie in [0, 1)");
    }
    if (!(x >= 0.0 && x <= 1.0) || !(y >= 0.0 && y <= 1.0)) {
        throw std::domain_error("tmss_pgf: arguments must lie in [0, 1]");
    }
    return (1.0 - chi) / (1.0 - chi * x * y);
}

std::vector<std::pair<std::string_view, double>> Statistics::fields() const {
    if (mode == DetectionMode::Single) {
        return {{"p1", p1}, {"p2", p2}, {"p12", p12}};
    }
    return {{"p1", p1},       {"p2a", p2a},       {"p2b", p2b},         {"p1_2a", p1_2a},
            {"p1_2b", p1_2b}, {"p2a_2b", p2a_2b}, {"p1_2a_2b", p1_2a_2b}};
}

Statistics click_statistics(const ModelParams &params, const DetectionConfig &config) {
    params.validate();
    const auto channels = config.resolve(params);
    const ClickModel model(params.chi, channels);

    Statistics s;
    s.mode = config.mode;
    s.p1 = model.single(0);
    if (config.mode == DetectionMode::Single) {
        s.p2 = model.single(1);
        s.p12 = std::min({model.pair(0, 1), s.p1, s.p2});
    } else {
        s.p2a = model.single(1);
        s.p2b = model.single(2);
        s.p1_2a = std::min({model.pair(0, 1), s.p1, s.p2a});
        s.p1_2b = std::min({model.pair(0, 2), s.p1, s.p2b});
        s.p2a_2b = std::min({model.pair(1, 2), s.p2a, s.p2b});
        s.p1_2a_2b = std::min({model.triple(), s.p1_2a, s.p1_2b, s.p2a_2b});
    }
    return s;
}

Metrics derived_metrics(const Statistics &stats, const ModelParams &params) {
    Metrics m;
    if (stats.mode == DetectionMode::Single) {
        m.p12 = stats.p12;
        if (stats.p1 > 0.0 && stats.p2 > 0.0) {
            m.g12 = stats.p12 / (stats.p1 * stats.p2);
        }
        if (stats.p1 > 0.0) {
            m.pc = stats.p12 / stats.p1;
            m.naive_ratio = stats.p2 / stats.p1;
            if (params.eta2() > 0.0) {
                m.qc = *m.pc / params.eta2();
            }
        }
    } else if (stats.p1_2a > 0.0 && stats.p1_2b > 0.0) {
        m.w = stats.p1 * stats.p1_2a_2b / (stats.p1_2a * stats.p1_2b);
    }
    return m;
}

}  // namespace dlcz
