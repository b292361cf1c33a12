// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlcz/fock_oracle.hpp"

#include <array>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace dlcz {

namespace {

/// Truncated Poisson background at one detector.
struct TruncatedPoisson {
    double silent = 0.0;  // P(k == 0)
    double click = 0.0;   // P(1 <= k <= nmax)
    double mass() const { return silent + click; }
};

TruncatedPoisson truncated_poisson(double mean, int nmax) {
    TruncatedPoisson out;
    double pmf = std::exp(-mean);
    out.silent = pmf;
    for (int k = 1; k <= nmax; ++k) {
        pmf *= mean / k;
        out.click += pmf;
    }
    return out;
}

/// (click, silent) weight of a detector that received `photons` pair photons.
std::array<double, 2> detector_weights(int photons, const TruncatedPoisson &bg) {
    if (photons > 0) {
        return {bg.mass(), 0.0};
    }
    return {bg.click, bg.silent};
}

double multinomial(int n, int a, int b, double pa, double pb) {
    const int lost = n - a - b;
    const double pl = std::max(0.0, 1.0 - pa - pb);
    const double log_coef = std::lgamma(n + 1.0) - std::lgamma(a + 1.0) - std::lgamma(b + 1.0) - std::lgamma(lost + 1.0);
    return std::exp(log_coef) * std::pow(pa, a) * std::pow(pb, b) * std::pow(pl, lost);
}

}  // namespace

OracleResult brute_force_statistics(const ModelParams &params, const DetectionConfig &config, int nmax) {
    if (nmax < 1) {
        throw std::invalid_argument("brute_force_statistics: nmax must be >= 1");
    }
    params.validate();

    const bool split = config.mode == DetectionMode::Split;
    const double scale = params.chi / params.chi_ref;

    // Field-1 photon detection probability and background at D1.
    const double d1_eff = params.eta1;
    const TruncatedPoisson bg1 = truncated_poisson(params.eta1 * params.bg1_coherent * scale + params.bg1_incoherent, nmax);

    // Field-2 routing: retrieval, path loss, optional splitter, APD.
    std::array<double, 2> arm_eff{};
    std::array<TruncatedPoisson, 2> bg2{};
    if (!split) {
        const double to_apd = params.eta2_path * params.eta_apd;
        arm_eff = {params.retrieval_eff * to_apd, 0.0};
        bg2[0] = truncated_poisson(to_apd * params.bg2_coherent * scale + params.bg2_incoherent, nmax);
    } else {
        const double after_bs = params.eta2_path * params.bs_transmission;
        const double to_a = after_bs * params.bs_ratio * params.eta_apd;
        const double to_b = after_bs * (1.0 - params.bs_ratio) * params.eta_apd;
        arm_eff = {params.retrieval_eff * to_a, params.retrieval_eff * to_b};
        bg2[0] = truncated_poisson(to_a * params.bg2_coherent * scale + params.bg2_incoherent, nmax);
        bg2[1] = truncated_poisson(to_b * params.bg2_coherent * scale + params.bg2_incoherent, nmax);
    }

    // pattern bit 0: D1, bit 1: D2 or D2a, bit 2: D2b.
    std::array<double, 8> pattern{};
    double pair_weight = 1.0 - params.chi;
    for (int n = 0; n <= nmax; ++n, pair_weight *= params.chi) {
        std::array<double, 2> f1{};  // click, silent at D1
        for (int k = 0; k <= n; ++k) {
            const double wk = multinomial(n, k, 0, d1_eff, 0.0);
            const auto dw = detector_weights(k, bg1);
            f1[0] += wk * dw[0];
            f1[1] += wk * dw[1];
        }

        std::array<double, 4> f2{};  // bit 0: arm a clicks, bit 1: arm b clicks
        for (int ka = 0; ka <= n; ++ka) {
            const int kb_max = split ? n - ka : 0;
            for (int kb = 0; kb <= kb_max; ++kb) {
                const double wk = multinomial(n, ka, kb, arm_eff[0], arm_eff[1]);
                if (wk == 0.0) {
                    continue;
                }
                const auto wa = detector_weights(ka, bg2[0]);
                if (!split) {
                    f2[1] += wk * wa[0];
                    f2[0] += wk * wa[1];
                    continue;
                }
                const auto wb = detector_weights(kb, bg2[1]);
                f2[3] += wk * wa[0] * wb[0];
                f2[1] += wk * wa[0] * wb[1];
                f2[2] += wk * wa[1] * wb[0];
                f2[0] += wk * wa[1] * wb[1];
            }
        }

        for (unsigned p2 = 0; p2 < 4; ++p2) {
            pattern[1U | (p2 << 1U)] += pair_weight * f1[0] * f2[p2];
            pattern[p2 << 1U] += pair_weight * f1[1] * f2[p2];
        }
    }

    auto sum_where = [&](unsigned required) {
        double s = 0.0;
        for (unsigned p = 0; p < 8; ++p) {
            if ((p & required) == required) {
                s += pattern[p];
            }
        }
        return s;
    };

    OracleResult out;
    double mass = 0.0;
    for (double v : pattern) {
        mass += v;
    }
    out.tail_mass = std::max(0.0, 1.0 - mass);
    out.tail_warning = out.tail_mass > kTailWarningThreshold;

    Statistics &s = out.stats;
    s.mode = config.mode;
    s.p1 = sum_where(0b001);
    if (!split) {
        s.p2 = sum_where(0b010);
        s.p12 = sum_where(0b011);
    } else {
        s.p2a = sum_where(0b010);
        s.p2b = sum_where(0b100);
        s.p1_2a = sum_where(0b011);
        s.p1_2b = sum_where(0b101);
        s.p2a_2b = sum_where(0b110);
        s.p1_2a_2b = sum_where(0b111);
    }
    return out;
}

}  // namespace dlcz
