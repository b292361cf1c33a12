// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlcz/nelder_mead.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <stdexcept>

namespace dlcz {

NelderMeadResult nelder_mead(const std::function<double(std::span<const double>)> &f, std::vector<double> x0,
                             const NelderMeadOptions &options) {
    const std::size_t d = x0.size();
    if (d == 0) {
        throw std::invalid_argument("nelder_mead: empty parameter vector");
    }
    auto clamp = [&](std::vector<double> &x) {
        if (options.unit_box) {
            for (auto &v : x) v = std::clamp(v, 0.0, 1.0);
        }
    };
    auto eval = [&](const std::vector<double> &x) {
        const double v = f(x);
        return std::isfinite(v) ? v : std::numeric_limits<double>::max();
    };

    clamp(x0);
    std::vector<std::vector<double>> pts(d + 1, x0);
    for (std::size_t i = 0; i < d; ++i) {
        auto &p = pts[i + 1];
        // Step away from the nearer wall so the simplex is not degenerate.
        p[i] += (options.unit_box && p[i] + options.initial_step > 1.0) ? -options.initial_step : options.initial_step;
        clamp(p);
    }
    std::vector<double> vals(d + 1);
    for (std::size_t i = 0; i <= d; ++i) vals[i] = eval(pts[i]);

    std::vector<std::size_t> order(d + 1);
    auto mean_value = [&] { return std::accumulate(vals.begin(), vals.end(), 0.0) / static_cast<double>(d + 1); };

    NelderMeadResult out;
    double cycle_mean = mean_value();
    std::vector<double> centroid(d), trial(d), trial2(d);

    for (unsigned it = 1; it <= options.max_iterations; ++it) {
        std::iota(order.begin(), order.end(), 0);
        std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) { return vals[a] < vals[b]; });
        const std::size_t best = order.front();
        const std::size_t worst = order.back();
        const std::size_t second = order[d - 1];

        std::fill(centroid.begin(), centroid.end(), 0.0);
        for (std::size_t i = 0; i <= d; ++i) {
            if (i == worst) continue;
            for (std::size_t k = 0; k < d; ++k) centroid[k] += pts[i][k] / static_cast<double>(d);
        }
        auto along = [&](double t, std::vector<double> &dst) {
            for (std::size_t k = 0; k < d; ++k) dst[k] = centroid[k] + t * (pts[worst][k] - centroid[k]);
            clamp(dst);
            return eval(dst);
        };

        const double fr = along(-1.0, trial);
        if (fr < vals[best]) {
            const double fe = along(-2.0, trial2);
            if (fe < fr) {
                pts[worst] = trial2;
                vals[worst] = fe;
            } else {
                pts[worst] = trial;
                vals[worst] = fr;
            }
        } else if (fr < vals[second]) {
            pts[worst] = trial;
            vals[worst] = fr;
        } else {
            const bool outside = fr < vals[worst];
            const double fc = outside ? along(-0.5, trial2) : along(0.5, trial2);
            if (fc < (outside ? fr : vals[worst])) {
                pts[worst] = trial2;
                vals[worst] = fc;
            } else {
                for (std::size_t i = 0; i <= d; ++i) {
                    if (i == best) continue;
                    for (std::size_t k = 0; k < d; ++k) pts[i][k] = pts[best][k] + 0.5 * (pts[i][k] - pts[best][k]);
                    vals[i] = eval(pts[i]);
                }
            }
        }

        out.iterations = it;
        if (it % (d + 1) == 0) {
            const double m = mean_value();
            if (cycle_mean - m < options.tolerance) {
                out.converged = true;
                break;
            }
            cycle_mean = m;
        }
    }

    const auto best = static_cast<std::size_t>(std::min_element(vals.begin(), vals.end()) - vals.begin());
    out.x = pts[best];
    out.value = vals[best];
    return out;
}

}  // namespace dlcz
