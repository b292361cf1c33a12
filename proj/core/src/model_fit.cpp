// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlcz/model_fit.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <numeric>
#include <random>
#include <sstream>
#include <thread>

#include <Eigen/Dense>
#include <boost/math/tools/toms748_solve.hpp>

#include "dlcz/errors.hpp"
#include "dlcz/nelder_mead.hpp"
#include "dlcz/photon_model.hpp"

namespace dlcz {

namespace {

constexpr double kChiCeiling = 1.0 - 1e-9;

/// Field-1 click probability as a function of chi, with every other
/// parameter held at `p`.
double p1_at(const ModelParams &p, double chi) {
    const double x = 1.0 - p.eta1;
    const double bg = p.eta1 * p.bg1_coherent * chi / p.chi_ref + p.bg1_incoherent;
    return -std::expm1(std::log1p(-chi) - std::log1p(-chi * x) - bg);
}

double to_natural(const FreeParameter &fp, double u) {
    if (fp.log_scale) {
        return std::exp(std::log(fp.lower) + u * (std::log(fp.upper) - std::log(fp.lower)));
    }
    return fp.lower + u * (fp.upper - fp.lower);
}

double to_unit(const FreeParameter &fp, double v) {
    if (fp.log_scale) {
        return (std::log(v) - std::log(fp.lower)) / (std::log(fp.upper) - std::log(fp.lower));
    }
    return (v - fp.lower) / (fp.upper - fp.lower);
}

double sum_sorted_squares(std::vector<double> r) {
    for (auto &v : r) v *= v;
    std::sort(r.begin(), r.end());
    return std::accumulate(r.begin(), r.end(), 0.0);
}

template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn &&fn) {
    if (threads == 0) threads = std::max(1U, std::thread::hardware_concurrency());
    threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
    std::atomic<std::size_t> next{0};
    auto worker = [&] {
        for (std::size_t i = next++; i < n; i = next++) fn(i);
    };
    std::vector<std::jthread> pool;
    for (unsigned t = 1; t < threads; ++t) pool.emplace_back(worker);
    worker();
}

}  // namespace

std::vector<double> log_chi_grid(double chi_min, double chi_max, std::size_t n) {
    if (n == 0) {
        throw ConfigError("points", "must be >= 1");
    }
    if (!(chi_min > 0.0 && chi_min < 1.0)) {
        throw ConfigError("chi-min", "must lie in (0, 1)");
    }
    if (!(chi_max < 1.0) || chi_max < chi_min || (chi_max == chi_min && n > 1)) {
        throw ConfigError("chi-max", "must satisfy chi-min < chi-max < 1");
    }
    std::vector<double> grid(n);
    if (n == 1) {
        grid[0] = chi_min;
        return grid;
    }
    const double a = std::log(chi_min);
    const double b = std::log(chi_max);
    for (std::size_t i = 0; i < n; ++i) {
        grid[i] = std::exp(a + (b - a) * static_cast<double>(i) / static_cast<double>(n - 1));
    }
    grid.front() = chi_min;
    grid.back() = chi_max;
    return grid;
}

std::vector<CurvePoint> predict_curves(const ModelParams &params, std::span<const double> chi_grid) {
    std::vector<CurvePoint> out;
    out.reserve(chi_grid.size());
    ModelParams p = params;
    for (double chi : chi_grid) {
        p.chi = chi;
        const auto single = click_statistics(p, {DetectionMode::Single});
        const auto split = click_statistics(p, {DetectionMode::Split});
        const auto ms = derived_metrics(single, p);
        const auto mw = derived_metrics(split, p);
        out.push_back({chi, single.p1, ms.g12, ms.qc, single.p12, mw.w});
    }
    return out;
}

std::optional<double> chi_for_p1(const ModelParams &params, double p1) {
    const double lo = p1_at(params, 0.0) - p1;
    const double hi = p1_at(params, kChiCeiling) - p1;
    if (!(lo < 0.0) || !(hi > 0.0)) {
        return std::nullopt;
    }
    boost::uintmax_t max_iter = 200;
    auto f = [&](double chi) { return p1_at(params, chi) - p1; };
    const auto [a, b] =
        boost::math::tools::toms748_solve(f, 0.0, kChiCeiling, lo, hi, boost::math::tools::eps_tolerance<double>(48), max_iter);
    return 0.5 * (a + b);
}

FitProblem FitProblem::with_default_bounds(const ModelParams &fixed, bool with_trap_off) {
    FitProblem p;
    p.fixed = fixed;
    p.free = {
        {"bg1_coherent", 1e-7, 1e-2, true},   {"bg2_coherent", 1e-7, 1e-1, true},
        {"bg1_incoherent", 1e-9, 1e-3, true}, {"bg2_incoherent", 1e-9, 1e-2, true},
        {"retrieval_eff", 0.01, 1.0, false},
    };
    if (with_trap_off) {
        p.free.push_back({"bg1_incoherent_trap_off", 1e-9, 1e-3, true});
    }
    return p;
}

FitProblem FitProblem::from_bounds_doc(const ModelParams &fixed, const KeyValueDoc &doc) {
    FitProblem p;
    p.fixed = fixed;
    for (const auto &[key, raw] : doc.entries()) {
        if (std::find(kFreeParameterNames.begin(), kFreeParameterNames.end(), key) == kFreeParameterNames.end()) {
            throw ConfigError(key, "not a fittable parameter");
        }
        std::istringstream in(raw);
        std::string lo_s, hi_s, scale;
        in >> lo_s >> hi_s >> scale;
        auto lo = parse_double(lo_s);
        auto hi = parse_double(hi_s);
        if (!lo || !hi) {
            throw ConfigError(key, "expected 'lower upper [log|linear]'");
        }
        FreeParameter fp{key, *lo, *hi, false};
        if (scale.empty()) {
            fp.log_scale = key != "retrieval_eff" && *lo > 0.0;
        } else if (scale == "log") {
            fp.log_scale = true;
        } else if (scale != "linear") {
            throw ConfigError(key, "scale must be 'log' or 'linear'");
        }
        p.free.push_back(fp);
    }
    p.validate();
    return p;
}

void FitProblem::validate() const {
    fixed.validate();
    if (free.empty()) {
        throw ConfigError("bounds", "no free parameters");
    }
    for (std::size_t i = 0; i < free.size(); ++i) {
        const auto &fp = free[i];
        for (std::size_t j = 0; j < i; ++j) {
            if (free[j].name == fp.name) throw ConfigError(fp.name, "listed twice");
        }
        if (!(fp.lower < fp.upper) || !std::isfinite(fp.lower) || !std::isfinite(fp.upper)) {
            throw ConfigError(fp.name, "bounds must satisfy lower < upper");
        }
        if (fp.lower < 0.0 || (fp.log_scale && fp.lower <= 0.0)) {
            throw ConfigError(fp.name, "lower bound must be >= 0 (> 0 on log scale)");
        }
        if (fp.name == "retrieval_eff" && fp.upper > 1.0) {
            throw ConfigError(fp.name, "upper bound must be <= 1");
        }
    }
}

ModelParams FitProblem::apply(std::span<const double> values, std::optional<double> *trap_off_bg1) const {
    ModelParams p = fixed;
    if (trap_off_bg1 != nullptr) trap_off_bg1->reset();
    for (std::size_t i = 0; i < free.size(); ++i) {
        if (free[i].name == "bg1_incoherent_trap_off") {
            if (trap_off_bg1 != nullptr) *trap_off_bg1 = values[i];
        } else {
            *param_field(p, free[i].name) = values[i];
        }
    }
    return p;
}

ResidualSet residuals(const ModelParams &params, const Dataset &data, std::optional<double> trap_off_bg1) {
    ResidualSet out;
    for (const auto &pt : data.points) {
        ModelParams p = params;
        if (trap_off_bg1 && pt.trap_off()) {
            p.bg1_incoherent = *trap_off_bg1;
        }
        const std::size_t n_obs = pt.g12.has_value() + pt.qc.has_value() + pt.p12.has_value() + pt.w.has_value();
        auto penalize = [&] {
            out.values.insert(out.values.end(), n_obs, kPenaltyResidual);
            ++out.penalized;
        };

        const auto chi = chi_for_p1(p, pt.p1);
        if (!chi) {
            penalize();
            continue;
        }
        p.chi = *chi;
        const auto ms = derived_metrics(click_statistics(p, {DetectionMode::Single}), p);
        std::optional<double> w;
        if (pt.w) {
            w = derived_metrics(click_statistics(p, {DetectionMode::Split}), p).w;
        }

        std::vector<double> r;
        bool ok = true;
        auto log_term = [&](const std::optional<Observation> &o, std::optional<double> pred) {
            if (!o) return;
            if (!pred || !(*pred > 0.0) || !std::isfinite(*pred)) {
                ok = false;
                return;
            }
            if (o->value > 0.0) {
                r.push_back((std::log(*pred) - std::log(o->value)) / (o->se / o->value));
            } else {
                r.push_back((*pred - o->value) / o->se);
            }
        };
        auto lin_term = [&](const std::optional<Observation> &o, std::optional<double> pred) {
            if (!o) return;
            if (!pred || !std::isfinite(*pred)) {
                ok = false;
                return;
            }
            r.push_back((*pred - o->value) / o->se);
        };
        log_term(pt.g12, ms.g12);
        lin_term(pt.qc, ms.qc);
        log_term(pt.p12, ms.p12);
        lin_term(pt.w, w);
        if (!ok) {
            penalize();
            continue;
        }
        out.values.insert(out.values.end(), r.begin(), r.end());
    }
    return out;
}

double objective(const ModelParams &params, const Dataset &data, std::optional<double> trap_off_bg1) {
    if (data.points.empty()) {
        throw std::invalid_argument("objective: empty dataset");
    }
    // Squares are summed in sorted order so the value is exactly invariant
    // under reordering of the points.
    return sum_sorted_squares(residuals(params, data, trap_off_bg1).values);
}

std::vector<double> FitResult::standard_errors() const {
    std::vector<double> se(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
        se[i] = std::sqrt(std::max(0.0, covariance_at(i, i)));
    }
    return se;
}

KeyValueDoc FitResult::to_doc() const {
    KeyValueDoc doc;
    doc.set("objective", objective);
    doc.set("converged", std::string(converged ? "true" : "false"));
    doc.set("best_start", std::uint64_t{best_start});
    doc.set("n_observations", std::uint64_t{n_observations});
    doc.set("n_free", std::uint64_t{names.size()});
    doc.set("underdetermined", std::string(underdetermined ? "true" : "false"));
    doc.set("penalized_points", std::uint64_t{penalized_points});
    params_to_doc(params, doc);
    if (bg1_incoherent_trap_off) {
        doc.set("bg1_incoherent_trap_off", *bg1_incoherent_trap_off);
    }
    const auto se = standard_errors();
    for (std::size_t i = 0; i < names.size(); ++i) {
        doc.set(names[i] + "_se", se[i]);
    }
    doc.set("warnings", std::to_string(warnings.size()));
    for (std::size_t i = 0; i < warnings.size(); ++i) {
        doc.set("warning_" + std::to_string(i), warnings[i]);
    }
    return doc;
}

std::string FitResult::covariance_csv() const {
    std::string s = "parameter";
    for (const auto &n : names) s += ',' + n;
    s += '\n';
    for (std::size_t i = 0; i < names.size(); ++i) {
        s += names[i];
        for (std::size_t j = 0; j < names.size(); ++j) s += ',' + format_double(covariance_at(i, j));
        s += '\n';
    }
    return s;
}

FitResult fit(const Dataset &data, const FitProblem &problem, const FitOptions &options) {
    problem.validate();
    if (data.points.empty()) {
        throw std::invalid_argument("fit: empty dataset");
    }
    const std::size_t d = problem.free.size();
    if (options.init && options.init->size() != d) {
        throw std::invalid_argument("fit: init has the wrong number of values");
    }
    const unsigned n_starts = std::max(1U, options.starts);

    auto natural = [&](std::span<const double> u) {
        std::vector<double> v(d);
        for (std::size_t i = 0; i < d; ++i) v[i] = to_natural(problem.free[i], std::clamp(u[i], 0.0, 1.0));
        return v;
    };
    auto eval_natural = [&](std::span<const double> v) {
        std::optional<double> trap;
        const ModelParams p = problem.apply(v, &trap);
        return objective(p, data, trap);
    };

    // Latin hypercube over the unit box.
    std::mt19937_64 rng(options.seed);
    std::uniform_real_distribution<double> unif(0.0, 1.0);
    std::vector<std::vector<double>> starts(n_starts, std::vector<double>(d));
    for (std::size_t k = 0; k < d; ++k) {
        std::vector<unsigned> strata(n_starts);
        std::iota(strata.begin(), strata.end(), 0U);
        for (unsigned i = n_starts - 1; i > 0; --i) {
            std::uniform_int_distribution<unsigned> pick(0, i);
            std::swap(strata[i], strata[pick(rng)]);
        }
        for (unsigned s = 0; s < n_starts; ++s) {
            starts[s][k] = (strata[s] + unif(rng)) / n_starts;
        }
    }
    if (options.init) {
        for (std::size_t k = 0; k < d; ++k) {
            starts[0][k] = std::clamp(to_unit(problem.free[k], (*options.init)[k]), 0.0, 1.0);
        }
    }

    NelderMeadOptions nm;
    nm.initial_step = options.initial_step;
    nm.tolerance = options.tolerance;
    nm.max_iterations = options.max_iterations;
    std::vector<NelderMeadResult> runs(n_starts);
    parallel_for(n_starts, options.threads, [&](std::size_t s) {
        runs[s] = nelder_mead([&](std::span<const double> u) { return eval_natural(natural(u)); }, starts[s], nm);
    });

    FitResult out;
    for (const auto &r : runs) {
        out.starts.push_back({r.value, r.iterations, r.converged});
    }
    for (std::size_t s = 1; s < runs.size(); ++s) {
        if (runs[s].value < runs[out.best_start].value) out.best_start = s;
    }
    const auto &best = runs[out.best_start];
    out.values = natural(best.x);
    out.params = problem.apply(out.values, &out.bg1_incoherent_trap_off);
    for (const auto &fp : problem.free) out.names.push_back(fp.name);
    out.objective = best.value;
    out.converged = best.converged;
    out.n_observations = data.observation_count();

    std::optional<double> trap;
    const ModelParams at_best = problem.apply(out.values, &trap);
    const auto r0 = residuals(at_best, data, trap);
    out.penalized_points = r0.penalized;

    // Gauss-Newton covariance from a finite-difference Jacobian.
    const auto m = static_cast<Eigen::Index>(r0.values.size());
    Eigen::MatrixXd jac = Eigen::MatrixXd::Zero(m, static_cast<Eigen::Index>(d));
    for (std::size_t i = 0; i < d; ++i) {
        const auto &fp = problem.free[i];
        const double v = out.values[i];
        const double h = fp.log_scale ? 1e-4 * v : 1e-4 * (fp.upper - fp.lower);
        const bool up_ok = v + h <= fp.upper;
        const bool down_ok = v - h >= fp.lower;
        auto shifted = [&](double dv) {
            auto vals = out.values;
            vals[i] += dv;
            std::optional<double> t;
            const ModelParams p = problem.apply(vals, &t);
            return residuals(p, data, t).values;
        };
        std::vector<double> plus = up_ok ? shifted(h) : r0.values;
        std::vector<double> minus = down_ok ? shifted(-h) : r0.values;
        const double span = (up_ok ? h : 0.0) + (down_ok ? h : 0.0);
        for (Eigen::Index k = 0; k < m; ++k) {
            jac(k, static_cast<Eigen::Index>(i)) =
                (plus[static_cast<std::size_t>(k)] - minus[static_cast<std::size_t>(k)]) / span;
        }
    }
    const Eigen::MatrixXd info = jac.transpose() * jac;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> eig(info);
    const Eigen::VectorXd lambda = eig.eigenvalues();
    const double cutoff = std::max(lambda.cwiseAbs().maxCoeff(), 1e-300) * 1e-12;
    Eigen::VectorXd inv = Eigen::VectorXd::Zero(lambda.size());
    std::size_t rank_deficit = 0;
    for (Eigen::Index k = 0; k < lambda.size(); ++k) {
        if (lambda(k) > cutoff) {
            inv(k) = 1.0 / lambda(k);
        } else {
            ++rank_deficit;
        }
    }
    Eigen::MatrixXd cov = eig.eigenvectors() * inv.asDiagonal() * eig.eigenvectors().transpose();
    cov = (0.5 * (cov + cov.transpose())).eval();
    out.covariance.resize(d * d);
    for (std::size_t i = 0; i < d; ++i) {
        for (std::size_t j = 0; j < d; ++j) {
            out.covariance[i * d + j] = cov(static_cast<Eigen::Index>(i), static_cast<Eigen::Index>(j));
        }
    }

    if (out.n_observations < d) {
        out.underdetermined = true;
        out.warnings.push_back("underdetermined: " + std::to_string(out.n_observations) + " observations for " +
                               std::to_string(d) + " free parameters");
    }
    if (rank_deficit > 0) {
        out.warnings.push_back("information matrix is rank deficient (" + std::to_string(rank_deficit) +
                               " direction(s) unconstrained)");
    }
    if (!out.converged) {
        out.warnings.push_back("best start did not converge within the iteration limit");
    }
    if (out.penalized_points > 0) {
        out.warnings.push_back(std::to_string(out.penalized_points) + " point(s) have no finite model prediction");
    }
    return out;
}

}  // namespace dlcz
