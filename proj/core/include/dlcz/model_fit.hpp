// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dlcz/dataset.hpp"
#include "dlcz/keyvalue.hpp"
#include "dlcz/model_params.hpp"

namespace dlcz {

/// Model prediction at one drive strength.
struct CurvePoint {
    double chi = 0.0;
    double p1 = 0.0;
    std::optional<double> g12;
    std::optional<double> qc;
    double p12 = 0.0;
    std::optional<double> w;
};

/// Evaluates the model along `chi_grid`; single-detector statistics give
/// p1, g12, qc and p12, split-detector statistics give w.
std::vector<CurvePoint> predict_curves(const ModelParams &params, std::span<const double> chi_grid);

/// `n` log-spaced values from chi_min to chi_max inclusive (n == 1 gives
/// chi_min). Throws ConfigError unless 0 < chi_min < chi_max < 1 (or
/// chi_min == chi_max with n == 1).
std::vector<double> log_chi_grid(double chi_min, double chi_max, std::size_t n);

/// The chi at which the model's p1 equals `p1`; nullopt if `p1` lies at or
/// below the field-1 background floor or above the reachable range.
std::optional<double> chi_for_p1(const ModelParams &params, double p1);

/// Free-parameter names recognized by the fitter. `bg1_incoherent_trap_off`
/// is the field-1 write-independent background for points flagged trap_off.
inline constexpr std::array<std::string_view, 6> kFreeParameterNames = {
    "bg1_coherent", "bg2_coherent", "bg1_incoherent", "bg2_incoherent", "retrieval_eff", "bg1_incoherent_trap_off"};

struct FreeParameter {
    std::string name;
    double lower = 0.0;
    double upper = 1.0;
    /// Search in log space; requires lower > 0.
    bool log_scale = false;
};

/// Parameters being fitted plus the fixed remainder of the model.
struct FitProblem {
    ModelParams fixed;
    std::vector<FreeParameter> free;

    /// Default free set: the four background levels (log scale) and the
    /// retrieval efficiency, plus the trap-off background when `with_trap_off`.
    static FitProblem with_default_bounds(const ModelParams &fixed, bool with_trap_off);

    /// Parses `name = lower upper [log|linear]` lines. Names outside
    /// kFreeParameterNames are rejected.
    static FitProblem from_bounds_doc(const ModelParams &fixed, const KeyValueDoc &doc);

    void validate() const;

    /// Applies free-parameter values to the fixed set. Returns the model for
    /// ordinary points and, when present, the trap-off background level.
    ModelParams apply(std::span<const double> values, std::optional<double> *trap_off_bg1 = nullptr) const;
};

/// Weighted residuals: log-space for g12 and p12, linear for qc and w, each
/// divided by the matching (transformed) standard error. A point whose p1
/// cannot be reached, or whose prediction is not finite, contributes
/// kPenaltyResidual per observable and bumps `penalized`.
struct ResidualSet {
    std::vector<double> values;
    std::size_t penalized = 0;
};

inline constexpr double kPenaltyResidual = 1e3;

ResidualSet residuals(const ModelParams &params, const Dataset &data, std::optional<double> trap_off_bg1 = std::nullopt);

/// Sum of squared residuals.
double objective(const ModelParams &params, const Dataset &data, std::optional<double> trap_off_bg1 = std::nullopt);

struct FitOptions {
    unsigned starts = 16;
    std::uint64_t seed = 0;
    double tolerance = 1e-10;
    unsigned max_iterations = 20000;
    double initial_step = 0.1;
    /// 0 = hardware concurrency.
    unsigned threads = 0;
    /// Optional starting point (natural units, one per free parameter); it
    /// replaces the first Latin-hypercube start.
    std::optional<std::vector<double>> init;
};

struct StartDiagnostics {
    double objective = 0.0;
    unsigned iterations = 0;
    bool converged = false;
};

struct FitResult {
    ModelParams params;
    std::optional<double> bg1_incoherent_trap_off;
    std::vector<std::string> names;
    std::vector<double> values;
    /// Row-major names.size() x names.size() covariance, (J^T J)^+ of the
    /// weighted residuals at the optimum.
    std::vector<double> covariance;
    double objective = 0.0;
    bool converged = false;
    std::size_t best_start = 0;
    std::size_t n_observations = 0;
    std::size_t penalized_points = 0;
    bool underdetermined = false;
    std::vector<StartDiagnostics> starts;
    std::vector<std::string> warnings;

    std::vector<double> standard_errors() const;
    double covariance_at(std::size_t i, std::size_t j) const { return covariance[i * names.size() + j]; }

    KeyValueDoc to_doc() const;
    std::string covariance_csv() const;
};

/// Multistart simplex fit. Starts are Latin-hypercube samples over the
/// bounds (seeded), run independently, and the lowest objective wins with
/// ties broken by start index, so the result does not depend on `threads`.
FitResult fit(const Dataset &data, const FitProblem &problem, const FitOptions &options = {});

}  // namespace dlcz
