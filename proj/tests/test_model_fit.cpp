// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "dlcz/errors.hpp"
#include "dlcz/fock_oracle.hpp"
#include "dlcz/model_fit.hpp"
#include "dlcz/nelder_mead.hpp"
#include "synthetic_data.hpp"
#include "test_support.hpp"

namespace dlcz {
namespace {

constexpr std::uint64_t kTrialsPerPoint = 44000ULL * 300ULL;

const std::vector<double> &fit_chis() {
    static const std::vector<double> chis = log_chi_grid(2e-4, 5e-2, 12);
    return chis;
}

const std::vector<std::size_t> kWithW = {7, 8, 9, 10, 11};

/// Dataset whose values equal the model prediction exactly.
Dataset exact_dataset(const ModelParams &p, std::span<const double> chis, bool with_w) {
    Dataset d;
    for (const auto &c : predict_curves(p, chis)) {
        DataPoint pt;
        pt.p1 = c.p1;
        pt.p1_se = 0.01 * c.p1;
        pt.g12 = Observation{*c.g12, 0.05 * *c.g12};
        pt.qc = Observation{*c.qc, 0.02};
        pt.p12 = Observation{c.p12, 0.05 * c.p12};
        if (with_w) pt.w = Observation{*c.w, 0.01};
        d.points.push_back(pt);
    }
    return d;
}

TEST(PredictCurves, NoBackgroundPlateauAtRetrieval) {
    ModelParams p;
    p.retrieval_eff = 0.5;
    const auto grid = log_chi_grid(1e-6, 1e-3, 10);
    const auto curves = predict_curves(p, grid);
    for (const auto &c : curves) {
        ASSERT_TRUE(c.qc);
        EXPECT_NEAR(*c.qc, 0.5, 0.5 * 2e-3) << c.chi;
        ModelParams q = p;
        q.chi = c.chi;
        const auto oracle = brute_force_statistics(q, DetectionConfig{}).stats;
        EXPECT_NEAR(*c.qc, oracle.p12 / oracle.p1 / p.eta2(), 1e-6);
    }
}

TEST(PredictCurves, NoiseFloorLowersQc) {
    ModelParams p;
    p.bg1_incoherent = 1e-5;
    const auto curves = predict_curves(p, log_chi_grid(1e-5, 1e-2, 10));
    for (std::size_t i = 1; i < curves.size(); ++i) {
        EXPECT_GT(*curves[i].qc, *curves[i - 1].qc);
    }
    EXPECT_LT(*curves.front().qc, 0.5 * 0.7);
}

TEST(PredictCurves, MultiExcitationRaisesQc) {
    ModelParams p;
    const auto curves = predict_curves(p, log_chi_grid(0.1, 0.5, 5));
    for (std::size_t i = 0; i < curves.size(); ++i) {
        EXPECT_GT(*curves[i].qc, 0.5);
        if (i > 0) {
            EXPECT_GT(*curves[i].qc, *curves[i - 1].qc);
            EXPECT_GT(curves[i].p1, curves[i - 1].p1);
        }
    }
}

TEST(LogChiGrid, ShapeAndErrors) {
    const auto g = log_chi_grid(1e-4, 1e-1, 4);
    ASSERT_EQ(g.size(), 4u);
    EXPECT_DOUBLE_EQ(g.front(), 1e-4);
    EXPECT_NEAR(g[1], 1e-3, 1e-15);
    EXPECT_DOUBLE_EQ(g.back(), 1e-1);
    EXPECT_EQ(log_chi_grid(1e-3, 1e-2, 1).size(), 1u);
    EXPECT_THROW(log_chi_grid(0.0, 0.1, 3), ConfigError);
    EXPECT_THROW(log_chi_grid(0.2, 0.1, 3), ConfigError);
    EXPECT_THROW(log_chi_grid(0.1, 1.0, 3), ConfigError);
    EXPECT_THROW(log_chi_grid(0.01, 0.1, 0), ConfigError);
}

TEST(ChiForP1, InvertsSingles) {
    const ModelParams p = test::paper_regime();
    for (double chi : {1e-5, 1e-3, 0.1}) {
        ModelParams q = p;
        q.chi = chi;
        const double p1 = click_statistics(q, DetectionConfig{}).p1;
        const auto back = chi_for_p1(p, p1);
        ASSERT_TRUE(back);
        EXPECT_NEAR(*back, chi, 1e-9 * chi);
    }
    // Below the background floor no chi reproduces p1.
    EXPECT_FALSE(chi_for_p1(p, 1e-9));
}

TEST(Objective, ZeroOnExactData) {
    const ModelParams p = test::paper_regime();
    const auto d = exact_dataset(p, fit_chis(), true);
    EXPECT_LT(objective(p, d), 1e-12);
}

TEST(Objective, PerturbationIncreases) {
    const ModelParams p = test::paper_regime();
    const auto d = exact_dataset(p, fit_chis(), true);
    const double base = objective(p, d);
    for (auto key : {"bg1_coherent", "bg2_coherent", "bg1_incoherent", "bg2_incoherent", "retrieval_eff"}) {
        for (double f : {0.97, 1.03}) {
            ModelParams q = p;
            *param_field(q, key) *= f;
            EXPECT_GT(objective(q, d), base) << key << " x" << f;
        }
    }
}

TEST(Objective, MissingWIgnoresWTerms) {
    const ModelParams p = test::paper_regime();
    ModelParams off = p;
    off.bg2_incoherent *= 1.5;
    const auto with_w = exact_dataset(p, fit_chis(), true);
    const auto without_w = exact_dataset(p, fit_chis(), false);
    EXPECT_EQ(residuals(off, with_w).values.size(), residuals(off, without_w).values.size() + fit_chis().size());
    EXPECT_LT(objective(off, without_w), objective(off, with_w));
}

TEST(Objective, InvariantUnderReordering) {
    const ModelParams p = test::paper_regime();
    auto d = test::synthetic_dataset(p, fit_chis(), kTrialsPerPoint, 3, false, kWithW);
    ModelParams off = p;
    off.retrieval_eff = 0.4;
    const double ref = objective(off, d);
    std::mt19937_64 rng(4);
    for (int i = 0; i < 10; ++i) {
        std::shuffle(d.points.begin(), d.points.end(), rng);
        EXPECT_EQ(objective(off, d), ref);
    }
}

TEST(NelderMead, MinimizesShiftedQuadratic) {
    auto f = [](std::span<const double> x) { return std::pow(x[0] - 0.3, 2) + 10 * std::pow(x[1] - 0.7, 2); };
    const auto r = nelder_mead(f, {0.9, 0.1});
    EXPECT_TRUE(r.converged);
    EXPECT_NEAR(r.x[0], 0.3, 1e-4);
    EXPECT_NEAR(r.x[1], 0.7, 1e-4);
}

TEST(NelderMead, StaysInUnitBox) {
    auto f = [](std::span<const double> x) { return -x[0] - x[1]; };
    const auto r = nelder_mead(f, {0.5, 0.5});
    for (double v : r.x) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_NEAR(r.value, -2.0, 1e-6);
}

TEST(FitProblem, BoundsDocument) {
    const auto doc = KeyValueDoc::parse("retrieval_eff = 0.1 0.9\nbg1_incoherent = 1e-8 1e-4 log\n");
    const auto fp = FitProblem::from_bounds_doc(ModelParams{}, doc);
    ASSERT_EQ(fp.free.size(), 2u);
    EXPECT_THROW(FitProblem::from_bounds_doc(ModelParams{}, KeyValueDoc::parse("eta1 = 0 1\n")), ConfigError);
    EXPECT_THROW(FitProblem::from_bounds_doc(ModelParams{}, KeyValueDoc::parse("retrieval_eff = 0.9 0.1\n")),
                 ConfigError);
    EXPECT_THROW(FitProblem::from_bounds_doc(ModelParams{}, KeyValueDoc::parse("bg1_coherent = 0 1 log\n")),
                 ConfigError);
}

class SyntheticFit : public ::testing::Test {
  protected:
    static void SetUpTestSuite() {
        truth_ = new ModelParams(test::paper_regime());
        data_ = new Dataset(test::synthetic_dataset(*truth_, fit_chis(), kTrialsPerPoint, 42, false, kWithW));
        problem_ = new FitProblem(FitProblem::with_default_bounds(*truth_, false));
        FitOptions o;
        o.seed = 7;
        result_ = new FitResult(fit(*data_, *problem_, o));
    }
    static void TearDownTestSuite() {
        delete truth_;
        delete data_;
        delete problem_;
        delete result_;
    }
    static ModelParams *truth_;
    static Dataset *data_;
    static FitProblem *problem_;
    static FitResult *result_;
};

ModelParams *SyntheticFit::truth_ = nullptr;
Dataset *SyntheticFit::data_ = nullptr;
FitProblem *SyntheticFit::problem_ = nullptr;
FitResult *SyntheticFit::result_ = nullptr;

TEST_F(SyntheticFit, RecoversEachParameter) {
    const auto se = result_->standard_errors();
    ASSERT_EQ(result_->names.size(), 5u);
    for (std::size_t i = 0; i < result_->names.size(); ++i) {
        const double t = param_value(*truth_, result_->names[i]);
        const double v = result_->values[i];
        const bool close = std::abs(v - t) <= 0.1 * t || std::abs(v - t) <= 3 * se[i];
        EXPECT_TRUE(close) << result_->names[i] << " fit " << v << " truth " << t << " se " << se[i];
    }
    EXPECT_NEAR(result_->params.retrieval_eff, 0.51, std::max(0.05, 3 * se[4]));
}

TEST_F(SyntheticFit, TruthIsNotBetterThanFit) {
    EXPECT_LE(result_->objective, objective(*truth_, *data_) + 1e-6);
}

TEST_F(SyntheticFit, CurvesPassThroughMostPoints) {
    std::size_t total = 0, within = 0;
    for (const auto &pt : data_->points) {
        const auto chi = chi_for_p1(result_->params, pt.p1);
        ASSERT_TRUE(chi);
        const auto c = predict_curves(result_->params, std::span(&*chi, 1)).front();
        auto check = [&](const std::optional<Observation> &o, const std::optional<double> &pred) {
            if (!o || !pred) return;
            ++total;
            if (std::abs(*pred - o->value) <= 3 * o->se) ++within;
        };
        check(pt.g12, c.g12);
        check(pt.qc, c.qc);
        check(pt.p12, c.p12);
        check(pt.w, c.w);
    }
    EXPECT_GE(static_cast<double>(within), 0.8 * static_cast<double>(total));
}

TEST_F(SyntheticFit, CovarianceSymmetricPsdAndValuesInBounds) {
    const std::size_t n = result_->names.size();
    for (std::size_t i = 0; i < n; ++i) {
        EXPECT_GE(result_->covariance_at(i, i), 0.0);
        for (std::size_t j = 0; j < n; ++j) {
            EXPECT_EQ(result_->covariance_at(i, j), result_->covariance_at(j, i));
        }
        EXPECT_GE(result_->values[i], problem_->free[i].lower);
        EXPECT_LE(result_->values[i], problem_->free[i].upper);
    }
    // Cauchy-Schwarz on every 2x2 minor.
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            const double c = result_->covariance_at(i, j);
            EXPECT_LE(c * c, result_->covariance_at(i, i) * result_->covariance_at(j, j) * (1 + 1e-9) + 1e-300);
        }
    }
    EXPECT_FALSE(result_->underdetermined);
    EXPECT_EQ(result_->starts.size(), 16u);
}

TEST_F(SyntheticFit, ReproducibleAcrossThreadCounts) {
    FitOptions o;
    o.seed = 7;
    o.threads = 1;
    const auto again = fit(*data_, *problem_, o);
    EXPECT_EQ(again.values, result_->values);
    EXPECT_EQ(again.covariance, result_->covariance);
    EXPECT_EQ(again.to_doc().to_string(), result_->to_doc().to_string());
}

TEST(Fit, SinglePointIsUnderdetermined) {
    const ModelParams p = test::paper_regime();
    const double chi = 1e-3;
    auto d = exact_dataset(p, std::span(&chi, 1), false);
    FitOptions o;
    o.starts = 2;
    const auto r = fit(d, FitProblem::with_default_bounds(p, false), o);
    EXPECT_TRUE(r.underdetermined);
    EXPECT_FALSE(r.warnings.empty());
}

TEST(Fit, QcPlateauGivesHalfRetrieval) {
    // Plateau data only: qc = 0.5 on a clean source with eta2 = 0.25.
    ModelParams p;
    p.retrieval_eff = 0.5;
    Dataset d;
    for (double chi : log_chi_grid(1e-4, 1e-3, 6)) {
        ModelParams q = p;
        q.chi = chi;
        const auto s = click_statistics(q, DetectionConfig{});
        DataPoint pt;
        pt.p1 = s.p1;
        pt.p1_se = 0.01 * s.p1;
        pt.qc = Observation{0.5, 0.01};
        d.points.push_back(pt);
    }
    FitProblem fp;
    fp.fixed = p;
    fp.free = {FreeParameter{"retrieval_eff", 0.01, 1.0, false}};
    FitOptions o;
    o.starts = 4;
    const auto r = fit(d, fp, o);
    EXPECT_NEAR(r.params.retrieval_eff, 0.5, std::max(3 * r.standard_errors()[0], 0.01));
}

TEST(Fit, TrapOffPointsGetTheirOwnBackground) {
    ModelParams truth = test::paper_regime();
    auto d = exact_dataset(truth, fit_chis(), false);
    ModelParams dark = truth;
    dark.bg1_incoherent = 2e-7;
    for (std::size_t i = 0; i < 2; ++i) {
        const auto c = predict_curves(dark, std::span(&fit_chis()[i], 1)).front();
        d.points[i].p1 = c.p1;
        d.points[i].g12 = Observation{*c.g12, 0.05 * *c.g12};
        d.points[i].qc = Observation{*c.qc, 0.02};
        d.points[i].p12 = Observation{c.p12, 0.05 * c.p12};
        d.points[i].flags = "trap_off";
    }
    EXPECT_LT(objective(truth, d, 2e-7), 1e-12);
    EXPECT_GT(objective(truth, d), 1e-6);
    const auto fp = FitProblem::with_default_bounds(truth, true);
    EXPECT_EQ(fp.free.back().name, "bg1_incoherent_trap_off");
}

}  // namespace
}  // namespace dlcz
