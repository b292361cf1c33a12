// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include <benchmark/benchmark.h>

#include "dlcz/correlator.hpp"
#include "dlcz/event_sim.hpp"
#include "dlcz/fock_oracle.hpp"
#include "dlcz/model_fit.hpp"
#include "dlcz/photon_model.hpp"

namespace {

dlcz::ModelParams bench_params(double chi) {
    dlcz::ModelParams p;
    p.chi = chi;
    p.bg1_coherent = 2e-4;
    p.bg2_coherent = 2e-3;
    p.bg1_incoherent = 2e-6;
    p.bg2_incoherent = 1e-4;
    return p;
}

void BM_ClickStatistics(benchmark::State &state) {
    const auto p = bench_params(1e-3);
    const dlcz::DetectionConfig cfg{state.range(0) ? dlcz::DetectionMode::Split : dlcz::DetectionMode::Single};
    for (auto _ : state) {
        benchmark::DoNotOptimize(dlcz::click_statistics(p, cfg));
    }
}
BENCHMARK(BM_ClickStatistics)->Arg(0)->Arg(1)->ArgName("split");

void BM_FockOracle(benchmark::State &state) {
    const auto p = bench_params(0.1);
    const dlcz::DetectionConfig cfg{dlcz::DetectionMode::Split};
    for (auto _ : state) {
        benchmark::DoNotOptimize(dlcz::brute_force_statistics(p, cfg, static_cast<int>(state.range(0))));
    }
}
BENCHMARK(BM_FockOracle)->Arg(20)->Arg(60)->ArgName("nmax")->Unit(benchmark::kMillisecond);

void BM_SimulateHistogram(benchmark::State &state) {
    dlcz::SessionSpec spec;
    spec.params = bench_params(static_cast<double>(state.range(0)) * 1e-3);
    spec.config.mode = dlcz::DetectionMode::Split;
    spec.n_trials = 1'000'000;
    spec.seed = 1;
    for (auto _ : state) {
        benchmark::DoNotOptimize(dlcz::simulate_click_histogram(spec, 1));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(spec.n_trials));
}
BENCHMARK(BM_SimulateHistogram)->Arg(1)->Arg(100)->ArgName("chi_milli")->Unit(benchmark::kMillisecond);

void BM_Accumulate(benchmark::State &state) {
    dlcz::SessionSpec spec;
    spec.params = bench_params(0.1);
    spec.n_trials = 1'000'000;
    spec.seed = 2;
    const auto stream = dlcz::run_session(spec, 1);
    for (auto _ : state) {
        benchmark::DoNotOptimize(dlcz::accumulate(
            dlcz::CountTable{.mode = dlcz::DetectionMode::Single, .n_trials = spec.n_trials}, stream.records));
    }
    state.SetItemsProcessed(state.iterations() * static_cast<std::int64_t>(stream.records.size()));
}
BENCHMARK(BM_Accumulate)->Unit(benchmark::kMillisecond);

void BM_Objective(benchmark::State &state) {
    const auto p = bench_params(1e-3);
    dlcz::Dataset d;
    for (const auto &c : dlcz::predict_curves(p, dlcz::log_chi_grid(2e-4, 5e-2, 12))) {
        dlcz::DataPoint pt;
        pt.p1 = c.p1;
        pt.p1_se = 0.01 * c.p1;
        pt.g12 = dlcz::Observation{*c.g12, 1.0};
        pt.qc = dlcz::Observation{*c.qc, 0.01};
        pt.p12 = dlcz::Observation{c.p12, 0.05 * c.p12};
        pt.w = dlcz::Observation{*c.w, 0.01};
        d.points.push_back(pt);
    }
    for (auto _ : state) {
        benchmark::DoNotOptimize(dlcz::objective(p, d));
    }
}
BENCHMARK(BM_Objective)->Unit(benchmark::kMicrosecond);

}  // namespace

BENCHMARK_MAIN();
