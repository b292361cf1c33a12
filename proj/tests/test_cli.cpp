// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cmath>
#include <fstream>
#include <sstream>

#include "cli.hpp"
#include "dlcz/correlator.hpp"
#include "dlcz/dataset.hpp"
#include "dlcz/keyvalue.hpp"
#include "dlcz/model_fit.hpp"
#include "dlcz/photon_model.hpp"
#include "dlcz/record_io.hpp"
#include "synthetic_data.hpp"
#include "test_support.hpp"

namespace dlcz {
namespace {

struct RunResult {
    int code;
    std::string out;
    std::string err;
};

RunResult run_cli(std::vector<std::string> args) {
    args.insert(args.begin(), "dlczsim");
    std::ostringstream out, err;
    const int code = cli::run(args, out, err);
    return {code, out.str(), err.str()};
}

std::string slurp(const std::string &path) {
    std::ifstream f(path, std::ios::binary);
    std::ostringstream s;
    s << f.rdbuf();
    return s.str();
}

void spit(const std::string &path, const std::string &text) {
    std::ofstream f(path, std::ios::binary);
    f << text;
}

std::vector<std::vector<std::string>> read_csv(const std::string &text) {
    std::vector<std::vector<std::string>> rows;
    std::istringstream in(text);
    for (std::string line; std::getline(in, line);) {
        std::vector<std::string> cells;
        std::stringstream ls(line);
        for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
        if (!line.empty() && line.back() == ',') cells.emplace_back();
        rows.push_back(cells);
    }
    return rows;
}

void write_params(const std::string &path, const ModelParams &p) {
    KeyValueDoc doc;
    params_to_doc(p, doc);
    doc.save(path);
}

class Cli : public ::testing::Test {
  protected:
    test::ScratchDir dir_{::testing::UnitTest::GetInstance()->current_test_info()->name()};
    std::string f(const std::string &name) const { return dir_.file(name); }
};

TEST_F(Cli, SimulateDefaultsAreReproducible) {
    ASSERT_EQ(run_cli({"simulate", "--out", f("a.bin"), "--threads", "1"}).code, 0);
    ASSERT_EQ(run_cli({"simulate", "--out", f("b.bin"), "--threads", "8"}).code, 0);
    EXPECT_EQ(slurp(f("a.bin")), slurp(f("b.bin")));
    const auto manifest = KeyValueDoc::load(f("a.bin.manifest"));
    EXPECT_EQ(manifest.get_uint("n_trials"), 44000u);
    EXPECT_EQ(manifest.get_uint("seed"), 1u);
    EXPECT_EQ(manifest.get("command"), "simulate");
    EXPECT_TRUE(manifest.contains("tool_version"));
    EXPECT_TRUE(manifest.contains("wall_clock_seconds"));
}

TEST_F(Cli, ManifestReproducesRun) {
    ModelParams p = test::paper_regime();
    p.chi = 0.02;
    write_params(f("p.txt"), p);
    ASSERT_EQ(run_cli({"simulate", "--params", f("p.txt"), "--mode", "split", "--trials", "50000", "--seed", "9",
                       "--out", f("a.bin")})
                  .code,
              0);
    ASSERT_EQ(run_cli({"simulate", "--params", f("a.bin.manifest"), "--out", f("b.bin")}).code, 0);
    EXPECT_EQ(slurp(f("a.bin")), slurp(f("b.bin")));
}

TEST_F(Cli, VacuumGivesHeaderOnlyFile) {
    ModelParams p;
    p.chi = 0.0;
    write_params(f("p.txt"), p);
    ASSERT_EQ(run_cli({"simulate", "--params", f("p.txt"), "--out", f("a.bin")}).code, 0);
    EXPECT_EQ(slurp(f("a.bin")).size(), 16u);
}

TEST_F(Cli, SplitModeUsesSplitDetectors) {
    ModelParams p;
    p.chi = 0.1;
    write_params(f("p.txt"), p);
    ASSERT_EQ(run_cli({"simulate", "--params", f("p.txt"), "--mode", "split", "--out", f("a.bin")}).code, 0);
    const auto records = read_records_file(f("a.bin"));
    ASSERT_FALSE(records.empty());
    for (const auto &r : records) EXPECT_NE(r.detector, DetectorId::D2);
}

TEST_F(Cli, InvalidConfigNamesKey) {
    spit(f("p.txt"), "chi = 1.5\n");
    auto r = run_cli({"simulate", "--params", f("p.txt"), "--out", f("a.bin")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("chi"), std::string::npos);
    spit(f("q.txt"), "eta_ap = 0.5\n");
    r = run_cli({"simulate", "--params", f("q.txt"), "--out", f("a.bin")});
    EXPECT_EQ(r.code, 1);
    EXPECT_NE(r.err.find("eta_ap"), std::string::npos);
    EXPECT_EQ(run_cli({"simulate"}).code, 1);
    EXPECT_EQ(run_cli({"bogus"}).code, 1);
}

TEST_F(Cli, AnalyzeMatchesAnalyticModel) {
    ModelParams p = test::paper_regime();
    p.chi = 0.02;
    write_params(f("p.txt"), p);
    ASSERT_EQ(run_cli({"simulate", "--params", f("p.txt"), "--trials", "2000000", "--seed", "4", "--out",
                       f("a.bin")})
                  .code,
              0);
    ASSERT_EQ(run_cli({"analyze", f("a.bin"), "--out", f("r.txt"), "--counts-csv", f("c.csv")}).code, 0);
    const auto report = KeyValueDoc::load(f("r.txt"));
    const auto s = click_statistics(p, DetectionConfig{});
    const auto m = derived_metrics(s, p);
    auto within = [&](const char *name, double expected) {
        const double v = *report.get_double(name);
        const double se = *report.get_double(std::string(name) + "_se");
        EXPECT_LT(std::abs(v - expected), 4 * se) << name;
    };
    within("p1", s.p1);
    within("p2", s.p2);
    within("p12", s.p12);
    within("g12", *m.g12);
    within("qc", *m.qc);
    EXPECT_EQ(slurp(f("c.csv")).substr(0, 5), "mode,");
}

TEST_F(Cli, AnalyzeWithoutFieldOneClicksFlagsUndefined) {
    spit(f("a.csv"), "trial_index,detector,offset_ns\n3,D2,300\n");
    ASSERT_EQ(run_cli({"analyze", f("a.csv"), "--trials", "100", "--out", f("r.txt")}).code, 0);
    const auto report = KeyValueDoc::load(f("r.txt"));
    EXPECT_EQ(report.get("g12"), "undefined");
    EXPECT_EQ(report.get("pc"), "undefined");
    EXPECT_EQ(report.get("qc"), "undefined");
}

TEST_F(Cli, AnalyzeNeedsTrialCount) {
    spit(f("a.csv"), "trial_index,detector,offset_ns\n3,D2,300\n");
    EXPECT_EQ(run_cli({"analyze", f("a.csv")}).code, 1);
}

TEST_F(Cli, CsvAndBinaryGiveIdenticalReports) {
    ModelParams p;
    p.chi = 0.05;
    write_params(f("p.txt"), p);
    for (const auto &[fmt, name] : {std::pair{"bin", "a.bin"}, std::pair{"csv", "a.csv"}}) {
        ASSERT_EQ(run_cli({"simulate", "--params", f("p.txt"), "--trials", "100000", "--mode", "split", "--format",
                           fmt, "--out", f(name)})
                      .code,
                  0);
    }
    for (const auto &method : {"delta", "bootstrap"}) {
        ASSERT_EQ(run_cli({"analyze", f("a.bin"), "--error-method", method, "--out", f("r1.txt")}).code, 0);
        ASSERT_EQ(run_cli({"analyze", f("a.csv"), "--error-method", method, "--out", f("r2.txt")}).code, 0);
        EXPECT_EQ(slurp(f("r1.txt")), slurp(f("r2.txt")));
    }
}

TEST_F(Cli, AnalyzeCorruptFileReportsOffset) {
    ModelParams p;
    p.chi = 0.2;
    write_params(f("p.txt"), p);
    ASSERT_EQ(run_cli({"simulate", "--params", f("p.txt"), "--trials", "1000", "--out", f("a.bin")}).code, 0);
    std::string bytes = slurp(f("a.bin"));
    spit(f("magic.bin"), "XXXX" + bytes.substr(4));
    auto r = run_cli({"analyze", f("magic.bin"), "--trials", "1000"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("offset 0"), std::string::npos) << r.err;
    spit(f("trunc.bin"), bytes.substr(0, 16 + 13 + 3));
    r = run_cli({"analyze", f("trunc.bin"), "--trials", "1000"});
    EXPECT_EQ(r.code, 2);
    EXPECT_NE(r.err.find("offset 29"), std::string::npos) << r.err;
    r = run_cli({"analyze", f("missing.bin"), "--trials", "1000"});
    EXPECT_EQ(r.code, 2);
}

TEST_F(Cli, AnalyzeModeMismatch) {
    spit(f("a.csv"), "trial_index,detector,offset_ns\n3,D2a,300\n");
    EXPECT_EQ(run_cli({"analyze", f("a.csv"), "--trials", "10", "--mode", "single"}).code, 2);
}

TEST_F(Cli, SweepSingleRow) {
    const auto r = run_cli({"sweep", "--chi-min", "0.001", "--chi-max", "0.01", "--points", "1", "--out", f("s.csv")});
    ASSERT_EQ(r.code, 0);
    const auto rows = read_csv(slurp(f("s.csv")));
    ASSERT_EQ(rows.size(), 2u);
    EXPECT_EQ(rows[0], (std::vector<std::string>{"chi", "p1", "g12", "qc", "p12", "w"}));
    EXPECT_TRUE(KeyValueDoc::load(f("s.csv.manifest")).contains("chi_min"));
}

TEST_F(Cli, SweepRejectsBadGrid) {
    EXPECT_EQ(run_cli({"sweep", "--chi-min", "0.1", "--chi-max", "0.01"}).code, 1);
    EXPECT_EQ(run_cli({"sweep", "--chi-min", "0", "--chi-max", "0.01"}).code, 1);
    EXPECT_EQ(run_cli({"sweep", "--observables", "p1,zz"}).code, 1);
}

TEST_F(Cli, SweepQcHasThreeRegimes) {
    write_params(f("p.txt"), test::paper_regime());
    ASSERT_EQ(run_cli({"sweep", "--params", f("p.txt"), "--chi-min", "1e-5", "--chi-max", "0.3", "--points", "40",
                       "--observables", "p1,qc", "--out", f("s.csv")})
                  .code,
              0);
    const auto rows = read_csv(slurp(f("s.csv")));
    std::vector<double> chi, qc;
    for (std::size_t i = 1; i < rows.size(); ++i) {
        chi.push_back(std::stod(rows[i][0]));
        qc.push_back(std::stod(rows[i][2]));
    }
    double lo = 1.0, hi = 0.0;
    for (std::size_t i = 0; i < qc.size(); ++i) {
        if (chi[i] >= 4e-4 && chi[i] <= 5e-3) {
            lo = std::min(lo, qc[i]);
            hi = std::max(hi, qc[i]);
        }
    }
    // Noise floor below, plateau in the middle, multi-excitation above.
    EXPECT_LT(hi / lo - 1.0, 0.04);
    EXPECT_LT(qc.front(), 0.9 * lo);
    EXPECT_GT(qc.back(), 1.1 * hi);
}

TEST_F(Cli, SweepWithoutBackgroundsIsMonotone) {
    ASSERT_EQ(run_cli({"sweep", "--chi-min", "1e-5", "--chi-max", "0.3", "--points", "25", "--out", f("s.csv")}).code,
              0);
    const auto rows = read_csv(slurp(f("s.csv")));
    for (std::size_t i = 2; i < rows.size(); ++i) {
        EXPECT_GT(std::stod(rows[i][1]), std::stod(rows[i - 1][1]));
        EXPECT_GT(std::stod(rows[i][5]), std::stod(rows[i - 1][5]));
        EXPECT_LT(std::stod(rows[i][2]), std::stod(rows[i - 1][2]));
    }
}

TEST_F(Cli, FitWithoutWColumn) {
    const ModelParams truth = test::paper_regime();
    auto d = test::synthetic_dataset(truth, log_chi_grid(2e-4, 5e-2, 12), 44000ULL * 300, 5, false);
    std::string csv = "p1,p1_se,g12,g12_se,qc,qc_se,p12,p12_se\n";
    for (const auto &pt : d.points) {
        csv += format_double(pt.p1) + ',' + format_double(pt.p1_se) + ',' + format_double(pt.g12->value) + ',' +
               format_double(pt.g12->se) + ',' + format_double(pt.qc->value) + ',' + format_double(pt.qc->se) + ',' +
               format_double(pt.p12->value) + ',' + format_double(pt.p12->se) + '\n';
    }
    spit(f("d.csv"), csv);
    write_params(f("p.txt"), truth);
    const auto r = run_cli({"fit", f("d.csv"), "--params", f("p.txt"), "--starts", "4", "--out", f("fit")});
    ASSERT_EQ(r.code, 0) << r.err;
    const auto result = KeyValueDoc::load(f("fit.fit.txt"));
    EXPECT_TRUE(result.contains("retrieval_eff"));
    EXPECT_EQ(read_csv(slurp(f("fit.cov.csv"))).size(), 6u);
    const auto overlay = read_csv(slurp(f("fit.overlay.csv")));
    EXPECT_GT(overlay.size(), 2u);
    EXPECT_TRUE(KeyValueDoc::load(f("fit.manifest")).contains("dataset"));
}

TEST_F(Cli, FitMalformedHeaderNamesColumn) {
    spit(f("d.csv"), "p1,p1_se,gee12,gee12_se\n0.01,0.001,100,5\n");
    const auto r = run_cli({"fit", f("d.csv"), "--out", f("fit")});
    EXPECT_NE(r.code, 0);
    EXPECT_NE(r.err.find("gee12"), std::string::npos) << r.err;
}

TEST_F(Cli, FitSinglePointWarnsButSucceeds) {
    spit(f("d.csv"), "p1,p1_se,qc,qc_se\n0.001,0.00001,0.5,0.02\n");
    const auto r = run_cli({"fit", f("d.csv"), "--starts", "2", "--out", f("fit")});
    EXPECT_EQ(r.code, 0);
    EXPECT_NE(r.err.find("warning"), std::string::npos);
    EXPECT_EQ(KeyValueDoc::load(f("fit.fit.txt")).get("underdetermined"), "true");
}

TEST_F(Cli, HelpAndVersion) {
    EXPECT_EQ(run_cli({"--help"}).code, 0);
    const auto v = run_cli({"--version"});
    EXPECT_EQ(v.code, 0);
    EXPECT_FALSE(v.out.empty());
}

}  // namespace
}  // namespace dlcz
