// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "cli.hpp"

#include <chrono>
#include <filesystem>
#include <fstream>
#include <ostream>
#include <sstream>

#include "CLI11.hpp"
#include "dlcz/correlator.hpp"
#include "dlcz/dataset.hpp"
#include "dlcz/errors.hpp"
#include "dlcz/event_sim.hpp"
#include "dlcz/model_fit.hpp"
#include "dlcz/model_params.hpp"
#include "dlcz/photon_model.hpp"
#include "dlcz/record_io.hpp"

#ifndef DLCZ_VERSION
#define DLCZ_VERSION "dev"
#endif

namespace dlcz::cli {

namespace {

/// Keys a --params document may carry besides the model parameters: the
/// schedule, the detection mode, and the metadata of a run manifest (so a
/// manifest can be fed back in to reproduce its run).
const std::vector<std::string_view> &extra_param_keys() {
    static const std::vector<std::string_view> keys = [] {
        std::vector<std::string_view> k(kScheduleKeys.begin(), kScheduleKeys.end());
        for (auto m : {"mode", "command", "tool_version", "seed", "n_trials", "format", "input", "output",
                       "threads", "wall_clock_seconds", "n_records", "bytes_written", "error_method",
                       "bootstrap_replicates", "eta2", "chi_min", "chi_max", "points", "observables",
                       "starts", "bounds", "dataset"}) {
            k.emplace_back(m);
        }
        return k;
    }();
    return keys;
}

struct LoadedParams {
    KeyValueDoc doc;
    ModelParams params;
    TrialSchedule schedule;
};

LoadedParams load_params(const std::string &path) {
    LoadedParams out;
    if (!path.empty()) {
        out.doc = KeyValueDoc::load(path);
    }
    out.params = params_from_doc(out.doc, {}, extra_param_keys());
    out.schedule = schedule_from_doc(out.doc);
    return out;
}

std::string manifest_path(const std::string &output) { return output + ".manifest"; }

class Manifest {
  public:
    explicit Manifest(std::string command) : start_(std::chrono::steady_clock::now()) {
        doc_.set("command", std::move(command));
        doc_.set("tool_version", std::string(DLCZ_VERSION));
    }

    KeyValueDoc &doc() { return doc_; }

    void save(const std::string &path) {
        const std::chrono::duration<double> elapsed = std::chrono::steady_clock::now() - start_;
        doc_.set("wall_clock_seconds", elapsed.count());
        doc_.save(path);
    }

  private:
    KeyValueDoc doc_;
    std::chrono::steady_clock::time_point start_;
};

void write_text(const std::string &path, const std::string &text) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    f.write(text.data(), static_cast<std::streamsize>(text.size()));
    f.flush();
    if (!f) {
        throw IoError(0, "cannot write '" + path + "'");
    }
}

std::string optional_cell(const std::optional<double> &v) { return v ? format_double(*v) : std::string(); }

// ---------------------------------------------------------------------------

struct SimulateArgs {
    std::string params;
    std::uint64_t trials = 44000;
    std::uint64_t seed = 1;
    std::string mode;
    std::string format = "bin";
    std::string out;
    unsigned threads = 0;
};

int cmd_simulate(const SimulateArgs &a, CLI::App &sub, std::ostream &out) {
    const auto loaded = load_params(a.params);
    SessionSpec spec;
    spec.params = loaded.params;
    spec.schedule = loaded.schedule;
    spec.n_trials = a.trials;
    spec.seed = a.seed;
    // Flags win over a manifest-style document, which wins over defaults.
    if (sub.count("--trials") == 0) {
        if (auto v = loaded.doc.get_uint("n_trials")) spec.n_trials = *v;
    }
    if (sub.count("--seed") == 0) {
        if (auto v = loaded.doc.get_uint("seed")) spec.seed = *v;
    }
    std::string mode = a.mode;
    if (mode.empty()) mode = loaded.doc.get("mode").value_or("single");
    spec.config.mode = detection_mode_from_string(mode);
    const RecordFormat format = record_format_from_string(a.format);

    Manifest manifest("simulate");
    const RecordStream stream = run_session(spec, a.threads);
    const std::uint64_t bytes = write_records_file(stream.records, a.out, format);

    auto &doc = manifest.doc();
    doc.set("seed", spec.seed);
    doc.set("n_trials", spec.n_trials);
    doc.set("mode", std::string(to_string(spec.config.mode)));
    doc.set("format", a.format == "csv" ? std::string("csv") : std::string("bin"));
    doc.set("output", a.out);
    doc.set("threads", std::uint64_t{a.threads});
    doc.set("n_records", std::uint64_t{stream.records.size()});
    doc.set("bytes_written", bytes);
    params_to_doc(spec.params, doc);
    schedule_to_doc(spec.schedule, doc);
    manifest.save(manifest_path(a.out));

    out << "wrote " << stream.records.size() << " records (" << bytes << " bytes, " << spec.n_trials << " trials, "
        << spec.schedule.span_seconds(spec.n_trials) << " s of schedule time) to " << a.out << '\n';
    return kOk;
}

// ---------------------------------------------------------------------------

struct AnalyzeArgs {
    std::string input;
    std::uint64_t trials = 0;
    double eta2 = 0.0;
    std::string mode;
    std::string error_method = "delta";
    unsigned replicates = 1000;
    std::uint64_t seed = 0;
    std::string out;
    std::string counts_csv;
};

int cmd_analyze(const AnalyzeArgs &a, CLI::App &sub, std::ostream &out, std::ostream &err) {
    KeyValueDoc side;
    if (std::filesystem::exists(manifest_path(a.input))) {
        side = KeyValueDoc::load(manifest_path(a.input));
    }

    std::uint64_t n_trials = a.trials;
    if (sub.count("--trials") == 0) {
        auto v = side.get_uint("n_trials");
        if (!v) {
            err << "analyze: --trials is required when no " << manifest_path(a.input) << " is present\n";
            return kUsage;
        }
        n_trials = *v;
    }
    if (n_trials == 0) {
        throw ConfigError("trials", "must be >= 1");
    }

    double eta2 = 0.25;
    if (sub.count("--eta2") != 0) {
        eta2 = a.eta2;
    } else if (side.contains("eta2_path") || side.contains("eta_apd")) {
        eta2 = params_from_doc(side, {}, extra_param_keys()).eta2();
    }
    if (!(eta2 > 0.0 && eta2 <= 1.0)) {
        throw ConfigError("eta2", "must lie in (0, 1]");
    }

    const auto records = read_records_file(a.input);

    // Mode from the detector ids; fall back to the flag or manifest when
    // the file holds no field-2 records.
    std::optional<DetectionMode> mode;
    for (const auto &r : records) {
        if (r.detector == DetectorId::D1) continue;
        const auto m = r.detector == DetectorId::D2 ? DetectionMode::Single : DetectionMode::Split;
        if (mode && *mode != m) {
            throw ModeMismatch("record file mixes D2 with D2a/D2b records");
        }
        mode = m;
    }
    if (!a.mode.empty()) {
        const auto flag_mode = detection_mode_from_string(a.mode);
        if (mode && *mode != flag_mode) {
            throw ModeMismatch("--mode " + a.mode + " disagrees with the record file");
        }
        mode = flag_mode;
    }
    if (!mode) {
        mode = detection_mode_from_string(side.get("mode").value_or("single"));
    }

    const CountTable table = accumulate(CountTable{.mode = *mode, .n_trials = n_trials}, records);
    EstimateOptions opts;
    opts.method = error_method_from_string(a.error_method);
    opts.bootstrap_replicates = a.replicates;
    opts.bootstrap_seed = a.seed;
    const auto metrics = estimate_metrics(table, eta2, opts);

    KeyValueDoc report = metrics.to_doc();
    report.set("eta2", eta2);
    if (a.out.empty()) {
        out << report.to_string();
    } else {
        report.save(a.out);
        Manifest manifest("analyze");
        manifest.doc().set("input", a.input);
        manifest.doc().set("output", a.out);
        manifest.doc().set("n_trials", n_trials);
        manifest.doc().set("eta2", eta2);
        manifest.doc().set("mode", std::string(to_string(*mode)));
        manifest.doc().set("error_method", a.error_method);
        manifest.doc().set("bootstrap_replicates", std::uint64_t{a.replicates});
        manifest.doc().set("seed", a.seed);
        manifest.save(manifest_path(a.out));
    }
    if (!a.counts_csv.empty()) {
        write_text(a.counts_csv, count_table_csv(table));
    }
    for (const auto &w : metrics.warnings) {
        err << "warning: " << w << '\n';
    }
    return kOk;
}

// ---------------------------------------------------------------------------

struct SweepArgs {
    std::string params;
    double chi_min = 1e-6;
    double chi_max = 0.3;
    std::size_t points = 31;
    std::string observables = "p1,g12,qc,p12,w";
    std::string out;
};

int cmd_sweep(const SweepArgs &a, std::ostream &out) {
    const auto loaded = load_params(a.params);
    const auto grid = log_chi_grid(a.chi_min, a.chi_max, a.points);

    std::vector<std::string> cols;
    std::stringstream ss(a.observables);
    for (std::string c; std::getline(ss, c, ',');) {
        if (c != "p1" && c != "g12" && c != "qc" && c != "p12" && c != "w") {
            throw ConfigError("observables", "unknown observable '" + c + "'");
        }
        cols.push_back(c);
    }
    if (cols.empty()) {
        throw ConfigError("observables", "empty list");
    }

    std::string csv = "chi";
    for (const auto &c : cols) csv += ',' + c;
    csv += '\n';
    for (const auto &pt : predict_curves(loaded.params, grid)) {
        csv += format_double(pt.chi);
        for (const auto &c : cols) {
            csv += ',';
            if (c == "p1") csv += format_double(pt.p1);
            else if (c == "g12") csv += optional_cell(pt.g12);
            else if (c == "qc") csv += optional_cell(pt.qc);
            else if (c == "p12") csv += format_double(pt.p12);
            else csv += optional_cell(pt.w);
        }
        csv += '\n';
    }

    if (a.out.empty()) {
        out << csv;
        return kOk;
    }
    Manifest manifest("sweep");
    write_text(a.out, csv);
    auto &doc = manifest.doc();
    doc.set("output", a.out);
    doc.set("chi_min", a.chi_min);
    doc.set("chi_max", a.chi_max);
    doc.set("points", std::uint64_t{a.points});
    doc.set("observables", a.observables);
    params_to_doc(loaded.params, doc);
    manifest.save(manifest_path(a.out));
    return kOk;
}

// ---------------------------------------------------------------------------

struct FitArgs {
    std::string dataset;
    std::string bounds;
    std::string params;
    std::uint64_t seed = 0;
    unsigned starts = 16;
    unsigned threads = 0;
    std::size_t overlay_points = 60;
    std::string out;
};

int cmd_fit(const FitArgs &a, std::ostream &out, std::ostream &err) {
    const auto loaded = load_params(a.params);
    const Dataset data = Dataset::load(a.dataset);
    if (data.points.empty()) {
        throw FormatError(2, "dataset has no data rows");
    }
    FitProblem problem = a.bounds.empty()
                             ? FitProblem::with_default_bounds(loaded.params, data.any_trap_off())
                             : FitProblem::from_bounds_doc(loaded.params, KeyValueDoc::load(a.bounds));

    FitOptions opts;
    opts.seed = a.seed;
    opts.starts = a.starts;
    opts.threads = a.threads;

    Manifest manifest("fit");
    const FitResult result = fit(data, problem, opts);

    result.to_doc().save(a.out + ".fit.txt");
    write_text(a.out + ".cov.csv", result.covariance_csv());

    // Overlay curve spanning the measured p1 range.
    double lo = 1.0, hi = 0.0;
    for (const auto &p : data.points) {
        lo = std::min(lo, p.p1);
        hi = std::max(hi, p.p1);
    }
    const double chi_lo = chi_for_p1(result.params, lo).value_or(1e-6);
    const double chi_hi = chi_for_p1(result.params, hi).value_or(0.3);
    const auto grid = chi_lo < chi_hi ? log_chi_grid(chi_lo, chi_hi, a.overlay_points) : log_chi_grid(chi_lo, chi_lo, 1);
    std::string csv = "chi,p1,g12,qc,p12,w\n";
    for (const auto &pt : predict_curves(result.params, grid)) {
        csv += format_double(pt.chi) + ',' + format_double(pt.p1) + ',' + optional_cell(pt.g12) + ',' +
               optional_cell(pt.qc) + ',' + format_double(pt.p12) + ',' + optional_cell(pt.w) + '\n';
    }
    write_text(a.out + ".overlay.csv", csv);

    auto &doc = manifest.doc();
    doc.set("dataset", a.dataset);
    doc.set("bounds", a.bounds.empty() ? std::string("default") : a.bounds);
    doc.set("output", a.out);
    doc.set("seed", a.seed);
    doc.set("starts", std::uint64_t{a.starts});
    doc.set("threads", std::uint64_t{a.threads});
    params_to_doc(loaded.params, doc);
    manifest.save(manifest_path(a.out));

    out << "objective " << format_double(result.objective) << (result.converged ? "" : " (not converged)") << '\n';
    const auto se = result.standard_errors();
    for (std::size_t i = 0; i < result.names.size(); ++i) {
        out << result.names[i] << " = " << format_double(result.values[i]) << " +/- " << format_double(se[i]) << '\n';
    }
    for (const auto &w : result.warnings) {
        err << "warning: " << w << '\n';
    }
    return kOk;
}

}  // namespace

int run(const std::vector<std::string> &args, std::ostream &out, std::ostream &err) {
    CLI::App app{"Photon-pair source simulator, correlator and model fitter"};
    app.set_version_flag("--version", DLCZ_VERSION);
    app.require_subcommand(1);

    SimulateArgs sim;
    auto *simulate = app.add_subcommand("simulate", "Generate detection records by Monte Carlo");
    simulate->add_option("--params", sim.params, "Model/schedule key-value document (or a run manifest)");
    simulate->add_option("--trials", sim.trials, "Number of trials")->capture_default_str();
    simulate->add_option("--seed", sim.seed, "Random seed")->capture_default_str();
    simulate->add_option("--mode", sim.mode, "single | split (default: document 'mode' key, else single)");
    simulate->add_option("--format", sim.format, "bin | csv")->capture_default_str();
    simulate->add_option("--out", sim.out, "Output record file")->required();
    simulate->add_option("--threads", sim.threads, "Worker threads, 0 = all cores")->capture_default_str();

    AnalyzeArgs an;
    auto *analyze = app.add_subcommand("analyze", "Estimate metrics from a record file");
    analyze->add_option("input", an.input, "PDR1 or CSV record file")->required();
    analyze->add_option("--trials", an.trials, "Trial count (default: from <input>.manifest)");
    analyze->add_option("--eta2", an.eta2, "Field-2 detection efficiency (default: manifest, else 0.25)");
    analyze->add_option("--mode", an.mode, "single | split, when the file alone does not tell");
    analyze->add_option("--error-method", an.error_method, "delta | bootstrap")->capture_default_str();
    analyze->add_option("--replicates", an.replicates, "Bootstrap replicates")->capture_default_str();
    analyze->add_option("--seed", an.seed, "Bootstrap seed")->capture_default_str();
    analyze->add_option("--out", an.out, "Report path (default: stdout)");
    analyze->add_option("--counts-csv", an.counts_csv, "Also write the count table as CSV");

    SweepArgs sw;
    auto *sweep = app.add_subcommand("sweep", "Tabulate model curves over a log-spaced chi grid");
    sweep->add_option("--params", sw.params, "Model key-value document");
    sweep->add_option("--chi-min", sw.chi_min)->capture_default_str();
    sweep->add_option("--chi-max", sw.chi_max)->capture_default_str();
    sweep->add_option("--points", sw.points)->capture_default_str();
    sweep->add_option("--observables", sw.observables, "Comma-separated subset of p1,g12,qc,p12,w")
        ->capture_default_str();
    sweep->add_option("--out", sw.out, "CSV path (default: stdout)");

    FitArgs ft;
    auto *fitcmd = app.add_subcommand("fit", "Fit one global parameter set to a dataset");
    fitcmd->add_option("dataset", ft.dataset, "Dataset CSV")->required();
    fitcmd->add_option("--bounds", ft.bounds, "Free-parameter bounds document (default bounds if omitted)");
    fitcmd->add_option("--params", ft.params, "Fixed model parameters");
    fitcmd->add_option("--seed", ft.seed, "Multistart seed")->capture_default_str();
    fitcmd->add_option("--starts", ft.starts, "Number of starts")->capture_default_str();
    fitcmd->add_option("--threads", ft.threads, "Worker threads, 0 = all cores")->capture_default_str();
    fitcmd->add_option("--overlay-points", ft.overlay_points)->capture_default_str();
    fitcmd->add_option("--out", ft.out, "Output prefix")->required();

    std::vector<const char *> argv;
    argv.reserve(args.size());
    for (const auto &s : args) argv.push_back(s.c_str());
    try {
        app.parse(static_cast<int>(argv.size()), argv.data());
    } catch (const CLI::CallForHelp &e) {
        out << app.help();
        return kOk;
    } catch (const CLI::CallForVersion &e) {
        out << DLCZ_VERSION << '\n';
        return kOk;
    } catch (const CLI::ParseError &e) {
        err << "error: " << e.what() << '\n';
        return kUsage;
    }

    try {
        if (*simulate) return cmd_simulate(sim, *simulate, out);
        if (*analyze) return cmd_analyze(an, *analyze, out, err);
        if (*sweep) return cmd_sweep(sw, out);
        if (*fitcmd) return cmd_fit(ft, out, err);
    } catch (const ConfigError &e) {
        err << "error: invalid configuration: " << e.what() << '\n';
        return kUsage;
    } catch (const FormatError &e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const IoError &e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    } catch (const ModeMismatch &e) {
        err << "error: " << e.what() << '\n';
        return kIo;
    }
    return kUsage;
}

}  // namespace dlcz::cli
