// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlcz/model_params.hpp"

#include <algorithm>
#include <cmath>

#include "dlcz/errors.hpp"

namespace dlcz {

namespace {

void require_unit(std::string_view key, double v) {
    if (!(v >= 0.0 && v <= 1.0)) {
        throw ConfigError(std::string(key), "must lie in [0, 1], got " + format_double(v));
    }
}

void require_nonnegative(std::string_view key, double v) {
    if (!(v >= 0.0) || !std::isfinite(v)) {
        throw ConfigError(std::string(key), "must be finite and >= 0, got " + format_double(v));
    }
}

constexpr std::array<DetectorId, 2> kSingleDetectors = {DetectorId::D1, DetectorId::D2};
constexpr std::array<DetectorId, 3> kSplitDetectors = {DetectorId::D1, DetectorId::D2a, DetectorId::D2b};

}  // namespace

void ModelParams::validate() const {
    if (!(chi >= 0.0 && chi < 1.0)) {
        throw ConfigError("chi", "must lie in [0, 1), got " + format_double(chi));
    }
    if (!(chi_ref > 0.0 && chi_ref < 1.0)) {
        throw ConfigError("chi_ref", "must lie in (0, 1), got " + format_double(chi_ref));
    }
    require_nonnegative("bg1_coherent", bg1_coherent);
    require_nonnegative("bg2_coherent", bg2_coherent);
    require_nonnegative("bg1_incoherent", bg1_incoherent);
    require_nonnegative("bg2_incoherent", bg2_incoherent);
    require_unit("retrieval_eff", retrieval_eff);
    require_unit("eta1", eta1);
    require_unit("eta2_path", eta2_path);
    require_unit("eta_apd", eta_apd);
    require_unit("bs_transmission", bs_transmission);
    require_unit("bs_ratio", bs_ratio);
}

double *param_field(ModelParams &p, std::string_view key) {
    if (key == "chi") return &p.chi;
    if (key == "bg1_coherent") return &p.bg1_coherent;
    if (key == "bg2_coherent") return &p.bg2_coherent;
    if (key == "bg1_incoherent") return &p.bg1_incoherent;
    if (key == "bg2_incoherent") return &p.bg2_incoherent;
    if (key == "chi_ref") return &p.chi_ref;
    if (key == "retrieval_eff") return &p.retrieval_eff;
    if (key == "eta1") return &p.eta1;
    if (key == "eta2_path") return &p.eta2_path;
    if (key == "eta_apd") return &p.eta_apd;
    if (key == "bs_transmission") return &p.bs_transmission;
    if (key == "bs_ratio") return &p.bs_ratio;
    return nullptr;
}

double param_value(const ModelParams &p, std::string_view key) {
    auto copy = p;
    const double *f = param_field(copy, key);
    if (f == nullptr) {
        throw ConfigError(std::string(key), "unknown model parameter");
    }
    return *f;
}

ModelParams params_from_doc(
    const KeyValueDoc &doc, const ModelParams &defaults, std::span<const std::string_view> extra_allowed) {
    ModelParams p = defaults;
    for (const auto &[key, raw] : doc.entries()) {
        if (double *f = param_field(p, key)) {
            *f = *doc.get_double(key);
        } else if (std::find(extra_allowed.begin(), extra_allowed.end(), key) == extra_allowed.end()) {
            throw ConfigError(key, "unknown key");
        }
    }
    p.validate();
    return p;
}

void params_to_doc(const ModelParams &p, KeyValueDoc &doc) {
    for (auto key : kModelParamKeys) {
        doc.set(std::string(key), param_value(p, key));
    }
}

std::string_view to_string(DetectionMode m) { return m == DetectionMode::Single ? "single" : "split"; }

DetectionMode detection_mode_from_string(std::string_view s) {
    if (s == "single") return DetectionMode::Single;
    if (s == "split") return DetectionMode::Split;
    throw ConfigError("mode", "expected 'single' or 'split', got '" + std::string(s) + "'");
}

std::string_view to_string(DetectorId d) {
    switch (d) {
        case DetectorId::D1: return "D1";
        case DetectorId::D2: return "D2";
        case DetectorId::D2a: return "D2a";
        case DetectorId::D2b: return "D2b";
    }
    return "?";
}

bool detector_from_string(std::string_view s, DetectorId &out) {
    for (int i = 0; i < kNumDetectorIds; ++i) {
        auto d = static_cast<DetectorId>(i);
        if (s == to_string(d)) {
            out = d;
            return true;
        }
    }
    return false;
}

std::vector<DetectorChannel> DetectionConfig::resolve(const ModelParams &p) const {
    const double scale = p.coherent_scale();
    std::vector<DetectorChannel> out;
    out.push_back({DetectorId::D1, p.eta1, p.eta1 * p.bg1_coherent * scale + p.bg1_incoherent});
    if (mode == DetectionMode::Single) {
        const double eta = p.eta2();
        out.push_back({DetectorId::D2, p.retrieval_eff * eta, eta * p.bg2_coherent * scale + p.bg2_incoherent});
    } else {
        // Each arm sees its share of the coherent field-2 background plus the
        // full write-independent level of its own detector.
        const double eta_a = p.eta2_split() * p.bs_ratio;
        const double eta_b = p.eta2_split() * (1.0 - p.bs_ratio);
        out.push_back({DetectorId::D2a, p.retrieval_eff * eta_a, eta_a * p.bg2_coherent * scale + p.bg2_incoherent});
        out.push_back({DetectorId::D2b, p.retrieval_eff * eta_b, eta_b * p.bg2_coherent * scale + p.bg2_incoherent});
    }
    return out;
}

std::span<const DetectorId> DetectionConfig::detectors() const {
    if (mode == DetectionMode::Single) {
        return kSingleDetectors;
    }
    return kSplitDetectors;
}

}  // namespace dlcz
