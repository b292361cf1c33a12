// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlcz/keyvalue.hpp"

namespace dlcz {

/// Parameters of the pair-source model: a two-mode squeezed state with pair
/// weight ratio `chi`, Poissonian backgrounds on both fields, and a lossy
/// click-detection chain.
///
/// Coherent backgrounds are quoted at the ensemble output for `chi == chi_ref`
/// and scale linearly with `chi`. Incoherent backgrounds are quoted directly
/// at the detector and do not depend on `chi`.
struct ModelParams {
    double chi = 1e-3;
    double bg1_coherent = 0.0;
    double bg2_coherent = 0.0;
    double bg1_incoherent = 0.0;
    double bg2_incoherent = 0.0;
    double chi_ref = 1e-2;
    double retrieval_eff = 0.5;
    double eta1 = 0.25;
    double eta2_path = 0.5;
    double eta_apd = 0.5;
    double bs_transmission = 0.8;
    double bs_ratio = 0.5;

    /// Overall field-2 detection efficiency from the ensemble output to a
    /// click in the single-detector setup (0.25 with defaults).
    double eta2() const { return eta2_path * eta_apd; }

    /// Same for the split setup, summed over both arms.
    double eta2_split() const { return eta2_path * bs_transmission * eta_apd; }

    /// Coherent background scale factor chi / chi_ref.
    double coherent_scale() const { return chi / chi_ref; }

    /// Throws ConfigError naming the first out-of-range field.
    void validate() const;

    bool operator==(const ModelParams &) const = default;
};

/// Canonical key set of the serialized form, in output order.
inline constexpr std::array<std::string_view, 12> kModelParamKeys = {
    "chi",           "bg1_coherent", "bg2_coherent", "bg1_incoherent", "bg2_incoherent", "chi_ref",
    "retrieval_eff", "eta1",         "eta2_path",    "eta_apd",        "bs_transmission", "bs_ratio"};

/// Mutable access by canonical key; nullptr for unknown keys.
double *param_field(ModelParams &p, std::string_view key);
double param_value(const ModelParams &p, std::string_view key);

/// Reads the canonical keys present in `doc` over `defaults`. Keys outside
/// the canonical set are rejected unless listed in `extra_allowed`.
ModelParams params_from_doc(
    const KeyValueDoc &doc, const ModelParams &defaults = {}, std::span<const std::string_view> extra_allowed = {});
void params_to_doc(const ModelParams &p, KeyValueDoc &doc);

enum class DetectionMode { Single, Split };

std::string_view to_string(DetectionMode m);
DetectionMode detection_mode_from_string(std::string_view s);

/// Detector identifiers; the numeric values are the on-disk ids.
enum class DetectorId : std::uint8_t { D1 = 0, D2 = 1, D2a = 2, D2b = 3 };

inline constexpr int kNumDetectorIds = 4;

std::string_view to_string(DetectorId d);
/// Accepts the symbolic names produced by to_string(DetectorId).
bool detector_from_string(std::string_view s, DetectorId &out);

/// Effective response of one detector to the model's fields.
struct DetectorChannel {
    DetectorId id;
    /// Probability that a field photon of the correlated pair yields a
    /// detection here. Field-2 channels include the retrieval efficiency.
    double pair_efficiency;
    /// Total Poisson background mean per trial (coherent + incoherent).
    double background_mean;
};

/// Field-1 detector plus one (Single) or two (Split) field-2 detectors.
struct DetectionConfig {
    DetectionMode mode = DetectionMode::Single;

    /// Channel list for `p`: D1 first, then D2, or D2a and D2b.
    std::vector<DetectorChannel> resolve(const ModelParams &p) const;

    std::span<const DetectorId> detectors() const;
};

}  // namespace dlcz
