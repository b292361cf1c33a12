// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlcz/correlator.hpp"

#include <cmath>
#include <random>
#include <stdexcept>

#include "dlcz/errors.hpp"

namespace dlcz {

namespace {

constexpr unsigned kBitD1 = 0b001;
constexpr unsigned kBitF2a = 0b010;  // D2 in Single mode
constexpr unsigned kBitF2b = 0b100;

unsigned pattern_bit(DetectionMode mode, DetectorId d) {
    switch (d) {
        case DetectorId::D1: return kBitD1;
        case DetectorId::D2:
            if (mode != DetectionMode::Single) throw ModeMismatch("D2 record in a split-mode table");
            return kBitF2a;
        case DetectorId::D2a:
            if (mode != DetectionMode::Split) throw ModeMismatch("D2a record in a single-mode table");
            return kBitF2a;
        case DetectorId::D2b:
            if (mode != DetectionMode::Split) throw ModeMismatch("D2b record in a single-mode table");
            return kBitF2b;
    }
    throw std::logic_error("unknown detector id");
}

/// Product of marginal click probabilities raised to integer powers, times
/// a constant: value = factor * prod_j L(mask_j)^exp_j where L(mask) is the
/// probability that every detector in mask clicks.
struct RatioMetric {
    struct Term {
        unsigned mask;
        int exponent;
    };
    std::vector<Term> terms;
    double factor = 1.0;
};

double marginal(const std::array<double, 8> &pi, unsigned mask) {
    double s = 0.0;
    for (unsigned p = 0; p < 8; ++p) {
        if ((p & mask) == mask) s += pi[p];
    }
    return s;
}

std::optional<double> evaluate(const RatioMetric &m, const std::array<double, 8> &pi) {
    double v = m.factor;
    for (const auto &t : m.terms) {
        const double l = marginal(pi, t.mask);
        if (t.exponent < 0 && l <= 0.0) {
            return std::nullopt;
        }
        v *= std::pow(l, t.exponent);
    }
    return v;
}

/// Delta-method standard error under multinomial sampling of n trials over
/// the click patterns with probabilities pi.
double delta_se(const RatioMetric &m, const std::array<double, 8> &pi, std::uint64_t n) {
    std::array<double, 8> grad{};
    for (std::size_t j = 0; j < m.terms.size(); ++j) {
        double d = m.factor * m.terms[j].exponent * std::pow(marginal(pi, m.terms[j].mask), m.terms[j].exponent - 1);
        for (std::size_t i = 0; i < m.terms.size(); ++i) {
            if (i != j) d *= std::pow(marginal(pi, m.terms[i].mask), m.terms[i].exponent);
        }
        for (unsigned p = 0; p < 8; ++p) {
            if ((p & m.terms[j].mask) == m.terms[j].mask) grad[p] += d;
        }
    }
    double mean = 0.0;
    double second = 0.0;
    for (unsigned p = 0; p < 8; ++p) {
        mean += grad[p] * pi[p];
        second += grad[p] * grad[p] * pi[p];
    }
    const double var = (second - mean * mean) / static_cast<double>(n);
    return std::sqrt(std::max(0.0, var));
}

std::array<double, 8> proportions(const std::array<std::uint64_t, 8> &counts, std::uint64_t n) {
    std::array<double, 8> pi{};
    for (unsigned p = 0; p < 8; ++p) {
        pi[p] = static_cast<double>(counts[p]) / static_cast<double>(n);
    }
    return pi;
}

std::uint64_t marginal_count(const std::array<std::uint64_t, 8> &counts, unsigned mask) {
    std::uint64_t s = 0;
    for (unsigned p = 0; p < 8; ++p) {
        if ((p & mask) == mask) s += counts[p];
    }
    return s;
}

struct MetricSlot {
    const char *name;
    Estimate MetricsWithErrors::*field;
    RatioMetric metric;
};

std::vector<MetricSlot> metric_slots(DetectionMode mode, double eta2) {
    using T = RatioMetric::Term;
    std::vector<MetricSlot> s;
    s.push_back({"p1", &MetricsWithErrors::p1, {{T{kBitD1, 1}}}});
    if (mode == DetectionMode::Single) {
        s.push_back({"p2", &MetricsWithErrors::p2, {{T{kBitF2a, 1}}}});
        s.push_back({"p12", &MetricsWithErrors::p12, {{T{kBitD1 | kBitF2a, 1}}}});
        s.push_back({"g12", &MetricsWithErrors::g12, {{T{kBitD1 | kBitF2a, 1}, T{kBitD1, -1}, T{kBitF2a, -1}}}});
        s.push_back({"pc", &MetricsWithErrors::pc, {{T{kBitD1 | kBitF2a, 1}, T{kBitD1, -1}}}});
        if (eta2 > 0.0) {
            s.push_back({"qc", &MetricsWithErrors::qc, {{T{kBitD1 | kBitF2a, 1}, T{kBitD1, -1}}, 1.0 / eta2}});
        }
        s.push_back({"naive_ratio", &MetricsWithErrors::naive_ratio, {{T{kBitF2a, 1}, T{kBitD1, -1}}}});
    } else {
        s.push_back({"p2a", &MetricsWithErrors::p2a, {{T{kBitF2a, 1}}}});
        s.push_back({"p2b", &MetricsWithErrors::p2b, {{T{kBitF2b, 1}}}});
        s.push_back({"p1_2a", &MetricsWithErrors::p1_2a, {{T{kBitD1 | kBitF2a, 1}}}});
        s.push_back({"p1_2b", &MetricsWithErrors::p1_2b, {{T{kBitD1 | kBitF2b, 1}}}});
        s.push_back({"p2a_2b", &MetricsWithErrors::p2a_2b, {{T{kBitF2a | kBitF2b, 1}}}});
        s.push_back({"p1_2a_2b", &MetricsWithErrors::p1_2a_2b, {{T{0b111, 1}}}});
        s.push_back({"w",
                     &MetricsWithErrors::w,
                     {{T{kBitD1, 1}, T{0b111, 1}, T{kBitD1 | kBitF2a, -1}, T{kBitD1 | kBitF2b, -1}}}});
    }
    return s;
}

}  // namespace

std::array<std::uint64_t, 8> CountTable::patterns() const {
    // Inclusion-exclusion from the "all of these clicked" counts.
    std::array<std::uint64_t, 8> p{};
    const auto n_f2 = mode == DetectionMode::Single ? n2 : n2a;
    const auto n1_f2 = mode == DetectionMode::Single ? n12 : n1_2a;
    p[0b111] = n1_2a_2b;
    p[0b110] = n2a_2b - n1_2a_2b;
    p[0b101] = n1_2b - n1_2a_2b;
    p[0b011] = n1_f2 - n1_2a_2b;
    p[0b001] = n1 - n1_f2 - n1_2b + n1_2a_2b;
    p[0b010] = n_f2 - n1_f2 - n2a_2b + n1_2a_2b;
    p[0b100] = n2b - n1_2b - n2a_2b + n1_2a_2b;
    std::uint64_t used = 0;
    for (unsigned i = 1; i < 8; ++i) used += p[i];
    p[0] = n_trials - used;
    return p;
}

CountTable CountTable::from_patterns(DetectionMode mode, const std::array<std::uint64_t, 8> &patterns) {
    CountTable t;
    t.mode = mode;
    for (auto c : patterns) t.n_trials += c;
    t.n1 = marginal_count(patterns, kBitD1);
    if (mode == DetectionMode::Single) {
        t.n2 = marginal_count(patterns, kBitF2a);
        t.n12 = marginal_count(patterns, kBitD1 | kBitF2a);
    } else {
        t.n2a = marginal_count(patterns, kBitF2a);
        t.n2b = marginal_count(patterns, kBitF2b);
        t.n1_2a = marginal_count(patterns, kBitD1 | kBitF2a);
        t.n1_2b = marginal_count(patterns, kBitD1 | kBitF2b);
        t.n2a_2b = marginal_count(patterns, kBitF2a | kBitF2b);
        t.n1_2a_2b = marginal_count(patterns, 0b111);
    }
    return t;
}

CountTable CountTable::from_click_histogram(DetectionMode mode, const std::array<std::uint64_t, 16> &hist) {
    std::array<std::uint64_t, 8> patterns{};
    for (unsigned set = 0; set < 16; ++set) {
        if (hist[set] == 0) continue;
        unsigned p = 0;
        for (int d = 0; d < kNumDetectorIds; ++d) {
            if (set & (1U << d)) p |= pattern_bit(mode, static_cast<DetectorId>(d));
        }
        patterns[p] += hist[set];
    }
    return from_patterns(mode, patterns);
}

void CountTable::validate() const {
    auto le = [](std::uint64_t a, std::uint64_t b, const char *what) {
        if (a > b) throw std::logic_error(std::string("inconsistent count table: ") + what);
    };
    for (auto c : {n1, n2, n2a, n2b}) le(c, n_trials, "singles exceed n_trials");
    le(n12, std::min(n1, n2), "N12 exceeds a singles count");
    le(n1_2a, std::min(n1, n2a), "N1_2a exceeds a singles count");
    le(n1_2b, std::min(n1, n2b), "N1_2b exceeds a singles count");
    le(n2a_2b, std::min(n2a, n2b), "N2a_2b exceeds a singles count");
    le(n1_2a_2b, std::min({n1_2a, n1_2b, n2a_2b}), "N1_2a_2b exceeds a pair count");
    // Every exclusive pattern count recovered by inclusion-exclusion must
    // be non-negative; otherwise the singles and pairs cannot coexist.
    __extension__ typedef __int128 I;
    const I t = n1_2a_2b;
    const I excl1 = I{n1} - n12 - n1_2a - n1_2b + t;
    const I excl2a = I{n2a} - n1_2a - n2a_2b + t;
    const I excl2b = I{n2b} - n1_2b - n2a_2b + t;
    const I excl2 = I{n2} - n12;
    const I any = I{n1} + n2 + n2a + n2b - n12 - n1_2a - n1_2b - n2a_2b + t;
    if (excl1 < 0 || excl2a < 0 || excl2b < 0 || excl2 < 0 || any > I{n_trials}) {
        throw std::logic_error("inconsistent count table: negative exclusive pattern count");
    }
    if (mode == DetectionMode::Single && (n2a | n2b | n1_2a | n1_2b | n2a_2b | n1_2a_2b) != 0) {
        throw ModeMismatch("split-mode counts in a single-mode table");
    }
    if (mode == DetectionMode::Split && (n2 | n12) != 0) {
        throw ModeMismatch("single-mode counts in a split-mode table");
    }
}

void Accumulator::push(const DetectionRecord &r) {
    const unsigned bit = pattern_bit(table_.mode, r.detector);
    if (current_trial_ && r.trial_index < *current_trial_) {
        throw std::invalid_argument("records are not ordered by trial_index (trial " + std::to_string(r.trial_index) +
                                    " after " + std::to_string(*current_trial_) + ")");
    }
    if (!current_trial_ || r.trial_index != *current_trial_) {
        flush();
        current_trial_ = r.trial_index;
    }
    pattern_ |= bit;
}

void Accumulator::push(std::span<const DetectionRecord> records) {
    for (const auto &r : records) push(r);
}

void Accumulator::flush() {
    const bool d1 = pattern_ & kBitD1;
    const bool a = pattern_ & kBitF2a;
    const bool b = pattern_ & kBitF2b;
    auto &t = table_;
    t.n1 += d1;
    if (t.mode == DetectionMode::Single) {
        t.n2 += a;
        t.n12 += d1 && a;
    } else {
        t.n2a += a;
        t.n2b += b;
        t.n1_2a += d1 && a;
        t.n1_2b += d1 && b;
        t.n2a_2b += a && b;
        t.n1_2a_2b += d1 && a && b;
    }
    pattern_ = 0;
}

CountTable Accumulator::finish() {
    flush();
    current_trial_.reset();
    return table_;
}

CountTable accumulate(CountTable table, std::span<const DetectionRecord> records) {
    Accumulator acc(table);
    acc.push(records);
    return acc.finish();
}

CountTable merge(const CountTable &a, const CountTable &b) {
    if (a.mode != b.mode) {
        throw ModeMismatch("cannot merge single-mode and split-mode tables");
    }
    CountTable t = a;
    t.n_trials += b.n_trials;
    t.n1 += b.n1;
    t.n2 += b.n2;
    t.n2a += b.n2a;
    t.n2b += b.n2b;
    t.n12 += b.n12;
    t.n1_2a += b.n1_2a;
    t.n1_2b += b.n1_2b;
    t.n2a_2b += b.n2a_2b;
    t.n1_2a_2b += b.n1_2a_2b;
    return t;
}

ErrorMethod error_method_from_string(std::string_view s) {
    if (s == "delta") return ErrorMethod::Delta;
    if (s == "bootstrap") return ErrorMethod::Bootstrap;
    throw ConfigError("error-method", "expected 'delta' or 'bootstrap', got '" + std::string(s) + "'");
}

std::string_view to_string(ErrorMethod m) { return m == ErrorMethod::Delta ? "delta" : "bootstrap"; }

std::vector<std::pair<std::string, const Estimate *>> MetricsWithErrors::named() const {
    std::vector<std::pair<std::string, const Estimate *>> out;
    for (const auto &slot : metric_slots(mode, 1.0)) {
        out.emplace_back(slot.name, &(this->*slot.field));
    }
    return out;
}

KeyValueDoc MetricsWithErrors::to_doc() const {
    KeyValueDoc doc;
    doc.set("mode", std::string(to_string(mode)));
    doc.set("n_trials", n_trials);
    doc.set("error_method", std::string(to_string(method)));
    if (method == ErrorMethod::Bootstrap) {
        doc.set("bootstrap_replicates", std::uint64_t{replicates});
    }
    for (const auto &[name, e] : named()) {
        doc.set(name, e->value ? format_double(*e->value) : std::string("undefined"));
        doc.set(name + "_se", e->value ? format_double(e->se) : std::string("undefined"));
        if (e->low_count) {
            doc.set(name + "_low_count", std::string("1"));
        }
    }
    doc.set("warnings", std::to_string(warnings.size()));
    for (std::size_t i = 0; i < warnings.size(); ++i) {
        doc.set("warning_" + std::to_string(i), warnings[i]);
    }
    return doc;
}

MetricsWithErrors estimate_metrics(const CountTable &table, double eta2, const EstimateOptions &options) {
    if (table.n_trials == 0) {
        throw std::invalid_argument("estimate_metrics: table has no trials");
    }
    table.validate();

    MetricsWithErrors out;
    out.mode = table.mode;
    out.n_trials = table.n_trials;
    out.method = options.method;

    const auto counts = table.patterns();
    const auto pi = proportions(counts, table.n_trials);
    const auto slots = metric_slots(table.mode, eta2);

    for (const auto &slot : slots) {
        Estimate &e = out.*slot.field;
        e.value = evaluate(slot.metric, pi);
        for (const auto &t : slot.metric.terms) {
            if (marginal_count(counts, t.mask) < kLowCountThreshold) e.low_count = true;
        }
        if (!e.value) {
            out.warnings.push_back(std::string(slot.name) + ": undefined (zero denominator count)");
        } else if (e.low_count) {
            out.warnings.push_back(std::string(slot.name) + ": a contributing count is below " +
                                   std::to_string(kLowCountThreshold) + ", error bar unreliable");
        }
        if (e.value && options.method == ErrorMethod::Delta) {
            e.se = delta_se(slot.metric, pi, table.n_trials);
        }
    }

    if (options.method == ErrorMethod::Bootstrap) {
        // Whole-trial resampling is multinomial resampling of the pattern
        // counts, which keeps every intra-trial correlation.
        out.replicates = options.bootstrap_replicates;
        std::mt19937_64 rng(options.bootstrap_seed);
        std::vector<double> sum(slots.size(), 0.0), sum_sq(slots.size(), 0.0);
        std::vector<std::uint64_t> used(slots.size(), 0);
        for (unsigned r = 0; r < options.bootstrap_replicates; ++r) {
            std::array<std::uint64_t, 8> draw{};
            std::uint64_t left = table.n_trials;
            double mass_left = 1.0;
            for (unsigned p = 0; p < 8 && left > 0; ++p) {
                if (p == 7 || mass_left <= 0.0) {
                    draw[p] = left;
                    break;
                }
                const double q = std::clamp(pi[p] / mass_left, 0.0, 1.0);
                std::binomial_distribution<std::uint64_t> bin(left, q);
                draw[p] = bin(rng);
                left -= draw[p];
                mass_left -= pi[p];
            }
            const auto rpi = proportions(draw, table.n_trials);
            for (std::size_t k = 0; k < slots.size(); ++k) {
                if (auto v = evaluate(slots[k].metric, rpi)) {
                    sum[k] += *v;
                    sum_sq[k] += *v * *v;
                    ++used[k];
                }
            }
        }
        for (std::size_t k = 0; k < slots.size(); ++k) {
            Estimate &e = out.*slots[k].field;
            if (e.value && used[k] > 1) {
                const double m = sum[k] / static_cast<double>(used[k]);
                const double var = (sum_sq[k] - static_cast<double>(used[k]) * m * m) / static_cast<double>(used[k] - 1);
                e.se = std::sqrt(std::max(0.0, var));
            }
        }
    }
    return out;
}

std::string count_table_csv(const CountTable &t) {
    std::string s = "mode,n_trials,N1,N2,N2a,N2b,N12,N1_2a,N1_2b,N2a_2b,N1_2a_2b\n";
    s += std::string(to_string(t.mode));
    for (auto c : {t.n_trials, t.n1, t.n2, t.n2a, t.n2b, t.n12, t.n1_2a, t.n1_2b, t.n2a_2b, t.n1_2a_2b}) {
        s += ',';
        s += std::to_string(c);
    }
    s += '\n';
    return s;
}

}  // namespace dlcz
