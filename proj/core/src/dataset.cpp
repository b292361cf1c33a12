// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlcz/dataset.hpp"

#include <algorithm>
#include <array>
#include <fstream>
#include <sstream>

#include "dlcz/errors.hpp"
#include "dlcz/keyvalue.hpp"

namespace dlcz {

namespace {

constexpr std::array<std::string_view, 11> kColumns = {"p1",  "p1_se",  "g12", "g12_se", "qc",   "qc_se",
                                                       "p12", "p12_se", "w",   "w_se",   "flags"};

std::vector<std::string_view> split_commas(std::string_view line) {
    std::vector<std::string_view> out;
    std::size_t start = 0;
    while (true) {
        auto c = line.find(',', start);
        out.push_back(line.substr(start, c == std::string_view::npos ? std::string_view::npos : c - start));
        if (c == std::string_view::npos) break;
        start = c + 1;
    }
    return out;
}

std::string_view strip(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) s.remove_suffix(1);
    return s;
}

std::string cell(double v) { return format_double(v); }

}  // namespace

bool DataPoint::has_flag(std::string_view flag) const {
    std::string_view rest = flags;
    while (!rest.empty()) {
        auto sep = rest.find(';');
        if (strip(rest.substr(0, sep)) == flag) return true;
        if (sep == std::string_view::npos) break;
        rest = rest.substr(sep + 1);
    }
    return false;
}

Dataset Dataset::from_csv(std::string_view text) {
    std::istringstream in{std::string(text)};
    std::string line;
    if (!std::getline(in, line)) {
        throw ConfigError("p1", "empty dataset, header missing");
    }
    std::array<int, kColumns.size()> col{};
    col.fill(-1);
    const auto header = split_commas(strip(line));
    for (std::size_t i = 0; i < header.size(); ++i) {
        const auto name = strip(header[i]);
        auto it = std::find(kColumns.begin(), kColumns.end(), name);
        if (it == kColumns.end()) {
            throw ConfigError(std::string(name), "unknown dataset column");
        }
        auto k = static_cast<std::size_t>(it - kColumns.begin());
        if (col[k] >= 0) {
            throw ConfigError(std::string(name), "duplicate dataset column");
        }
        col[k] = static_cast<int>(i);
    }
    if (col[0] < 0) {
        throw ConfigError("p1", "required dataset column missing");
    }
    for (std::size_t k = 2; k + 1 < kColumns.size(); k += 2) {
        if ((col[k] >= 0) != (col[k + 1] >= 0)) {
            const auto missing = col[k] >= 0 ? kColumns[k + 1] : kColumns[k];
            throw ConfigError(std::string(missing), "column must come in a value/_se pair");
        }
    }

    Dataset ds;
    std::uint64_t line_no = 1;
    while (std::getline(in, line)) {
        ++line_no;
        if (strip(line).empty()) continue;
        const auto cells = split_commas(line);
        if (cells.size() != header.size()) {
            throw FormatError(line_no, "expected " + std::to_string(header.size()) + " cells");
        }
        auto number = [&](std::size_t k) -> std::optional<double> {
            if (col[k] < 0) return std::nullopt;
            const auto raw = strip(cells[static_cast<std::size_t>(col[k])]);
            if (raw.empty()) return std::nullopt;
            auto v = parse_double(raw);
            if (!v) throw FormatError(line_no, "column " + std::string(kColumns[k]) + ": bad number");
            return v;
        };
        DataPoint pt;
        auto p1 = number(0);
        if (!p1 || !(*p1 > 0.0 && *p1 < 1.0)) {
            throw FormatError(line_no, "column p1: value must lie in (0, 1)");
        }
        pt.p1 = *p1;
        pt.p1_se = number(1).value_or(0.0);
        std::array<std::optional<Observation> *, 4> obs = {&pt.g12, &pt.qc, &pt.p12, &pt.w};
        for (std::size_t j = 0; j < obs.size(); ++j) {
            const std::size_t k = 2 + 2 * j;
            auto v = number(k);
            auto se = number(k + 1);
            if (v.has_value() != se.has_value()) {
                throw FormatError(line_no, "column " + std::string(kColumns[k]) + ": value and SE must both be set");
            }
            if (v) {
                if (!(*se > 0.0)) {
                    throw FormatError(line_no, "column " + std::string(kColumns[k + 1]) + ": SE must be positive");
                }
                *obs[j] = Observation{*v, *se};
            }
        }
        if (col[10] >= 0) {
            pt.flags = std::string(strip(cells[static_cast<std::size_t>(col[10])]));
        }
        ds.points.push_back(std::move(pt));
    }
    return ds;
}

Dataset Dataset::load(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(0, "cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return from_csv(ss.str());
}

std::string Dataset::to_csv() const {
    std::string s = "p1,p1_se,g12,g12_se,qc,qc_se,p12,p12_se,w,w_se,flags\n";
    for (const auto &p : points) {
        s += cell(p.p1) + ',' + cell(p.p1_se);
        for (const auto *o : {&p.g12, &p.qc, &p.p12, &p.w}) {
            s += ',';
            if (*o) s += cell((*o)->value) + ',' + cell((*o)->se);
            else s += ',';
        }
        s += ',' + p.flags + '\n';
    }
    return s;
}

std::size_t Dataset::observation_count() const {
    std::size_t n = 0;
    for (const auto &p : points) {
        n += p.g12.has_value() + p.qc.has_value() + p.p12.has_value() + p.w.has_value();
    }
    return n;
}

bool Dataset::any_trap_off() const {
    return std::any_of(points.begin(), points.end(), [](const DataPoint &p) { return p.trap_off(); });
}

}  // namespace dlcz
