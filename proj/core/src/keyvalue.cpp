// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlcz/keyvalue.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "dlcz/errors.hpp"

namespace dlcz {

namespace {

std::string_view trim(std::string_view s) {
    while (!s.empty() && (s.front() == ' ' || s.front() == '\t' || s.front() == '\r')) {
        s.remove_prefix(1);
    }
    while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
        s.remove_suffix(1);
    }
    return s;
}

}  // namespace

std::string format_double(double v) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "%.17g", v);
    return buf;
}

std::optional<double> parse_double(std::string_view s) {
    s = trim(s);
    if (s.empty()) {
        return std::nullopt;
    }
    // std::from_chars rejects a leading '+', strtod-style inputs allow it.
    if (s.front() == '+') {
        s.remove_prefix(1);
    }
    double v = 0;
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
    if (ec != std::errc() || ptr != s.data() + s.size() || !std::isfinite(v)) {
        return std::nullopt;
    }
    return v;
}

KeyValueDoc KeyValueDoc::parse(std::string_view text) {
    KeyValueDoc doc;
    std::uint64_t line_no = 0;
    while (!text.empty()) {
        ++line_no;
        auto nl = text.find('\n');
        std::string_view line = text.substr(0, nl);
        text = nl == std::string_view::npos ? std::string_view{} : text.substr(nl + 1);

        if (auto hash = line.find('#'); hash != std::string_view::npos) {
            line = line.substr(0, hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        auto eq = line.find('=');
        if (eq == std::string_view::npos) {
            throw FormatError(line_no, "expected 'key = value'");
        }
        std::string key{trim(line.substr(0, eq))};
        std::string value{trim(line.substr(eq + 1))};
        if (key.empty()) {
            throw FormatError(line_no, "empty key");
        }
        if (doc.contains(key)) {
            throw ConfigError(key, "duplicate key");
        }
        doc.entries_.emplace_back(std::move(key), std::move(value));
    }
    return doc;
}

KeyValueDoc KeyValueDoc::load(const std::string &path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(0, "cannot open '" + path + "'");
    }
    std::ostringstream ss;
    ss << in.rdbuf();
    return parse(ss.str());
}

void KeyValueDoc::set(const std::string &key, std::string value) {
    for (auto &[k, v] : entries_) {
        if (k == key) {
            v = std::move(value);
            return;
        }
    }
    entries_.emplace_back(key, std::move(value));
}

void KeyValueDoc::set(const std::string &key, double value) { set(key, format_double(value)); }

void KeyValueDoc::set(const std::string &key, std::uint64_t value) { set(key, std::to_string(value)); }

bool KeyValueDoc::contains(std::string_view key) const { return get(key).has_value(); }

std::optional<std::string> KeyValueDoc::get(std::string_view key) const {
    for (const auto &[k, v] : entries_) {
        if (k == key) {
            return v;
        }
    }
    return std::nullopt;
}

std::optional<double> KeyValueDoc::get_double(std::string_view key) const {
    auto raw = get(key);
    if (!raw) {
        return std::nullopt;
    }
    auto v = parse_double(*raw);
    if (!v) {
        throw ConfigError(std::string(key), "not a finite number: '" + *raw + "'");
    }
    return v;
}

std::optional<std::uint64_t> KeyValueDoc::get_uint(std::string_view key) const {
    auto raw = get(key);
    if (!raw) {
        return std::nullopt;
    }
    std::uint64_t v = 0;
    auto [ptr, ec] = std::from_chars(raw->data(), raw->data() + raw->size(), v);
    if (ec != std::errc() || ptr != raw->data() + raw->size()) {
        throw ConfigError(std::string(key), "not a non-negative integer: '" + *raw + "'");
    }
    return v;
}

std::string KeyValueDoc::to_string() const {
    std::string out;
    for (const auto &[k, v] : entries_) {
        out += k;
        out += " = ";
        out += v;
        out += '\n';
    }
    return out;
}

void KeyValueDoc::save(const std::string &path) const {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    auto text = to_string();
    out.write(text.data(), static_cast<std::streamsize>(text.size()));
    out.flush();
    if (!out) {
        throw IoError(0, "cannot write '" + path + "'");
    }
}

}  // namespace dlcz
