// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace dlcz {

/// Flat `key = value` text document. Blank lines and `#` comments are
/// ignored on input; entries keep their insertion order on output.
class KeyValueDoc {
  public:
    static KeyValueDoc parse(std::string_view text);
    static KeyValueDoc load(const std::string &path);

    void set(const std::string &key, std::string value);
    void set(const std::string &key, double value);
    void set(const std::string &key, std::uint64_t value);

    bool contains(std::string_view key) const;
    std::optional<std::string> get(std::string_view key) const;

    /// Numeric lookup; throws ConfigError naming `key` if the value does not
    /// parse as a finite number.
    std::optional<double> get_double(std::string_view key) const;
    std::optional<std::uint64_t> get_uint(std::string_view key) const;

    const std::vector<std::pair<std::string, std::string>> &entries() const { return entries_; }

    std::string to_string() const;
    void save(const std::string &path) const;

  private:
    std::vector<std::pair<std::string, std::string>> entries_;
};

/// Shortest round-trippable decimal form of `v` (`%.17g`).
std::string format_double(double v);

/// Strict full-string parse; nullopt on trailing garbage or non-finite.
std::optional<double> parse_double(std::string_view s);

}  // namespace dlcz
