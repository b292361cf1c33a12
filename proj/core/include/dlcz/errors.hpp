// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>

namespace dlcz {

/// Invalid parameter or configuration value. `key()` names the offending
/// entry so command-line tools can point at it.
class ConfigError : public std::invalid_argument {
  public:
    ConfigError(std::string key, const std::string &what)
        : std::invalid_argument(key.empty() ? what : key + ": " + what), key_(std::move(key)) {}

    const std::string &key() const noexcept { return key_; }

  private:
    std::string key_;
};

/// Malformed record or table input. `offset()` is the byte offset (binary
/// input) or line number (text input) where parsing stopped.
class FormatError : public std::runtime_error {
  public:
    FormatError(std::uint64_t offset, const std::string &what)
        : std::runtime_error(what + " (at offset " + std::to_string(offset) + ")"), offset_(offset) {}

    std::uint64_t offset() const noexcept { return offset_; }

  private:
    std::uint64_t offset_;
};

/// Sink or source failure. `position()` is the number of bytes successfully
/// transferred before the failure.
class IoError : public std::runtime_error {
  public:
    IoError(std::uint64_t position, const std::string &what)
        : std::runtime_error(what + " (after " + std::to_string(position) + " bytes)"), position_(position) {}

    std::uint64_t position() const noexcept { return position_; }

  private:
    std::uint64_t position_;
};

/// Detection-mode mismatch between records, tables, or statistics.
class ModeMismatch : public std::logic_error {
  public:
    using std::logic_error::logic_error;
};

}  // namespace dlcz
