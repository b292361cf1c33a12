// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "dlcz/event_sim.hpp"

namespace dlcz {

/// On-disk record formats.
///
/// Binary ("PDR1"), all integers little-endian:
///   bytes 0-3   magic "PDR1"
///   bytes 4-7   uint32 version = 1
///   bytes 8-15  uint64 record count
///   then count x 13-byte records: uint64 trial_index, uint8 detector_id,
///   uint32 offset_ns.
///
/// CSV: header `trial_index,detector,offset_ns`, one record per line with
/// the detector written as D1, D2, D2a or D2b.
enum class RecordFormat { Binary, Csv };

inline constexpr std::uint32_t kRecordFormatVersion = 1;
inline constexpr std::size_t kBinaryHeaderBytes = 16;
inline constexpr std::size_t kBinaryRecordBytes = 13;

RecordFormat record_format_from_string(std::string_view s);

/// Writes the records to `sink` and returns the byte count. Throws IoError
/// carrying the number of bytes known to be written if the sink fails.
std::uint64_t write_records(std::span<const DetectionRecord> records, std::ostream &sink, RecordFormat format);

/// Parses a record file. Throws FormatError with the byte offset of the
/// first bad byte (binary) or of the offending line (CSV).
std::vector<DetectionRecord> read_records(std::istream &source, RecordFormat format);

/// File helpers. `read_records_file` detects the format from the magic.
std::uint64_t write_records_file(std::span<const DetectionRecord> records, const std::string &path, RecordFormat format);
std::vector<DetectionRecord> read_records_file(const std::string &path, RecordFormat *detected = nullptr);

}  // namespace dlcz
