// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include "dlcz/record_io.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <fstream>
#include <istream>
#include <iterator>
#include <ostream>
#include <string_view>

#include "dlcz/errors.hpp"

namespace dlcz {

namespace {

constexpr std::array<char, 4> kMagic = {'P', 'D', 'R', '1'};
constexpr std::string_view kCsvHeader = "trial_index,detector,offset_ns";
constexpr std::size_t kFlushBytes = 1 << 16;

template <typename T>
void put_le(std::string &buf, T v) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        buf.push_back(static_cast<char>((static_cast<std::uint64_t>(v) >> (8 * i)) & 0xFF));
    }
}

template <typename T>
T get_le(const unsigned char *p) {
    std::uint64_t v = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
        v |= static_cast<std::uint64_t>(p[i]) << (8 * i);
    }
    return static_cast<T>(v);
}

/// Buffered writer that tracks how many bytes reached the sink.
class SinkWriter {
  public:
    explicit SinkWriter(std::ostream &sink) : sink_(sink) { buf_.reserve(kFlushBytes + 64); }

    std::string &buffer() { return buf_; }

    void maybe_flush() {
        if (buf_.size() >= kFlushBytes) {
            flush();
        }
    }

    std::uint64_t finish() {
        flush();
        sink_.flush();
        if (!sink_) {
            throw IoError(written_, "record sink failed");
        }
        return written_;
    }

  private:
    void flush() {
        if (buf_.empty()) {
            return;
        }
        sink_.write(buf_.data(), static_cast<std::streamsize>(buf_.size()));
        if (!sink_) {
            throw IoError(written_, "record sink failed");
        }
        written_ += buf_.size();
        buf_.clear();
    }

    std::ostream &sink_;
    std::string buf_;
    std::uint64_t written_ = 0;
};

std::vector<DetectionRecord> read_binary(std::string_view data) {
    const auto *bytes = reinterpret_cast<const unsigned char *>(data.data());
    if (data.size() < kMagic.size() || !std::equal(kMagic.begin(), kMagic.end(), data.begin())) {
        throw FormatError(0, "bad magic, expected PDR1");
    }
    if (data.size() < kBinaryHeaderBytes) {
        throw FormatError(data.size(), "truncated header");
    }
    const auto version = get_le<std::uint32_t>(bytes + 4);
    if (version != kRecordFormatVersion) {
        throw FormatError(4, "unsupported version " + std::to_string(version));
    }
    const auto count = get_le<std::uint64_t>(bytes + 8);
    const std::uint64_t available = (data.size() - kBinaryHeaderBytes) / kBinaryRecordBytes;
    if (count > available) {
        throw FormatError(kBinaryHeaderBytes + available * kBinaryRecordBytes, "truncated record");
    }
    const std::uint64_t expected_size = kBinaryHeaderBytes + count * kBinaryRecordBytes;
    if (data.size() != expected_size) {
        throw FormatError(expected_size, "trailing bytes after last record");
    }

    std::vector<DetectionRecord> out;
    out.reserve(count);
    for (std::uint64_t i = 0; i < count; ++i) {
        const std::uint64_t at = kBinaryHeaderBytes + i * kBinaryRecordBytes;
        const unsigned char *p = bytes + at;
        const unsigned det = p[8];
        if (det >= kNumDetectorIds) {
            throw FormatError(at + 8, "invalid detector id " + std::to_string(det));
        }
        out.push_back({get_le<std::uint64_t>(p), static_cast<DetectorId>(det), get_le<std::uint32_t>(p + 9)});
    }
    return out;
}

template <typename T>
bool parse_uint(std::string_view s, T &out) {
    auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), out);
    return ec == std::errc() && ptr == s.data() + s.size() && !s.empty();
}

std::vector<DetectionRecord> read_csv(std::string_view data) {
    std::vector<DetectionRecord> out;
    std::uint64_t pos = 0;
    bool header = true;
    while (pos < data.size()) {
        const std::uint64_t line_start = pos;
        auto nl = data.find('\n', pos);
        std::string_view line = data.substr(pos, nl == std::string_view::npos ? std::string_view::npos : nl - pos);
        pos = nl == std::string_view::npos ? data.size() : nl + 1;
        if (!line.empty() && line.back() == '\r') {
            line.remove_suffix(1);
        }
        if (header) {
            if (line != kCsvHeader) {
                throw FormatError(line_start, "bad CSV header, expected '" + std::string(kCsvHeader) + "'");
            }
            header = false;
            continue;
        }
        if (line.empty()) {
            continue;
        }
        const auto c1 = line.find(',');
        const auto c2 = c1 == std::string_view::npos ? c1 : line.find(',', c1 + 1);
        if (c2 == std::string_view::npos || line.find(',', c2 + 1) != std::string_view::npos) {
            throw FormatError(line_start, "expected 3 fields");
        }
        DetectionRecord r;
        if (!parse_uint(line.substr(0, c1), r.trial_index)) {
            throw FormatError(line_start, "bad trial_index");
        }
        if (!detector_from_string(line.substr(c1 + 1, c2 - c1 - 1), r.detector)) {
            throw FormatError(line_start, "bad detector name");
        }
        if (!parse_uint(line.substr(c2 + 1), r.offset_ns)) {
            throw FormatError(line_start, "bad offset_ns");
        }
        out.push_back(r);
    }
    if (header) {
        throw FormatError(0, "missing CSV header");
    }
    return out;
}

std::string slurp(std::istream &in) { return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()}; }

}  // namespace

RecordFormat record_format_from_string(std::string_view s) {
    if (s == "bin" || s == "binary") return RecordFormat::Binary;
    if (s == "csv") return RecordFormat::Csv;
    throw ConfigError("format", "expected 'bin' or 'csv', got '" + std::string(s) + "'");
}

std::uint64_t write_records(std::span<const DetectionRecord> records, std::ostream &sink, RecordFormat format) {
    SinkWriter w(sink);
    std::string &buf = w.buffer();
    if (format == RecordFormat::Binary) {
        buf.append(kMagic.data(), kMagic.size());
        put_le<std::uint32_t>(buf, kRecordFormatVersion);
        put_le<std::uint64_t>(buf, records.size());
        for (const auto &r : records) {
            put_le<std::uint64_t>(buf, r.trial_index);
            put_le<std::uint8_t>(buf, static_cast<std::uint8_t>(r.detector));
            put_le<std::uint32_t>(buf, r.offset_ns);
            w.maybe_flush();
        }
    } else {
        buf.append(kCsvHeader);
        buf.push_back('\n');
        for (const auto &r : records) {
            buf += std::to_string(r.trial_index);
            buf.push_back(',');
            buf += to_string(r.detector);
            buf.push_back(',');
            buf += std::to_string(r.offset_ns);
            buf.push_back('\n');
            w.maybe_flush();
        }
    }
    return w.finish();
}

std::vector<DetectionRecord> read_records(std::istream &source, RecordFormat format) {
    const std::string data = slurp(source);
    if (source.bad()) {
        throw IoError(data.size(), "record source failed");
    }
    return format == RecordFormat::Binary ? read_binary(data) : read_csv(data);
}

std::uint64_t write_records_file(std::span<const DetectionRecord> records, const std::string &path, RecordFormat format) {
    std::ofstream out(path, std::ios::binary | std::ios::trunc);
    if (!out) {
        throw IoError(0, "cannot open '" + path + "' for writing");
    }
    return write_records(records, out, format);
}

std::vector<DetectionRecord> read_records_file(const std::string &path, RecordFormat *detected) {
    std::ifstream in(path, std::ios::binary);
    if (!in) {
        throw IoError(0, "cannot open '" + path + "'");
    }
    const std::string data = slurp(in);
    const bool binary = data.size() >= kMagic.size() && std::equal(kMagic.begin(), kMagic.end(), data.begin());
    const bool csv = data.starts_with(kCsvHeader);
    if (!binary && !csv) {
        throw FormatError(0, "unrecognized record file (neither PDR1 magic nor CSV header)");
    }
    if (detected != nullptr) {
        *detected = binary ? RecordFormat::Binary : RecordFormat::Csv;
    }
    return binary ? read_binary(data) : read_csv(data);
}

}  // namespace dlcz
