// Copyright 2026 The dlcz Authors
// SPDX-License-Identifier: Apache-2.0

#include <gtest/gtest.h>

#include <cstring>
#include <fstream>
#include <random>
#include <sstream>

#include "dlcz/errors.hpp"
#include "dlcz/record_io.hpp"
#include "test_support.hpp"

namespace dlcz {
namespace {

std::vector<DetectionRecord> random_records(std::size_t n, std::uint64_t seed) {
    std::mt19937_64 rng(seed);
    std::vector<DetectionRecord> out(n);
    std::uint64_t trial = 0;
    for (auto &r : out) {
        trial += rng() % 3;
        r.trial_index = trial;
        r.detector = static_cast<DetectorId>(rng() % 4);
        r.offset_ns = static_cast<std::uint32_t>(rng());
    }
    return out;
}

std::string to_bytes(std::span<const DetectionRecord> records, RecordFormat f) {
    std::ostringstream out;
    write_records(records, out, f);
    return out.str();
}

std::vector<DetectionRecord> from_bytes(const std::string &bytes, RecordFormat f) {
    std::istringstream in(bytes);
    return read_records(in, f);
}

TEST(RecordIo, EmptyBinaryIsHeaderOnly) {
    const std::string bytes = to_bytes({}, RecordFormat::Binary);
    ASSERT_EQ(bytes.size(), 16u);
    EXPECT_EQ(bytes.substr(0, 4), "PDR1");
    EXPECT_EQ(bytes[4], 1);
    EXPECT_TRUE(from_bytes(bytes, RecordFormat::Binary).empty());
}

TEST(RecordIo, BinaryLayoutIsLittleEndian) {
    const DetectionRecord r{0x0102030405060708ULL, DetectorId::D2b, 0xA0B0C0D0U};
    const std::string bytes = to_bytes(std::span(&r, 1), RecordFormat::Binary);
    ASSERT_EQ(bytes.size(), 16u + 13u);
    const unsigned char expected[] = {'P', 'D', 'R', '1', 1, 0, 0, 0, 1, 0, 0, 0, 0, 0, 0, 0,
                                      8, 7, 6, 5, 4, 3, 2, 1, 3, 0xD0, 0xC0, 0xB0, 0xA0};
    EXPECT_EQ(std::memcmp(bytes.data(), expected, sizeof expected), 0);
}

TEST(RecordIo, CsvLine) {
    const DetectionRecord r{5, DetectorId::D2a, 300};
    EXPECT_EQ(to_bytes(std::span(&r, 1), RecordFormat::Csv), "trial_index,detector,offset_ns\n5,D2a,300\n");
}

TEST(RecordIo, RoundTrip100k) {
    const auto records = random_records(100000, 1);
    for (auto f : {RecordFormat::Binary, RecordFormat::Csv}) {
        EXPECT_EQ(from_bytes(to_bytes(records, f), f), records);
    }
}

TEST(RecordIo, ByteCountMatches) {
    const auto records = random_records(1234, 2);
    std::ostringstream out;
    EXPECT_EQ(write_records(records, out, RecordFormat::Binary), 16u + 13u * 1234u);
    std::ostringstream csv;
    const auto written = write_records(records, csv, RecordFormat::Csv);
    EXPECT_EQ(written, csv.str().size());
}

std::uint64_t format_error_offset(const std::string &bytes, RecordFormat f) {
    try {
        from_bytes(bytes, f);
    } catch (const FormatError &e) {
        return e.offset();
    }
    ADD_FAILURE() << "no FormatError";
    return ~0ULL;
}

TEST(RecordIo, CorruptBinaryReportsOffset) {
    const auto records = random_records(3, 3);
    std::string good = to_bytes(records, RecordFormat::Binary);

    std::string bad_magic = good;
    bad_magic[0] = 'X';
    EXPECT_EQ(format_error_offset(bad_magic, RecordFormat::Binary), 0u);

    std::string bad_version = good;
    bad_version[4] = 2;
    EXPECT_EQ(format_error_offset(bad_version, RecordFormat::Binary), 4u);

    EXPECT_EQ(format_error_offset(good.substr(0, 16 + 13 + 5), RecordFormat::Binary), 16u + 13u);
    EXPECT_EQ(format_error_offset(good.substr(0, 10), RecordFormat::Binary), 10u);
    EXPECT_EQ(format_error_offset(good + "zz", RecordFormat::Binary), good.size());

    std::string bad_id = good;
    bad_id[16 + 13 + 8] = 9;
    EXPECT_EQ(format_error_offset(bad_id, RecordFormat::Binary), 16u + 13u + 8u);
}

TEST(RecordIo, CorruptCsvReportsOffset) {
    const std::string header = "trial_index,detector,offset_ns\n";
    const std::string line1 = "1,D1,0\n";
    EXPECT_EQ(format_error_offset(header + line1 + "2,D9,300\n", RecordFormat::Csv), header.size() + line1.size());
    EXPECT_EQ(format_error_offset("a,b,c\n", RecordFormat::Csv), 0u);
    EXPECT_EQ(format_error_offset(header + "x,D1,0\n", RecordFormat::Csv), header.size());
}

TEST(RecordIo, FileDetectsFormat) {
    test::ScratchDir dir("record_io");
    const auto records = random_records(500, 4);
    RecordFormat detected{};
    write_records_file(records, dir.file("a.bin"), RecordFormat::Binary);
    EXPECT_EQ(read_records_file(dir.file("a.bin"), &detected), records);
    EXPECT_EQ(detected, RecordFormat::Binary);
    write_records_file(records, dir.file("a.csv"), RecordFormat::Csv);
    EXPECT_EQ(read_records_file(dir.file("a.csv"), &detected), records);
    EXPECT_EQ(detected, RecordFormat::Csv);
    EXPECT_THROW(read_records_file(dir.file("missing.bin")), IoError);
}

TEST(RecordIo, FailingSinkReportsPosition) {
    const auto records = random_records(10, 5);
    std::ostringstream out;
    out.setstate(std::ios::badbit);
    try {
        write_records(records, out, RecordFormat::Binary);
        FAIL();
    } catch (const IoError &e) {
        EXPECT_EQ(e.position(), 0u);
    }
}

TEST(RecordIo, FormatNames) {
    EXPECT_EQ(record_format_from_string("bin"), RecordFormat::Binary);
    EXPECT_EQ(record_format_from_string("csv"), RecordFormat::Csv);
    EXPECT_THROW(record_format_from_string("xml"), ConfigError);
}

}  // namespace
}  // namespace dlcz
