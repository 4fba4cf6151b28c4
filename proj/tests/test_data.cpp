#include <gtest/gtest.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <set>

#include "bassl/data.hpp"
#include "bassl/errors.hpp"
#include "bassl/eval.hpp"
#include "bassl/model.hpp"
#include "bassl/rng.hpp"

using namespace bassl;

namespace {

// Two hand-built records: label 3 with pixel byte i % 256, label 9 with
// byte (7 * i + 11) % 256.
std::vector<std::uint8_t> two_record_fixture() {
    std::vector<std::uint8_t> bytes;
    bytes.push_back(3);
    for (std::size_t i = 0; i < 3072; ++i) bytes.push_back(static_cast<std::uint8_t>(i % 256));
    bytes.push_back(9);
    for (std::size_t i = 0; i < 3072; ++i) bytes.push_back(static_cast<std::uint8_t>((7 * i + 11) % 256));
    return bytes;
}

std::filesystem::path temp_file(const std::string& name, const std::vector<std::uint8_t>& bytes) {
    const auto path = std::filesystem::temp_directory_path() / name;
    std::ofstream f(path, std::ios::binary);
    f.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    return path;
}

}  // namespace

TEST(Synthetic, ShapesAndBalance) {
    const LabeledImageSet s = make_synthetic(5, 1);
    EXPECT_EQ(s.images.shape(), (Shape{10, 3, 32, 32}));
    EXPECT_EQ(s.classes, 2u);
    EXPECT_EQ(std::count(s.labels.begin(), s.labels.end(), 0u), 5);
    EXPECT_EQ(std::count(s.labels.begin(), s.labels.end(), 1u), 5);
    EXPECT_EQ(s.labels.front(), 0u);
    EXPECT_EQ(s.labels.back(), 1u);
    for (double v : s.images.values()) {
        EXPECT_GE(v, 0.0);
        EXPECT_LE(v, 1.0);
    }
    EXPECT_EQ(make_synthetic(2, 1, 16).images.shape(), (Shape{4, 3, 16, 16}));
}

TEST(Synthetic, Deterministic) {
    const LabeledImageSet a = make_synthetic(4, 9), b = make_synthetic(4, 9), c = make_synthetic(4, 10);
    EXPECT_EQ(a.images, b.images);
    EXPECT_EQ(a.labels, b.labels);
    EXPECT_NE(a.images, c.images);
}

TEST(Synthetic, RawPixelsAreLinearlyProbeable) {
    const LabeledImageSet s = make_synthetic(128, 21);
    const Tensor flat = s.images.reshaped({s.size(), 3 * 32 * 32});
    const ProbeResult r = linear_probe(flat, s.labels, s.classes, ProbeOptions{});
    EXPECT_GE(r.top1, 0.8);
}

TEST(Cifar, TwoRecordFixture) {
    const auto bytes = two_record_fixture();
    const LabeledImageSet s = parse_cifar10_binary(bytes);
    ASSERT_EQ(s.images.shape(), (Shape{2, 3, 32, 32}));
    EXPECT_EQ(s.labels, (std::vector<std::size_t>{3, 9}));
    EXPECT_EQ(s.classes, 10u);
    for (std::size_t c = 0; c < 3; ++c)
        for (std::size_t y = 0; y < 32; ++y)
            for (std::size_t x = 0; x < 32; ++x) {
                const std::size_t i = c * 1024 + y * 32 + x;
                EXPECT_EQ(s.images.at({0, c, y, x}), static_cast<double>(i % 256) / 255.0);
                EXPECT_EQ(s.images.at({1, c, y, x}), static_cast<double>((7 * i + 11) % 256) / 255.0);
            }
    EXPECT_EQ(s.images.at({0, 0, 0, 0}), 0.0);
    EXPECT_EQ(s.images.at({0, 0, 7, 31}), 1.0);  // byte 255
    EXPECT_EQ(s.images.at({0, 2, 0, 1}), 1.0 / 255.0);  // 2049 % 256 == 1
}

TEST(Cifar, ZeroRecord) {
    const std::vector<std::uint8_t> zeros(3073, 0);
    const LabeledImageSet s = parse_cifar10_binary(zeros);
    EXPECT_EQ(s.labels, std::vector<std::size_t>{0});
    EXPECT_EQ(s.images, Tensor({1, 3, 32, 32}));
}

TEST(Cifar, TruncationReportsByteOffset) {
    const std::vector<std::uint8_t> short_file(3072, 0);
    try {
        parse_cifar10_binary(short_file);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("byte offset 0"), std::string::npos) << e.what();
    }
    auto bytes = two_record_fixture();
    bytes.resize(bytes.size() - 10);
    try {
        parse_cifar10_binary(bytes);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("byte offset 3073"), std::string::npos) << e.what();
    }
    EXPECT_THROW(parse_cifar10_binary(std::vector<std::uint8_t>{}), FormatError);
}

TEST(Cifar, LabelAboveNine) {
    auto bytes = two_record_fixture();
    bytes[3073] = 10;
    try {
        parse_cifar10_binary(bytes);
        FAIL() << "expected FormatError";
    } catch (const FormatError& e) {
        EXPECT_NE(std::string(e.what()).find("3073"), std::string::npos);
    }
}

TEST(Cifar, FileRoundTrip) {
    const auto bytes = two_record_fixture();
    const auto path = temp_file("bassl_fixture.bin", bytes);
    const LabeledImageSet s = read_cifar10_binary(path);
    EXPECT_EQ(encode_cifar10_binary(s), bytes);
    const LabeledImageSet again = parse_cifar10_binary(encode_cifar10_binary(s));
    EXPECT_EQ(again.images, s.images);
    EXPECT_EQ(again.labels, s.labels);
    std::filesystem::remove(path);
    EXPECT_THROW(read_cifar10_binary(path), FormatError);
}

TEST(BatchIterator, FloorDivisionAndCoverage) {
    const LabeledImageSet s = make_synthetic(5, 2, 8);
    BatchIterator it = iterate(s, 4, 7);
    EXPECT_EQ(it.batches_per_epoch(), 2u);
    std::set<std::size_t> seen;
    for (std::size_t step = 0; step < 2; ++step) {
        const auto idx = it.indices_at(step);
        EXPECT_EQ(idx.size(), 4u);
        for (std::size_t i : idx) {
            EXPECT_LT(i, 10u);
            EXPECT_TRUE(seen.insert(i).second) << "duplicate index " << i;
        }
    }
    EXPECT_EQ(seen.size(), 8u);
}

TEST(BatchIterator, EpochOrdersDeterministicAndDistinct) {
    const LabeledImageSet s = make_synthetic(8, 2, 8);
    BatchIterator a(s, 4, 11), b(s, 4, 11);
    EXPECT_EQ(a.epoch_order(0), b.epoch_order(0));
    EXPECT_EQ(a.epoch_order(1), b.epoch_order(1));
    EXPECT_NE(a.epoch_order(0), a.epoch_order(1));
    auto sorted = a.epoch_order(3);
    std::sort(sorted.begin(), sorted.end());
    for (std::size_t i = 0; i < sorted.size(); ++i) EXPECT_EQ(sorted[i], i);
    // Step 4 is the first batch of epoch 1.
    const auto order1 = a.epoch_order(1);
    EXPECT_EQ(a.indices_at(4), std::vector<std::size_t>(order1.begin(), order1.begin() + 4));
}

TEST(BatchIterator, SequentialMatchesRandomAccess) {
    const LabeledImageSet s = make_synthetic(3, 2, 8);
    BatchIterator it(s, 2, 5);
    for (std::size_t step = 0; step < 7; ++step) {
        const Tensor b = it.next();
        EXPECT_EQ(b, it.batch_at(step));
        EXPECT_EQ(b.dim(0), 2u);
        for (double v : b.values()) {
            EXPECT_GE(v, 0.0);
            EXPECT_LE(v, 1.0);
        }
    }
    EXPECT_EQ(it.position(), 7u);
}

TEST(BatchIterator, BatchLargerThanSet) {
    const LabeledImageSet s = make_synthetic(2, 2, 8);
    EXPECT_THROW(iterate(s, 5, 0), ConfigError);
    EXPECT_NO_THROW(iterate(s, 4, 0));
}
