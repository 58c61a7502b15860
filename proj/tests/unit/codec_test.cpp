#include <vmsim/error.hpp>
#include <vmsim/rng.hpp>
#include <vmsim/times/codec.hpp>

#include <gtest/gtest.h>

using namespace vmsim;
using namespace vmsim::times;

namespace {

TimeSeries random_series(Rng& rng) {
    TimeSeries s;
    const auto len = rng.below(20);
    for (std::uint64_t i = 0; i < len; ++i) s.name.push_back("abcXYZ019_.-"[rng.below(12)]);
    s.start_s = static_cast<std::int64_t>(rng.below(1ull << 40)) - (1ll << 39);
    s.interval_s = 1 + static_cast<std::uint32_t>(rng.below(3600));
    const auto n = rng.below(64);
    for (std::uint64_t i = 0; i < n; ++i) s.samples.push_back(rng.uniform01() * 100.0);
    return s;
}

Errc decode_error(const Bytes& bytes) {
    try {
        decode_series(bytes);
    } catch (const Error& e) {
        return e.code();
    }
    ADD_FAILURE() << "decode accepted invalid input";
    return Errc::ParseError;
}

} // namespace

TEST(Codec, GoldenLayout) {
    const Bytes expected = {0x54, 0x53, 0x42, 0x31,                         // "TSB1"
                            0x00, 0x00, 0x00, 0x01,                         // name_len
                            0x61,                                           // "a"
                            0, 0, 0, 0, 0, 0, 0, 0,                         // start_s
                            0x00, 0x00, 0x00, 0x03,                         // interval_s
                            0x00, 0x00, 0x00, 0x01,                         // count
                            0x3F, 0xF0, 0x00, 0x00, 0x00, 0x00, 0x00, 0x00}; // 1.0
    const auto bytes = encode_series(TimeSeries{"a", 0, 3, {1.0}});
    EXPECT_EQ(bytes.size(), 33u);
    EXPECT_EQ(bytes, expected);
}

TEST(Codec, RoundTripAndLength) {
    Rng rng(2024);
    for (int i = 0; i < 300; ++i) {
        const auto s = random_series(rng);
        const auto bytes = encode_series(s);
        EXPECT_EQ(bytes.size(), 4 + 4 + s.name.size() + 8 + 4 + 4 + 8 * s.samples.size());
        EXPECT_EQ(decode_series(bytes), s);
        EXPECT_EQ(encode_series(s), bytes);
    }
}

TEST(Codec, NegativeStartIsTwosComplement) {
    const auto bytes = encode_series(TimeSeries{"", -2, 1, {}});
    EXPECT_EQ(bytes[8], 0xFF);
    EXPECT_EQ(bytes[15], 0xFE);
}

TEST(Codec, RejectsBadMagic) {
    Bytes bytes = encode_series(TimeSeries{"a", 0, 3, {1.0}});
    bytes[0] = bytes[1] = bytes[2] = bytes[3] = 'X';
    EXPECT_EQ(decode_error(bytes), Errc::BadMagic);
    EXPECT_EQ(decode_error({}), Errc::BadMagic);
}

TEST(Codec, RejectsTruncatedPayload) {
    auto bytes = encode_series(TimeSeries{"a", 0, 3, {1.0}});
    bytes[24] = 10; // claim 10 samples, keep 1
    EXPECT_EQ(decode_error(bytes), Errc::TruncatedPayload);
    auto header_only = encode_series(TimeSeries{"abc", 0, 3, {}});
    header_only.resize(10);
    EXPECT_EQ(decode_error(header_only), Errc::TruncatedPayload);
}

TEST(Codec, RejectsInvalidSamples) {
    auto bytes = encode_series(TimeSeries{"a", 0, 3, {1.0}});
    // 0x7FF8... is NaN
    bytes[25] = 0x7F;
    bytes[26] = 0xF8;
    EXPECT_EQ(decode_error(bytes), Errc::InvalidSample);
    auto big = encode_series(TimeSeries{"a", 0, 3, {1.0}});
    big[25] = 0x40; // 2^... well above 100
    big[26] = 0x80;
    EXPECT_EQ(decode_error(big), Errc::InvalidSample);
}

TEST(Codec, RejectsLongNames) {
    TimeSeries s{std::string(70000, 'a'), 0, 1, {}};
    try {
        encode_series(s);
        FAIL();
    } catch (const Error& e) {
        EXPECT_EQ(e.code(), Errc::NameTooLong);
    }
}

TEST(Codec, FuzzedInputNeverCrashes) {
    Rng rng(99);
    const auto seed_blob = encode_series(TimeSeries{"fuzz", 5, 2, {1, 2, 3, 4}});
    for (int i = 0; i < 20000; ++i) {
        Bytes bytes;
        if (rng.below(2) == 0) {
            bytes = seed_blob;
            const auto flips = 1 + rng.below(4);
            for (std::uint64_t f = 0; f < flips; ++f) {
                bytes[rng.below(bytes.size())] = static_cast<std::uint8_t>(rng.below(256));
            }
            bytes.resize(rng.below(bytes.size() + 1));
        } else {
            bytes.resize(rng.below(64));
            for (auto& b : bytes) b = static_cast<std::uint8_t>(rng.below(256));
            if (bytes.size() >= 4 && rng.below(2) == 0) std::copy(kSeriesMagic, kSeriesMagic + 4, bytes.begin());
        }
        try {
            const auto s = decode_series(bytes);
            EXPECT_EQ(encode_series(s), bytes);
        } catch (const Error& e) {
            const auto c = e.code();
            EXPECT_TRUE(c == Errc::BadMagic || c == Errc::TruncatedPayload || c == Errc::InvalidSample ||
                        c == Errc::NameTooLong || c == Errc::InvalidSeries)
                << errc_name(c);
        }
    }
}
