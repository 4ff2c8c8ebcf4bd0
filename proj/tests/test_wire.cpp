#include <doctest.h>

#include <stdexcept>
#include <string>
#include <vector>

#include "eawsn/rng.hpp"
#include "eawsn/wire.hpp"

using namespace eawsn;
using namespace eawsn::wire;

namespace {

Beacon reference_beacon() {
    Beacon b;
    b.node_id = 0x0201;
    b.seq = 7;
    b.n_m = 1629;
    b.n_h = 1953600;
    b.flags = kFlagNmValid;
    return b;
}

} // namespace

TEST_CASE("CRC-16/CCITT-FALSE known answer") {
    const std::string s = "123456789";
    const auto* p = reinterpret_cast<const std::uint8_t*>(s.data());
    CHECK(crc16_ccitt_false({p, s.size()}) == 0x29B1);
}

TEST_CASE("all-zero beacon encodes to a fixed frame") {
    Beacon b;
    const auto f = encode_beacon(b);
    CHECK(to_hex(f) == "010000000000000000000000006F6D");
}

TEST_CASE("counts are little-endian") {
    const auto f = encode_beacon(reference_beacon());
    CHECK(f[4] == 0x5D);  // 1629 = 0x0000065D
    CHECK(f[5] == 0x06);
    CHECK(f[6] == 0x00);
    CHECK(f[7] == 0x00);
    CHECK(to_hex(f) == "010102075D06000040CF1D0001BD67");
}

TEST_CASE("encode rejects out-of-range fields") {
    Beacon b;
    b.version = 0;
    CHECK_THROWS_AS(encode_beacon(b), std::invalid_argument);
    b.version = 2;
    CHECK_THROWS_AS(encode_beacon(b), std::invalid_argument);
    Beacon c;
    c.flags = 0x80;
    CHECK_THROWS_AS(encode_beacon(c), std::invalid_argument);
}

TEST_CASE("encode/decode roundtrip over random beacons") {
    Rng rng(2024);
    for (int i = 0; i < 10000; ++i) {
        Beacon b;
        b.node_id = static_cast<std::uint16_t>(rng.next_u64());
        b.seq = static_cast<std::uint8_t>(rng.next_u64());
        b.n_m = static_cast<std::uint32_t>(rng.next_u64());
        b.n_h = static_cast<std::uint32_t>(rng.next_u64());
        b.flags = static_cast<std::uint8_t>(rng.next_u64() & kKnownFlagsMask);
        const auto f = encode_beacon(b);
        const auto d = decode_beacon(f);
        REQUIRE(d.status == DecodeStatus::kOk);
        REQUIRE(d.beacon == b);
    }
}

TEST_CASE("any single-bit corruption is rejected as bad-crc") {
    const auto f = encode_beacon(reference_beacon());
    for (std::size_t byte = 0; byte < kFrameSize; ++byte) {
        for (int bit = 0; bit < 8; ++bit) {
            auto corrupted = f;
            corrupted[byte] ^= static_cast<std::uint8_t>(1u << bit);
            CHECK(decode_beacon(corrupted).status == DecodeStatus::kBadCrc);
        }
    }
}

TEST_CASE("decode distinguishes its failure modes") {
    const auto f = encode_beacon(reference_beacon());

    std::vector<std::uint8_t> short_frame(f.begin(), f.end() - 1);
    CHECK(decode_beacon(short_frame).status == DecodeStatus::kBadLength);

    std::vector<std::uint8_t> long_frame(f.begin(), f.end());
    long_frame.push_back(0);
    CHECK(decode_beacon(long_frame).status == DecodeStatus::kBadLength);

    // Future version with a valid checksum: unknown-version, not bad-crc.
    auto v2 = f;
    v2[0] = 2;
    const auto crc = crc16_ccitt_false({v2.data(), kPayloadSize});
    v2[13] = static_cast<std::uint8_t>(crc & 0xFF);
    v2[14] = static_cast<std::uint8_t>(crc >> 8);
    CHECK(decode_beacon(v2).status == DecodeStatus::kUnknownVersion);
}

TEST_CASE("channel with zero probabilities is the identity") {
    std::vector<Frame> frames;
    for (int i = 0; i < 20; ++i) {
        Beacon b;
        b.seq = static_cast<std::uint8_t>(i);
        frames.push_back(encode_beacon(b));
    }
    const auto out = channel_pass(frames, {}, 1);
    REQUIRE(out.size() == frames.size());
    for (std::size_t i = 0; i < out.size(); ++i) CHECK(out[i] == frames[i]);
}

TEST_CASE("channel with loss 1 drops everything") {
    std::vector<Frame> frames(10, encode_beacon(Beacon{}));
    ChannelConfig cfg;
    cfg.loss_probability = 1.0;
    CHECK(channel_pass(frames, cfg, 1).empty());
}

TEST_CASE("channel loss 0.5 delivers a binomially plausible count") {
    std::vector<Frame> frames(10000, encode_beacon(Beacon{}));
    ChannelConfig cfg;
    cfg.loss_probability = 0.5;
    const auto out = channel_pass(frames, cfg, 424242);
    // 3 sigma of Binomial(10^4, 0.5): 5000 +- 150
    CHECK(out.size() >= 4850);
    CHECK(out.size() <= 5150);
}

TEST_CASE("channel duplication emits copies back to back and keeps order") {
    std::vector<Frame> frames;
    for (int i = 0; i < 50; ++i) {
        Beacon b;
        b.seq = static_cast<std::uint8_t>(i);
        frames.push_back(encode_beacon(b));
    }
    ChannelConfig cfg;
    cfg.duplicate_probability = 1.0;
    const auto out = channel_pass(frames, cfg, 9);
    REQUIRE(out.size() == 2 * frames.size());
    for (std::size_t i = 0; i < frames.size(); ++i) {
        CHECK(out[2 * i] == frames[i]);
        CHECK(out[2 * i + 1] == frames[i]);
    }
}

TEST_CASE("channel is deterministic per seed") {
    std::vector<Frame> frames(1000, encode_beacon(Beacon{}));
    ChannelConfig cfg;
    cfg.loss_probability = 0.3;
    cfg.duplicate_probability = 0.2;
    CHECK(channel_pass(frames, cfg, 5) == channel_pass(frames, cfg, 5));
    CHECK(channel_pass(frames, cfg, 5).size() != channel_pass(frames, cfg, 6).size());
}

TEST_CASE("channel validates probabilities") {
    ChannelConfig cfg;
    cfg.loss_probability = 1.5;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
    cfg.loss_probability = 0.5;
    cfg.duplicate_probability = -0.1;
    CHECK_THROWS_AS(validate(cfg), std::invalid_argument);
}

TEST_CASE("hex helpers") {
    const auto f = encode_beacon(reference_beacon());
    const auto hex = to_hex(f);
    const auto back = from_hex(hex);
    REQUIRE(back.has_value());
    CHECK(std::equal(back->begin(), back->end(), f.begin()));

    // lowercase input is accepted
    std::string lower = hex;
    for (auto& ch : lower) ch = static_cast<char>(std::tolower(ch));
    CHECK(from_hex(lower).has_value());

    CHECK_FALSE(from_hex("ABC").has_value());   // odd length
    CHECK_FALSE(from_hex("GG").has_value());    // not hex
}
