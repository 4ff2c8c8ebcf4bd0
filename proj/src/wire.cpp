#include "eawsn/wire.hpp"

#include <stdexcept>

#include "eawsn/rng.hpp"

namespace eawsn::wire {

namespace {

void put_u16(std::uint8_t* out, std::uint16_t v) {
    out[0] = static_cast<std::uint8_t>(v & 0xFF);
    out[1] = static_cast<std::uint8_t>(v >> 8);
}

void put_u32(std::uint8_t* out, std::uint32_t v) {
    out[0] = static_cast<std::uint8_t>(v & 0xFF);
    out[1] = static_cast<std::uint8_t>((v >> 8) & 0xFF);
    out[2] = static_cast<std::uint8_t>((v >> 16) & 0xFF);
    out[3] = static_cast<std::uint8_t>((v >> 24) & 0xFF);
}

std::uint16_t get_u16(const std::uint8_t* in) {
    return static_cast<std::uint16_t>(in[0] | (in[1] << 8));
}

std::uint32_t get_u32(const std::uint8_t* in) {
    return static_cast<std::uint32_t>(in[0]) | (static_cast<std::uint32_t>(in[1]) << 8) |
           (static_cast<std::uint32_t>(in[2]) << 16) | (static_cast<std::uint32_t>(in[3]) << 24);
}

int hex_digit(char c) {
    if (c >= '0' && c <= '9') return c - '0';
    if (c >= 'A' && c <= 'F') return c - 'A' + 10;
    if (c >= 'a' && c <= 'f') return c - 'a' + 10;
    return -1;
}

} // namespace

std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data) {
    std::uint16_t crc = 0xFFFF;
    for (std::uint8_t byte : data) {
        crc ^= static_cast<std::uint16_t>(byte << 8);
        for (int i = 0; i < 8; ++i) {
            if (crc & 0x8000)
                crc = static_cast<std::uint16_t>((crc << 1) ^ 0x1021);
            else
                crc = static_cast<std::uint16_t>(crc << 1);
        }
    }
    return crc;
}

Frame encode_beacon(const Beacon& b) {
    if (b.version != 1)
        throw std::invalid_argument("encode_beacon: version must be 1");
    if (b.flags & ~kKnownFlagsMask)
        throw std::invalid_argument("encode_beacon: unknown flag bits set");

    Frame f{};
    f[0] = b.version;
    put_u16(&f[1], b.node_id);
    f[3] = b.seq;
    put_u32(&f[4], b.n_m);
    put_u32(&f[8], b.n_h);
    f[12] = b.flags;
    const std::uint16_t crc = crc16_ccitt_false({f.data(), kPayloadSize});
    put_u16(&f[13], crc);
    return f;
}

const char* to_string(DecodeStatus s) {
    switch (s) {
        case DecodeStatus::kOk: return "ok";
        case DecodeStatus::kBadLength: return "bad-length";
        case DecodeStatus::kBadCrc: return "bad-crc";
        case DecodeStatus::kUnknownVersion: return "unknown-version";
    }
    return "?";
}

DecodeOutcome decode_beacon(std::span<const std::uint8_t> bytes) {
    DecodeOutcome out;
    if (bytes.size() != kFrameSize) {
        out.status = DecodeStatus::kBadLength;
        return out;
    }
    const std::uint16_t expected = crc16_ccitt_false(bytes.subspan(0, kPayloadSize));
    if (expected != get_u16(&bytes[13])) {
        out.status = DecodeStatus::kBadCrc;
        return out;
    }
    if (bytes[0] != 1) {
        out.status = DecodeStatus::kUnknownVersion;
        return out;
    }
    out.beacon.version = bytes[0];
    out.beacon.node_id = get_u16(&bytes[1]);
    out.beacon.seq = bytes[3];
    out.beacon.n_m = get_u32(&bytes[4]);
    out.beacon.n_h = get_u32(&bytes[8]);
    out.beacon.flags = bytes[12];
    return out;
}

void validate(const ChannelConfig& cfg) {
    if (!(cfg.loss_probability >= 0.0 && cfg.loss_probability <= 1.0))
        throw std::invalid_argument("ChannelConfig: loss_probability outside [0, 1]");
    if (!(cfg.duplicate_probability >= 0.0 && cfg.duplicate_probability <= 1.0))
        throw std::invalid_argument("ChannelConfig: duplicate_probability outside [0, 1]");
}

std::vector<Frame> channel_pass(std::span<const Frame> frames, const ChannelConfig& cfg,
                                std::uint64_t seed) {
    validate(cfg);
    Rng rng(seed);
    std::vector<Frame> out;
    out.reserve(frames.size());
    for (const Frame& f : frames) {
        if (rng.bernoulli(cfg.loss_probability)) continue;
        out.push_back(f);
        if (rng.bernoulli(cfg.duplicate_probability)) out.push_back(f);
    }
    return out;
}

std::string to_hex(std::span<const std::uint8_t> bytes) {
    static const char* digits = "0123456789ABCDEF";
    std::string s;
    s.reserve(bytes.size() * 2);
    for (std::uint8_t b : bytes) {
        s.push_back(digits[b >> 4]);
        s.push_back(digits[b & 0x0F]);
    }
    return s;
}

std::optional<std::vector<std::uint8_t>> from_hex(std::string_view text) {
    if (text.size() % 2 != 0) return std::nullopt;
    std::vector<std::uint8_t> out;
    out.reserve(text.size() / 2);
    for (std::size_t i = 0; i < text.size(); i += 2) {
        const int hi = hex_digit(text[i]);
        const int lo = hex_digit(text[i + 1]);
        if (hi < 0 || lo < 0) return std::nullopt;
        out.push_back(static_cast<std::uint8_t>((hi << 4) | lo));
    }
    return out;
}

} // namespace eawsn::wire
