#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace eawsn::wire {

/// Over-the-air measurement report. 15 bytes encoded:
///   [version][node_id LE 2B][seq][n_m LE 4B][n_h LE 4B][flags][crc16 LE 2B]
struct Beacon {
    std::uint8_t version = 1;
    std::uint16_t node_id = 0;
    std::uint8_t seq = 0;      ///< wraps modulo 256
    std::uint32_t n_m = 0;     ///< measurement pulse count
    std::uint32_t n_h = 0;     ///< harvest pulse count
    std::uint8_t flags = 0;

    bool operator==(const Beacon&) const = default;
};

inline constexpr std::uint8_t kFlagNmValid = 0x01;
inline constexpr std::uint8_t kFlagCounterClipped = 0x02;
inline constexpr std::uint8_t kFlagStallDetected = 0x04;
inline constexpr std::uint8_t kKnownFlagsMask = 0x07;

inline constexpr std::size_t kFrameSize = 15;
inline constexpr std::size_t kPayloadSize = 13;  // bytes covered by the CRC

using Frame = std::array<std::uint8_t, kFrameSize>;

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, no reflection, no xorout.
std::uint16_t crc16_ccitt_false(std::span<const std::uint8_t> data);

/// Throws std::invalid_argument on version != 1 or unknown flag bits.
Frame encode_beacon(const Beacon& b);

enum class DecodeStatus { kOk, kBadLength, kBadCrc, kUnknownVersion };
const char* to_string(DecodeStatus s);

struct DecodeOutcome {
    DecodeStatus status = DecodeStatus::kOk;
    Beacon beacon;  ///< valid only when status == kOk
};

DecodeOutcome decode_beacon(std::span<const std::uint8_t> bytes);

struct ChannelConfig {
    double loss_probability = 0.0;
    double duplicate_probability = 0.0;
};

/// Throws std::invalid_argument unless both probabilities lie in [0, 1].
void validate(const ChannelConfig& cfg);

/// Independently drops, then possibly duplicates, each frame. Order is
/// preserved; duplicates are emitted back to back. Deterministic per seed.
std::vector<Frame> channel_pass(std::span<const Frame> frames, const ChannelConfig& cfg,
                                std::uint64_t seed);

// Beacon log format: one frame per line, uppercase hex, no separators.
std::string to_hex(std::span<const std::uint8_t> bytes);
std::optional<std::vector<std::uint8_t>> from_hex(std::string_view text);

} // namespace eawsn::wire
