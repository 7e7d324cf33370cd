#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <string_view>

namespace ivdac {

enum class Chip : std::uint8_t { A = 0, B = 1 };

inline constexpr int kChannelsPerChip = 40;
inline constexpr int kTotalChannels = 2 * kChannelsPerChip;

/// One output of one of the two 40-channel DACs, displayed as "A0".."B39".
class ChannelId {
public:
    constexpr ChannelId() = default;
    constexpr ChannelId(Chip chip, int index) : chip_(chip), index_(checked_index(index)) {}

    static ChannelId parse(std::string_view label);
    /// Inverse of flat(): 0..39 map to A0..A39, 40..79 to B0..B39.
    static ChannelId from_flat(int flat);

    constexpr Chip chip() const { return chip_; }
    constexpr int index() const { return index_; }
    constexpr int flat() const { return static_cast<int>(chip_) * kChannelsPerChip + index_; }
    std::string label() const;

    friend constexpr bool operator==(ChannelId, ChannelId) = default;
    friend constexpr auto operator<=>(ChannelId a, ChannelId b) { return a.flat() <=> b.flat(); }

private:
    static constexpr std::uint8_t checked_index(int index) {
        if (index < 0 || index >= kChannelsPerChip) {
            throw_bad_index(index);
        }
        return static_cast<std::uint8_t>(index);
    }
    [[noreturn]] static void throw_bad_index(int index);

    Chip chip_ = Chip::A;
    std::uint8_t index_ = 0;
};

using DacCode = std::uint16_t;

inline constexpr double kSpanLow = -10.0;
inline constexpr double kSpanHigh = 10.0;
inline constexpr double kLsb = (kSpanHigh - kSpanLow) / 65536.0;
inline constexpr DacCode kMidScale = 32768;

/// Offset-binary transfer: -10 V at code 0, 0 V at mid-scale.
constexpr double code_to_voltage(DacCode code) {
    return kSpanLow + (kSpanHigh - kSpanLow) * static_cast<double>(code) / 65536.0;
}

struct Quantized {
    DacCode code = kMidScale;
    bool clamped = false;
};

/// Nearest code. Requests outside [-10 V, +10 V - LSB] clamp to the span
/// ends with `clamped` set. Throws InputError for NaN/inf.
Quantized voltage_to_code(double volts);

/// Voltage the DAC would actually produce for a requested voltage.
double quantize_voltage(double volts);

/// Staged and latched codes for all 80 channels. Writes land in the staged
/// bank; only latch() (an LDAC event) moves them to the outputs.
class DacRegisterFile {
public:
    DacRegisterFile();

    void stage_write(ChannelId ch, DacCode code) { staged_[ch.flat()] = code; }
    void latch() { latched_ = staged_; }

    DacCode staged(ChannelId ch) const { return staged_[ch.flat()]; }
    DacCode latched(ChannelId ch) const { return latched_[ch.flat()]; }
    double output_voltage(ChannelId ch) const { return code_to_voltage(latched(ch)); }

    const std::array<DacCode, kTotalChannels>& staged_codes() const { return staged_; }
    const std::array<DacCode, kTotalChannels>& latched_codes() const { return latched_; }

    friend bool operator==(const DacRegisterFile&, const DacRegisterFile&) = default;

private:
    std::array<DacCode, kTotalChannels> staged_;
    std::array<DacCode, kTotalChannels> latched_;
};

}  // namespace ivdac
