#pragma once

#include <cstdint>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "ivdac/dacmodel.hpp"
#include "ivdac/packet.hpp"

namespace ivdac {

enum class FrameMode : std::uint8_t { Noop = 0b00, WriteCode = 0b11 };

inline constexpr int kFrameBits = 24;
inline constexpr std::uint8_t kNoopAddress = 63;

/// 24-bit serial word, MSB first: 2 mode bits, 6 address bits, 16 data bits.
struct SerialFrame {
    FrameMode mode = FrameMode::Noop;
    std::uint8_t address = kNoopAddress;
    std::uint16_t data = 0;

    std::uint32_t word() const;
    /// Field extraction without validation. Noisy words may carry mode bits
    /// 0b01/0b10 or addresses 40..62; see is_valid().
    static SerialFrame from_word(std::uint32_t word);
    static SerialFrame noop() { return {}; }
    static SerialFrame write(int channel_index, DacCode code);

    bool is_valid() const;

    friend bool operator==(const SerialFrame&, const SerialFrame&) = default;
};

using Bitstream = std::vector<std::uint8_t>;  // one 0/1 per clocked bit

struct EncodedPacket {
    Bitstream sdi_a;
    Bitstream sdi_b;
    std::size_t frame_count = 0;
};

/// Pairs the k-th A-side write with the k-th B-side write in packet order;
/// the shorter side is padded with NOOP frames.
EncodedPacket encode_packet(const UpdatePacket& packet);

/// Strict inverse of encode_packet for one line. Throws FramingError for a
/// length that is not a multiple of 24 or for an invalid mode/address.
std::vector<SerialFrame> decode_bitstream(std::span<const std::uint8_t> bits);

/// Rebuilds the packet carried by a pair of decoded lines.
UpdatePacket packet_from_frames(std::span<const SerialFrame> a, std::span<const SerialFrame> b);

enum class Line : std::uint8_t { Sync, Sclk, SdiA, SdiB, Ldac, Busy };

const char* line_name(Line line);

struct BusEvent {
    std::int64_t time_ns = 0;
    Line line = Line::Sync;
    std::uint8_t level = 0;

    friend bool operator==(const BusEvent&, const BusEvent&) = default;
};

/// Time-ordered record of the nine-wire control interface (digital lines only).
struct BusTrace {
    std::vector<BusEvent> events;

    /// Total time BUSY spends low, in ns.
    std::int64_t busy_low_ns() const;
    std::size_t count(Line line, std::uint8_t level) const;
    void write_csv(std::ostream& os) const;

    friend bool operator==(const BusTrace&, const BusTrace&) = default;
};

struct TimingModel {
    double serial_clock_hz = 24e6;
    double frame_gap_s = 93.75e-9;
    double packet_setup_s = 16.25e-6;
    double ldac_pulse_s = 1e-6;
    double ldac_to_next_packet_delay_s = 1e-6;

    /// 24 MHz clock with the setup and gap chosen so that 40 pairs take
    /// 60 us and 8 pairs take 25 us.
    static TimingModel paper_nominal() { return {}; }
    static TimingModel by_name(const std::string& name);

    void validate() const;
    double frame_time_s() const { return kFrameBits / serial_clock_hz; }
};

double upload_time(std::size_t n_pairs, const TimingModel& timing);

/// Controller + DAC emulation of a full waveform run. Packet 0 starts at
/// t = 0; packet k+1 starts ldac_to_next_packet_delay_s after LDAC k.
/// Requires exactly one LDAC per packet. Throws ProtocolViolation if an LDAC
/// arrives while BUSY is low.
BusTrace simulate_session(const Waveform& waveform, const TimingModel& timing,
                          std::span<const double> ldac_schedule_s);

/// Flips every SDI bit independently with the given probability.
BusTrace inject_noise(const BusTrace& trace, double flip_probability, std::uint64_t seed);

/// What a DAC pair sees when driven by a trace: frames shifted in on SCLK
/// falling edges, framed by SYNC, latched on LDAC falling edges.
struct ReceivedSession {
    DacRegisterFile registers;
    std::vector<std::uint32_t> words_a;
    std::vector<std::uint32_t> words_b;
    std::vector<std::array<DacCode, kTotalChannels>> latched_history;  // one per LDAC
    std::size_t rejected_frames = 0;  // invalid mode/address or short frame
};

ReceivedSession replay_trace(const BusTrace& trace, DacRegisterFile initial = {});

/// One-sided Clopper-Pearson upper limit on the bit error probability.
double ber_upper_bound(std::uint64_t bits_total, std::uint64_t bit_errors, double confidence);

struct BerResult {
    std::uint64_t bits_total = 0;
    std::uint64_t bit_errors = 0;
    std::uint64_t frame_errors = 0;
    std::uint64_t update_errors = 0;  // LDAC updates whose latched codes differ
    std::uint64_t traces = 0;
    double upper_bound = 1.0;
    double confidence = 0.95;

    std::string report() const;
};

struct BerTestConfig {
    std::uint64_t total_bits = 15'000'000;
    std::uint64_t traces = 10'000;
    double flip_probability = 0.0;
    double confidence = 0.95;
    std::uint64_t seed = 1;
    TimingModel timing = TimingModel::paper_nominal();
};

/// Repeated sine/cosine updates on the two diagnostic channels, each trace
/// run through simulate_session, inject_noise and replay_trace.
BerResult run_ber_test(const BerTestConfig& config);

inline constexpr ChannelId kDiagnosticA{Chip::A, 39};
inline constexpr ChannelId kDiagnosticB{Chip::B, 26};

}  // namespace ivdac
