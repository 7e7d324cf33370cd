#include "ivdac/serialbus.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <ostream>
#include <random>
#include <sstream>

#include <boost/math/special_functions/beta.hpp>

#include "ivdac/constants.hpp"
#include "ivdac/errors.hpp"

namespace ivdac {

std::uint32_t SerialFrame::word() const {
    return (static_cast<std::uint32_t>(mode) << 22) | (static_cast<std::uint32_t>(address & 0x3F) << 16) |
           data;
}

SerialFrame SerialFrame::from_word(std::uint32_t word) {
    SerialFrame f;
    f.mode = static_cast<FrameMode>((word >> 22) & 0x3);
    f.address = static_cast<std::uint8_t>((word >> 16) & 0x3F);
    f.data = static_cast<std::uint16_t>(word & 0xFFFF);
    return f;
}

SerialFrame SerialFrame::write(int channel_index, DacCode code) {
    return {FrameMode::WriteCode, static_cast<std::uint8_t>(channel_index), code};
}

bool SerialFrame::is_valid() const {
    const bool mode_ok = mode == FrameMode::Noop || mode == FrameMode::WriteCode;
    const bool addr_ok = address < kChannelsPerChip || address == kNoopAddress;
    return mode_ok && addr_ok;
}

namespace {

void append_word(Bitstream& bits, std::uint32_t word) {
    for (int i = kFrameBits - 1; i >= 0; --i) {
        bits.push_back(static_cast<std::uint8_t>((word >> i) & 1U));
    }
}

std::int64_t to_ns(double seconds) { return std::llround(seconds * 1e9); }

}  // namespace

EncodedPacket encode_packet(const UpdatePacket& packet) {
    packet.check_unique();
    std::vector<SerialFrame> a;
    std::vector<SerialFrame> b;
    for (const auto& w : packet.writes) {
        (w.channel.chip() == Chip::A ? a : b).push_back(SerialFrame::write(w.channel.index(), w.code));
    }
    const std::size_t slots = std::max(a.size(), b.size());
    a.resize(slots, SerialFrame::noop());
    b.resize(slots, SerialFrame::noop());

    EncodedPacket out;
    out.frame_count = slots;
    out.sdi_a.reserve(slots * kFrameBits);
    out.sdi_b.reserve(slots * kFrameBits);
    for (std::size_t i = 0; i < slots; ++i) {
        append_word(out.sdi_a, a[i].word());
        append_word(out.sdi_b, b[i].word());
    }
    return out;
}

std::vector<SerialFrame> decode_bitstream(std::span<const std::uint8_t> bits) {
    if (bits.size() % kFrameBits != 0) {
        throw FramingError("bitstream length " + std::to_string(bits.size()) + " is not a multiple of 24");
    }
    std::vector<SerialFrame> frames;
    frames.reserve(bits.size() / kFrameBits);
    for (std::size_t start = 0; start < bits.size(); start += kFrameBits) {
        std::uint32_t word = 0;
        for (int i = 0; i < kFrameBits; ++i) {
            const auto bit = bits[start + i];
            if (bit > 1) {
                throw FramingError("bitstream holds a value other than 0/1");
            }
            word = (word << 1) | bit;
        }
        const auto frame = SerialFrame::from_word(word);
        if (!frame.is_valid()) {
            throw FramingError("invalid frame at bit " + std::to_string(start));
        }
        frames.push_back(frame);
    }
    return frames;
}

UpdatePacket packet_from_frames(std::span<const SerialFrame> a, std::span<const SerialFrame> b) {
    UpdatePacket p;
    for (const auto& f : a) {
        if (f.mode == FrameMode::WriteCode) {
            p.writes.push_back({ChannelId(Chip::A, f.address), f.data});
        }
    }
    for (const auto& f : b) {
        if (f.mode == FrameMode::WriteCode) {
            p.writes.push_back({ChannelId(Chip::B, f.address), f.data});
        }
    }
    return p;
}

const char* line_name(Line line) {
    switch (line) {
        case Line::Sync: return "SYNC";
        case Line::Sclk: return "SCLK";
        case Line::SdiA: return "SDI_A";
        case Line::SdiB: return "SDI_B";
        case Line::Ldac: return "LDAC";
        case Line::Busy: return "BUSY";
    }
    return "?";
}

std::int64_t BusTrace::busy_low_ns() const {
    std::int64_t total = 0;
    std::int64_t fell = 0;
    std::uint8_t level = 1;
    for (const auto& e : events) {
        if (e.line != Line::Busy) continue;
        if (level == 1 && e.level == 0) fell = e.time_ns;
        if (level == 0 && e.level == 1) total += e.time_ns - fell;
        level = e.level;
    }
    return total;
}

std::size_t BusTrace::count(Line line, std::uint8_t level) const {
    return static_cast<std::size_t>(std::count_if(events.begin(), events.end(), [&](const BusEvent& e) {
        return e.line == line && e.level == level;
    }));
}

void BusTrace::write_csv(std::ostream& os) const {
    os << "time_ns,line,level\n";
    for (const auto& e : events) {
        os << e.time_ns << ',' << line_name(e.line) << ',' << static_cast<int>(e.level) << '\n';
    }
}

TimingModel TimingModel::by_name(const std::string& name) {
    if (name == "paper-nominal" || name == "nominal") {
        return paper_nominal();
    }
    throw InputError("unknown timing model '" + name + "' (known: paper-nominal)");
}

void TimingModel::validate() const {
    for (double v : {serial_clock_hz, frame_gap_s, packet_setup_s, ldac_pulse_s, ldac_to_next_packet_delay_s}) {
        if (!(v > 0.0) || !std::isfinite(v)) {
            throw InputError("timing model parameters must be finite and strictly positive");
        }
    }
}

double upload_time(std::size_t n_pairs, const TimingModel& timing) {
    return timing.packet_setup_s + static_cast<double>(n_pairs) * (timing.frame_time_s() + timing.frame_gap_s);
}

BusTrace simulate_session(const Waveform& waveform, const TimingModel& timing,
                          std::span<const double> ldac_schedule_s) {
    timing.validate();
    if (waveform.packets.empty()) {
        throw InputError("waveform has no packets");
    }
    if (ldac_schedule_s.size() != waveform.packets.size()) {
        throw InputError("LDAC schedule has " + std::to_string(ldac_schedule_s.size()) + " pulses for " +
                         std::to_string(waveform.packets.size()) + " packets");
    }
    for (std::size_t k = 1; k < ldac_schedule_s.size(); ++k) {
        if (!(ldac_schedule_s[k] > ldac_schedule_s[k - 1])) {
            throw InputError("LDAC schedule must be strictly increasing");
        }
    }

    BusTrace trace;
    auto& ev = trace.events;
    ev.push_back({0, Line::Sync, 1});
    ev.push_back({0, Line::Sclk, 0});
    ev.push_back({0, Line::Ldac, 1});
    ev.push_back({0, Line::Busy, 1});

    const double bit_ns = 1e9 / timing.serial_clock_hz;
    const double slot_ns = (timing.frame_time_s() + timing.frame_gap_s) * 1e9;
    const double setup_ns = timing.packet_setup_s * 1e9;
    const std::int64_t pulse_ns = to_ns(timing.ldac_pulse_s);
    const std::int64_t delay_ns = to_ns(timing.ldac_to_next_packet_delay_s);

    std::int64_t start_ns = 0;
    std::int64_t previous_pulse_end = -1;
    for (std::size_t k = 0; k < waveform.packets.size(); ++k) {
        const auto enc = encode_packet(waveform.packets[k]);
        const std::int64_t busy_end = start_ns + to_ns(upload_time(enc.frame_count, timing));
        ev.push_back({start_ns, Line::Busy, 0});
        for (std::size_t slot = 0; slot < enc.frame_count; ++slot) {
            const double frame_start = static_cast<double>(start_ns) + setup_ns + static_cast<double>(slot) * slot_ns;
            ev.push_back({std::llround(frame_start), Line::Sync, 0});
            for (int i = 0; i < kFrameBits; ++i) {
                const double t = frame_start + i * bit_ns;
                const std::size_t idx = slot * kFrameBits + i;
                ev.push_back({std::llround(t), Line::SdiA, enc.sdi_a[idx]});
                ev.push_back({std::llround(t), Line::SdiB, enc.sdi_b[idx]});
                ev.push_back({std::llround(t + 0.25 * bit_ns), Line::Sclk, 1});
                ev.push_back({std::llround(t + 0.5 * bit_ns), Line::Sclk, 0});
            }
            ev.push_back({std::llround(frame_start + kFrameBits * bit_ns), Line::Sync, 1});
        }
        ev.push_back({busy_end, Line::Busy, 1});

        const std::int64_t ldac_ns = to_ns(ldac_schedule_s[k]);
        if (ldac_ns < busy_end) {
            std::ostringstream msg;
            msg << "LDAC " << k << " at " << ldac_ns << " ns arrives while BUSY is low (packet upload ends at "
                << busy_end << " ns)";
            throw ProtocolViolation(msg.str());
        }
        if (ldac_ns < previous_pulse_end) {
            throw ProtocolViolation("LDAC " + std::to_string(k) + " overlaps the previous LDAC pulse");
        }
        ev.push_back({ldac_ns, Line::Ldac, 0});
        ev.push_back({ldac_ns + pulse_ns, Line::Ldac, 1});
        previous_pulse_end = ldac_ns + pulse_ns;
        start_ns = ldac_ns + delay_ns;
    }
    std::stable_sort(ev.begin(), ev.end(),
                     [](const BusEvent& a, const BusEvent& b) { return a.time_ns < b.time_ns; });
    return trace;
}

BusTrace inject_noise(const BusTrace& trace, double flip_probability, std::uint64_t seed) {
    if (!(flip_probability >= 0.0 && flip_probability <= 1.0)) {
        throw InputError("flip probability must lie in [0, 1]");
    }
    BusTrace out = trace;
    if (flip_probability == 0.0) {
        return out;
    }
    std::mt19937_64 rng(seed);
    std::bernoulli_distribution flip(flip_probability);
    for (auto& e : out.events) {
        if ((e.line == Line::SdiA || e.line == Line::SdiB) && flip(rng)) {
            e.level ^= 1U;
        }
    }
    return out;
}

ReceivedSession replay_trace(const BusTrace& trace, DacRegisterFile initial) {
    ReceivedSession rx;
    rx.registers = initial;
    std::uint8_t sync = 1, sclk = 0, sdi_a = 0, sdi_b = 0, ldac = 1;
    std::uint32_t shift_a = 0, shift_b = 0;
    int nbits = 0;

    auto commit = [&](std::uint32_t word, Chip chip) {
        const auto f = SerialFrame::from_word(word);
        if (!f.is_valid()) {
            ++rx.rejected_frames;
            return;
        }
        if (f.mode == FrameMode::WriteCode) {
            rx.registers.stage_write(ChannelId(chip, f.address), f.data);
        }
    };

    for (const auto& e : trace.events) {
        switch (e.line) {
            case Line::SdiA: sdi_a = e.level; break;
            case Line::SdiB: sdi_b = e.level; break;
            case Line::Sclk:
                if (sclk == 1 && e.level == 0 && sync == 0) {
                    shift_a = (shift_a << 1) | sdi_a;
                    shift_b = (shift_b << 1) | sdi_b;
                    ++nbits;
                }
                sclk = e.level;
                break;
            case Line::Sync:
                if (sync == 1 && e.level == 0) {
                    shift_a = shift_b = 0;
                    nbits = 0;
                } else if (sync == 0 && e.level == 1) {
                    if (nbits == kFrameBits) {
                        const std::uint32_t mask = (1U << kFrameBits) - 1U;
                        rx.words_a.push_back(shift_a & mask);
                        rx.words_b.push_back(shift_b & mask);
                        commit(shift_a & mask, Chip::A);
                        commit(shift_b & mask, Chip::B);
                    } else {
                        rx.rejected_frames += 2;
                    }
                }
                sync = e.level;
                break;
            case Line::Ldac:
                if (ldac == 1 && e.level == 0) {
                    rx.registers.latch();
                    rx.latched_history.push_back(rx.registers.latched_codes());
                }
                ldac = e.level;
                break;
            case Line::Busy: break;
        }
    }
    return rx;
}

double ber_upper_bound(std::uint64_t bits_total, std::uint64_t bit_errors, double confidence) {
    if (bits_total == 0) {
        throw InputError("BER bound needs at least one bit");
    }
    if (bit_errors > bits_total) {
        throw InputError("more bit errors than bits");
    }
    if (!(confidence > 0.0 && confidence < 1.0)) {
        throw InputError("confidence must lie in (0, 1)");
    }
    if (bit_errors == bits_total) {
        return 1.0;
    }
    const double n = static_cast<double>(bits_total);
    if (bit_errors == 0) {
        return -std::expm1(std::log1p(-confidence) / n);
    }
    const double k = static_cast<double>(bit_errors);
    return boost::math::ibeta_inv(k + 1.0, n - k, confidence);
}

std::string BerResult::report() const {
    std::ostringstream os;
    os.precision(6);
    os << "traces " << traces << '\n'
       << "bits_total " << bits_total << '\n'
       << "bit_errors " << bit_errors << '\n'
       << "frame_errors " << frame_errors << '\n'
       << "update_errors " << update_errors << '\n'
       << "confidence " << confidence << '\n'
       << std::scientific << "ber_upper_bound " << upper_bound << '\n';
    return os.str();
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

}  // namespace

BerResult run_ber_test(const BerTestConfig& config) {
    config.timing.validate();
    if (config.traces == 0 || config.total_bits == 0) {
        throw InputError("BER test needs at least one trace and one bit");
    }
    constexpr std::uint64_t bits_per_slot = 2 * kFrameBits;
    const std::uint64_t slots = (config.total_bits + bits_per_slot - 1) / bits_per_slot;
    const std::uint64_t traces = std::min(config.traces, slots);

    BerResult result;
    result.confidence = config.confidence;
    result.traces = traces;

    for (std::uint64_t t = 0; t < traces; ++t) {
        const std::uint64_t n = slots / traces + (t < slots % traces ? 1 : 0);
        Waveform wf;
        wf.packets.reserve(n);
        for (std::uint64_t j = 0; j < n; ++j) {
            const double phase = constants::two_pi * static_cast<double>(j) / static_cast<double>(n);
            UpdatePacket p;
            p.writes.push_back({kDiagnosticA, voltage_to_code(5.0 * std::sin(phase)).code});
            p.writes.push_back({kDiagnosticB, voltage_to_code(5.0 * std::cos(phase)).code});
            wf.packets.push_back(std::move(p));
        }

        std::vector<double> schedule;
        schedule.reserve(n);
        // Whole nanoseconds, rounded up, so trace quantization never moves an
        // LDAC ahead of the end of BUSY.
        const double upload = upload_time(1, config.timing);
        const double dead = std::max(config.timing.ldac_pulse_s, config.timing.ldac_to_next_packet_delay_s);
        const auto first_ns = static_cast<std::int64_t>(std::ceil(upload * 1e9 - 1e-6));
        const auto period_ns = static_cast<std::int64_t>(std::ceil((upload + dead) * 1e9 - 1e-6));
        for (std::uint64_t j = 0; j < n; ++j) {
            schedule.push_back(static_cast<double>(first_ns + static_cast<std::int64_t>(j) * period_ns) * 1e-9);
        }

        const auto sent = simulate_session(wf, config.timing, schedule);
        const auto received = inject_noise(sent, config.flip_probability, splitmix64(config.seed ^ splitmix64(t)));
        const auto clean = replay_trace(sent);
        const auto noisy = replay_trace(received);

        result.bits_total += n * bits_per_slot;
        for (std::size_t j = 0; j < clean.words_a.size(); ++j) {
            const int errs = std::popcount(clean.words_a[j] ^ noisy.words_a[j]) +
                             std::popcount(clean.words_b[j] ^ noisy.words_b[j]);
            result.bit_errors += static_cast<std::uint64_t>(errs);
            result.frame_errors += errs > 0 ? 1 : 0;
        }
        for (std::size_t j = 0; j < clean.latched_history.size(); ++j) {
            result.update_errors += clean.latched_history[j] != noisy.latched_history[j] ? 1 : 0;
        }
    }
    result.upper_bound = ber_upper_bound(result.bits_total, result.bit_errors, config.confidence);
    return result;
}

}  // namespace ivdac
