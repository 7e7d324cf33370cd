#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ivdac/dacmodel.hpp"
#include "ivdac/packet.hpp"
#include "ivdac/serialbus.hpp"

namespace ivdac {

/// Voltages per update step, stored row-major in `channels` order.
struct VoltageTimeline {
    std::vector<ChannelId> channels;
    double step_period_s = 0.0;
    std::vector<std::vector<double>> steps;

    void validate() const;
    friend bool operator==(const VoltageTimeline&, const VoltageTimeline&) = default;
};

struct CompileOptions {
    // Delta packets larger than this are still sent whole; they are only counted.
    std::size_t pair_budget = 40;
};

/// Packet 0 loads all 80 channels (channels outside the timeline sit at
/// mid-scale); packet k carries the channels whose DAC code changed between
/// steps k-1 and k.
Waveform compile(const VoltageTimeline& timeline, const CompileOptions& options = {});

/// Runs the packets through a DacRegisterFile and reads back the latched
/// voltages of the waveform's channels after every LDAC.
VoltageTimeline replay(const Waveform& waveform);

/// Every voltage replaced by what the DAC would output for it.
VoltageTimeline quantize(const VoltageTimeline& timeline);

/// FNV-1a over the channel list, step period and voltage bit patterns.
std::string timeline_digest(const VoltageTimeline& timeline);

struct RateReport {
    double max_rate_hz = 0.0;
    std::size_t bottleneck_packet = 0;
    double bottleneck_upload_s = 0.0;
};

/// Sustained LDAC rate limited by the slowest delta packet (packet 0 is
/// used only for single-packet waveforms).
RateReport max_update_rate(const Waveform& waveform, const TimingModel& timing);

/// First LDAC when packet 0 finishes uploading, then one per requested
/// period. Throws InfeasibleRate naming the bottleneck packet.
std::vector<double> ldac_schedule(const Waveform& waveform, const TimingModel& timing, double requested_rate_hz);

}  // namespace ivdac
