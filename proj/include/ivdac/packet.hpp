#pragma once

#include <cstddef>
#include <string>
#include <vector>

#include "ivdac/dacmodel.hpp"

namespace ivdac {

struct ChannelWrite {
    ChannelId channel;
    DacCode code = kMidScale;

    friend bool operator==(const ChannelWrite&, const ChannelWrite&) = default;
};

/// Channel/code updates sent between two LDAC pulses. A-side and B-side writes
/// are clocked out in parallel, so the bus cost is the number of channel pairs.
struct UpdatePacket {
    std::vector<ChannelWrite> writes;

    std::size_t pair_count() const;
    /// Throws InputError when a channel appears twice.
    void check_unique() const;

    friend bool operator==(const UpdatePacket&, const UpdatePacket&) = default;
};

/// Ordered packet stream produced by compile(). Packet 0 is the full
/// initial load, later packets carry only changed channels.
struct Waveform {
    std::vector<UpdatePacket> packets;
    std::vector<ChannelId> channels;  // channel order of the source timeline
    double step_period_s = 0.0;
    std::string source_hash;
    std::size_t clamped_voltages = 0;
    std::size_t over_budget_packets = 0;
};

}  // namespace ivdac
