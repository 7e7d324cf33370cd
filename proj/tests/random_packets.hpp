#pragma once

#include <algorithm>
#include <random>

#include "ivdac/packet.hpp"

namespace testutil {

// Random packet with distinct channels, between 0 and 80 writes.
inline ivdac::UpdatePacket random_packet(std::mt19937_64& rng) {
    std::vector<int> flat(ivdac::kTotalChannels);
    for (int i = 0; i < ivdac::kTotalChannels; ++i) flat[i] = i;
    std::shuffle(flat.begin(), flat.end(), rng);
    const auto n = std::uniform_int_distribution<int>(0, ivdac::kTotalChannels)(rng);
    std::uniform_int_distribution<int> code(0, 65535);
    ivdac::UpdatePacket p;
    for (int i = 0; i < n; ++i) {
        p.writes.push_back({ivdac::ChannelId::from_flat(flat[i]), static_cast<ivdac::DacCode>(code(rng))});
    }
    return p;
}

// Order in which packet_from_frames rebuilds writes: all A-side writes,
// then all B-side writes, each in original order.
inline ivdac::UpdatePacket canonical(const ivdac::UpdatePacket& p) {
    ivdac::UpdatePacket out;
    for (const auto& w : p.writes) {
        if (w.channel.chip() == ivdac::Chip::A) out.writes.push_back(w);
    }
    for (const auto& w : p.writes) {
        if (w.channel.chip() == ivdac::Chip::B) out.writes.push_back(w);
    }
    return out;
}

inline ivdac::Waveform random_waveform(std::mt19937_64& rng, int packets) {
    ivdac::Waveform wf;
    for (int i = 0; i < packets; ++i) wf.packets.push_back(random_packet(rng));
    return wf;
}

}  // namespace testutil
