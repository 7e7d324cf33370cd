#include "ivdac/packet.hpp"

#include <algorithm>
#include <bitset>

#include "ivdac/errors.hpp"

namespace ivdac {

std::size_t UpdatePacket::pair_count() const {
    std::size_t a = 0;
    std::size_t b = 0;
    for (const auto& w : writes) {
        (w.channel.chip() == Chip::A ? a : b) += 1;
    }
    return std::max(a, b);
}

void UpdatePacket::check_unique() const {
    std::bitset<kTotalChannels> seen;
    for (const auto& w : writes) {
        if (seen.test(w.channel.flat())) {
            throw InputError("duplicate channel " + w.channel.label() + " in packet");
        }
        seen.set(w.channel.flat());
    }
}

}  // namespace ivdac
