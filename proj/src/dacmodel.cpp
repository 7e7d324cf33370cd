#include "ivdac/dacmodel.hpp"

#include <cmath>

#include "ivdac/errors.hpp"

namespace ivdac {

void ChannelId::throw_bad_index(int index) {
    throw InputError("channel index out of range: " + std::to_string(index));
}

ChannelId ChannelId::parse(std::string_view label) {
    if (label.size() < 2 || label.size() > 3 || (label[0] != 'A' && label[0] != 'B')) {
        throw InputError("bad channel label '" + std::string(label) + "'");
    }
    int index = 0;
    for (char c : label.substr(1)) {
        if (c < '0' || c > '9') {
            throw InputError("bad channel label '" + std::string(label) + "'");
        }
        index = index * 10 + (c - '0');
    }
    if (label.size() == 3 && label[1] == '0') {
        throw InputError("bad channel label '" + std::string(label) + "'");
    }
    return ChannelId(label[0] == 'A' ? Chip::A : Chip::B, index);
}

ChannelId ChannelId::from_flat(int flat) {
    if (flat < 0 || flat >= kTotalChannels) {
        throw InputError("flat channel index out of range: " + std::to_string(flat));
    }
    return ChannelId(flat < kChannelsPerChip ? Chip::A : Chip::B, flat % kChannelsPerChip);
}

std::string ChannelId::label() const {
    return (chip_ == Chip::A ? "A" : "B") + std::to_string(index_);
}

Quantized voltage_to_code(double volts) {
    if (!std::isfinite(volts)) {
        throw InputError("voltage is not finite");
    }
    if (volts < kSpanLow) {
        return {0, true};
    }
    if (volts > kSpanHigh - kLsb) {
        return {65535, true};
    }
    const double scaled = std::floor((volts - kSpanLow) / kLsb + 0.5);
    return {static_cast<DacCode>(scaled > 65535.0 ? 65535.0 : scaled), false};
}

double quantize_voltage(double volts) { return code_to_voltage(voltage_to_code(volts).code); }

DacRegisterFile::DacRegisterFile() {
    staged_.fill(kMidScale);
    latched_.fill(kMidScale);
}

}  // namespace ivdac
