#include "ivdac/wavecomp.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <sstream>

#include "ivdac/errors.hpp"

namespace ivdac {

void VoltageTimeline::validate() const {
    if (steps.empty()) {
        throw InputError("timeline has no steps");
    }
    if (channels.empty()) {
        throw InputError("timeline has no channels");
    }
    if (!(step_period_s > 0.0)) {
        throw InputError("timeline step period must be positive");
    }
    UpdatePacket probe;
    for (auto ch : channels) probe.writes.push_back({ch, 0});
    probe.check_unique();
    for (std::size_t k = 0; k < steps.size(); ++k) {
        if (steps[k].size() != channels.size()) {
            throw InputError("timeline step " + std::to_string(k) + " has " + std::to_string(steps[k].size()) +
                             " voltages for " + std::to_string(channels.size()) + " channels");
        }
    }
}

std::string timeline_digest(const VoltageTimeline& timeline) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    auto mix = [&h](std::uint64_t v) {
        for (int i = 0; i < 8; ++i) {
            h ^= (v >> (8 * i)) & 0xFF;
            h *= 0x100000001b3ULL;
        }
    };
    mix(timeline.channels.size());
    for (auto ch : timeline.channels) mix(static_cast<std::uint64_t>(ch.flat()));
    mix(std::bit_cast<std::uint64_t>(timeline.step_period_s));
    mix(timeline.steps.size());
    for (const auto& row : timeline.steps) {
        for (double v : row) mix(std::bit_cast<std::uint64_t>(v));
    }
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

Waveform compile(const VoltageTimeline& timeline, const CompileOptions& options) {
    timeline.validate();
    Waveform wf;
    wf.channels = timeline.channels;
    wf.step_period_s = timeline.step_period_s;
    wf.source_hash = timeline_digest(timeline);

    std::vector<DacCode> previous(timeline.channels.size());
    std::vector<DacCode> current(timeline.channels.size());
    auto quantize_row = [&](const std::vector<double>& row) {
        for (std::size_t i = 0; i < row.size(); ++i) {
            const auto q = voltage_to_code(row[i]);
            current[i] = q.code;
            wf.clamped_voltages += q.clamped ? 1 : 0;
        }
    };

    quantize_row(timeline.steps.front());
    std::array<DacCode, kTotalChannels> initial;
    initial.fill(kMidScale);
    for (std::size_t i = 0; i < timeline.channels.size(); ++i) {
        initial[timeline.channels[i].flat()] = current[i];
    }
    UpdatePacket first;
    for (int f = 0; f < kTotalChannels; ++f) {
        first.writes.push_back({ChannelId::from_flat(f), initial[f]});
    }
    wf.packets.push_back(std::move(first));
    previous = current;

    for (std::size_t k = 1; k < timeline.steps.size(); ++k) {
        quantize_row(timeline.steps[k]);
        UpdatePacket delta;
        for (std::size_t i = 0; i < current.size(); ++i) {
            if (current[i] != previous[i]) {
                delta.writes.push_back({timeline.channels[i], current[i]});
            }
        }
        std::sort(delta.writes.begin(), delta.writes.end(),
                  [](const ChannelWrite& a, const ChannelWrite& b) { return a.channel < b.channel; });
        if (delta.pair_count() > options.pair_budget) {
            ++wf.over_budget_packets;
        }
        wf.packets.push_back(std::move(delta));
        previous = current;
    }
    return wf;
}

VoltageTimeline replay(const Waveform& waveform) {
    VoltageTimeline out;
    out.channels = waveform.channels;
    out.step_period_s = waveform.step_period_s;
    DacRegisterFile regs;
    for (const auto& packet : waveform.packets) {
        for (const auto& w : packet.writes) {
            regs.stage_write(w.channel, w.code);
        }
        regs.latch();
        std::vector<double> row;
        row.reserve(out.channels.size());
        for (auto ch : out.channels) {
            row.push_back(regs.output_voltage(ch));
        }
        out.steps.push_back(std::move(row));
    }
    return out;
}

VoltageTimeline quantize(const VoltageTimeline& timeline) {
    VoltageTimeline out = timeline;
    for (auto& row : out.steps) {
        for (double& v : row) v = quantize_voltage(v);
    }
    return out;
}

RateReport max_update_rate(const Waveform& waveform, const TimingModel& timing) {
    timing.validate();
    if (waveform.packets.empty()) {
        throw InputError("waveform has no packets");
    }
    RateReport r;
    const std::size_t first = waveform.packets.size() > 1 ? 1 : 0;
    std::size_t worst_pairs = 0;
    r.bottleneck_packet = first;
    for (std::size_t k = first; k < waveform.packets.size(); ++k) {
        const auto pairs = waveform.packets[k].pair_count();
        if (k == first || pairs > worst_pairs) {
            worst_pairs = pairs;
            r.bottleneck_packet = k;
        }
    }
    r.bottleneck_upload_s = upload_time(worst_pairs, timing);
    const double dead_time = std::max(timing.ldac_pulse_s, timing.ldac_to_next_packet_delay_s);
    r.max_rate_hz = 1.0 / (r.bottleneck_upload_s + dead_time);
    return r;
}

std::vector<double> ldac_schedule(const Waveform& waveform, const TimingModel& timing, double requested_rate_hz) {
    const auto report = max_update_rate(waveform, timing);
    const std::size_t n = waveform.packets.size();
    if (n > 1) {
        if (!(requested_rate_hz > 0.0) || !std::isfinite(requested_rate_hz)) {
            throw InputError("requested update rate must be positive");
        }
        if (requested_rate_hz > report.max_rate_hz * (1.0 + 1e-12)) {
            std::ostringstream msg;
            msg << "requested rate " << requested_rate_hz << " Hz exceeds the maximum " << report.max_rate_hz
                << " Hz set by packet " << report.bottleneck_packet << " ("
                << waveform.packets[report.bottleneck_packet].pair_count() << " pairs)";
            throw InfeasibleRate(msg.str(), report.bottleneck_packet);
        }
    }
    std::vector<double> schedule;
    schedule.reserve(n);
    // Whole-ns arithmetic so the schedule survives the trace quantization.
    const auto first_ns = std::llround(upload_time(waveform.packets.front().pair_count(), timing) * 1e9);
    const double period_ns = n > 1 ? 1e9 / requested_rate_hz : 0.0;
    const auto pulse_ns = std::llround(timing.ldac_pulse_s * 1e9);
    const auto delay_ns = std::llround(timing.ldac_to_next_packet_delay_s * 1e9);
    std::int64_t previous = 0;
    for (std::size_t k = 0; k < n; ++k) {
        auto t_ns = first_ns + static_cast<std::int64_t>(std::ceil(static_cast<double>(k) * period_ns - 1e-6));
        if (k > 0) {
            // The bus works in whole ns; never let rounding put an LDAC inside BUSY.
            const auto upload_ns = std::llround(upload_time(waveform.packets[k].pair_count(), timing) * 1e9);
            t_ns = std::max({t_ns, previous + delay_ns + upload_ns, previous + pulse_ns});
        }
        previous = t_ns;
        schedule.push_back(static_cast<double>(t_ns) * 1e-9);
    }
    return schedule;
}

}  // namespace ivdac
