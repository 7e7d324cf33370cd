#pragma once

#include <filesystem>
#include <iosfwd>
#include <string>
#include <vector>

#include <json.hpp>

#include "ivdac/analysis.hpp"
#include "ivdac/packet.hpp"
#include "ivdac/trapfield.hpp"
#include "ivdac/wavecomp.hpp"

namespace ivdac::io {

using Json = nlohmann::ordered_json;

std::string read_text(const std::filesystem::path& path);
Json read_json(const std::filesystem::path& path);

// {channels: ["A0", ...], step_period_s, steps: [[volts...], ...]}
VoltageTimeline timeline_from_json(const Json& j);
Json timeline_to_json(const VoltageTimeline& t);

// {channels, step_period_s, source_hash, clamped_voltages, over_budget_packets,
//  packets: [[["A0", code], ...], ...]}
Waveform waveform_from_json(const Json& j);
Json waveform_to_json(const Waveform& w);

// {electrodes: [{name, channel | "RF" | "GND", x1, x2, y1, y2, shorted?}],
//  rf: {v_peak, freq_hz}, ion: {mass_amu, charge_e}}; lengths in metres.
ElectrodeGeometry geometry_from_json(const Json& j);
Json geometry_to_json(const ElectrodeGeometry& g);

/// Comma-separated numeric rows. Blank lines, '#' comments and a leading
/// header row are skipped. Throws InputError on malformed rows.
std::vector<std::vector<double>> read_numeric_csv(std::istream& in, std::size_t min_columns,
                                                  std::size_t max_columns);

// delay_ms, i_red, i_blue[, sigma_red, sigma_blue]
std::vector<SidebandPoint> read_sidebands(std::istream& in);
// time_hr, freq_hz[, reload_flag]
std::vector<DriftSample> read_drift(std::istream& in);

}  // namespace ivdac::io
