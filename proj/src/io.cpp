#include "ivdac/io.hpp"

#include <fstream>
#include <sstream>

#include "ivdac/constants.hpp"
#include "ivdac/errors.hpp"

namespace ivdac::io {

namespace {

template <class T>
T field(const Json& j, const char* key) {
    if (!j.contains(key)) throw InputError(std::string("missing field '") + key + "'");
    try {
        return j.at(key).get<T>();
    } catch (const nlohmann::json::exception&) {
        throw InputError(std::string("field '") + key + "' has the wrong type");
    }
}

std::vector<ChannelId> channel_list(const Json& j) {
    std::vector<ChannelId> out;
    for (const auto& name : field<std::vector<std::string>>(j, "channels")) out.push_back(ChannelId::parse(name));
    return out;
}

Json channel_names(const std::vector<ChannelId>& channels) {
    Json out = Json::array();
    for (const auto& c : channels) out.push_back(c.label());
    return out;
}

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r");
    const auto e = s.find_last_not_of(" \t\r");
    return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
}

bool parse_double(const std::string& text, double& out) {
    const auto t = trim(text);
    if (t.empty()) return false;
    std::istringstream is(t);
    is.imbue(std::locale::classic());
    is >> out;
    return is && is.peek() == std::char_traits<char>::eof();
}

}  // namespace

std::string read_text(const std::filesystem::path& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path.string());
    std::ostringstream ss;
    ss << in.rdbuf();
    return ss.str();
}

Json read_json(const std::filesystem::path& path) {
    try {
        return Json::parse(read_text(path));
    } catch (const nlohmann::json::parse_error& e) {
        throw InputError(path.string() + ": " + e.what());
    }
}

VoltageTimeline timeline_from_json(const Json& j) {
    VoltageTimeline t;
    t.channels = channel_list(j);
    t.step_period_s = field<double>(j, "step_period_s");
    t.steps = field<std::vector<std::vector<double>>>(j, "steps");
    t.validate();
    return t;
}

Json timeline_to_json(const VoltageTimeline& t) {
    Json j;
    j["channels"] = channel_names(t.channels);
    j["step_period_s"] = t.step_period_s;
    j["steps"] = t.steps;
    return j;
}

Waveform waveform_from_json(const Json& j) {
    Waveform w;
    w.channels = channel_list(j);
    w.step_period_s = field<double>(j, "step_period_s");
    if (j.contains("source_hash")) w.source_hash = field<std::string>(j, "source_hash");
    if (j.contains("clamped_voltages")) w.clamped_voltages = field<std::size_t>(j, "clamped_voltages");
    if (j.contains("over_budget_packets")) w.over_budget_packets = field<std::size_t>(j, "over_budget_packets");
    for (const auto& jp : field<Json>(j, "packets")) {
        UpdatePacket p;
        for (const auto& jw : jp) {
            if (!jw.is_array() || jw.size() != 2 || !jw[0].is_string() || !jw[1].is_number_unsigned()) {
                throw InputError("packet entries must be [\"channel\", code]");
            }
            const auto code = jw[1].get<std::uint64_t>();
            if (code > 0xFFFF) throw InputError("DAC code out of range");
            p.writes.push_back({ChannelId::parse(jw[0].get<std::string>()), static_cast<DacCode>(code)});
        }
        p.check_unique();
        w.packets.push_back(std::move(p));
    }
    return w;
}

Json waveform_to_json(const Waveform& w) {
    Json j;
    j["channels"] = channel_names(w.channels);
    j["step_period_s"] = w.step_period_s;
    j["source_hash"] = w.source_hash;
    j["clamped_voltages"] = w.clamped_voltages;
    j["over_budget_packets"] = w.over_budget_packets;
    Json packets = Json::array();
    for (const auto& p : w.packets) {
        Json jp = Json::array();
        for (const auto& wr : p.writes) jp.push_back(Json::array({wr.channel.label(), wr.code}));
        packets.push_back(std::move(jp));
    }
    j["packets"] = std::move(packets);
    return j;
}

ElectrodeGeometry geometry_from_json(const Json& j) {
    std::vector<Electrode> electrodes;
    for (const auto& je : field<Json>(j, "electrodes")) {
        Electrode e;
        e.name = field<std::string>(je, "name");
        const auto ch = field<std::string>(je, "channel");
        if (ch == "RF") {
            e.role = ElectrodeRole::Rf;
        } else if (ch == "GND") {
            e.role = ElectrodeRole::Ground;
        } else {
            e.role = ElectrodeRole::Dc;
            e.channel = ChannelId::parse(ch);
        }
        e.rect = {field<double>(je, "x1"), field<double>(je, "x2"), field<double>(je, "y1"), field<double>(je, "y2")};
        if (je.contains("shorted")) e.shorted = field<bool>(je, "shorted");
        electrodes.push_back(std::move(e));
    }
    const auto& rf = field<Json>(j, "rf");
    const auto& ion = field<Json>(j, "ion");
    const RfDrive drive{field<double>(rf, "v_peak"), constants::two_pi * field<double>(rf, "freq_hz")};
    return ElectrodeGeometry(std::move(electrodes), drive,
                             IonSpecies::from_amu(field<double>(ion, "mass_amu"), field<double>(ion, "charge_e")));
}

Json geometry_to_json(const ElectrodeGeometry& g) {
    Json electrodes = Json::array();
    for (const auto& e : g.electrodes()) {
        Json je;
        je["name"] = e.name;
        switch (e.role) {
            case ElectrodeRole::Rf: je["channel"] = "RF"; break;
            case ElectrodeRole::Ground: je["channel"] = "GND"; break;
            case ElectrodeRole::Dc: je["channel"] = e.channel.label(); break;
        }
        je["x1"] = e.rect.x1;
        je["x2"] = e.rect.x2;
        je["y1"] = e.rect.y1;
        je["y2"] = e.rect.y2;
        if (e.shorted) je["shorted"] = true;
        electrodes.push_back(std::move(je));
    }
    Json j;
    j["electrodes"] = std::move(electrodes);
    j["rf"] = {{"v_peak", g.rf().v_peak}, {"freq_hz", g.rf().omega / constants::two_pi}};
    j["ion"] = {{"mass_amu", g.ion().mass_kg / constants::atomic_mass_unit},
                {"charge_e", g.ion().charge_c / constants::elementary_charge}};
    return j;
}

std::vector<std::vector<double>> read_numeric_csv(std::istream& in, std::size_t min_columns,
                                                  std::size_t max_columns) {
    std::vector<std::vector<double>> rows;
    std::string line;
    std::size_t line_no = 0;
    bool first_content = true;
    while (std::getline(in, line)) {
        ++line_no;
        const auto t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        std::vector<std::string> cells;
        std::stringstream ss(t);
        std::string cell;
        while (std::getline(ss, cell, ',')) cells.push_back(cell);
        std::vector<double> row;
        bool numeric = true;
        for (const auto& c : cells) {
            double v = 0.0;
            if (!parse_double(c, v)) {
                numeric = false;
                break;
            }
            row.push_back(v);
        }
        if (!numeric) {
            if (first_content) {  // header row
                first_content = false;
                continue;
            }
            throw InputError("line " + std::to_string(line_no) + ": non-numeric value");
        }
        first_content = false;
        if (row.size() < min_columns || row.size() > max_columns) {
            throw InputError("line " + std::to_string(line_no) + ": expected " + std::to_string(min_columns) +
                             " to " + std::to_string(max_columns) + " columns");
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

std::vector<SidebandPoint> read_sidebands(std::istream& in) {
    std::vector<SidebandPoint> out;
    for (const auto& r : read_numeric_csv(in, 3, 5)) {
        if (r.size() == 4) throw InputError("sideband rows need both sigma columns or neither");
        SidebandPoint p{r[0], r[1], r[2]};
        if (r.size() == 5) {
            p.sigma_red = r[3];
            p.sigma_blue = r[4];
        }
        out.push_back(p);
    }
    return out;
}

std::vector<DriftSample> read_drift(std::istream& in) {
    std::vector<DriftSample> out;
    for (const auto& r : read_numeric_csv(in, 2, 3)) {
        out.push_back({r[0], r[1], r.size() == 3 && r[2] != 0.0});
    }
    return out;
}

}  // namespace ivdac::io
