#include <algorithm>

#include <Eigen/Eigenvalues>

#include "ivdac/constants.hpp"
#include "ivdac/trapfield.hpp"

namespace ivdac {

namespace {

constexpr double um = 1e-6;

// Inner/outer edge of the RF rails; the RF null sits at sqrt(inner * outer) = 60 um.
constexpr double kCentreHalfWidth = 40 * um;
constexpr double kRailOuter = 90 * um;
constexpr double kSegmentOuter = 390 * um;
constexpr double kSegmentPitch = 100 * um;
constexpr int kSegmentsPerSide = 42;
constexpr double kArrayStart = -0.5 * kSegmentsPerSide * kSegmentPitch;
constexpr double kRailHalfLength = 2500 * um;

// A0-A39 and B0-B36 drive the outer segments; B26 is a diagnostic output and
// B37/B38 drive the centre electrodes.
std::vector<ChannelId> axial_channels() {
    std::vector<ChannelId> out;
    for (int i = 0; i < kChannelsPerChip; ++i) out.emplace_back(Chip::A, i);
    for (int i = 0; i <= 36; ++i) {
        if (i != 26) out.emplace_back(Chip::B, i);
    }
    return out;
}

}  // namespace

ElectrodeGeometry bundled_geometry() {
    std::vector<Electrode> es;
    const double x_end = kArrayStart + kSegmentsPerSide * kSegmentPitch;

    es.push_back({"centre_top", ElectrodeRole::Dc, ChannelId(Chip::B, 37), {kArrayStart, x_end, 0.0, kCentreHalfWidth}});
    es.push_back({"centre_bottom", ElectrodeRole::Dc, ChannelId(Chip::B, 38), {kArrayStart, x_end, -kCentreHalfWidth, 0.0}});
    es.push_back({"rf_top", ElectrodeRole::Rf, {}, {-kRailHalfLength, kRailHalfLength, kCentreHalfWidth, kRailOuter}});
    es.push_back({"rf_bottom", ElectrodeRole::Rf, {}, {-kRailHalfLength, kRailHalfLength, -kRailOuter, -kCentreHalfWidth}});

    const auto axial = axial_channels();
    const int independent = kSegmentsPerSide - 4;
    for (int side = 0; side < 2; ++side) {
        const double y1 = side == 0 ? kRailOuter : -kSegmentOuter;
        const double y2 = side == 0 ? kSegmentOuter : -kRailOuter;
        for (int k = 0; k < kSegmentsPerSide; ++k) {
            // The two end segments at each end share the channel of their inner neighbour.
            const int slot = std::clamp(k, 2, kSegmentsPerSide - 3) - 2;
            const bool shorted = k < 2 || k > kSegmentsPerSide - 3;
            const double x1 = kArrayStart + k * kSegmentPitch;
            std::string name = (side == 0 ? "top_" : "bottom_") + std::to_string(k);
            es.push_back({name, ElectrodeRole::Dc, axial[static_cast<std::size_t>(side * independent + slot)],
                          {x1, x1 + kSegmentPitch, y1, y2}, shorted});
        }
    }

    const double omega = constants::two_pi * constants::nominal_rf_frequency_hz;
    const auto ion = IonSpecies::calcium40();
    ElectrodeGeometry geom(std::move(es), {1.0, omega}, ion);

    // Calibrate the RF amplitude to q = 0.3 at the trap centre.
    const Vec3 null = rf_null(geom, 0.0);
    const double q_per_volt = mathieu_q_principal(geom, ion, null);
    geom.set_rf({0.3 / q_per_volt, omega});
    return geom;
}

}  // namespace ivdac
