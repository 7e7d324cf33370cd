#pragma once

#include <array>
#include <cmath>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Core>

#include "ivdac/dacmodel.hpp"

namespace ivdac {

using Vec3 = Eigen::Vector3d;
using Mat3 = Eigen::Matrix3d;

// Coordinates: x along the trap axis, y across it, z the height above the
// electrode plane (z = 0). The trap's "axial position" is x.

struct Rect {
    double x1 = 0.0, x2 = 0.0, y1 = 0.0, y2 = 0.0;
    void validate() const;
};

/// Unit-voltage potential of one patch, with gradient (1/m) and Hessian (1/m^2).
struct BasisSample {
    double value = 0.0;
    Vec3 gradient = Vec3::Zero();
    Mat3 hessian = Mat3::Zero();

    BasisSample& operator+=(const BasisSample& o);
    BasisSample& scale(double s);
};

/// Potential of a rectangular patch held at 1 V in an otherwise grounded,
/// gapless plane. Throws InputError for z <= 0.
BasisSample basis_potential(const Rect& rect, const Vec3& point);
double basis_value(const Rect& rect, const Vec3& point);
/// Closed-form gradient; same result as basis_potential().gradient, cheaper.
Vec3 basis_gradient(const Rect& rect, const Vec3& point);

struct IonSpecies {
    double mass_kg = 0.0;
    double charge_c = 0.0;

    static IonSpecies calcium40();
    static IonSpecies from_amu(double mass_amu, double charge_e);
    void validate() const;
};

enum class ElectrodeRole { Dc, Rf, Ground };

struct Electrode {
    std::string name;
    ElectrodeRole role = ElectrodeRole::Dc;
    ChannelId channel;  // Dc only
    Rect rect;
    bool shorted = false;  // may share its channel with other shorted electrodes
};

struct RfDrive {
    double v_peak = 0.0;
    double omega = 0.0;  // rad/s
};

class ElectrodeGeometry {
public:
    ElectrodeGeometry() = default;
    ElectrodeGeometry(std::vector<Electrode> electrodes, RfDrive rf, IonSpecies ion);

    const std::vector<Electrode>& electrodes() const { return electrodes_; }
    /// Distinct DC channels in ascending order; voltage vectors follow this order.
    const std::vector<ChannelId>& channels() const { return channels_; }
    std::size_t channel_count() const { return channels_.size(); }
    /// Position of `ch` in channels(), or -1.
    int channel_slot(ChannelId ch) const;

    const RfDrive& rf() const { return rf_; }
    void set_rf(RfDrive rf) { rf_ = rf; }
    const IonSpecies& ion() const { return ion_; }

    BasisSample channel_basis(std::size_t slot, const Vec3& point) const;
    /// Unit-amplitude potential of all RF electrodes together.
    BasisSample rf_basis(const Vec3& point) const;
    Vec3 rf_gradient(const Vec3& point) const;
    /// Third derivatives of the RF basis, t[k](i, j) = d3 phi / dx_k dx_i dx_j.
    std::array<Mat3, 3> rf_third_derivatives(const Vec3& point) const;

    double dc_value(std::span<const double> volts, const Vec3& point) const;
    Vec3 dc_gradient(std::span<const double> volts, const Vec3& point) const;
    BasisSample dc_potential(std::span<const double> volts, const Vec3& point) const;

    /// Axial extent of the DC electrodes.
    double axial_min() const { return axial_min_; }
    double axial_max() const { return axial_max_; }

private:
    std::vector<Electrode> electrodes_;
    std::vector<ChannelId> channels_;
    std::vector<std::vector<Rect>> channel_rects_;
    std::vector<Rect> rf_rects_;
    RfDrive rf_;
    IonSpecies ion_;
    double axial_min_ = 0.0;
    double axial_max_ = 0.0;
};

/// Linear layout standing in for a 78-channel surface trap: split centre
/// electrodes B37/B38, two RF rails putting the RF null 60 um above the
/// surface, and 2 x 42 outer segments (38 independent per side, two shorted
/// end segments at each end). RF amplitude calibrated to q = 0.3 at
/// 53.17 MHz for 40Ca+.
ElectrodeGeometry bundled_geometry();

/// Time-averaged RF confinement energy (J).
double pseudopotential(const ElectrodeGeometry& geom, const IonSpecies& ion, const Vec3& point);

/// q = 2 Q V d2phi/dn2 / (m Omega^2) along the unit direction `axis`.
double mathieu_q(const ElectrodeGeometry& geom, const IonSpecies& ion, const Vec3& point, const Vec3& axis);
/// Largest |q| over the principal axes of the RF curvature at `point`.
double mathieu_q_principal(const ElectrodeGeometry& geom, const IonSpecies& ion, const Vec3& point);
inline bool mathieu_stable(double q) { return std::abs(q) < 0.908; }

/// Minimum of the pseudopotential in the (y, z) plane at axial position x.
Vec3 rf_null(const ElectrodeGeometry& geom, double axial_position, double height_guess = 60e-6);

/// Potential energy surface seen by the ion. Energies in J, lengths in m.
class PotentialEnergy {
public:
    virtual ~PotentialEnergy() = default;
    virtual double energy(const Vec3& r) const = 0;
    virtual Vec3 gradient(const Vec3& r) const = 0;
    virtual Mat3 hessian(const Vec3& r) const = 0;
};

/// DC electrodes (scaled by dc_scale) + pseudopotential + a uniform stray field.
class TrapPotential final : public PotentialEnergy {
public:
    TrapPotential(const ElectrodeGeometry& geom, const IonSpecies& ion, std::vector<double> volts,
                  double dc_scale = 1.0, Vec3 stray_field = Vec3::Zero());

    double energy(const Vec3& r) const override;
    Vec3 gradient(const Vec3& r) const override;
    Mat3 hessian(const Vec3& r) const override;

private:
    const ElectrodeGeometry& geom_;
    IonSpecies ion_;
    std::vector<double> volts_;
    double dc_scale_;
    Vec3 stray_;
};

struct WellProperties {
    Vec3 position = Vec3::Zero();
    double axial_frequency = 0.0;  // rad/s
    double radial_frequency_1 = 0.0;  // lower radial, rad/s
    double radial_frequency_2 = 0.0;
    Mat3 principal_axes = Mat3::Identity();  // columns: axial, radial 1, radial 2
    double depth_ev = 0.0;  // barrier along the axial line
    double barrier_distance = 0.0;  // distance to the nearer barrier, m
    double energy_at_minimum = 0.0;  // J
    int iterations = 0;
};

struct WellSearchOptions {
    double depth_scan_range = 1.5e-3;  // m each way along the axis
    double depth_scan_step = 2e-6;
    int max_iterations = 100;
    bool compute_depth = true;
};

/// Damped Newton iteration to a local minimum. Throws NoWellError after
/// max_iterations and SaddleError for an indefinite Hessian at the end point.
WellProperties find_well(const PotentialEnergy& potential, double mass_kg, const Vec3& seed,
                         const WellSearchOptions& options = {});
WellProperties find_well(const ElectrodeGeometry& geom, const IonSpecies& ion, std::span<const double> volts,
                         const Vec3& seed, const WellSearchOptions& options = {});

struct WellTarget {
    double axial_position = 0.0;
    double axial_frequency = 0.0;  // rad/s
    bool null_transverse_field = true;
    bool null_axial_cubic = false;  // also zero d3phi/dx3 for a more harmonic well
    std::vector<ChannelId> active_channels;  // empty: all; others held at 0 V
};

/// Segmented channels (every electrode shorter than a quarter of the array)
/// with an electrode centre strictly within `half_width` of `axial_position`.
std::vector<ChannelId> local_channels(const ElectrodeGeometry& geom, double axial_position, double half_width);

struct VoltageSolution {
    std::vector<double> volts;  // aligned with geometry channels()
    Vec3 target_point = Vec3::Zero();
    std::vector<ChannelId> at_bounds;
    WellProperties well;  // find_well at the solution
};

/// Minimum-norm electrode voltages within +-bound meeting the target's
/// gradient and curvature constraints at the RF null. Throws
/// InfeasibleVoltages listing the channels pinned at the bounds.
VoltageSolution solve_voltages(const ElectrodeGeometry& geom, const IonSpecies& ion, const WellTarget& target,
                               double bound = 10.0);

struct StrayFieldResult {
    double estimated_field = 0.0;  // V/m
    double shift_per_unit_scale = 0.0;  // m, fitted slope of position vs 1/scale
    double unperturbed_position = 0.0;
    double axial_frequency = 0.0;  // rad/s at scale 1 without stray field
    std::vector<double> scales;
    std::vector<double> positions;
};

/// Scales the DC potential by each factor with a hidden uniform axial field
/// applied, records the well position and fits x(s) = x0 + Q E / (s m w0^2).
StrayFieldResult stray_field_measurement(const ElectrodeGeometry& geom, const IonSpecies& ion,
                                         std::span<const double> volts, double hidden_axial_field,
                                         std::span<const double> scales, const Vec3& seed);

}  // namespace ivdac
