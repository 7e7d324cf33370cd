#pragma once

#include <cstdint>
#include <iosfwd>
#include <string>
#include <vector>

#include "ivdac/packet.hpp"
#include "ivdac/rcfilter.hpp"
#include "ivdac/serialbus.hpp"
#include "ivdac/trapfield.hpp"
#include "ivdac/wavecomp.hpp"

namespace ivdac {

struct IonState {
    Vec3 position = Vec3::Zero();
    Vec3 velocity = Vec3::Zero();
};

enum class DynamicsMode { Secular, FullRf };
enum class TransportProfile { Linear, SCurve };

struct TransportRequest {
    double start = -500e-6;  // axial positions, m
    double end = 500e-6;
    double speed = 1.0;  // m/s
    double update_rate_hz = 38e3;
    double axial_frequency = 0.0;  // rad/s
    TransportProfile profile = TransportProfile::Linear;
    double hold_s = 100e-6;  // static time after the last update
    TimingModel timing = TimingModel::paper_nominal();
};

/// Waypoint wells, their voltage solutions and the DAC-latched voltages the
/// ion actually sees (after compile/replay through the packet stream).
struct TransportPlan {
    ElectrodeGeometry geometry;
    std::vector<double> waypoints;
    double axial_frequency = 0.0;
    double update_period_s = 0.0;
    double hold_s = 0.0;
    std::vector<std::vector<double>> voltages;  // per update, aligned with geometry.channels()
    Waveform waveform;
    RateReport rate;
    double min_depth_ev = 0.0;  // shallowest waypoint well

    double duration() const {
        return static_cast<double>(waypoints.size() - 1) * update_period_s + hold_s;
    }
};

/// Solves a well at every waypoint and pushes the voltage timeline through
/// the packet compiler. Throws InfeasibleRate when the update rate exceeds
/// what the bus sustains for the compiled deltas.
TransportPlan plan_transport(const ElectrodeGeometry& geom, const IonSpecies& ion, const TransportRequest& request);

/// A plan that holds one well for `duration`; used for static checks.
TransportPlan static_plan(const ElectrodeGeometry& geom, const IonSpecies& ion, double position, double omega,
                          double duration);

struct IntegrateOptions {
    double dt = 0.0;  // 0 picks 1/60 of the fastest period (secular or RF)
    bool convergence_check = true;  // rerun at dt/2, require < 1% energy change
    double sample_interval = 1e-6;
    double average_window = 1e-6;  // final-energy averaging window
};

struct TrajectorySample {
    double t = 0.0;
    Vec3 position = Vec3::Zero();
    double energy = 0.0;  // J, relative to the instantaneous well
    double quanta = 0.0;  // energy / (hbar w_z)
};

struct TransportResult {
    std::vector<TrajectorySample> trajectory;
    double initial_axial_energy = 0.0;  // J
    double final_axial_energy = 0.0;
    double final_energy = 0.0;  // all three modes, J
    double quanta_gained = 0.0;
    double max_energy = 0.0;  // over samples, J
    double escape_threshold = 0.0;  // J
    bool survived = true;
    bool converged = true;
    double dt = 0.0;
    std::size_t steps = 0;
    WellProperties final_well;

    std::string report() const;
    void write_csv(std::ostream& os) const;
};

TransportResult integrate(const TransportPlan& plan, const FilterParams& filter, const IonSpecies& ion,
                          const IonState& initial, DynamicsMode mode, const IntegrateOptions& options = {});

/// Ion displaced along the axial mode of `well` with the given energy in
/// quanta and oscillation phase.
IonState axial_coherent_state(const WellProperties& well, const IonSpecies& ion, double quanta, double phase);

/// Generic fixed-step RK4 for r'' = a(t, r, v). Returns the final state.
template <class Accel>
IonState rk4_step(const IonState& s, double t, double dt, const Accel& accel) {
    const Vec3 k1r = s.velocity;
    const Vec3 k1v = accel(t, s.position, s.velocity);
    const Vec3 k2r = s.velocity + 0.5 * dt * k1v;
    const Vec3 k2v = accel(t + 0.5 * dt, s.position + 0.5 * dt * k1r, k2r);
    const Vec3 k3r = s.velocity + 0.5 * dt * k2v;
    const Vec3 k3v = accel(t + 0.5 * dt, s.position + 0.5 * dt * k2r, k3r);
    const Vec3 k4r = s.velocity + dt * k3v;
    const Vec3 k4v = accel(t + dt, s.position + dt * k3r, k4r);
    return {s.position + dt / 6.0 * (k1r + 2.0 * k2r + 2.0 * k3r + k4r),
            s.velocity + dt / 6.0 * (k1v + 2.0 * k2v + 2.0 * k3v + k4v)};
}

/// Axial Coulomb-crystal equilibrium positions (m) in a harmonic well
/// centred at `centre`, ascending.
std::vector<double> equilibrium_positions(int n_ions, const IonSpecies& ion, double omega_z, double centre = 0.0);

/// Axial normal-mode frequencies (rad/s), ascending.
std::vector<double> normal_modes(int n_ions, const IonSpecies& ion, double omega_z, double centre = 0.0);

/// Two ions: (Q^2 / (2 pi eps0 m w^2))^(1/3). More ions: smallest spacing of the
/// solved crystal.
double equilibrium_spacing(int n_ions, const IonSpecies& ion, double omega_z);

}  // namespace ivdac
