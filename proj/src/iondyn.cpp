#include "ivdac/iondyn.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <limits>
#include <ostream>
#include <sstream>

#include <Eigen/Dense>

#include "ivdac/constants.hpp"
#include "ivdac/errors.hpp"

namespace ivdac {

namespace {

constexpr double kWindowHalfWidth = 350e-6;  // local electrodes used per well

std::vector<double> make_waypoints(const TransportRequest& rq) {
    const double distance = std::abs(rq.end - rq.start);
    const double direction = rq.end >= rq.start ? 1.0 : -1.0;
    const double step = rq.speed / rq.update_rate_hz;
    std::vector<double> out;
    if (distance == 0.0) {
        out.push_back(rq.start);
        return out;
    }
    if (rq.profile == TransportProfile::Linear) {
        const auto n = static_cast<std::size_t>(std::ceil(distance / step - 1e-9));
        for (std::size_t k = 0; k <= n; ++k) {
            out.push_back(rq.start + direction * std::min(static_cast<double>(k) * step, distance));
        }
    } else {
        // Smoothstep peaks at 1.5x the mean speed; the step count keeps the
        // largest step within speed * period.
        const auto n = static_cast<std::size_t>(std::ceil(1.5 * distance / step - 1e-9));
        for (std::size_t k = 0; k <= n; ++k) {
            const double u = static_cast<double>(k) / static_cast<double>(n);
            out.push_back(rq.start + direction * distance * u * u * (3.0 - 2.0 * u));
        }
    }
    return out;
}

TransportPlan build_plan(const ElectrodeGeometry& geom, const IonSpecies& ion, std::vector<double> waypoints,
                         double omega, double period, double hold, const TimingModel& timing,
                         double requested_rate) {
    TransportPlan plan;
    plan.geometry = geom;
    plan.waypoints = std::move(waypoints);
    plan.axial_frequency = omega;
    plan.update_period_s = period;
    plan.hold_s = hold;

    VoltageTimeline timeline;
    timeline.channels = geom.channels();
    timeline.step_period_s = period;
    plan.min_depth_ev = std::numeric_limits<double>::infinity();
    for (double x : plan.waypoints) {
        WellTarget target;
        target.axial_position = x;
        target.axial_frequency = omega;
        target.active_channels = local_channels(geom, x, kWindowHalfWidth);
        auto sol = solve_voltages(geom, ion, target);
        plan.min_depth_ev = std::min(plan.min_depth_ev, sol.well.depth_ev);
        timeline.steps.push_back(std::move(sol.volts));
    }
    plan.waveform = compile(timeline);
    plan.rate = max_update_rate(plan.waveform, timing);
    if (requested_rate > plan.rate.max_rate_hz * (1.0 + 1e-12)) {
        std::ostringstream msg;
        msg << "update rate " << requested_rate << " Hz exceeds the bus limit of " << plan.rate.max_rate_hz
            << " Hz set by packet " << plan.rate.bottleneck_packet;
        throw InfeasibleRate(msg.str(), plan.rate.bottleneck_packet);
    }
    plan.voltages = replay(plan.waveform).steps;
    return plan;
}

// Everything the integrator needs at time t.
class Dynamics {
public:
    Dynamics(const TransportPlan& plan, const FilterParams& filter, const IonSpecies& ion, DynamicsMode mode)
        : plan_(plan), ion_(ion), mode_(mode), filtered_(make_filtered(plan, filter)),
          buffer_(plan.geometry.channel_count()) {}

    std::vector<double> volts(double t) const {
        std::vector<double> v(plan_.geometry.channel_count());
        filtered_.values(t, v);
        return v;
    }

    Vec3 accel(double t, const Vec3& r) const {
        filtered_.values(t, buffer_);
        const auto& g = plan_.geometry;
        Vec3 f;
        if (mode_ == DynamicsMode::Secular) {
            f = -TrapPotential(g, ion_, buffer_).gradient(r);
        } else {
            const double rf = g.rf().v_peak * std::cos(g.rf().omega * t);
            f = -ion_.charge_c * (g.dc_gradient(buffer_, r) + rf * g.rf_gradient(r));
        }
        return f / ion_.mass_kg;
    }

    WellProperties well(double t, const Vec3& seed, bool depth) const {
        WellSearchOptions opt;
        opt.compute_depth = depth;
        return find_well(TrapPotential(plan_.geometry, ion_, volts(t)), ion_.mass_kg, seed, opt);
    }

    // Secular energy relative to a well minimum moving at v_well.
    double energy(double t, const IonState& s, const Vec3& centre, const Vec3& v_well) const {
        const TrapPotential u(plan_.geometry, ion_, volts(t));
        return 0.5 * ion_.mass_kg * (s.velocity - v_well).squaredNorm() + u.energy(s.position) - u.energy(centre);
    }

private:
    static FilteredTimeline make_filtered(const TransportPlan& plan, const FilterParams& filter) {
        const std::size_t steps = plan.voltages.size();
        const std::size_t channels = plan.geometry.channel_count();
        std::vector<double> times(steps);
        std::vector<std::vector<double>> levels(channels, std::vector<double>(steps));
        for (std::size_t k = 0; k < steps; ++k) {
            times[k] = static_cast<double>(k) * plan.update_period_s;
            for (std::size_t c = 0; c < channels; ++c) levels[c][k] = plan.voltages[k][c];
        }
        return FilteredTimeline(filter, std::move(times), std::move(levels));
    }

    const TransportPlan& plan_;
    IonSpecies ion_;
    DynamicsMode mode_;
    FilteredTimeline filtered_;
    mutable std::vector<double> buffer_;
};

double axial_energy(const IonState& s, const WellProperties& w, const Vec3& centre, const Vec3& v_well,
                    double mass) {
    const Vec3 e = w.principal_axes.col(0);
    const double v = (s.velocity - v_well).dot(e);
    const double d = (s.position - centre).dot(e);
    return 0.5 * mass * (v * v + w.axial_frequency * w.axial_frequency * d * d);
}

struct Run {
    std::vector<TrajectorySample> samples;
    double final_axial = 0.0;
    double final_total = 0.0;
    double max_energy = 0.0;
    bool escaped = false;
    std::size_t steps = 0;
    double dt = 0.0;
    WellProperties final_well;
};

Run run(const Dynamics& dyn, const TransportPlan& plan, const IonSpecies& ion, const IonState& initial,
        const WellProperties& w0, double dt_nominal, double threshold, const IntegrateOptions& opt) {
    const double total = plan.duration();
    Run out;
    out.steps = static_cast<std::size_t>(std::max(1.0, std::ceil(total / dt_nominal - 1e-9)));
    out.dt = total / static_cast<double>(out.steps);
    const auto sample_every =
        static_cast<std::size_t>(std::max(1.0, std::round(opt.sample_interval / out.dt)));
    const double window = std::min(opt.average_window, 0.5 * total);
    const double quantum = constants::hbar * plan.axial_frequency;

    IonState s = initial;
    Vec3 well_pos = w0.position;
    double well_t = 0.0;
    std::vector<std::pair<double, IonState>> tail;
    auto accel = [&](double t, const Vec3& r, const Vec3&) { return dyn.accel(t, r); };

    auto sample = [&](std::size_t k) {
        const double t = static_cast<double>(k) * out.dt;
        const auto w = dyn.well(t, well_pos, false);
        const Vec3 v_well = t > well_t ? Vec3((w.position - well_pos) / (t - well_t)) : Vec3::Zero();
        well_pos = w.position;
        well_t = t;
        const double e = dyn.energy(t, s, w.position, v_well);
        out.samples.push_back({t, s.position, e, e / quantum});
        out.max_energy = std::max(out.max_energy, e);
        if (e > threshold) out.escaped = true;
    };

    sample(0);
    for (std::size_t k = 0; k < out.steps && !out.escaped; ++k) {
        const double t = static_cast<double>(k) * out.dt;
        s = rk4_step(s, t, out.dt, accel);
        const double t1 = static_cast<double>(k + 1) * out.dt;
        if (!s.position.allFinite() || s.position.z() <= 0.0) {
            out.escaped = true;
            break;
        }
        if (t1 >= total - window - 0.5 * out.dt) tail.emplace_back(t1, s);
        if ((k + 1) % sample_every == 0 || k + 1 == out.steps) sample(k + 1);
    }
    if (out.escaped) {
        out.final_axial = out.final_total = out.max_energy;
        return out;
    }

    // Final well and its residual drift across the averaging window.
    out.final_well = dyn.well(total, well_pos, true);
    const double t_before = tail.front().first;
    const auto w_before = dyn.well(t_before, out.final_well.position, false);
    const Vec3 v_well = total > t_before ? Vec3((out.final_well.position - w_before.position) / (total - t_before))
                                         : Vec3::Zero();
    double sum_axial = 0.0;
    double sum_total = 0.0;
    for (const auto& [t, st] : tail) {
        const Vec3 centre = out.final_well.position + v_well * (t - total);
        sum_axial += axial_energy(st, out.final_well, centre, v_well, ion.mass_kg);
        sum_total += dyn.energy(t, st, centre, v_well);
    }
    out.final_axial = sum_axial / static_cast<double>(tail.size());
    out.final_total = sum_total / static_cast<double>(tail.size());
    return out;
}

}  // namespace

TransportPlan plan_transport(const ElectrodeGeometry& geom, const IonSpecies& ion, const TransportRequest& rq) {
    ion.validate();
    if (!(rq.speed > 0.0) || !(rq.update_rate_hz > 0.0) || !(rq.axial_frequency > 0.0) || !(rq.hold_s >= 0.0)) {
        throw InputError("transport speed, update rate and axial frequency must be positive");
    }
    rq.timing.validate();
    return build_plan(geom, ion, make_waypoints(rq), rq.axial_frequency, 1.0 / rq.update_rate_hz, rq.hold_s,
                      rq.timing, rq.update_rate_hz);
}

TransportPlan static_plan(const ElectrodeGeometry& geom, const IonSpecies& ion, double position, double omega,
                          double duration) {
    ion.validate();
    if (!(omega > 0.0) || !(duration > 0.0)) {
        throw InputError("static well needs a positive frequency and duration");
    }
    return build_plan(geom, ion, {position}, omega, duration, duration, TimingModel::paper_nominal(), 0.0);
}

TransportResult integrate(const TransportPlan& plan, const FilterParams& filter, const IonSpecies& ion,
                          const IonState& initial, DynamicsMode mode, const IntegrateOptions& options) {
    filter.validate();
    ion.validate();
    if (plan.voltages.empty() || plan.voltages.size() != plan.waypoints.size()) {
        throw InputError("transport plan has no voltage steps");
    }
    if (!initial.position.allFinite() || !initial.velocity.allFinite()) {
        throw InputError("initial ion state must be finite");
    }
    const Dynamics dyn(plan, filter, ion, mode);
    const Vec3 seed(plan.waypoints.front(), 0.0, initial.position.z() > 0.0 ? initial.position.z() : 60e-6);
    const auto w0 = dyn.well(0.0, rf_null(plan.geometry, plan.waypoints.front(), seed.z()), false);

    const double secular_period = constants::two_pi / w0.radial_frequency_2;
    const double rf_period = constants::two_pi / plan.geometry.rf().omega;
    double dt = options.dt;
    if (dt <= 0.0) {
        dt = secular_period / 60.0;
        if (mode == DynamicsMode::FullRf) dt = std::min(dt, rf_period / 60.0);
    } else if (mode == DynamicsMode::FullRf && dt > rf_period / 50.0) {
        throw InputError("full RF integration needs a time step of at most 1/50 of the RF period");
    }

    const double threshold = plan.min_depth_ev * constants::elementary_charge;
    const double quantum = constants::hbar * plan.axial_frequency;

    TransportResult res;
    res.escape_threshold = threshold;
    res.initial_axial_energy = axial_energy(initial, w0, w0.position, Vec3::Zero(), ion.mass_kg);

    Run fine = run(dyn, plan, ion, initial, w0, dt, threshold, options);
    if (options.convergence_check && !fine.escaped) {
        Run half = run(dyn, plan, ion, initial, w0, 0.5 * dt, threshold, options);
        res.converged = half.escaped == fine.escaped &&
                        std::abs(half.final_axial - fine.final_axial) <= 0.01 * std::abs(half.final_axial) +
                                                                            1e-3 * quantum;
        fine = std::move(half);
    }

    res.trajectory = std::move(fine.samples);
    res.final_axial_energy = fine.final_axial;
    res.final_energy = fine.final_total;
    res.max_energy = fine.max_energy;
    res.survived = !fine.escaped;
    res.dt = fine.dt;
    res.steps = fine.steps;
    res.final_well = fine.final_well;
    res.quanta_gained = (res.final_axial_energy - res.initial_axial_energy) / quantum;
    for (auto& smp : res.trajectory) smp.quanta = smp.energy / quantum;
    return res;
}

std::string TransportResult::report() const {
    std::ostringstream os;
    os << std::setprecision(6);
    os << "survived: " << (survived ? "yes" : "no") << '\n'
       << "quanta_gained: " << quanta_gained << '\n'
       << "initial_axial_energy_J: " << initial_axial_energy << '\n'
       << "final_axial_energy_J: " << final_axial_energy << '\n'
       << "final_secular_energy_J: " << final_energy << '\n'
       << "max_energy_J: " << max_energy << '\n'
       << "escape_threshold_J: " << escape_threshold << '\n'
       << "converged: " << (converged ? "yes" : "no") << '\n'
       << "time_step_s: " << dt << '\n'
       << "steps: " << steps << '\n';
    if (survived) {
        os << "final_position_m: " << final_well.position.x() << '\n'
           << "final_axial_frequency_hz: " << final_well.axial_frequency / constants::two_pi << '\n';
    }
    return os.str();
}

void TransportResult::write_csv(std::ostream& os) const {
    os << "t,x,y,z,energy,quanta\n";
    os << std::setprecision(10);
    for (const auto& s : trajectory) {
        os << s.t << ',' << s.position.x() << ',' << s.position.y() << ',' << s.position.z() << ',' << s.energy
           << ',' << s.quanta << '\n';
    }
}

IonState axial_coherent_state(const WellProperties& well, const IonSpecies& ion, double quanta, double phase) {
    if (!(quanta >= 0.0)) throw InputError("coherent-state energy must be non-negative");
    const double w = well.axial_frequency;
    const double amplitude = std::sqrt(2.0 * quanta * constants::hbar / (ion.mass_kg * w));
    const Vec3 e = well.principal_axes.col(0);
    return {well.position + amplitude * std::cos(phase) * e, -amplitude * w * std::sin(phase) * e};
}

namespace {

double coulomb_constant(const IonSpecies& ion) {
    return ion.charge_c * ion.charge_c / (4.0 * constants::pi * constants::vacuum_permittivity);
}

void check_chain(int n, const IonSpecies& ion, double omega) {
    ion.validate();
    if (n < 1) throw InputError("ion count must be at least 1");
    if (!(omega > 0.0)) throw InputError("axial frequency must be positive");
}

Eigen::MatrixXd chain_hessian(const Eigen::VectorXd& x, double spring, double k) {
    const auto n = x.size();
    Eigen::MatrixXd h = Eigen::MatrixXd::Zero(n, n);
    for (Eigen::Index i = 0; i < n; ++i) {
        h(i, i) = spring;
        for (Eigen::Index j = 0; j < n; ++j) {
            if (j == i) continue;
            const double c = 2.0 * k / std::pow(std::abs(x[i] - x[j]), 3);
            h(i, i) += c;
            h(i, j) = -c;
        }
    }
    return h;
}

}  // namespace

std::vector<double> equilibrium_positions(int n_ions, const IonSpecies& ion, double omega_z, double centre) {
    check_chain(n_ions, ion, omega_z);
    const double spring = ion.mass_kg * omega_z * omega_z;
    const double k = coulomb_constant(ion);
    const double length = std::cbrt(k / spring);
    const auto n = static_cast<Eigen::Index>(n_ions);

    // Newton in physical units on U = sum spring/2 x^2 + sum k / |xi - xj|,
    // with x measured from the well centre.
    Eigen::VectorXd x(n);
    for (Eigen::Index i = 0; i < n; ++i) {
        x[i] = length * 1.2 * (static_cast<double>(i) - 0.5 * static_cast<double>(n - 1)) /
                            std::pow(static_cast<double>(n), 0.4);
    }
    for (int it = 0; it < 200; ++it) {
        Eigen::VectorXd g(n);
        for (Eigen::Index i = 0; i < n; ++i) {
            g[i] = spring * x[i];
            for (Eigen::Index j = 0; j < n; ++j) {
                if (j == i) continue;
                const double d = x[i] - x[j];
                g[i] -= k * (d > 0 ? 1.0 : -1.0) / (d * d);
            }
        }
        if (g.norm() <= 1e-13 * spring * length) {
            std::vector<double> out(x.data(), x.data() + n);
            std::sort(out.begin(), out.end());
            for (double& v : out) v += centre;
            return out;
        }
        Eigen::VectorXd step = -chain_hessian(x, spring, k).ldlt().solve(g);
        // Keep the ordering: never move an ion more than a third of the nearest gap.
        double min_gap = length;
        for (Eigen::Index i = 0; i + 1 < n; ++i) min_gap = std::min(min_gap, x[i + 1] - x[i]);
        const double limit = min_gap / 3.0;
        if (step.cwiseAbs().maxCoeff() > limit) step *= limit / step.cwiseAbs().maxCoeff();
        x += step;
    }
    throw ConvergenceError("ion crystal equilibrium did not converge");
}

std::vector<double> normal_modes(int n_ions, const IonSpecies& ion, double omega_z, double centre) {
    const auto pos = equilibrium_positions(n_ions, ion, omega_z, centre);
    const Eigen::VectorXd x = Eigen::Map<const Eigen::VectorXd>(pos.data(), static_cast<Eigen::Index>(pos.size()));
    const double spring = ion.mass_kg * omega_z * omega_z;
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(chain_hessian(x, spring, coulomb_constant(ion)));
    std::vector<double> out;
    for (Eigen::Index i = 0; i < es.eigenvalues().size(); ++i) {
        out.push_back(std::sqrt(es.eigenvalues()[i] / ion.mass_kg));
    }
    return out;
}

double equilibrium_spacing(int n_ions, const IonSpecies& ion, double omega_z) {
    check_chain(n_ions, ion, omega_z);
    if (n_ions < 2) throw InputError("spacing needs at least two ions");
    if (n_ions == 2) {
        const double q = ion.charge_c;
        return std::cbrt(q * q / (2.0 * constants::pi * constants::vacuum_permittivity * ion.mass_kg * omega_z * omega_z));
    }
    const auto pos = equilibrium_positions(n_ions, ion, omega_z);
    double gap = pos[1] - pos[0];
    for (std::size_t i = 1; i + 1 < pos.size(); ++i) gap = std::min(gap, pos[i + 1] - pos[i]);
    return gap;
}

}  // namespace ivdac
