#include "ivdac/trapfield.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <sstream>

#include <Eigen/Dense>

#include "ivdac/analysis.hpp"
#include "ivdac/constants.hpp"
#include "ivdac/errors.hpp"
#include "ivdac/jet.hpp"

namespace ivdac {

void Rect::validate() const {
    if (!(x2 > x1) || !(y2 > y1) || !std::isfinite(x1) || !std::isfinite(x2) || !std::isfinite(y1) ||
        !std::isfinite(y2)) {
        throw InputError("degenerate electrode rectangle");
    }
}

BasisSample& BasisSample::operator+=(const BasisSample& o) {
    value += o.value;
    gradient += o.gradient;
    hessian += o.hessian;
    return *this;
}

BasisSample& BasisSample::scale(double s) {
    value *= s;
    gradient *= s;
    hessian *= s;
    return *this;
}

namespace {

constexpr double kInv2Pi = 1.0 / constants::two_pi;

void check_height(const Vec3& p) {
    if (!(p.z() > 0.0)) {
        throw InputError("field point must lie above the electrode plane (z > 0)");
    }
}

// atan(a b / (z R)) for one corner, a = xc - x, b = yc - y.
Jet corner_jet(double xc, double yc, const Vec3& p) {
    const Jet a = Jet::variable(xc - p.x(), 0, -1.0);
    const Jet b = Jet::variable(yc - p.y(), 1, -1.0);
    const Jet z = Jet::variable(p.z(), 2, 1.0);
    const Jet r = sqrt(a * a + b * b + z * z);
    return atan((a * b) / (z * r));
}

double corner_value(double a, double b, double z) {
    return std::atan(a * b / (z * std::sqrt(a * a + b * b + z * z)));
}

// Gradient of the corner term with respect to the field point.
Vec3 corner_gradient(double a, double b, double z) {
    const double a2z2 = a * a + z * z;
    const double b2z2 = b * b + z * z;
    const double r = std::sqrt(a * a + b * b + z * z);
    const double dfa = b * z / (a2z2 * r);
    const double dfb = a * z / (b2z2 * r);
    const double dfz = -a * b * (r * r + z * z) / (r * a2z2 * b2z2);
    return {-dfa, -dfb, dfz};
}

Mat3 fd_derivative_of_hessian(const auto& hessian_at, const Vec3& p, int axis, double h) {
    Vec3 e = Vec3::Zero();
    e[axis] = h;
    return (-hessian_at(p + 2.0 * e) + 8.0 * hessian_at(p + e) - 8.0 * hessian_at(p - e) + hessian_at(p - 2.0 * e)) /
           (12.0 * h);
}

}  // namespace

BasisSample basis_potential(const Rect& rect, const Vec3& point) {
    check_height(point);
    const Jet j = corner_jet(rect.x2, rect.y2, point) + corner_jet(rect.x1, rect.y1, point) -
                  corner_jet(rect.x1, rect.y2, point) - corner_jet(rect.x2, rect.y1, point);
    return {kInv2Pi * j.v, kInv2Pi * j.g, kInv2Pi * j.h};
}

double basis_value(const Rect& rect, const Vec3& point) {
    check_height(point);
    const double z = point.z();
    const double a1 = rect.x1 - point.x(), a2 = rect.x2 - point.x();
    const double b1 = rect.y1 - point.y(), b2 = rect.y2 - point.y();
    return kInv2Pi * (corner_value(a2, b2, z) + corner_value(a1, b1, z) - corner_value(a1, b2, z) -
                      corner_value(a2, b1, z));
}

Vec3 basis_gradient(const Rect& rect, const Vec3& point) {
    check_height(point);
    const double z = point.z();
    const double a1 = rect.x1 - point.x(), a2 = rect.x2 - point.x();
    const double b1 = rect.y1 - point.y(), b2 = rect.y2 - point.y();
    return kInv2Pi * (corner_gradient(a2, b2, z) + corner_gradient(a1, b1, z) - corner_gradient(a1, b2, z) -
                      corner_gradient(a2, b1, z));
}

IonSpecies IonSpecies::calcium40() { return from_amu(constants::calcium40_mass_amu, 1.0); }

IonSpecies IonSpecies::from_amu(double mass_amu, double charge_e) {
    IonSpecies s{mass_amu * constants::atomic_mass_unit, charge_e * constants::elementary_charge};
    s.validate();
    return s;
}

void IonSpecies::validate() const {
    if (!(mass_kg > 0.0) || !(charge_c > 0.0)) {
        throw InputError("ion mass and charge must be positive");
    }
}

ElectrodeGeometry::ElectrodeGeometry(std::vector<Electrode> electrodes, RfDrive rf, IonSpecies ion)
    : electrodes_(std::move(electrodes)), rf_(rf), ion_(ion) {
    ion_.validate();
    if (!(rf_.v_peak >= 0.0) || !(rf_.omega > 0.0)) {
        throw InputError("RF drive needs v_peak >= 0 and a positive frequency");
    }
    std::vector<ChannelId> seen;
    axial_min_ = std::numeric_limits<double>::infinity();
    axial_max_ = -std::numeric_limits<double>::infinity();
    for (const auto& e : electrodes_) {
        e.rect.validate();
        if (e.role == ElectrodeRole::Rf) {
            rf_rects_.push_back(e.rect);
        } else if (e.role == ElectrodeRole::Dc) {
            seen.push_back(e.channel);
            axial_min_ = std::min(axial_min_, e.rect.x1);
            axial_max_ = std::max(axial_max_, e.rect.x2);
        }
    }
    std::sort(seen.begin(), seen.end());
    seen.erase(std::unique(seen.begin(), seen.end()), seen.end());
    channels_ = seen;
    channel_rects_.resize(channels_.size());
    std::vector<int> users(channels_.size(), 0);
    std::vector<int> shorted_users(channels_.size(), 0);
    for (const auto& e : electrodes_) {
        if (e.role != ElectrodeRole::Dc) continue;
        const auto slot = static_cast<std::size_t>(channel_slot(e.channel));
        channel_rects_[slot].push_back(e.rect);
        users[slot] += 1;
        shorted_users[slot] += e.shorted ? 1 : 0;
    }
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        // A shared channel is fine when every extra electrode on it is marked shorted.
        if (users[i] > 1 && shorted_users[i] < users[i] - 1) {
            throw InputError("channel " + channels_[i].label() +
                             " drives several electrodes that are not marked shorted");
        }
    }
    if (rf_rects_.empty()) {
        throw InputError("geometry has no RF electrodes");
    }
}

int ElectrodeGeometry::channel_slot(ChannelId ch) const {
    const auto it = std::lower_bound(channels_.begin(), channels_.end(), ch);
    if (it == channels_.end() || *it != ch) return -1;
    return static_cast<int>(it - channels_.begin());
}

BasisSample ElectrodeGeometry::channel_basis(std::size_t slot, const Vec3& point) const {
    BasisSample s;
    for (const auto& r : channel_rects_.at(slot)) s += basis_potential(r, point);
    return s;
}

BasisSample ElectrodeGeometry::rf_basis(const Vec3& point) const {
    BasisSample s;
    for (const auto& r : rf_rects_) s += basis_potential(r, point);
    return s;
}

Vec3 ElectrodeGeometry::rf_gradient(const Vec3& point) const {
    Vec3 g = Vec3::Zero();
    for (const auto& r : rf_rects_) g += basis_gradient(r, point);
    return g;
}

std::array<Mat3, 3> ElectrodeGeometry::rf_third_derivatives(const Vec3& point) const {
    check_height(point);
    const double h = 1e-3 * point.z();
    const auto hess = [this](const Vec3& p) { return rf_basis(p).hessian; };
    return {fd_derivative_of_hessian(hess, point, 0, h), fd_derivative_of_hessian(hess, point, 1, h),
            fd_derivative_of_hessian(hess, point, 2, h)};
}

double ElectrodeGeometry::dc_value(std::span<const double> volts, const Vec3& point) const {
    double v = 0.0;
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        if (volts[i] == 0.0) continue;
        double phi = 0.0;
        for (const auto& r : channel_rects_[i]) phi += basis_value(r, point);
        v += volts[i] * phi;
    }
    return v;
}

Vec3 ElectrodeGeometry::dc_gradient(std::span<const double> volts, const Vec3& point) const {
    Vec3 g = Vec3::Zero();
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        if (volts[i] == 0.0) continue;
        for (const auto& r : channel_rects_[i]) g += volts[i] * basis_gradient(r, point);
    }
    return g;
}

BasisSample ElectrodeGeometry::dc_potential(std::span<const double> volts, const Vec3& point) const {
    BasisSample s;
    for (std::size_t i = 0; i < channels_.size(); ++i) {
        if (volts[i] == 0.0) continue;
        s += channel_basis(i, point).scale(volts[i]);
    }
    return s;
}

namespace {

// Q^2 V^2 / (2 m Omega^2): pseudopotential = pp_coefficient * |grad phi_rf|^2 / 2.
double pp_coefficient(const ElectrodeGeometry& geom, const IonSpecies& ion) {
    const double qv = ion.charge_c * geom.rf().v_peak;
    return qv * qv / (2.0 * ion.mass_kg * geom.rf().omega * geom.rf().omega);
}

Vec3 pseudo_gradient(const ElectrodeGeometry& geom, const IonSpecies& ion, const BasisSample& rf) {
    return pp_coefficient(geom, ion) * (rf.hessian * rf.gradient);
}

Mat3 pseudo_hessian(const ElectrodeGeometry& geom, const IonSpecies& ion, const BasisSample& rf, const Vec3& p) {
    const auto t = geom.rf_third_derivatives(p);
    Mat3 h = rf.hessian * rf.hessian;
    for (int k = 0; k < 3; ++k) h += rf.gradient[k] * t[k];
    return pp_coefficient(geom, ion) * h;
}

}  // namespace

double pseudopotential(const ElectrodeGeometry& geom, const IonSpecies& ion, const Vec3& point) {
    const Vec3 g = geom.rf_basis(point).gradient;
    return 0.5 * pp_coefficient(geom, ion) * g.squaredNorm();
}

double mathieu_q(const ElectrodeGeometry& geom, const IonSpecies& ion, const Vec3& point, const Vec3& axis) {
    const Vec3 n = axis.normalized();
    const double curvature = n.dot(geom.rf_basis(point).hessian * n);
    return 2.0 * ion.charge_c * geom.rf().v_peak * curvature / (ion.mass_kg * geom.rf().omega * geom.rf().omega);
}

double mathieu_q_principal(const ElectrodeGeometry& geom, const IonSpecies& ion, const Vec3& point) {
    Eigen::SelfAdjointEigenSolver<Mat3> es(geom.rf_basis(point).hessian);
    const auto& ev = es.eigenvalues();
    int best = 0;
    for (int i = 1; i < 3; ++i) {
        if (std::abs(ev[i]) > std::abs(ev[best])) best = i;
    }
    return std::abs(mathieu_q(geom, ion, point, es.eigenvectors().col(best)));
}

Vec3 rf_null(const ElectrodeGeometry& geom, double axial_position, double height_guess) {
    // Newton on grad |grad phi_rf|^2 in the (y, z) plane.
    Eigen::Vector2d yz(0.0, height_guess);
    for (int it = 0; it < 100; ++it) {
        const Vec3 p(axial_position, yz[0], yz[1]);
        const auto rf = geom.rf_basis(p);
        const Vec3 g = rf.hessian * rf.gradient;
        const auto t = geom.rf_third_derivatives(p);
        Mat3 h = rf.hessian * rf.hessian;
        for (int k = 0; k < 3; ++k) h += rf.gradient[k] * t[k];
        const Eigen::Vector2d g2(g[1], g[2]);
        const Eigen::Matrix2d h2 = h.block<2, 2>(1, 1);
        Eigen::Vector2d step = -h2.ldlt().solve(g2);
        const double max_step = 0.25 * yz[1];
        if (step.norm() > max_step) step *= max_step / step.norm();
        yz += step;
        if (yz[1] <= 0.0) {
            throw NoWellError("RF null search left the half space");
        }
        if (step.norm() < 1e-14) {
            return {axial_position, yz[0], yz[1]};
        }
    }
    throw NoWellError("RF null search did not converge");
}

TrapPotential::TrapPotential(const ElectrodeGeometry& geom, const IonSpecies& ion, std::vector<double> volts,
                             double dc_scale, Vec3 stray_field)
    : geom_(geom), ion_(ion), volts_(std::move(volts)), dc_scale_(dc_scale), stray_(stray_field) {
    if (volts_.size() != geom_.channel_count()) {
        throw InputError("voltage vector has " + std::to_string(volts_.size()) + " entries for " +
                         std::to_string(geom_.channel_count()) + " channels");
    }
}

double TrapPotential::energy(const Vec3& r) const {
    return ion_.charge_c * (dc_scale_ * geom_.dc_value(volts_, r) - stray_.dot(r)) + pseudopotential(geom_, ion_, r);
}

Vec3 TrapPotential::gradient(const Vec3& r) const {
    const auto rf = geom_.rf_basis(r);
    return ion_.charge_c * (dc_scale_ * geom_.dc_gradient(volts_, r) - stray_) + pseudo_gradient(geom_, ion_, rf);
}

Mat3 TrapPotential::hessian(const Vec3& r) const {
    const auto rf = geom_.rf_basis(r);
    return ion_.charge_c * dc_scale_ * geom_.dc_potential(volts_, r).hessian + pseudo_hessian(geom_, ion_, rf, r);
}

namespace {

struct Barrier {
    double height = 0.0;
    double distance = 0.0;
};

Barrier scan_barrier(const PotentialEnergy& u, const Vec3& r0, double e0, double direction,
                     const WellSearchOptions& opt) {
    const Vec3 step = Vec3::UnitX() * (direction * opt.depth_scan_step);
    double prev = e0;
    Vec3 p = r0;
    double s = 0.0;
    while (s < opt.depth_scan_range) {
        p += step;
        s += opt.depth_scan_step;
        const double e = u.energy(p);
        if (e < prev) {
            return {prev - e0, s - opt.depth_scan_step};
        }
        prev = e;
    }
    return {prev - e0, s};
}

}  // namespace

WellProperties find_well(const PotentialEnergy& u, double mass_kg, const Vec3& seed, const WellSearchOptions& opt) {
    constexpr double kLength = 1e-6;  // characteristic length for the gradient tolerance
    constexpr double kMaxStep = 5e-6;
    Vec3 r = seed;
    double e = u.energy(r);
    WellProperties w;
    bool converged = false;
    for (int it = 0; it < opt.max_iterations; ++it) {
        w.iterations = it + 1;
        const Vec3 g = u.gradient(r);
        const Mat3 h = u.hessian(r);
        const double hn = h.norm();
        if (g.norm() <= 1e-9 * hn * kLength) {
            converged = true;
            break;
        }
        // Saddle-free Newton: flip negative curvature so every step descends.
        Eigen::SelfAdjointEigenSolver<Mat3> es(h);
        Vec3 step = Vec3::Zero();
        for (int i = 0; i < 3; ++i) {
            const double lam = std::max(std::abs(es.eigenvalues()[i]), 1e-12 * hn);
            const Vec3 v = es.eigenvectors().col(i);
            step -= (v.dot(g) / lam) * v;
        }
        if (step.norm() > kMaxStep) step *= kMaxStep / step.norm();
        double trial_e = u.energy(r + step);
        int halvings = 0;
        while (trial_e > e && halvings < 40) {
            step *= 0.5;
            trial_e = u.energy(r + step);
            ++halvings;
        }
        r += step;
        e = trial_e;
        if (step.norm() < 1e-16) {
            converged = u.gradient(r).norm() <= 1e-6 * hn * kLength;
            break;
        }
    }
    if (!converged) {
        throw NoWellError("no potential minimum found near the seed point");
    }

    const Mat3 h = u.hessian(r);
    Eigen::SelfAdjointEigenSolver<Mat3> es(h);
    const Vec3 lam = es.eigenvalues();
    if (lam.minCoeff() <= 0.0) {
        std::ostringstream msg;
        msg << "stationary point is a saddle (curvatures " << lam.transpose() << " J/m^2)";
        throw SaddleError(msg.str());
    }
    int axial = 0;
    for (int i = 1; i < 3; ++i) {
        if (std::abs(es.eigenvectors()(0, i)) > std::abs(es.eigenvectors()(0, axial))) axial = i;
    }
    std::array<int, 2> radial{};
    int n = 0;
    for (int i = 0; i < 3; ++i) {
        if (i != axial) radial[n++] = i;  // eigenvalues are ascending
    }
    w.position = r;
    w.energy_at_minimum = e;
    w.axial_frequency = std::sqrt(lam[axial] / mass_kg);
    w.radial_frequency_1 = std::sqrt(lam[radial[0]] / mass_kg);
    w.radial_frequency_2 = std::sqrt(lam[radial[1]] / mass_kg);
    Vec3 ax = es.eigenvectors().col(axial);
    if (ax.x() < 0) ax = -ax;
    w.principal_axes.col(0) = ax;
    w.principal_axes.col(1) = es.eigenvectors().col(radial[0]);
    w.principal_axes.col(2) = es.eigenvectors().col(radial[1]);

    if (opt.compute_depth) {
        const auto plus = scan_barrier(u, r, e, +1.0, opt);
        const auto minus = scan_barrier(u, r, e, -1.0, opt);
        const auto& lower = plus.height < minus.height ? plus : minus;
        w.depth_ev = lower.height / constants::elementary_charge;
        w.barrier_distance = lower.distance;
    }
    return w;
}

WellProperties find_well(const ElectrodeGeometry& geom, const IonSpecies& ion, std::span<const double> volts,
                         const Vec3& seed, const WellSearchOptions& options) {
    check_height(seed);
    const TrapPotential u(geom, ion, std::vector<double>(volts.begin(), volts.end()));
    return find_well(u, ion.mass_kg, seed, options);
}

namespace {

// Minimum-norm x with A x = b and |x_i| <= bound, by an active-set iteration.
Eigen::VectorXd bounded_min_norm(const Eigen::MatrixXd& a, const Eigen::VectorXd& b, double bound,
                                 const std::vector<ChannelId>& channels) {
    const auto n = a.cols();
    std::vector<int> fixed(static_cast<std::size_t>(n), 0);  // -1 lower, +1 upper
    auto pinned = [&] {
        std::vector<std::string> out;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (fixed[i] != 0) out.push_back(channels[i].label());
        }
        return out;
    };

    Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    for (int iter = 0; iter < 4 * n + 10; ++iter) {
        std::vector<Eigen::Index> free;
        Eigen::VectorXd rhs = b;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (fixed[i] == 0) {
                free.push_back(i);
            } else {
                rhs -= a.col(i) * (fixed[i] * bound);
            }
        }
        Eigen::MatrixXd af(a.rows(), static_cast<Eigen::Index>(free.size()));
        for (std::size_t k = 0; k < free.size(); ++k) af.col(static_cast<Eigen::Index>(k)) = a.col(free[k]);

        Eigen::VectorXd xf = Eigen::VectorXd::Zero(af.cols());
        if (af.cols() > 0) {
            Eigen::CompleteOrthogonalDecomposition<Eigen::MatrixXd> cod(af);
            xf = cod.solve(rhs);
        }
        const double resid = (af * xf - rhs).norm();
        if (resid > 1e-9 * b.norm()) {
            throw InfeasibleVoltages("constraints cannot be met within +-" + std::to_string(bound) + " V", pinned());
        }

        for (Eigen::Index i = 0; i < n; ++i) x[i] = fixed[i] * bound;
        for (std::size_t k = 0; k < free.size(); ++k) x[free[k]] = xf[static_cast<Eigen::Index>(k)];

        // Most violated bound among free variables.
        Eigen::Index worst = -1;
        double worst_excess = 0.0;
        for (auto i : free) {
            const double excess = std::abs(x[i]) - bound;
            if (excess > 1e-12 * bound && excess > worst_excess) {
                worst = i;
                worst_excess = excess;
            }
        }
        if (worst >= 0) {
            fixed[worst] = x[worst] > 0 ? 1 : -1;
            continue;
        }

        // Multipliers: free part is af^T lambda.
        if (af.cols() == 0) return x;
        const Eigen::VectorXd lambda = af.transpose().completeOrthogonalDecomposition().solve(xf);
        const Eigen::VectorXd unconstrained = a.transpose() * lambda;
        Eigen::Index release = -1;
        double release_margin = 0.0;
        for (Eigen::Index i = 0; i < n; ++i) {
            if (fixed[i] == 0) continue;
            // The bound is active only if the unconstrained optimum lies beyond it.
            const double margin = fixed[i] * bound - unconstrained[i];
            const double violation = fixed[i] > 0 ? margin : -margin;
            if (violation > 1e-12 * bound && violation > release_margin) {
                release = i;
                release_margin = violation;
            }
        }
        if (release < 0) return x;
        fixed[release] = 0;
    }
    throw InfeasibleVoltages("bounded voltage solve did not settle", pinned());
}

}  // namespace

VoltageSolution solve_voltages(const ElectrodeGeometry& geom, const IonSpecies& ion, const WellTarget& target,
                               double bound) {
    ion.validate();
    if (!(target.axial_frequency > 0.0)) {
        throw InputError("target axial frequency must be positive");
    }
    if (!(bound > 0.0)) {
        throw InputError("voltage bound must be positive");
    }
    if (target.axial_position < geom.axial_min() || target.axial_position > geom.axial_max()) {
        throw InputError("target position lies outside the electrode array");
    }
    const Vec3 r0 = rf_null(geom, target.axial_position);
    const auto n = static_cast<Eigen::Index>(geom.channel_count());
    const int rows = 2 + (target.null_transverse_field ? 2 : 0) + (target.null_axial_cubic ? 1 : 0);
    Eigen::MatrixXd a = Eigen::MatrixXd::Zero(rows, n);
    Eigen::VectorXd b = Eigen::VectorXd::Zero(rows);
    const double h = 1e-3 * r0.z();
    for (const auto& ch : target.active_channels) {
        if (geom.channel_slot(ch) < 0) throw InputError("active channel " + ch.label() + " is not in the geometry");
    }
    for (Eigen::Index j = 0; j < n; ++j) {
        if (!target.active_channels.empty() &&
            std::find(target.active_channels.begin(), target.active_channels.end(),
                      geom.channels()[static_cast<std::size_t>(j)]) == target.active_channels.end()) {
            continue;  // zero column: the minimum-norm solution leaves it at 0 V
        }
        const auto s = geom.channel_basis(static_cast<std::size_t>(j), r0);
        int row = 0;
        a(row++, j) = s.gradient.x();
        if (target.null_transverse_field) {
            a(row++, j) = s.gradient.y();
            a(row++, j) = s.gradient.z();
        }
        a(row++, j) = s.hessian(0, 0);
        if (target.null_axial_cubic) {
            const auto hess = [&](const Vec3& p) { return geom.channel_basis(static_cast<std::size_t>(j), p).hessian; };
            a(row++, j) = fd_derivative_of_hessian(hess, r0, 0, h)(0, 0);
        }
    }
    // Curvature row: Q d2(V phi)/dx2 = m w^2.
    b[target.null_transverse_field ? 3 : 1] =
        ion.mass_kg * target.axial_frequency * target.axial_frequency / ion.charge_c;

    // Rows have very different units; normalise them before the solve.
    for (int row = 0; row < rows; ++row) {
        const double norm = a.row(row).norm();
        if (norm > 0.0) {
            a.row(row) /= norm;
            b[row] /= norm;
        }
    }

    VoltageSolution sol;
    const Eigen::VectorXd x = bounded_min_norm(a, b, bound, geom.channels());
    sol.volts.assign(x.data(), x.data() + x.size());
    sol.target_point = r0;
    for (Eigen::Index i = 0; i < n; ++i) {
        if (std::abs(x[i]) >= bound * (1.0 - 1e-9)) sol.at_bounds.push_back(geom.channels()[i]);
    }

    sol.well = find_well(geom, ion, sol.volts, r0);
    const double df = std::abs(sol.well.axial_frequency - target.axial_frequency) / target.axial_frequency;
    const double dx = (sol.well.position - r0).norm();
    if (df > 0.01 || dx > 1e-6) {
        std::ostringstream msg;
        msg << "solved voltages give a well at " << sol.well.position.transpose() << " m with axial frequency "
            << sol.well.axial_frequency / constants::two_pi << " Hz";
        throw NoWellError(msg.str());
    }
    return sol;
}

std::vector<ChannelId> local_channels(const ElectrodeGeometry& geom, double axial_position, double half_width) {
    const double max_length = 0.25 * (geom.axial_max() - geom.axial_min());
    std::vector<ChannelId> out;
    for (const auto& ch : geom.channels()) {
        bool local = true;
        double nearest = std::numeric_limits<double>::infinity();
        for (const auto& e : geom.electrodes()) {
            if (e.role != ElectrodeRole::Dc || !(e.channel == ch)) continue;
            if (e.rect.x2 - e.rect.x1 > max_length) local = false;
            nearest = std::min(nearest, std::abs(0.5 * (e.rect.x1 + e.rect.x2) - axial_position));
        }
        if (local && nearest < half_width) out.push_back(ch);
    }
    return out;
}

StrayFieldResult stray_field_measurement(const ElectrodeGeometry& geom, const IonSpecies& ion,
                                         std::span<const double> volts, double hidden_axial_field,
                                         std::span<const double> scales, const Vec3& seed) {
    std::vector<double> distinct(scales.begin(), scales.end());
    for (double s : distinct) {
        if (!(s > 0.0)) throw InputError("well scale factors must be positive");
    }
    std::sort(distinct.begin(), distinct.end());
    distinct.erase(std::unique(distinct.begin(), distinct.end()), distinct.end());
    if (distinct.size() < 2) {
        throw InputError("stray-field fit needs at least two distinct scale factors");
    }

    WellSearchOptions quick;
    quick.compute_depth = false;
    const std::vector<double> v(volts.begin(), volts.end());
    const auto base = find_well(TrapPotential(geom, ion, v), ion.mass_kg, seed, quick);

    StrayFieldResult out;
    out.axial_frequency = base.axial_frequency;
    out.scales.assign(scales.begin(), scales.end());
    for (double s : out.scales) {
        const TrapPotential u(geom, ion, v, s, Vec3(hidden_axial_field, 0.0, 0.0));
        out.positions.push_back(find_well(u, ion.mass_kg, base.position, quick).position.x());
    }
    const auto fit = fit_stray_field(out.scales, out.positions, base.axial_frequency, ion);
    out.estimated_field = fit.field;
    out.shift_per_unit_scale = fit.shift_per_unit_scale;
    out.unperturbed_position = fit.position_at_infinite_scale;
    return out;
}

}  // namespace ivdac
