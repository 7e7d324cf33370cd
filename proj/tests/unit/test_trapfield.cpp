#include <doctest.h>

#include <random>

#include "ivdac/analysis.hpp"
#include "ivdac/constants.hpp"
#include "ivdac/errors.hpp"
#include "ivdac/trapfield.hpp"
#include "oracles.hpp"

using namespace ivdac;

namespace {

const ElectrodeGeometry& geometry() {
    static const auto g = bundled_geometry();
    return g;
}

Rect random_rect(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> c(-200e-6, 200e-6), s(10e-6, 400e-6);
    const double x = c(rng), y = c(rng);
    return {x, x + s(rng), y, y + s(rng)};
}

Vec3 random_point(std::mt19937_64& rng) {
    std::uniform_real_distribution<double> c(-400e-6, 400e-6), z(5e-6, 300e-6);
    return {c(rng), c(rng), z(rng)};
}

// Slot of channel `ch` in the geometry's voltage vector.
std::size_t slot(ChannelId ch) { return static_cast<std::size_t>(geometry().channel_slot(ch)); }

// Channel driving segment `k` (0..41) on the given side of the bundled trap.
ChannelId segment_channel(bool top, int k) {
    const std::string name = (top ? "top_" : "bottom_") + std::to_string(k);
    for (const auto& e : geometry().electrodes()) {
        if (e.name == name) return e.channel;
    }
    FAIL("no electrode " << name);
    return {};
}

class Harmonic final : public PotentialEnergy {
public:
    Harmonic(Mat3 k, Vec3 centre) : k_(k), c_(centre) {}
    double energy(const Vec3& r) const override { return 0.5 * (r - c_).dot(k_ * (r - c_)); }
    Vec3 gradient(const Vec3& r) const override { return k_ * (r - c_); }
    Mat3 hessian(const Vec3&) const override { return k_; }

private:
    Mat3 k_;
    Vec3 c_;
};

}  // namespace

TEST_CASE("basis potential satisfies Laplace and is bounded") {
    std::mt19937_64 rng(1);
    for (int i = 0; i < 1000; ++i) {
        const auto r = random_rect(rng);
        const auto p = random_point(rng);
        const auto s = basis_potential(r, p);
        Eigen::SelfAdjointEigenSolver<Mat3> es(s.hessian);
        const double scale = es.eigenvalues().cwiseAbs().maxCoeff();
        REQUIRE(std::abs(s.hessian.trace()) < 1e-6 * scale);
        REQUIRE(s.value >= 0.0);
        REQUIRE(s.value <= 1.0);
        REQUIRE(s.value == doctest::Approx(basis_value(r, p)).epsilon(1e-14));
    }
}

TEST_CASE("analytic derivatives match finite differences") {
    std::mt19937_64 rng(2);
    for (int i = 0; i < 1000; ++i) {
        const auto r = random_rect(rng);
        const auto p = random_point(rng);
        const auto s = basis_potential(r, p);
        const double h = 1e-4 * p.z();
        auto f = [&](const Vec3& q) { return basis_value(r, q); };
        const Vec3 fd = oracle::fd_gradient(f, p, h);
        REQUIRE((s.gradient - fd).norm() <= 1e-6 * s.gradient.norm() + 1e-12 / p.z());
        REQUIRE((basis_gradient(r, p) - s.gradient).norm() <= 1e-12 * s.gradient.norm() + 1e-18);
        // Hessian from differences of the closed-form gradient.
        Mat3 hfd;
        for (int k = 0; k < 3; ++k) {
            Vec3 e = Vec3::Zero();
            e[k] = h;
            hfd.col(k) = (basis_gradient(r, p + e) - basis_gradient(r, p - e)) / (2 * h);
        }
        REQUIRE((s.hessian - hfd).norm() <= 1e-6 * s.hessian.norm() + 1e-9 / (p.z() * p.z()));
    }
}

TEST_CASE("basis potential against quadrature") {
    const Rect square{-50e-6, 50e-6, -50e-6, 50e-6};
    for (double h : {20e-6, 60e-6, 150e-6}) {
        const double ref = oracle::rect_potential_quadrature(square.x1, square.x2, square.y1, square.y2, 0, 0, h);
        CHECK(basis_value(square, {0.0, 0.0, h}) == doctest::Approx(ref).epsilon(1e-4));
    }
    const double off = oracle::rect_potential_quadrature(square.x1, square.x2, square.y1, square.y2, 80e-6, -30e-6,
                                                         40e-6);
    CHECK(basis_value(square, {80e-6, -30e-6, 40e-6}) == doctest::Approx(off).epsilon(1e-4));
}

TEST_CASE("basis limits") {
    const Rect small{-1e-6, 1e-6, -1e-6, 1e-6};
    CHECK(basis_value(small, {0.0, 0.0, 1e-2}) < 1e-7);
    const Rect huge{-1.0, 1.0, -1.0, 1.0};
    CHECK(basis_value(huge, {0.0, 0.0, 60e-6}) == doctest::Approx(1.0).epsilon(1e-4));
    CHECK_THROWS_AS(basis_potential(small, {0.0, 0.0, 0.0}), InputError);
    CHECK_THROWS_AS(basis_potential(small, {0.0, 0.0, -1e-6}), InputError);
    CHECK_THROWS_AS((Rect{1.0, 0.0, 0.0, 1.0}.validate()), InputError);
}

TEST_CASE("superposition of channel potentials") {
    const auto& g = geometry();
    std::mt19937_64 rng(3);
    std::uniform_real_distribution<double> v(-10, 10);
    for (int trial = 0; trial < 20; ++trial) {
        std::vector<double> volts(g.channel_count());
        for (auto& x : volts) x = v(rng);
        const Vec3 p = random_point(rng);
        double sum = 0.0;
        Vec3 grad = Vec3::Zero();
        for (std::size_t i = 0; i < volts.size(); ++i) {
            const auto b = g.channel_basis(i, p);
            sum += volts[i] * b.value;
            grad += volts[i] * b.gradient;
        }
        CHECK(g.dc_value(volts, p) == doctest::Approx(sum).epsilon(1e-12));
        CHECK((g.dc_gradient(volts, p) - grad).norm() <= 1e-12 * grad.norm());
        CHECK(g.dc_potential(volts, p).value == doctest::Approx(sum).epsilon(1e-12));
    }
}

TEST_CASE("bundled geometry layout") {
    const auto& g = geometry();
    CHECK(g.channel_count() == 78);
    CHECK(g.channel_slot(ChannelId(Chip::B, 26)) == -1);
    CHECK(g.channel_slot(ChannelId(Chip::B, 39)) == -1);
    CHECK(g.channel_slot(ChannelId(Chip::B, 37)) >= 0);
    const Vec3 null = rf_null(g, 0.0);
    CHECK(null.z() == doctest::Approx(60e-6).epsilon(1e-6));
    CHECK(std::abs(null.y()) < 1e-12);
    CHECK(pseudopotential(g, g.ion(), null) < 1e-30);
    CHECK(mathieu_q_principal(g, g.ion(), null) == doctest::Approx(0.3).epsilon(1e-9));
    CHECK(mathieu_stable(0.3));
    CHECK_FALSE(mathieu_stable(0.95));
}

TEST_CASE("RF scaling laws") {
    auto g = geometry();
    const Vec3 p = rf_null(g, 0.0) + Vec3(0, 5e-6, 3e-6);
    const double psi = pseudopotential(g, g.ion(), p);
    const double q = mathieu_q(g, g.ion(), p, Vec3::UnitZ());
    auto rf = g.rf();
    rf.v_peak *= 2;
    g.set_rf(rf);
    CHECK(pseudopotential(g, g.ion(), p) == doctest::Approx(4 * psi).epsilon(1e-12));
    CHECK(mathieu_q(g, g.ion(), p, Vec3::UnitZ()) == doctest::Approx(2 * q).epsilon(1e-12));
    rf.v_peak = 0;
    g.set_rf(rf);
    CHECK(mathieu_q(g, g.ion(), p, Vec3::UnitZ()) == 0.0);
}

TEST_CASE("trap potential derivatives") {
    const auto& g = geometry();
    std::mt19937_64 rng(4);
    std::uniform_real_distribution<double> v(-3, 3);
    std::vector<double> volts(g.channel_count());
    for (auto& x : volts) x = v(rng);
    const TrapPotential u(g, g.ion(), volts, 1.3, Vec3(100.0, -20.0, 5.0));
    for (int i = 0; i < 20; ++i) {
        const Vec3 p = rf_null(g, 0.0) + Vec3(std::uniform_real_distribution<double>(-50e-6, 50e-6)(rng),
                                               std::uniform_real_distribution<double>(-10e-6, 10e-6)(rng),
                                               std::uniform_real_distribution<double>(-10e-6, 10e-6)(rng));
        auto e = [&](const Vec3& q) { return u.energy(q); };
        const Vec3 fd = oracle::fd_gradient(e, p, 1e-8);
        CHECK((u.gradient(p) - fd).norm() <= 1e-5 * fd.norm());
        const Mat3 hfd = oracle::fd_hessian(e, p, 1e-7);
        CHECK((u.hessian(p) - hfd).norm() <= 1e-4 * hfd.norm());
    }
}

TEST_CASE("find_well on a synthetic harmonic potential") {
    const double m = IonSpecies::calcium40().mass_kg;
    Mat3 k = Mat3::Zero();
    const double wx = constants::two_pi * 1.5e6, wy = constants::two_pi * 5.5e6, wz = constants::two_pi * 6.4e6;
    k.diagonal() << m * wx * wx, m * wy * wy, m * wz * wz;
    const Harmonic h(k, Vec3(1e-5, 2e-6, 60e-6));
    WellSearchOptions opt;
    opt.compute_depth = false;
    const auto w = find_well(h, m, Vec3(0, 0, 50e-6), opt);
    CHECK(w.axial_frequency == doctest::Approx(wx).epsilon(1e-9));
    CHECK(w.radial_frequency_1 == doctest::Approx(wy).epsilon(1e-9));
    CHECK(w.radial_frequency_2 == doctest::Approx(wz).epsilon(1e-9));
    CHECK((w.position - Vec3(1e-5, 2e-6, 60e-6)).norm() < 1e-15);

    Mat3 saddle = k;
    saddle(0, 0) = -saddle(0, 0);
    CHECK_THROWS_AS(find_well(Harmonic(saddle, Vec3(0, 0, 60e-6)), m, Vec3(0, 0, 60e-6), opt), PhysicsError);
}

TEST_CASE("solve_voltages at the heating-rate position") {
    const auto& g = geometry();
    WellTarget t;
    t.axial_position = -390e-6;
    t.axial_frequency = constants::two_pi * 1.5e6;
    const auto sol = solve_voltages(g, g.ion(), t);
    CHECK(sol.well.axial_frequency / constants::two_pi == doctest::Approx(1.5e6).epsilon(0.01));
    CHECK(sol.well.position.x() == doctest::Approx(-390e-6).epsilon(1e-3));
    for (double v : sol.volts) CHECK(std::abs(v) <= 10.0);
    CHECK(sol.well.depth_ev > 0.0);
    const double mean_radial = 0.5 * (sol.well.radial_frequency_1 + sol.well.radial_frequency_2);
    CHECK(mean_radial / constants::two_pi == doctest::Approx(0.3 * 53.17e6 / (2 * std::sqrt(2.0))).epsilon(0.15));

    // Scaling all DC voltages by s scales the axial frequency by sqrt(s).
    for (double s : {0.5, 2.0}) {
        std::vector<double> v = sol.volts;
        for (auto& x : v) x *= s;
        WellSearchOptions opt;
        opt.compute_depth = false;
        const auto w = find_well(g, g.ion(), v, sol.well.position, opt);
        CHECK(w.axial_frequency == doctest::Approx(std::sqrt(s) * sol.well.axial_frequency).epsilon(1e-3));
    }
}

TEST_CASE("solution is mirror symmetric at the trap centre") {
    const auto& g = geometry();
    WellTarget t;
    t.axial_position = 0.0;
    t.axial_frequency = constants::two_pi * 1.5e6;
    const auto sol = solve_voltages(g, g.ion(), t);
    double vmax = 0.0;
    for (double v : sol.volts) vmax = std::max(vmax, std::abs(v));
    for (int k = 2; k <= 39; ++k) {
        for (bool top : {true, false}) {
            const double v = sol.volts[slot(segment_channel(top, k))];
            CHECK(v == doctest::Approx(sol.volts[slot(segment_channel(top, 41 - k))]).epsilon(1e-6).scale(vmax));
            CHECK(v == doctest::Approx(sol.volts[slot(segment_channel(!top, k))]).epsilon(1e-6).scale(vmax));
        }
    }
    CHECK(sol.volts[slot(ChannelId(Chip::B, 37))] ==
          doctest::Approx(sol.volts[slot(ChannelId(Chip::B, 38))]).epsilon(1e-6).scale(vmax));
}

TEST_CASE("minimum-norm solution is linear in the curvature") {
    const auto& g = geometry();
    WellTarget t;
    t.axial_position = 250e-6;
    t.axial_frequency = constants::two_pi * 1.0e6;
    const auto a = solve_voltages(g, g.ion(), t);
    t.axial_frequency *= std::sqrt(2.0);
    const auto b = solve_voltages(g, g.ion(), t);
    REQUIRE(a.at_bounds.empty());
    REQUIRE(b.at_bounds.empty());
    for (std::size_t i = 0; i < a.volts.size(); ++i) {
        CHECK(b.volts[i] == doctest::Approx(2 * a.volts[i]).epsilon(1e-9).scale(1e-9));
    }
}

TEST_CASE("restricted and infeasible solves") {
    const auto& g = geometry();
    WellTarget t;
    t.axial_position = 0.0;
    t.axial_frequency = constants::two_pi * 1.5e6;
    t.active_channels = local_channels(g, 0.0, 350e-6);
    CHECK(t.active_channels.size() == 16);
    const auto sol = solve_voltages(g, g.ion(), t);
    std::size_t nonzero = 0;
    for (double v : sol.volts) nonzero += v != 0.0 ? 1 : 0;
    CHECK(nonzero <= 16);
    CHECK(sol.well.axial_frequency / constants::two_pi == doctest::Approx(1.5e6).epsilon(0.01));

    t.axial_frequency = constants::two_pi * 15e6;
    try {
        solve_voltages(g, g.ion(), t);
        FAIL("expected infeasible voltages");
    } catch (const InfeasibleVoltages& e) {
        CHECK_FALSE(e.binding_channels.empty());
    }
    t.axial_position = 1.0;
    CHECK_THROWS_AS(solve_voltages(g, g.ion(), t), InputError);
}

TEST_CASE("stray field measurement") {
    const auto& g = geometry();
    const auto ion = g.ion();
    WellTarget t;
    t.axial_position = -390e-6;
    t.axial_frequency = constants::two_pi * 1.5e6;
    const auto sol = solve_voltages(g, ion, t);
    const std::vector<double> scales{0.5, 0.75, 1.0, 1.5, 2.0};
    const auto zero = stray_field_measurement(g, ion, sol.volts, 0.0, scales, sol.well.position);
    CHECK(std::abs(zero.estimated_field) < 1.0);
    const auto m = stray_field_measurement(g, ion, sol.volts, 500.0, scales, sol.well.position);
    CHECK(m.estimated_field == doctest::Approx(500.0).epsilon(0.01));
    const double w = sol.well.axial_frequency;
    CHECK(field_shift(500.0, constants::two_pi * 1.5e6, ion) == doctest::Approx(13.58e-6).epsilon(1e-3));
    CHECK(m.shift_per_unit_scale == doctest::Approx(field_shift(500.0, w, ion)).epsilon(0.01));
    const auto d = stray_field_measurement(g, ion, sol.volts, 1000.0, scales, sol.well.position);
    for (std::size_t i = 0; i < scales.size(); ++i) {
        CHECK(d.positions[i] - zero.positions[i] ==
              doctest::Approx(2 * (m.positions[i] - zero.positions[i])).epsilon(1e-2));
    }
    const std::vector<double> same{1.0, 1.0};
    CHECK_THROWS_AS(stray_field_measurement(g, ion, sol.volts, 500.0, same, sol.well.position), InputError);
}
