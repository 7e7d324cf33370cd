#include <doctest.h>

#include <random>

#include "ivdac/analysis.hpp"
#include "ivdac/constants.hpp"
#include "ivdac/errors.hpp"

using namespace ivdac;

namespace {

// Sideband strengths for a given occupation, with I_blue = 1.
SidebandPoint point_for(double delay_ms, double nbar, double sigma_nbar = 0.0) {
    const double x = nbar / (1.0 + nbar);
    return {delay_ms, x, 1.0, sigma_nbar * (1.0 - x) * (1.0 - x), 0.0};
}

}  // namespace

TEST_CASE("occupation from sideband ratio") {
    CHECK(nbar_from_sidebands(0.0, 1.0).nbar == 0.0);
    CHECK(nbar_from_sidebands(0.5, 1.0).nbar == 1.0);
    CHECK(nbar_from_sidebands(1.0, 6.0).nbar == doctest::Approx(0.2).epsilon(1e-15));
    CHECK_THROWS_AS(nbar_from_sidebands(1.0, 1.0), UnphysicalRatio);
    CHECK_THROWS_AS(nbar_from_sidebands(2.0, 1.0), UnphysicalRatio);
    CHECK_THROWS_AS(nbar_from_sidebands(0.1, 0.0), UnphysicalRatio);
    double prev = -1.0;
    for (double x = 0.0; x < 0.999; x += 0.01) {
        const double n = nbar_from_sidebands(x, 1.0).nbar;
        CHECK(n > prev);
        prev = n;
    }
    // Propagated uncertainty: dn/dx = 1 / (1 - x)^2.
    const auto o = nbar_from_sidebands(0.25, 1.0, 0.01, 0.0);
    CHECK(o.sigma == doctest::Approx(0.01 / (0.75 * 0.75)).epsilon(1e-12));
}

TEST_CASE("noiseless heating data is fitted exactly") {
    std::vector<SidebandPoint> pts;
    for (double t : {0.0, 1.0, 2.0, 3.0}) pts.push_back(point_for(t, 0.2 + 0.8 * t));
    const auto fit = heating_rate_fit(pts);
    CHECK(fit.slope == doctest::Approx(0.8).epsilon(1e-12));
    CHECK(fit.intercept == doctest::Approx(0.2).epsilon(1e-12));
    CHECK(fit.slope_stderr < 1e-10);

    std::vector<SidebandPoint> shifted;
    for (double t : {0.0, 1.0, 2.0, 3.0}) shifted.push_back(point_for(t, 1.7 + 0.8 * t));
    CHECK(heating_rate_fit(shifted).slope == doctest::Approx(0.8).epsilon(1e-12));

    std::vector<SidebandPoint> flat(3, point_for(1.0, 0.5));
    CHECK_THROWS_AS(heating_rate_fit(flat), DegenerateFit);
    CHECK_THROWS_AS(heating_rate_fit(std::vector<SidebandPoint>(pts.begin(), pts.begin() + 2)), DegenerateFit);
}

TEST_CASE("fit algebra on collinear data") {
    const std::vector<double> x{0.1, 0.4, 2.0, 3.3, 7.0};
    std::vector<double> y;
    for (double v : x) y.push_back(-4.0 + 2.5 * v);
    const auto f = ols_fit(x, y);
    CHECK(std::abs(f.slope - 2.5) < 1e-12 * 2.5);
    CHECK(std::abs(f.intercept + 4.0) < 1e-12 * 4.0);
    const std::vector<double> sig{1, 2, 1, 3, 1};
    const auto w = weighted_fit(x, y, sig);
    CHECK(std::abs(w.slope - 2.5) < 1e-12 * 2.5);
    CHECK(w.chi2 < 1e-20);
    CHECK(f.at(1.0) == doctest::Approx(-1.5));
}

TEST_CASE("stderr calibration over synthetic datasets") {
    // 68% of 1000 noisy fits should contain the true slope within 1 stderr.
    std::mt19937_64 rng(17);
    std::normal_distribution<double> noise(0.0, 0.15);
    int heating_hits = 0;
    int drift_hits = 0;
    const int trials = 1000;
    for (int i = 0; i < trials; ++i) {
        std::vector<SidebandPoint> pts;
        for (double t : {0.0, 1.0, 2.0, 3.0}) pts.push_back(point_for(t, 1.0 + 0.8 * t + noise(rng), 0.15));
        const auto f = heating_rate_fit(pts);
        heating_hits += std::abs(f.slope - 0.8) <= f.slope_stderr ? 1 : 0;

        std::normal_distribution<double> hz(0.0, 50.0);
        std::vector<DriftSample> s;
        for (int k = 0; k < 20; ++k) {
            const double t = 2.0 * k / 19.0;
            s.push_back({t, 1.5e6 + 100.0 * t + hz(rng), false});
        }
        const auto d = drift_fit(s);
        drift_hits += std::abs(d.slope - 100.0) <= d.slope_stderr ? 1 : 0;
    }
    CHECK(heating_hits / double(trials) == doctest::Approx(0.68).epsilon(0.05 / 0.68));
    CHECK(drift_hits / double(trials) == doctest::Approx(0.68).epsilon(0.05 / 0.68));
}

TEST_CASE("drift fit") {
    std::vector<DriftSample> flat;
    for (int k = 0; k < 5; ++k) flat.push_back({0.5 * k, 1.5e6, k == 2});
    CHECK(std::abs(drift_fit(flat).slope) < 1e-9);

    std::vector<DriftSample> s, moved;
    std::mt19937_64 rng(5);
    std::normal_distribution<double> hz(0.0, 50.0);
    for (int k = 0; k < 20; ++k) {
        const double t = 0.1 * k;
        const double f = 1.5e6 + 100.0 * t + hz(rng);
        s.push_back({t, f, false});
        moved.push_back({t + 13.0, f, false});
    }
    const auto a = drift_fit(s);
    const auto b = drift_fit(moved);
    CHECK(a.slope == doctest::Approx(b.slope).epsilon(1e-9));
    CHECK(std::abs(a.slope - 100.0) < 2.0 * a.slope_stderr + 1e-9);
    std::vector<DriftSample> same(3, DriftSample{1.0, 2.0, false});
    CHECK_THROWS_AS(drift_fit(same), DegenerateFit);
}

TEST_CASE("sideband spectrum") {
    WellProperties w;
    w.axial_frequency = constants::two_pi * 1.5e6;
    w.radial_frequency_1 = constants::two_pi * 5.5e6;
    w.radial_frequency_2 = constants::two_pi * 6.4e6;
    auto has = [](const std::vector<SpectrumLine>& lines, double offset) {
        return std::any_of(lines.begin(), lines.end(),
                           [&](const SpectrumLine& l) { return std::abs(l.offset_hz - offset) < 1e-3; });
    };
    const auto first = sideband_spectrum(w, 0.0, 1);
    CHECK(first.size() == 7);
    for (double f : {0.0, 1.5e6, -1.5e6, 5.5e6, -5.5e6, 6.4e6, -6.4e6}) CHECK(has(first, f));
    const auto second = sideband_spectrum(w, 400e12, 2);
    for (double f : {3.0e6, -3.0e6, 7.0e6, -7.0e6, 4.0e6, 0.9e6}) CHECK(has(second, f));
    CHECK(std::is_sorted(second.begin(), second.end(),
                         [](const auto& a, const auto& b) { return a.offset_hz < b.offset_hz; }));
    const auto carrier = std::find_if(second.begin(), second.end(), [](const auto& l) { return l.label == "carrier"; });
    REQUIRE(carrier != second.end());
    CHECK(carrier->frequency_hz == 400e12);
    CHECK_THROWS_AS(sideband_spectrum(w, 0.0, 3), InputError);
}

TEST_CASE("stray field fit") {
    const auto ion = IonSpecies::calcium40();
    const double w = constants::two_pi * 1.5e6;
    const double shift = field_shift(500.0, w, ion);
    CHECK(shift == doctest::Approx(13.58e-6).epsilon(1e-3));
    const std::vector<double> s{0.5, 1.0, 2.0};
    std::vector<double> x;
    for (double v : s) x.push_back(-390e-6 + shift / v);
    const auto f = fit_stray_field(s, x, w, ion);
    CHECK(f.field == doctest::Approx(500.0).epsilon(1e-9));
    CHECK(f.position_at_infinite_scale == doctest::Approx(-390e-6).epsilon(1e-9));
}

TEST_CASE("stray field fit absorbs anharmonic shifts") {
    const auto ion = IonSpecies::calcium40();
    const double w = constants::two_pi * 1.5e6;
    const double d = field_shift(500.0, w, ion);
    const std::vector<double> s{0.5, 0.75, 1.0, 1.5, 2.0};
    std::vector<double> x;
    for (double v : s) x.push_back(-390e-6 + d / v - 0.05 * d * d / 1e-5 / (v * v) + 2e-3 * d / (v * v * v));
    const auto f = fit_stray_field(s, x, w, ion);
    CHECK(f.degree == 3);
    CHECK(f.field == doctest::Approx(500.0).epsilon(1e-8));
    CHECK(f.residual_rms < 1e-15);
    const std::vector<double> one{1.0, 1.0};
    CHECK_THROWS_AS(fit_stray_field(one, std::vector<double>{0.0, 0.0}, w, ion), DegenerateFit);
}
