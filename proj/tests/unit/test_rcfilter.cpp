#include <doctest.h>

#include <random>

#include "ivdac/constants.hpp"
#include "ivdac/errors.hpp"
#include "ivdac/rcfilter.hpp"
#include "oracles.hpp"

using namespace ivdac;

TEST_CASE("corner frequencies") {
    const auto nominal = FilterParams::nominal();
    const auto buffered = FilterParams::nominal_buffered();
    const auto fit = FilterParams::paper_fit();
    CHECK(f3db(nominal) == doctest::Approx(7.74e3).epsilon(1e-3));
    CHECK(f3db(buffered) == doctest::Approx(13.31e3).epsilon(1e-3));
    CHECK(f3db(fit) == doctest::Approx(12.1e3).epsilon(1e-9));
    CHECK(fit.tau() == doctest::Approx(4.925e-6).epsilon(1e-3));
    CHECK_FALSE(fit.buffered);

    for (const auto& p : {nominal, buffered, fit}) {
        const double f = f3db(p);
        CHECK(std::abs(std::abs(transfer(f, p)) - 1.0 / std::sqrt(2.0)) < 1e-9);
        // Independent corner from the ladder's chain matrix.
        const double root = oracle::bisect(
            [&](double x) { return oracle::rc_gain(p.r_per_stage, p.c_per_stage, p.buffered, x) - M_SQRT1_2; },
            1.0, 1e6);
        CHECK(f == doctest::Approx(root).epsilon(1e-9));
    }
}

TEST_CASE("transfer function limits") {
    for (const auto& p : {FilterParams::nominal(), FilterParams::nominal_buffered()}) {
        CHECK(transfer(0.0, p) == std::complex<double>(1.0, 0.0));
        const double g1 = std::abs(transfer(1e8, p));
        const double g2 = std::abs(transfer(1e9, p));
        CHECK(20 * std::log10(g2 / g1) == doctest::Approx(-40.0).epsilon(1e-3));
        for (double f : {10.0, 1e3, 3e4, 1e6}) {
            CHECK(std::abs(transfer(f, p)) ==
                  doctest::Approx(oracle::rc_gain(p.r_per_stage, p.c_per_stage, p.buffered, f)).epsilon(1e-12));
        }
    }
}

TEST_CASE("step response against an ODE oracle") {
    for (const auto& p : {FilterParams::nominal(), FilterParams::nominal_buffered(), FilterParams::paper_fit()}) {
        CHECK(step_response(p, 0.0) == 0.0);
        CHECK(step_response(p, -1.0) == 0.0);
        CHECK(step_response(p, 1.0) == doctest::Approx(1.0).epsilon(1e-12));
        for (double k : {0.3, 1.0, 5.0, 12.0, 20.0}) {
            const double t = k * p.tau();
            const double ref = oracle::rc_ladder(
                p.r_per_stage, p.c_per_stage, p.buffered, [](double) { return 1.0; }, 0.0, 0.0, t, 20000);
            CHECK(std::abs(step_response(p, t) - ref) <= 1e-6 * std::abs(ref));
        }
    }
}

TEST_CASE("filtered timeline") {
    const auto p = FilterParams::nominal();
    SUBCASE("constant input stays constant") {
        FilteredTimeline f(p, {0.0, 1e-5, 2e-5}, {{2.5, 2.5, 2.5}});
        for (double t : {-1e-6, 0.0, 5e-6, 1e-4}) CHECK(f.value(0, t) == doctest::Approx(2.5).epsilon(1e-14));
    }
    SUBCASE("single step follows the step response") {
        FilteredTimeline f(p, {0.0, 3e-6}, {{0.0, 1.0}});
        for (double t : {3e-6, 4e-6, 1e-5, 5e-5}) {
            CHECK(f.value(0, t) == doctest::Approx(step_response(p, t - 3e-6)).epsilon(1e-12));
        }
    }
    SUBCASE("linearity") {
        std::mt19937_64 rng(2);
        std::uniform_real_distribution<double> v(-10, 10);
        std::vector<double> times;
        std::vector<double> a, b, mix;
        for (int k = 0; k < 30; ++k) {
            times.push_back(k * 2.6e-5);
            a.push_back(v(rng));
            b.push_back(v(rng));
            mix.push_back(0.7 * a.back() - 1.9 * b.back());
        }
        FilteredTimeline f(p, times, {a, b, mix});
        for (int i = 0; i < 200; ++i) {
            const double t = std::uniform_real_distribution<double>(-1e-5, 1e-3)(rng);
            const double expect = 0.7 * f.value(0, t) - 1.9 * f.value(1, t);
            CHECK(std::abs(f.value(2, t) - expect) <= 1e-9 * std::max(1.0, std::abs(expect)));
            std::vector<double> all(3);
            f.values(t, all);
            CHECK(all[0] == f.value(0, t));
        }
    }
    SUBCASE("staircase ramp lags by about 3 tau") {
        // 38 kHz staircase with slope 1 V per step, against the ODE oracle.
        const double period = 1.0 / 38e3;
        std::vector<double> times, levels;
        for (int k = 0; k < 60; ++k) {
            times.push_back(k * period);
            levels.push_back(static_cast<double>(k));
        }
        FilteredTimeline f(p, times, {levels});
        auto staircase = [&](double t) { return std::floor(t / period); };
        const double t = 40.5 * period;
        const double ref = oracle::rc_ladder(p.r_per_stage, p.c_per_stage, false, staircase, 0.0, 0.0, t, 200000);
        CHECK(f.value(0, t) == doctest::Approx(ref).epsilon(1e-6));
        // Delay relative to the continuous ramp through the step midpoints.
        const double lag = (t / period - 0.5 - f.value(0, t)) * period;
        CHECK(lag == doctest::Approx(3.0 * p.tau()).epsilon(0.02));
    }
}

TEST_CASE("filter configuration names") {
    CHECK(FilterParams::by_name("nominal").tau() == FilterParams::nominal().tau());
    CHECK(FilterParams::by_name("unbuffered").tau() == FilterParams::nominal().tau());
    CHECK(FilterParams::by_name("buffered").buffered);
    CHECK(FilterParams::by_name("paper-fit").tau() == FilterParams::paper_fit().tau());
    CHECK_THROWS_AS(FilterParams::by_name("other"), InputError);
    CHECK_THROWS_AS((FilterParams{-1.0, 1e-9, false}.validate()), InputError);
}
