#include <doctest.h>

#include <sstream>

#include "ivdac/errors.hpp"
#include "ivdac/io.hpp"

using namespace ivdac;

TEST_CASE("timeline JSON round trip") {
    VoltageTimeline t;
    t.channels = {ChannelId(Chip::A, 0), ChannelId(Chip::B, 12)};
    t.step_period_s = 2.5e-5;
    t.steps = {{0.1, -0.2}, {1.0 / 3.0, 9.5}};
    const auto j = io::timeline_to_json(t);
    CHECK(j["channels"][1] == "B12");
    CHECK(io::timeline_from_json(io::Json::parse(j.dump())) == t);
    auto bad = j;
    bad["channels"][0] = "Z9";
    CHECK_THROWS_AS(io::timeline_from_json(bad), InputError);
    bad = j;
    bad.erase("steps");
    CHECK_THROWS_AS(io::timeline_from_json(bad), InputError);
}

TEST_CASE("waveform JSON round trip") {
    VoltageTimeline t;
    t.channels = {ChannelId(Chip::A, 5), ChannelId(Chip::B, 2)};
    t.step_period_s = 1e-4;
    t.steps = {{1.0, 2.0}, {1.5, 2.0}};
    const auto wf = compile(t);
    const auto j = io::Json::parse(io::waveform_to_json(wf).dump());
    CHECK(j["packets"][1][0][0] == "A5");
    const auto back = io::waveform_from_json(j);
    CHECK(back.packets == wf.packets);
    CHECK(back.source_hash == wf.source_hash);
    CHECK(back.channels == wf.channels);
    auto bad = j;
    bad["packets"][1][0][1] = 70000;
    CHECK_THROWS_AS(io::waveform_from_json(bad), InputError);
}

TEST_CASE("geometry JSON round trip") {
    const auto g = bundled_geometry();
    const auto j = io::geometry_to_json(g);
    const auto back = io::geometry_from_json(io::Json::parse(j.dump()));
    CHECK(back.channels() == g.channels());
    CHECK(back.electrodes().size() == g.electrodes().size());
    CHECK(back.rf().v_peak == doctest::Approx(g.rf().v_peak).epsilon(1e-15));
    CHECK(back.ion().mass_kg == doctest::Approx(g.ion().mass_kg).epsilon(1e-15));
    const Vec3 p(10e-6, 3e-6, 55e-6);
    CHECK(pseudopotential(back, back.ion(), p) == doctest::Approx(pseudopotential(g, g.ion(), p)).epsilon(1e-12));
}

TEST_CASE("CSV readers") {
    std::istringstream sb("# comment\ndelay_ms,i_red,i_blue\n0,0.1,1\n1, 0.4, 1.0\n\n2,0.5,1,0.01,0.02\n");
    const auto pts = io::read_sidebands(sb);
    REQUIRE(pts.size() == 3);
    CHECK(pts[1].i_red == 0.4);
    CHECK(pts[2].sigma_blue == 0.02);

    std::istringstream dr("time_hr,freq_hz,reload_flag\n0,1500000\n0.5,1500050,1\n");
    const auto d = io::read_drift(dr);
    REQUIRE(d.size() == 2);
    CHECK_FALSE(d[0].reload);
    CHECK(d[1].reload);

    std::istringstream bad("0,1,2\nx,1,2\n");
    CHECK_THROWS_AS(io::read_sidebands(bad), InputError);
    std::istringstream shortrow("0,1\n");
    CHECK_THROWS_AS(io::read_sidebands(shortrow), InputError);
    std::istringstream four("0,1,2,3\n");
    CHECK_THROWS_AS(io::read_sidebands(four), InputError);
    CHECK_THROWS_AS(io::read_json("/nonexistent/file.json"), InputError);
}
