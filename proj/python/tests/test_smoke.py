import json
import math

import pytest

import ivdac


def test_dac_codes():
    assert ivdac.code_to_voltage(0) == -10.0
    assert ivdac.code_to_voltage(32768) == 0.0
    assert ivdac.voltage_to_code(0.0) == (32768, False)
    assert ivdac.voltage_to_code(12.0) == (65535, True)


def test_timing_and_compile():
    assert ivdac.upload_time(8) == pytest.approx(25e-6, rel=1e-12)
    assert ivdac.upload_time(40) == pytest.approx(60e-6, rel=1e-12)
    channels = [f"A{i}" for i in range(8)] + [f"B{i}" for i in range(8)]
    steps = [[0.01 * k + i for i in range(16)] for k in range(5)]
    timeline = json.dumps({"channels": channels, "step_period_s": 1 / 38e3, "steps": steps})
    out = ivdac.compile_timeline(timeline, rate_hz=38e3)
    assert out["pairs"][1:] == [8, 8, 8, 8]
    assert out["max_rate_hz"] == pytest.approx(1 / 26e-6)
    with pytest.raises(RuntimeError):
        ivdac.compile_timeline(timeline, rate_hz=50e3)
    with pytest.raises(ValueError):
        ivdac.compile_timeline(json.dumps({"channels": ["Q1"], "step_period_s": 1e-4, "steps": [[0.0]]}))


def test_ber():
    assert ivdac.ber_upper_bound(15_000_000, 0) == pytest.approx(2.0e-7, abs=0.1e-7)
    r = ivdac.ber_test(bits=48_000, traces=10, flip_prob=1e-3, seed=3)
    assert r["bit_errors"] > 0
    assert r == ivdac.ber_test(bits=48_000, traces=10, flip_prob=1e-3, seed=3)


def test_filter():
    assert ivdac.f3db("paper-fit") == pytest.approx(12.1e3, rel=1e-9)
    assert abs(ivdac.transfer(ivdac.f3db("nominal"), "nominal")) == pytest.approx(math.sqrt(0.5))
    assert ivdac.step_response(1.0) == pytest.approx(1.0)


def test_well_and_modes():
    w = ivdac.solve_well(-390e-6, 1.5e6)
    assert w["axial_hz"] == pytest.approx(1.5e6, rel=0.05)
    assert max(abs(v) for v in w["volts"]) <= 10.0
    assert len(w["channels"]) == len(w["volts"]) == 78
    assert ivdac.mathieu_q() == pytest.approx(0.3, abs=0.05)
    modes = ivdac.normal_modes(2)
    assert modes[1] / modes[0] == pytest.approx(math.sqrt(3), rel=1e-6)


def test_fits():
    delays = [0, 1, 2, 3]
    nbar = [0.2 + 0.8 * t for t in delays]
    red = [n / (1 + n) for n in nbar]
    fit = ivdac.heating_rate_fit(delays, red, [1.0] * 4)
    assert fit["slope"] == pytest.approx(0.8, rel=1e-12)
    assert ivdac.nbar(0.5, 1.0) == 1.0
    d = ivdac.drift_fit([0, 1, 2], [1.5e6, 1.5e6 + 100, 1.5e6 + 200])
    assert d["slope"] == pytest.approx(100.0)
    s = ivdac.stray_field_measurement(500.0)
    assert s["estimated_field"] == pytest.approx(500.0, rel=0.01)


def test_transport_short():
    r = ivdac.transport(start=0.0, end=30e-6, hold_s=20e-6, convergence_check=False)
    assert r["survived"]
    assert r["quanta_gained"] < 10
    assert r["trajectory"][0][0] == 0.0
    with pytest.raises(ValueError):
        ivdac.transport(mode="quantum")


def test_cli(tmp_path):
    code, out, _ = ivdac.run_cli(["modes", "--n", "2", "--out", str(tmp_path)])
    assert code == 0
    assert "mode_1_hz" in out
    assert (tmp_path / "modes.txt").read_text().startswith("# ivdac ")
    assert ivdac.run_cli(["nope"])[0] == 1
