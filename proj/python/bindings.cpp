#include <pybind11/complex.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include <optional>
#include <sstream>

#include "ivdac/analysis.hpp"
#include "ivdac/cli.hpp"
#include "ivdac/constants.hpp"
#include "ivdac/errors.hpp"
#include "ivdac/io.hpp"
#include "ivdac/iondyn.hpp"
#include "ivdac/rcfilter.hpp"
#include "ivdac/serialbus.hpp"
#include "ivdac/trapfield.hpp"
#include "ivdac/wavecomp.hpp"

namespace py = pybind11;
using namespace ivdac;

namespace {

const ElectrodeGeometry& geometry() {
    static const auto g = bundled_geometry();
    return g;
}

py::tuple vec(const Vec3& v) { return py::make_tuple(v.x(), v.y(), v.z()); }

py::dict fit_dict(const LinearFit& f) {
    py::dict d;
    d["slope"] = f.slope;
    d["slope_stderr"] = f.slope_stderr;
    d["intercept"] = f.intercept;
    d["intercept_stderr"] = f.intercept_stderr;
    d["points"] = f.points;
    d["chi2"] = f.chi2;
    return d;
}

py::dict well_dict(const WellProperties& w) {
    py::dict d;
    d["position"] = vec(w.position);
    d["axial_hz"] = w.axial_frequency / constants::two_pi;
    d["radial_hz"] = py::make_tuple(w.radial_frequency_1 / constants::two_pi, w.radial_frequency_2 / constants::two_pi);
    d["depth_ev"] = w.depth_ev;
    return d;
}

WellTarget target(double position, double fz_hz) {
    WellTarget t;
    t.axial_position = position;
    t.axial_frequency = constants::two_pi * fz_hz;
    return t;
}

}  // namespace

PYBIND11_MODULE(_ivdac, m) {
    m.doc() = "Serial DAC control stack and surface-trap simulator";
    m.attr("__version__") = IVDAC_VERSION;

    py::register_exception<InputError>(m, "InputError", PyExc_ValueError);
    py::register_exception<InfeasibleRate>(m, "InfeasibleRate", PyExc_RuntimeError);
    py::register_exception<InfeasibleVoltages>(m, "InfeasibleVoltages", PyExc_RuntimeError);

    m.def("code_to_voltage", [](int code) { return code_to_voltage(static_cast<DacCode>(code)); }, py::arg("code"));
    m.def(
        "voltage_to_code",
        [](double v) {
            const auto q = voltage_to_code(v);
            return py::make_tuple(static_cast<int>(q.code), q.clamped);
        },
        py::arg("volts"), "Nearest code and whether the request was clamped.");

    m.def(
        "upload_time", [](std::size_t pairs, const std::string& timing) { return upload_time(pairs, TimingModel::by_name(timing)); },
        py::arg("pairs"), py::arg("timing") = "paper-nominal");

    m.def(
        "compile_timeline",
        [](const std::string& timeline_json, const std::string& timing, double rate_hz) {
            const auto wf = compile(io::timeline_from_json(io::Json::parse(timeline_json)));
            const auto rate = max_update_rate(wf, TimingModel::by_name(timing));
            if (rate_hz > rate.max_rate_hz) {
                throw InfeasibleRate("requested rate exceeds " + std::to_string(rate.max_rate_hz) + " Hz",
                                     rate.bottleneck_packet);
            }
            py::dict d;
            d["waveform_json"] = io::waveform_to_json(wf).dump();
            d["max_rate_hz"] = rate.max_rate_hz;
            std::vector<std::size_t> pairs;
            for (const auto& p : wf.packets) pairs.push_back(p.pair_count());
            d["pairs"] = pairs;
            return d;
        },
        py::arg("timeline_json"), py::arg("timing") = "paper-nominal", py::arg("rate_hz") = 0.0,
        "Compile a timeline (JSON text) into minimal-delta packets.");

    m.def("ber_upper_bound", &ber_upper_bound, py::arg("bits"), py::arg("errors"), py::arg("confidence") = 0.95);
    m.def(
        "ber_test",
        [](std::uint64_t bits, std::uint64_t traces, double flip, double confidence, std::uint64_t seed) {
            BerTestConfig c;
            c.total_bits = bits;
            c.traces = traces;
            c.flip_probability = flip;
            c.confidence = confidence;
            c.seed = seed;
            const auto r = run_ber_test(c);
            py::dict d;
            d["bits"] = r.bits_total;
            d["bit_errors"] = r.bit_errors;
            d["update_errors"] = r.update_errors;
            d["upper_bound"] = r.upper_bound;
            return d;
        },
        py::arg("bits") = 15'000'000, py::arg("traces") = 10'000, py::arg("flip_prob") = 0.0,
        py::arg("confidence") = 0.95, py::arg("seed") = 1);

    m.def("f3db", [](const std::string& name) { return f3db(FilterParams::by_name(name)); }, py::arg("filter") = "paper-fit");
    m.def(
        "transfer", [](double f, const std::string& name) { return transfer(f, FilterParams::by_name(name)); },
        py::arg("f_hz"), py::arg("filter") = "paper-fit");
    m.def(
        "step_response", [](double t, const std::string& name) { return step_response(FilterParams::by_name(name), t); },
        py::arg("t_s"), py::arg("filter") = "paper-fit");

    m.def(
        "solve_well",
        [](double position, double fz_hz) {
            const auto sol = solve_voltages(geometry(), geometry().ion(), target(position, fz_hz));
            py::dict d = well_dict(sol.well);
            d["volts"] = sol.volts;
            std::vector<std::string> labels;
            for (const auto& c : geometry().channels()) labels.push_back(c.label());
            d["channels"] = labels;
            return d;
        },
        py::arg("position") = -390e-6, py::arg("fz_hz") = 1.5e6, "Minimum-norm voltages for a harmonic well.");

    m.def(
        "mathieu_q", [](double x) { return mathieu_q_principal(geometry(), geometry().ion(), rf_null(geometry(), x)); },
        py::arg("position") = 0.0);

    m.def(
        "normal_modes",
        [](int n, double fz_hz) {
            std::vector<double> hz;
            for (double w : normal_modes(n, IonSpecies::calcium40(), constants::two_pi * fz_hz)) {
                hz.push_back(w / constants::two_pi);
            }
            return hz;
        },
        py::arg("n"), py::arg("fz_hz") = 1.5e6, "Axial mode frequencies of an n-ion crystal, Hz.");

    m.def(
        "nbar", [](double red, double blue) { return nbar_from_sidebands(red, blue).nbar; }, py::arg("i_red"),
        py::arg("i_blue"));
    m.def(
        "heating_rate_fit",
        [](const std::vector<double>& delays, const std::vector<double>& red, const std::vector<double>& blue,
           std::optional<std::vector<double>> sigma_red) {
            if (red.size() != delays.size() || blue.size() != delays.size() ||
                (sigma_red && sigma_red->size() != delays.size())) {
                throw InputError("column lengths differ");
            }
            std::vector<SidebandPoint> pts;
            for (std::size_t i = 0; i < delays.size(); ++i) {
                pts.push_back({delays[i], red[i], blue[i], sigma_red ? (*sigma_red)[i] : 0.0, 0.0});
            }
            return fit_dict(heating_rate_fit(pts));
        },
        py::arg("delay_ms"), py::arg("i_red"), py::arg("i_blue"), py::arg("sigma_red") = py::none());
    m.def(
        "drift_fit",
        [](const std::vector<double>& hours, const std::vector<double>& hz) {
            if (hours.size() != hz.size()) throw InputError("column lengths differ");
            std::vector<DriftSample> s;
            for (std::size_t i = 0; i < hours.size(); ++i) s.push_back({hours[i], hz[i], false});
            return fit_dict(drift_fit(s));
        },
        py::arg("time_hr"), py::arg("freq_hz"));

    m.def(
        "stray_field_measurement",
        [](double field, std::vector<double> scales, double position, double fz_hz) {
            const auto& g = geometry();
            const auto sol = solve_voltages(g, g.ion(), target(position, fz_hz));
            const auto r = stray_field_measurement(g, g.ion(), sol.volts, field, scales, sol.well.position);
            py::dict d;
            d["estimated_field"] = r.estimated_field;
            d["shift_per_unit_scale"] = r.shift_per_unit_scale;
            d["positions"] = r.positions;
            return d;
        },
        py::arg("field"), py::arg("scales") = std::vector<double>{0.5, 0.75, 1.0, 1.5, 2.0},
        py::arg("position") = -390e-6, py::arg("fz_hz") = 1.5e6);

    m.def(
        "transport",
        [](double start, double end, double speed, double rate_hz, double fz_hz, double hold_s,
           const std::string& mode, bool convergence_check) {
            if (mode != "secular" && mode != "full_rf") throw InputError("mode must be secular or full_rf");
            const auto& g = geometry();
            TransportRequest rq;
            rq.start = start;
            rq.end = end;
            rq.speed = speed;
            rq.update_rate_hz = rate_hz;
            rq.axial_frequency = constants::two_pi * fz_hz;
            rq.hold_s = hold_s;
            py::gil_scoped_release release;
            const auto plan = plan_transport(g, g.ion(), rq);
            IonState s;
            s.position = find_well(g, g.ion(), plan.voltages[0], rf_null(g, start)).position;
            IntegrateOptions opt;
            opt.convergence_check = convergence_check;
            const auto r = integrate(plan, FilterParams::paper_fit(), g.ion(), s,
                                     mode == "secular" ? DynamicsMode::Secular : DynamicsMode::FullRf, opt);
            py::gil_scoped_acquire acquire;
            py::dict d;
            d["survived"] = r.survived;
            d["converged"] = r.converged;
            d["quanta_gained"] = r.quanta_gained;
            d["final_position"] = vec(r.final_well.position);
            std::vector<std::tuple<double, double, double, double, double>> traj;
            for (const auto& p : r.trajectory) traj.emplace_back(p.t, p.position.x(), p.position.y(), p.position.z(), p.quanta);
            d["trajectory"] = traj;
            return d;
        },
        py::arg("start") = -500e-6, py::arg("end") = 500e-6, py::arg("speed") = 1.0, py::arg("rate_hz") = 38e3,
        py::arg("fz_hz") = 1.5e6, py::arg("hold_s") = 100e-6, py::arg("mode") = "secular",
        py::arg("convergence_check") = true, "Plan and integrate one transport; trajectory rows are (t, x, y, z, quanta).");

    m.def(
        "run_cli",
        [](const std::vector<std::string>& args) {
            std::ostringstream out, err;
            const int rc = cli::run(args, out, err);
            return py::make_tuple(rc, out.str(), err.str());
        },
        py::arg("args"), "Run a CLI subcommand in-process; returns (exit code, stdout, stderr).");
}
